//! XProduct and XJoin with three join algorithms.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use super::forest::product_tuple;
use super::predicate::{BoundPredicate, CmpOp, Operand, Predicate};
use super::relation::{deferred, Attr, Diagnostics, TupleStream, XRelation, XRelationSchema, XTuple};
use super::AlgebraError;
use crate::value::{SortKey, Value};

/// Distinct left keys per parameterized sub-query of a dependent join.
pub const DEPENDENT_BATCH: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum ProductMode {
    /// Left-major order; the right input is read fully first.
    #[default]
    NestedLoop,
    /// Symmetric pipelined: both inputs are read alternately, output order is not meaningful.
    Pipelined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum JoinAlgo {
    #[default]
    NestedLoop,
    SortMerge,
    Dependent,
}

impl JoinAlgo {
    pub fn name(self) -> &'static str {
        match self {
            JoinAlgo::NestedLoop => "nested-loop",
            JoinAlgo::SortMerge => "sort-merge",
            JoinAlgo::Dependent => "dependent",
        }
    }

    pub fn parse(s: &str) -> Option<JoinAlgo> {
        match s {
            "nested-loop" => Some(JoinAlgo::NestedLoop),
            "sort-merge" => Some(JoinAlgo::SortMerge),
            "dependent" => Some(JoinAlgo::Dependent),
            _ => None,
        }
    }
}

/// Attributes of `l` then `r`; guides unioned.
pub fn product_schema(l: &XRelationSchema, r: &XRelationSchema) -> XRelationSchema {
    let mut attributes = l.attributes.clone();
    attributes.extend(r.attributes.iter().cloned());
    let mut guide = l.guide.clone();
    guide.extend(r.guide.iter().cloned());
    XRelationSchema { attributes, guide }
}

fn link(l: &XRelation, r: &XRelation) -> Diagnostics {
    let d = l.diagnostics.clone();
    d.link(&r.diagnostics);
    d
}

pub fn x_product(l: XRelation, r: XRelation) -> Result<XRelation, AlgebraError> {
    x_product_with(l, r, ProductMode::NestedLoop)
}

pub fn x_product_with(l: XRelation, r: XRelation, mode: ProductMode) -> Result<XRelation, AlgebraError> {
    let schema = Arc::new(product_schema(&l.schema, &r.schema));
    let diag = link(&l, &r);
    match mode {
        ProductMode::NestedLoop => {
            let ordered = l.ordered;
            let out = nested_loop(l.tuples, r.tuples, None);
            Ok(XRelation::derived(diag, schema, ordered, out))
        }
        ProductMode::Pipelined => {
            let out = Box::new(Symmetric { left: l.tuples, right: r.tuples, seen: [Vec::new(), Vec::new()], turn: 0, done: [false, false], queue: Vec::new(), failed: false });
            Ok(XRelation::derived(diag, schema, false, out))
        }
    }
}

/// Filter applied to each candidate product tuple.
struct Filter {
    pred: BoundPredicate,
    diag: Diagnostics,
}

impl Filter {
    fn keep(&self, t: &XTuple) -> bool {
        self.pred.eval(t, &self.diag)
    }
}

fn nested_loop(left: TupleStream, right: TupleStream, filter: Option<Filter>) -> TupleStream {
    nested_loop_probe(left, right, filter, None)
}

/// Nested loop over a materialized right side. With `probe`, an equality
/// key index narrows the right rows visited per left tuple; left-major order
/// is kept either way.
fn nested_loop_probe(left: TupleStream, right: TupleStream, filter: Option<Filter>, probe: Option<(usize, usize)>) -> TupleStream {
    let mut right = Some(right);
    let mut rights: Option<Arc<Vec<XTuple>>> = None;
    let mut index: Option<Arc<HashMap<SortKey, Vec<usize>>>> = None;
    let filter = filter.map(Arc::new);
    Box::new(
        left.flat_map(move |lt| -> Box<dyn Iterator<Item = Result<XTuple, AlgebraError>> + Send> {
            if rights.is_none() {
                // Blocking on the right input, once, when the first left tuple arrives.
                match right.take().expect("right consumed once").collect::<Result<Vec<_>, _>>() {
                    Ok(v) => {
                        if let Some((_, rk)) = probe {
                            index = Some(Arc::new(key_index(&v, rk)));
                        }
                        rights = Some(Arc::new(v));
                    }
                    Err(e) => {
                        rights = Some(Arc::new(Vec::new()));
                        return Box::new(std::iter::once(Err(e)));
                    }
                }
            }
            let lt = match lt {
                Ok(t) => t,
                Err(e) => return Box::new(std::iter::once(Err(e))),
            };
            let rs = rights.clone().unwrap();
            let candidates: Vec<usize> = match (probe, &index) {
                (Some((lk, _)), Some(ix)) => candidate_rows(&lt, lk, ix),
                _ => (0..rs.len()).collect(),
            };
            let filter = filter.clone();
            Box::new(candidates.into_iter().filter_map(move |i| {
                let t = product_tuple(&lt, &rs[i]);
                match &filter {
                    Some(f) if !f.keep(&t) => None,
                    _ => Some(Ok(t)),
                }
            }))
        }),
    )
}

fn key_index(rows: &[XTuple], attr: usize) -> HashMap<SortKey, Vec<usize>> {
    let mut ix: HashMap<SortKey, Vec<usize>> = HashMap::new();
    for (i, t) in rows.iter().enumerate() {
        let mut keys: Vec<SortKey> = t.values(attr).iter().map(|v| SortKey::of(v)).collect();
        keys.dedup();
        for k in keys {
            let e = ix.entry(k).or_default();
            if e.last() != Some(&i) {
                e.push(i);
            }
        }
    }
    ix
}

fn candidate_rows(lt: &XTuple, attr: usize, ix: &HashMap<SortKey, Vec<usize>>) -> Vec<usize> {
    let mut out: Vec<usize> = lt.values(attr).iter().filter_map(|v| ix.get(&SortKey::of(v))).flatten().copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

struct Symmetric {
    left: TupleStream,
    right: TupleStream,
    seen: [Vec<XTuple>; 2],
    turn: usize,
    done: [bool; 2],
    queue: Vec<XTuple>,
    failed: bool,
}

impl Iterator for Symmetric {
    type Item = Result<XTuple, AlgebraError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(t) = self.queue.pop() {
                return Some(Ok(t));
            }
            if self.failed || (self.done[0] && self.done[1]) {
                return None;
            }
            let side = if self.done[self.turn] { 1 - self.turn } else { self.turn };
            self.turn = 1 - self.turn;
            let next = if side == 0 { self.left.next() } else { self.right.next() };
            match next {
                None => self.done[side] = true,
                Some(Err(e)) => {
                    self.failed = true;
                    return Some(Err(e));
                }
                Some(Ok(t)) => {
                    let mut out: Vec<XTuple> = self.seen[1 - side]
                        .iter()
                        .map(|o| if side == 0 { product_tuple(&t, o) } else { product_tuple(o, &t) })
                        .collect();
                    out.reverse();
                    self.queue = out;
                    self.seen[side].push(t);
                }
            }
        }
    }
}

/// The first top-level `l-attr = r-attr` conjunct, as (left position, right position).
fn equi_key(p: &Predicate, joint: &XRelationSchema, nl: usize) -> Option<(usize, usize)> {
    p.conjuncts().into_iter().find_map(|c| match c {
        Predicate::Compare { lhs, op: CmpOp::Eq, rhs: Operand::Attr(b) } => {
            let (i, j) = (joint.position(lhs)?, joint.position(b)?);
            if i < nl && j >= nl {
                Some((i, j - nl))
            } else if j < nl && i >= nl {
                Some((j, i - nl))
            } else {
                None
            }
        }
        _ => None,
    })
}

/// A key attribute whose nodes can never gain children from a merge, so its
/// values before and after the product agree.
fn leaf_only(joint: &XRelationSchema, a: &Attr) -> bool {
    !joint.guide.iter().any(|g| a.path.is_proper_prefix_of(g))
}

/// Join `l` and `r` on `p`. Every algorithm returns the multiset of
/// `x_restrict(x_product(l, r), p)`.
pub fn x_join(l: XRelation, r: XRelation, p: &Predicate, algo: JoinAlgo) -> Result<XRelation, AlgebraError> {
    let joint = product_schema(&l.schema, &r.schema);
    let nl = l.schema.attributes.len();
    let bound = p.bind(&joint)?;
    let key = equi_key(p, &joint, nl);
    if algo == JoinAlgo::SortMerge && key.is_none() {
        return Err(AlgebraError::Plan(format!("sort-merge join needs an equality between both inputs: {p}")));
    }
    let diag = link(&l, &r);
    let indexable =
        key.filter(|(lk, rk)| leaf_only(&joint, &l.schema.attributes[*lk]) && leaf_only(&joint, &r.schema.attributes[*rk]));
    let filter = Filter { pred: bound, diag: diag.clone() };
    let schema = Arc::new(joint);
    match algo {
        JoinAlgo::NestedLoop => {
            let ordered = l.ordered;
            let out = nested_loop_probe(l.tuples, r.tuples, Some(filter), indexable);
            Ok(XRelation::derived(diag, schema, ordered, out))
        }
        JoinAlgo::SortMerge => {
            let (lk, rk) = key.unwrap();
            let out: TupleStream = match indexable {
                Some(_) => sort_merge(l.tuples, r.tuples, lk, rk, filter),
                None => {
                    // Interior keys can change value when trees merge; join
                    // exhaustively and order by the merged key instead.
                    diag.warn(format!("sort-merge on interior key {}: evaluated by nested loop", l.schema.attributes[lk]));
                    let joined = nested_loop(l.tuples, r.tuples, Some(filter));
                    sorted_by(joined, lk)
                }
            };
            Ok(XRelation::derived(diag, schema, true, out))
        }
        JoinAlgo::Dependent => {
            let (_, rk) = key.ok_or_else(|| AlgebraError::Plan(format!("dependent join needs an equality between both inputs: {p}")))?;
            let key_attr = r.schema.attributes[rk].clone();
            let source = MaterializedSource::new(r)?.with_key(key_attr);
            x_join_dependent(l.with_diagnostics(diag), Box::new(source), p, DEPENDENT_BATCH)
        }
    }
}

fn sorted_by(stream: TupleStream, attr: usize) -> TupleStream {
    deferred(move || {
        let mut rows: Vec<XTuple> = stream.collect::<Result<_, _>>()?;
        rows.sort_by_cached_key(|t| t.first_value(attr).map(|v| SortKey::of(&v)));
        Ok(rows)
    })
}

fn sort_merge(left: TupleStream, right: TupleStream, lk: usize, rk: usize, filter: Filter) -> TupleStream {
    deferred(move || {
        let ls: Vec<XTuple> = left.collect::<Result<_, _>>()?;
        let rs: Vec<XTuple> = right.collect::<Result<_, _>>()?;
        let entries = |rows: &[XTuple], attr: usize| {
            let mut v: Vec<(SortKey, usize)> =
                rows.iter().enumerate().flat_map(|(i, t)| t.values(attr).into_iter().map(move |s| (SortKey::of(&s), i))).collect();
            v.sort();
            v.dedup();
            v
        };
        let (le, re) = (entries(&ls, lk), entries(&rs, rk));
        let mut seen: HashSet<(usize, usize)> = HashSet::new();
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < le.len() && j < re.len() {
            match le[i].0.cmp(&re[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    let k = &le[i].0;
                    let i_end = i + le[i..].iter().take_while(|e| &e.0 == k).count();
                    let j_end = j + re[j..].iter().take_while(|e| &e.0 == k).count();
                    for (_, a) in &le[i..i_end] {
                        for (_, b) in &re[j..j_end] {
                            if seen.insert((*a, *b)) {
                                let t = product_tuple(&ls[*a], &rs[*b]);
                                if filter.keep(&t) {
                                    out.push(t);
                                }
                            }
                        }
                    }
                    i = i_end;
                    j = j_end;
                }
            }
        }
        Ok(out)
    })
}

/// The inner side of a dependent join: re-executable with a batch of key values.
pub trait RebindableSource: Send {
    fn schema(&self) -> Arc<XRelationSchema>;
    /// The attribute the key batch is matched against.
    fn key_attr(&self) -> &Attr;
    /// Tuples whose key attribute equals one of `keys`, as one call.
    fn fetch(&mut self, keys: &[Value]) -> Result<XRelation, AlgebraError>;
    /// Number of `fetch` calls made so far.
    fn calls(&self) -> usize;
}

/// A rebindable source over an already evaluated relation. The key attribute
/// is picked by the join predicate.
pub struct MaterializedSource {
    schema: Arc<XRelationSchema>,
    rows: Vec<XTuple>,
    key: Option<Attr>,
    calls: usize,
}

impl MaterializedSource {
    pub fn new(rel: XRelation) -> Result<Self, AlgebraError> {
        let m = rel.materialize()?;
        Ok(MaterializedSource { schema: m.schema, rows: m.tuples, key: None, calls: 0 })
    }

    pub fn with_key(mut self, key: Attr) -> Self {
        self.key = Some(key);
        self
    }
}

impl RebindableSource for MaterializedSource {
    fn schema(&self) -> Arc<XRelationSchema> {
        self.schema.clone()
    }

    fn key_attr(&self) -> &Attr {
        self.key.as_ref().expect("key attribute set before fetch")
    }

    fn fetch(&mut self, keys: &[Value]) -> Result<XRelation, AlgebraError> {
        self.calls += 1;
        let pos = self.schema.resolve(self.key_attr())?;
        let wanted: HashSet<SortKey> = keys.iter().map(|k| SortKey::of(&k.text())).collect();
        let rows = self.rows.iter().filter(|t| t.values(pos).iter().any(|v| wanted.contains(&SortKey::of(v)))).cloned().collect();
        Ok(XRelation::from_tuples((*self.schema).clone(), rows))
    }

    fn calls(&self) -> usize {
        self.calls
    }
}

/// Dependent join: read `l` in batches, query `source` once per batch of at
/// most `batch` distinct key values, and join each batch in left order.
pub fn x_join_dependent(
    l: XRelation,
    source: Box<dyn RebindableSource>,
    p: &Predicate,
    batch: usize,
) -> Result<XRelation, AlgebraError> {
    let rschema = source.schema();
    let joint = product_schema(&l.schema, &rschema);
    let nl = l.schema.attributes.len();
    let bound = p.bind(&joint)?;
    let (lk, rk) = equi_key(p, &joint, nl)
        .ok_or_else(|| AlgebraError::Plan(format!("dependent join needs an equality between both inputs: {p}")))?;
    if !leaf_only(&joint, &l.schema.attributes[lk]) || !leaf_only(&joint, &rschema.attributes[rk]) {
        return Err(AlgebraError::Plan(format!("dependent join key {} must be a leaf path", l.schema.attributes[lk])));
    }
    if rschema.resolve(source.key_attr())? != rk {
        return Err(AlgebraError::Plan(format!("dependent source is keyed on {}, predicate on {}", source.key_attr(), rschema.attributes[rk])));
    }
    let diag = l.diagnostics.clone();
    let ordered = l.ordered;
    let filter = Filter { pred: bound, diag: diag.clone() };
    let out = Box::new(Dependent { left: l.tuples, source, lk, batch: batch.max(1), filter, queue: Default::default(), held: None, done: false });
    Ok(XRelation::derived(diag, Arc::new(joint), ordered, out))
}

struct Dependent {
    left: TupleStream,
    source: Box<dyn RebindableSource>,
    lk: usize,
    batch: usize,
    filter: Filter,
    queue: std::collections::VecDeque<Result<XTuple, AlgebraError>>,
    held: Option<XTuple>,
    done: bool,
}

impl Dependent {
    /// Read left tuples until the next one would push the batch past its
    /// key budget, then issue one sub-query for the batch.
    fn fill(&mut self) {
        let mut rows = Vec::new();
        let mut keys: Vec<String> = Vec::new();
        let mut distinct: HashSet<SortKey> = HashSet::new();
        loop {
            let next = self.held.take().map(Ok).or_else(|| self.left.next());
            match next {
                None => {
                    self.done = true;
                    break;
                }
                Some(Err(e)) => {
                    self.done = true;
                    self.queue.push_back(Err(e));
                    break;
                }
                Some(Ok(t)) => {
                    let fresh: Vec<String> = t.values(self.lk).into_iter().filter(|v| !distinct.contains(&SortKey::of(v))).collect();
                    if !rows.is_empty() && distinct.len() + fresh.len() > self.batch {
                        self.held = Some(t);
                        break;
                    }
                    for v in fresh {
                        if distinct.insert(SortKey::of(&v)) {
                            keys.push(v);
                        }
                    }
                    rows.push(t);
                    if distinct.len() >= self.batch {
                        break;
                    }
                }
            }
        }
        if keys.is_empty() {
            return;
        }
        let vals: Vec<Value> = keys.iter().map(|k| Value::infer(k)).collect();
        let fetched = match self.source.fetch(&vals).and_then(|r| r.collect()) {
            Ok(v) => v,
            Err(e) => {
                self.queue.push_back(Err(e));
                self.done = true;
                return;
            }
        };
        for lt in &rows {
            for rt in &fetched {
                let t = product_tuple(lt, rt);
                if self.filter.keep(&t) {
                    self.queue.push_back(Ok(t));
                }
            }
        }
    }
}

impl Iterator for Dependent {
    type Item = Result<XTuple, AlgebraError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(t) = self.queue.pop_front() {
                return Some(t);
            }
            if self.done {
                return None;
            }
            self.fill();
        }
    }
}
