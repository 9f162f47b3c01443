use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use indexmap::IndexSet;

use super::path::Path;
use super::tree::{NodeId, XTree};
use super::AlgebraError;

/// A relation attribute: a path, optionally qualified by the query variable
/// that produced it. Qualifiers keep self-joins unambiguous.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Attr {
    pub var: Option<Arc<str>>,
    pub path: Path,
}

impl Attr {
    pub fn new(path: Path) -> Attr {
        Attr { var: None, path }
    }

    pub fn qualified(var: &str, path: Path) -> Attr {
        Attr { var: Some(Arc::from(var)), path }
    }

    /// Unqualified references match any attribute with the same path.
    pub fn matches(&self, other: &Attr) -> bool {
        self.path == other.path && (self.var.is_none() || self.var == other.var)
    }
}

impl From<Path> for Attr {
    fn from(p: Path) -> Attr {
        Attr::new(p)
    }
}

impl fmt::Display for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.var {
            Some(v) => write!(f, "${}:{}", v, self.path),
            None => write!(f, "{}", self.path),
        }
    }
}

impl fmt::Debug for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Add every prefix of every path, keeping first-appearance order.
pub fn prefix_close(paths: impl IntoIterator<Item = Path>) -> IndexSet<Path> {
    let mut out = IndexSet::new();
    for p in paths {
        for q in p.prefixes() {
            out.insert(q);
        }
    }
    out
}

pub fn is_prefix_closed(guide: &IndexSet<Path>) -> bool {
    guide.iter().all(|p| p.parent().is_none_or(|q| guide.contains(&q)))
}

/// Schema `R(XPath+, [Path+])`: ordered attributes plus a prefix-closed guide.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XRelationSchema {
    pub attributes: Vec<Attr>,
    pub guide: IndexSet<Path>,
}

impl XRelationSchema {
    /// The guide is prefix-closed here; attributes must fall inside it.
    pub fn new(attributes: Vec<Attr>, guide: impl IntoIterator<Item = Path>) -> Result<Self, AlgebraError> {
        let guide = prefix_close(guide);
        for a in &attributes {
            if !guide.contains(&a.path) {
                return Err(AlgebraError::Plan(format!("attribute {a} is outside the guide")));
            }
        }
        Ok(XRelationSchema { attributes, guide })
    }

    pub fn position(&self, attr: &Attr) -> Option<usize> {
        // An exact match wins over a looser unqualified one.
        self.attributes
            .iter()
            .position(|a| a == attr)
            .or_else(|| self.attributes.iter().position(|a| attr.matches(a)))
    }

    pub fn resolve(&self, attr: &Attr) -> Result<usize, AlgebraError> {
        self.position(attr).ok_or_else(|| AlgebraError::UnknownAttribute(attr.to_string()))
    }

    /// Text form `Name (a, b [g1, g2])`. Bare root steps are implied by the
    /// other guide paths and are not listed.
    pub fn display_named(&self, name: &str) -> String {
        let attrs: Vec<String> = self.attributes.iter().map(|a| a.path.to_string()).collect();
        let guide: Vec<&str> = self.guide.iter().filter(|p| p.len() > 1).map(|p| p.as_str()).collect();
        format!("{} ({} [{}])", name, attrs.join(", "), guide.join(", "))
    }
}

/// A reference to a node of a tuple's own forest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    pub tree: u32,
    pub node: NodeId,
}

impl NodeRef {
    pub fn new(tree: usize, node: NodeId) -> NodeRef {
        NodeRef { tree: tree as u32, node }
    }
}

/// A tuple of attribute bindings over a forest of trees. `refs[i]` holds the
/// nodes bound to schema attribute `i`. Immutable once emitted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XTuple {
    pub refs: Vec<Vec<NodeRef>>,
    pub forest: Vec<Arc<XTree>>,
}

impl XTuple {
    pub fn tree(&self, r: NodeRef) -> &XTree {
        &self.forest[r.tree as usize]
    }

    pub fn value(&self, r: NodeRef) -> String {
        self.tree(r).string_value(r.node)
    }

    pub fn values(&self, attr: usize) -> Vec<String> {
        self.refs[attr].iter().map(|r| self.value(*r)).collect()
    }

    pub fn first_value(&self, attr: usize) -> Option<String> {
        self.refs[attr].first().map(|r| self.value(*r))
    }

    pub fn subtree(&self, r: NodeRef) -> String {
        self.tree(r).canonical(r.node)
    }

    /// Canonical serialization of the subtrees bound to one attribute.
    pub fn canonical_binding(&self, attr: usize) -> String {
        let mut s = String::new();
        for r in &self.refs[attr] {
            self.tree(*r).write_canonical(r.node, &mut s);
        }
        s
    }

    /// Tuple identity for set semantics: every binding, in schema order.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for i in 0..self.refs.len() {
            s.push('[');
            for r in &self.refs[i] {
                s.push('(');
                self.tree(*r).write_canonical(r.node, &mut s);
                s.push(')');
            }
            s.push(']');
        }
        s
    }
}

#[derive(Default, Debug)]
struct DiagInner {
    skipped_documents: AtomicU64,
    non_numeric_comparisons: AtomicU64,
    aggregate_failures: AtomicU64,
    warnings: Mutex<Vec<String>>,
    linked: Mutex<Vec<Diagnostics>>,
}

/// Shared per-pipeline counters for recoverable data problems.
#[derive(Clone, Default, Debug)]
pub struct Diagnostics(Arc<DiagInner>);

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DiagnosticsSnapshot {
    pub skipped_documents: u64,
    pub non_numeric_comparisons: u64,
    pub aggregate_failures: u64,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn skipped_document(&self) {
        self.0.skipped_documents.fetch_add(1, Ordering::Relaxed);
    }

    pub fn non_numeric_comparison(&self) {
        self.0.non_numeric_comparisons.fetch_add(1, Ordering::Relaxed);
    }

    pub fn aggregate_failure(&self) {
        self.0.aggregate_failures.fetch_add(1, Ordering::Relaxed);
    }

    pub fn warn(&self, msg: impl Into<String>) {
        self.0.warnings.lock().unwrap().push(msg.into());
    }

    /// Include another pipeline branch's counters in this one's snapshots.
    pub fn link(&self, other: &Diagnostics) {
        if !Arc::ptr_eq(&self.0, &other.0) {
            self.0.linked.lock().unwrap().push(other.clone());
        }
    }

    pub fn snapshot(&self) -> DiagnosticsSnapshot {
        let mut s = DiagnosticsSnapshot {
            skipped_documents: self.0.skipped_documents.load(Ordering::Relaxed),
            non_numeric_comparisons: self.0.non_numeric_comparisons.load(Ordering::Relaxed),
            aggregate_failures: self.0.aggregate_failures.load(Ordering::Relaxed),
            warnings: self.0.warnings.lock().unwrap().clone(),
        };
        for l in self.0.linked.lock().unwrap().iter() {
            let o = l.snapshot();
            s.skipped_documents += o.skipped_documents;
            s.non_numeric_comparisons += o.non_numeric_comparisons;
            s.aggregate_failures += o.aggregate_failures;
            s.warnings.extend(o.warnings);
        }
        s
    }
}

pub type TupleStream = Box<dyn Iterator<Item = Result<XTuple, AlgebraError>> + Send>;

/// An ordered stream of tuples with its schema. Consumed by exactly one
/// downstream operator.
pub struct XRelation {
    pub schema: Arc<XRelationSchema>,
    /// Whether the emitted order is meaningful to downstream operators.
    pub ordered: bool,
    pub diagnostics: Diagnostics,
    pub tuples: TupleStream,
}

impl XRelation {
    pub fn new(schema: XRelationSchema, tuples: TupleStream) -> XRelation {
        XRelation { schema: Arc::new(schema), ordered: true, diagnostics: Diagnostics::new(), tuples }
    }

    pub fn from_tuples(schema: XRelationSchema, tuples: Vec<XTuple>) -> XRelation {
        XRelation::new(schema, Box::new(tuples.into_iter().map(Ok)))
    }

    pub fn empty(schema: XRelationSchema) -> XRelation {
        XRelation::from_tuples(schema, Vec::new())
    }

    pub fn with_diagnostics(mut self, diagnostics: Diagnostics) -> XRelation {
        self.diagnostics = diagnostics;
        self
    }

    /// An operator output. Debug builds validate every tuple as it passes.
    pub(crate) fn derived(diagnostics: Diagnostics, schema: Arc<XRelationSchema>, ordered: bool, tuples: TupleStream) -> XRelation {
        let tuples = if cfg!(debug_assertions) { super::validate::checked(schema.clone(), tuples) } else { tuples };
        XRelation { schema, ordered, diagnostics, tuples }
    }

    pub fn collect(self) -> Result<Vec<XTuple>, AlgebraError> {
        self.tuples.collect()
    }

    pub fn materialize(self) -> Result<Materialized, AlgebraError> {
        let XRelation { schema, ordered, diagnostics, tuples } = self;
        Ok(Materialized { schema, ordered, diagnostics, tuples: tuples.collect::<Result<_, _>>()? })
    }
}

impl fmt::Debug for XRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("XRelation").field("schema", &self.schema).field("ordered", &self.ordered).finish()
    }
}

/// A fully evaluated relation.
#[derive(Clone, Debug)]
pub struct Materialized {
    pub schema: Arc<XRelationSchema>,
    pub ordered: bool,
    pub diagnostics: Diagnostics,
    pub tuples: Vec<XTuple>,
}

impl Materialized {
    pub fn into_relation(self) -> XRelation {
        XRelation {
            schema: self.schema,
            ordered: self.ordered,
            diagnostics: self.diagnostics,
            tuples: Box::new(self.tuples.into_iter().map(Ok)),
        }
    }

    /// A fresh stream over the same tuples.
    pub fn relation(&self) -> XRelation {
        self.clone().into_relation()
    }

    pub fn canonical(&self) -> Vec<String> {
        self.tuples.iter().map(XTuple::canonical).collect()
    }

    /// Sorted canonical forms: multiset comparison.
    pub fn canonical_multiset(&self) -> Vec<String> {
        let mut v = self.canonical();
        v.sort();
        v
    }
}

/// A blocking stage: `run` is evaluated on the first pull, then its rows stream out.
pub(crate) fn deferred<F>(run: F) -> TupleStream
where
    F: FnOnce() -> Result<Vec<XTuple>, AlgebraError> + Send + 'static,
{
    let mut pending = Some(run);
    let mut rows: Option<std::vec::IntoIter<XTuple>> = None;
    Box::new(std::iter::from_fn(move || {
        if let Some(run) = pending.take() {
            match run() {
                Ok(v) => rows = Some(v.into_iter()),
                Err(e) => return Some(Err(e)),
            }
        }
        rows.as_mut()?.next().map(Ok)
    }))
}
