use std::collections::HashMap;
use std::fmt;

use super::atomize::{AtomicQuery, GlobalQuery};
use super::locate::BoundAtom;
use super::DecomposeError;
use crate::catalog::Capability;
use crate::frontend::{Cond, ForSource, Operand as CondOperand, ReconNode, ReconstructionQuery, VarPath};
use crate::xalgebra::join::JoinAlgo;
use crate::xalgebra::path::Path;
use crate::xalgebra::predicate::{Operand, Predicate};
use crate::xalgebra::reconstruct::{ReconstructTemplate, TemplateNode};
use crate::xalgebra::relation::{prefix_close, Attr};

/// The query shipped to one adapter, kept structured so the optimizer can
/// merge restrictions and projections into it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdapterQuerySpec {
    /// `(variable, collection, root steps)`.
    pub fors: Vec<(String, String, Vec<String>)>,
    pub restriction: Option<Cond>,
    /// `None` ships whole documents.
    pub returns: Option<Vec<VarPath>>,
}

impl AdapterQuerySpec {
    pub fn text(&self) -> String {
        let fors: Vec<String> = self
            .fors
            .iter()
            .map(|(v, c, root)| format!("${v} in {}", ForSource::Collection { name: c.clone(), steps: root.clone() }))
            .collect();
        let mut out = format!("for {}", fors.join(", "));
        if let Some(r) = &self.restriction {
            out.push_str(&format!(" where {r}"));
        }
        let ret: Vec<String> = match &self.returns {
            Some(paths) => paths.iter().map(|p| p.to_string()).collect(),
            None => self.fors.iter().map(|(v, _, _)| format!("${v}")).collect(),
        };
        if ret.len() == 1 && self.returns.is_none() {
            out.push_str(&format!(" return {}", ret[0]));
        } else {
            out.push_str(&format!(" return ({})", ret.join(", ")));
        }
        out
    }
}

/// An XSource leaf: one adapter query over one source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceBinding {
    /// The atomic queries answered by this adapter query; more than one
    /// after same-source fusion.
    pub atoms: Vec<AtomicQuery>,
    pub source: String,
    pub capability: Capability,
    pub cardinality: u64,
    pub spec: AdapterQuerySpec,
    pub attrs: Vec<Attr>,
    /// Guide of the documents the adapter returns.
    pub guide: Vec<Path>,
    /// Full dataguide of the bound collections.
    pub collection_guide: Vec<Path>,
}

impl SourceBinding {
    pub fn ids(&self) -> String {
        self.atoms.iter().map(|a| a.id.as_str()).collect::<Vec<_>>().join("+")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlanOp {
    Source(Box<SourceBinding>),
    /// No source provides the data.
    Empty { attrs: Vec<Attr>, guide: Vec<Path> },
    Project { attrs: Vec<Attr> },
    /// `cond` is the same condition in query syntax, for pushdown.
    Restrict { pred: Predicate, cond: Cond },
    Join { id: String, pred: Predicate, cond: Cond, algo: JoinAlgo },
    Product,
    Union,
    Nest { key: Vec<Attr> },
    Reconstruct { template: ReconstructTemplate },
    /// Tuple forests as documents: the answer of a mediator queried as an adapter.
    EmitForest { attrs: Vec<Attr> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanNode {
    pub op: PlanOp,
    pub children: Vec<PlanNode>,
}

impl PlanNode {
    pub fn leaf(op: PlanOp) -> PlanNode {
        PlanNode { op, children: Vec::new() }
    }

    pub fn unary(op: PlanOp, child: PlanNode) -> PlanNode {
        PlanNode { op, children: vec![child] }
    }

    /// Pre-order walk.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a PlanNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    pub fn sources(&self) -> Vec<&SourceBinding> {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            if let PlanOp::Source(s) = &n.op {
                out.push(s.as_ref());
            }
        });
        out
    }

    pub fn joins(&self) -> Vec<(&str, JoinAlgo)> {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            if let PlanOp::Join { id, algo, .. } = &n.op {
                out.push((id.as_str(), *algo));
            }
        });
        out
    }

    /// Attributes this subtree produces.
    pub fn attrs(&self) -> Vec<Attr> {
        match &self.op {
            PlanOp::Source(s) => s.attrs.clone(),
            PlanOp::Empty { attrs, .. } | PlanOp::Project { attrs } | PlanOp::EmitForest { attrs } => attrs.clone(),
            PlanOp::Join { .. } | PlanOp::Product => self.children.iter().flat_map(|c| c.attrs()).collect(),
            _ => self.children.first().map(|c| c.attrs()).unwrap_or_default(),
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        let pad = "  ".repeat(depth);
        let list = |attrs: &[Attr]| attrs.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ");
        match &self.op {
            PlanOp::Source(s) => {
                writeln!(f, "{pad}Source {} @{} [{}] {}", s.ids(), s.source, s.capability, s.spec.text())?
            }
            PlanOp::Empty { attrs, .. } => writeln!(f, "{pad}Empty ({})", list(attrs))?,
            PlanOp::Project { attrs } => writeln!(f, "{pad}Project ({})", list(attrs))?,
            PlanOp::Restrict { pred, .. } => writeln!(f, "{pad}Restrict {pred}")?,
            PlanOp::Join { id, pred, algo, .. } => writeln!(f, "{pad}Join {id} {} on {pred}", algo.name())?,
            PlanOp::Product => writeln!(f, "{pad}Product")?,
            PlanOp::Union => writeln!(f, "{pad}Union")?,
            PlanOp::Nest { key } => writeln!(f, "{pad}Nest by ({})", list(key))?,
            PlanOp::Reconstruct { template } => writeln!(f, "{pad}Reconstruct {template}")?,
            PlanOp::EmitForest { attrs } => writeln!(f, "{pad}EmitForest ({})", list(attrs))?,
        }
        for c in &self.children {
            c.write(f, depth + 1)?;
        }
        Ok(())
    }
}

impl fmt::Display for PlanNode {
    /// One operator per line, children indented by two spaces.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, 0)
    }
}

/// What the plan root produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Output {
    /// Constructed result documents.
    #[default]
    Documents,
    /// Pruned tuple forests when the query returns bare paths, as an adapter answers.
    Forest,
}

/// Variable to root steps.
pub(crate) type Roots = HashMap<String, Vec<String>>;

pub(crate) fn attr_of(p: &VarPath, roots: &Roots) -> Result<Attr, DecomposeError> {
    let root = roots.get(&p.var).ok_or_else(|| DecomposeError::Unsupported(format!("unbound ${}", p.var)))?;
    let steps: Vec<&str> = root.iter().chain(&p.steps).map(String::as_str).collect();
    Ok(Attr::qualified(&p.var, Path::from_steps(&steps)?))
}

pub(crate) fn to_predicate(c: &Cond, roots: &Roots) -> Result<Predicate, DecomposeError> {
    Ok(match c {
        Cond::Cmp { lhs, op, rhs } => match (lhs, rhs) {
            (CondOperand::Path(l), CondOperand::Path(r)) => {
                Predicate::Compare { lhs: attr_of(l, roots)?, op: *op, rhs: Operand::Attr(attr_of(r, roots)?) }
            }
            (CondOperand::Path(l), CondOperand::Lit(v)) => {
                Predicate::Compare { lhs: attr_of(l, roots)?, op: *op, rhs: Operand::Const(v.clone()) }
            }
            (CondOperand::Lit(v), CondOperand::Path(r)) => {
                Predicate::Compare { lhs: attr_of(r, roots)?, op: op.flip(), rhs: Operand::Const(v.clone()) }
            }
            (CondOperand::Lit(_), CondOperand::Lit(_)) => {
                return Err(DecomposeError::Unsupported(format!("comparison between two constants: {c}")))
            }
        },
        Cond::Contains { path, needle } => Predicate::Contains { attr: attr_of(path, roots)?, needle: needle.clone() },
        Cond::In { path, values } => Predicate::InSet { attr: attr_of(path, roots)?, values: values.clone() },
        Cond::And(v) => Predicate::And(v.iter().map(|c| to_predicate(c, roots)).collect::<Result<_, _>>()?),
        Cond::Or(v) => Predicate::Or(v.iter().map(|c| to_predicate(c, roots)).collect::<Result<_, _>>()?),
        Cond::Not(c) => Predicate::Not(Box::new(to_predicate(c, roots)?)),
    })
}

/// Whether some conjunct equates an attribute of each side.
pub(crate) fn is_equi(pred: &Predicate, left: &[Attr], right: &[Attr]) -> bool {
    pred.conjuncts().iter().any(|p| match p {
        Predicate::Compare { lhs, op: crate::xalgebra::predicate::CmpOp::Eq, rhs: Operand::Attr(r) } => {
            (left.contains(lhs) && right.contains(r)) || (left.contains(r) && right.contains(lhs))
        }
        _ => false,
    })
}

pub(crate) fn default_algo(pred: &Predicate, left: &[Attr], right: &[Attr]) -> JoinAlgo {
    if is_equi(pred, left, right) {
        JoinAlgo::SortMerge
    } else {
        JoinAlgo::NestedLoop
    }
}

/// Join id: the atom ids a condition touches, in atom order, joined by `_`.
pub(crate) fn join_id(cond: &Cond, atom_of: &dyn Fn(&str) -> Option<usize>) -> String {
    let mut idx: Vec<usize> = cond.vars().iter().filter_map(|v| atom_of(v)).collect();
    idx.sort_unstable();
    idx.dedup();
    idx.iter().map(|i| format!("t{}", i + 1)).collect::<Vec<_>>().join("_")
}

pub(crate) fn roots_of(bound: &[(AtomicQuery, Vec<BoundAtom>)]) -> Roots {
    bound
        .iter()
        .map(|(a, b)| (a.var.clone(), b.first().map_or_else(|| a.root.clone(), |b| b.atom.root.clone())))
        .collect()
}

fn source_leaf(b: &BoundAtom, attrs: &[Attr]) -> PlanNode {
    let a = &b.atom;
    PlanNode::leaf(PlanOp::Source(Box::new(SourceBinding {
        atoms: vec![a.clone()],
        source: b.source.clone(),
        capability: b.capability,
        cardinality: b.cardinality,
        spec: AdapterQuerySpec { fors: vec![(a.var.clone(), b.collection.clone(), a.root.clone())], restriction: None, returns: None },
        attrs: attrs.to_vec(),
        guide: b.guide.clone(),
        collection_guide: b.guide.clone(),
    })))
}

/// XSource leaves (a union when replicated) under the atom's restriction.
fn atom_leaf(atom: &AtomicQuery, bound: &[BoundAtom], roots: &Roots) -> Result<PlanNode, DecomposeError> {
    let effective = bound.first().map_or(atom, |b| &b.atom);
    let attrs: Vec<Attr> = effective.used.iter().map(|p| attr_of(p, roots)).collect::<Result<_, _>>()?;
    let mut node = if bound.len() == 1 {
        source_leaf(&bound[0], &attrs)
    } else {
        PlanNode { op: PlanOp::Union, children: bound.iter().map(|b| source_leaf(b, &attrs)).collect() }
    };
    if let Some(r) = &effective.restriction {
        node = PlanNode::unary(PlanOp::Restrict { pred: to_predicate(r, roots)?, cond: r.clone() }, node);
    }
    Ok(node)
}

fn template_nodes(nodes: &[ReconNode], roots: &Roots, keys: &dyn Fn(&str) -> Vec<Attr>) -> Result<Vec<TemplateNode>, DecomposeError> {
    nodes
        .iter()
        .map(|n| {
            Ok(match n {
                ReconNode::Element { label, children } => {
                    TemplateNode::Element { label: label.clone(), children: template_nodes(children, roots, keys)? }
                }
                ReconNode::Text(t) => TemplateNode::Text(t.clone()),
                ReconNode::Placeholder(p) => TemplateNode::Placeholder(attr_of(p, roots)?),
                ReconNode::Aggregate { fun, path } => TemplateNode::Aggregate { fun: *fun, attr: attr_of(path, roots)? },
                ReconNode::Nested { query, children } => {
                    TemplateNode::Region { key: keys(query), children: template_nodes(children, roots, keys)? }
                }
            })
        })
        .collect()
}

/// The straightforward plan: XSource leaves with restrictions above them,
/// joins in query order, nesting, and reconstruction at the root. `None`
/// when some atom has no source at all.
pub fn build_plan(
    bound: &[(AtomicQuery, Vec<BoundAtom>)],
    global: &GlobalQuery,
    recon: &ReconstructionQuery,
    output: Output,
) -> Result<Option<PlanNode>, DecomposeError> {
    if bound.is_empty() || bound.iter().any(|(_, b)| b.is_empty()) {
        return Ok(None);
    }
    let roots = roots_of(bound);
    let index: HashMap<&str, usize> = bound.iter().enumerate().map(|(i, (a, _))| (a.var.as_str(), i)).collect();
    let atom_of = |v: &str| index.get(v).copied();
    let mut leaves: Vec<Option<PlanNode>> =
        bound.iter().map(|(a, b)| atom_leaf(a, b, &roots).map(Some)).collect::<Result<_, _>>()?;

    // Join conditions grouped by the pair of atoms they connect, in query order.
    let mut groups: Vec<(Vec<usize>, Vec<Cond>)> = Vec::new();
    for c in &global.joins {
        let mut pair: Vec<usize> = c.vars().iter().filter_map(|v| atom_of(v)).collect();
        pair.sort_unstable();
        pair.dedup();
        match groups.iter_mut().find(|(p, _)| *p == pair) {
            Some((_, cs)) => cs.push(c.clone()),
            None => groups.push((pair, vec![c.clone()])),
        }
    }
    let start = groups.first().map_or(0, |(p, _)| p[0]);
    let mut tree = leaves[start].take().unwrap();
    let mut joined = vec![start];
    let mut used = vec![false; groups.len()];
    while joined.len() < bound.len() {
        let next = groups
            .iter()
            .enumerate()
            .filter(|(g, _)| !used[*g])
            .find_map(|(_, (p, _))| {
                let inside = p.iter().filter(|i| joined.contains(i)).count();
                (inside == 1 && p.len() == 2).then(|| *p.iter().find(|i| !joined.contains(i)).unwrap())
            })
            .unwrap_or_else(|| (0..bound.len()).find(|i| !joined.contains(i)).unwrap());
        let right = leaves[next].take().unwrap();
        joined.push(next);
        let mut conds = Vec::new();
        for (g, (p, cs)) in groups.iter().enumerate() {
            if !used[g] && p.iter().all(|i| joined.contains(i)) {
                used[g] = true;
                conds.extend(cs.iter().cloned());
            }
        }
        tree = match Cond::and(conds) {
            None => PlanNode { op: PlanOp::Product, children: vec![tree, right] },
            Some(cond) => {
                let pred = to_predicate(&cond, &roots)?;
                let algo = default_algo(&pred, &tree.attrs(), &right.attrs());
                let id = join_id(&cond, &atom_of);
                PlanNode { op: PlanOp::Join { id, pred, cond, algo }, children: vec![tree, right] }
            }
        };
    }

    let level_attrs = |query: &str| -> Vec<Attr> {
        bound
            .iter()
            .filter(|(a, _)| a.query == query)
            .flat_map(|(_, b)| b[0].atom.returns.iter().map(|p| attr_of(p, &roots).expect("bound var")).collect::<Vec<_>>())
            .collect()
    };
    if output == Output::Forest && recon.is_path_sequence() && !global.is_nested() {
        let attrs = recon.placeholders().into_iter().map(|p| attr_of(p, &roots)).collect::<Result<_, _>>()?;
        return Ok(Some(PlanNode::unary(PlanOp::EmitForest { attrs }, tree)));
    }
    let template = ReconstructTemplate::new(template_nodes(&recon.nodes, &roots, &level_attrs)?);
    if global.is_nested() {
        let key = level_attrs(&global.nest[0].query);
        tree = PlanNode::unary(PlanOp::Nest { key }, tree);
    }
    Ok(Some(PlanNode::unary(PlanOp::Reconstruct { template }, tree)))
}

/// Guide paths on the way to or below any of `attrs`.
pub(crate) fn guide_for(collection_guide: &[Path], attrs: &[Attr]) -> Vec<Path> {
    let kept: Vec<Path> = collection_guide
        .iter()
        .filter(|g| attrs.iter().any(|a| g.is_prefix_of(&a.path) || a.path.is_prefix_of(g)))
        .cloned()
        .collect();
    prefix_close(kept).into_iter().collect()
}
