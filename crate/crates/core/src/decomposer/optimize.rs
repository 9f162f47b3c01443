//! Heuristic rewrites: restriction pushdown, early projection, greedy join
//! ordering by declared cardinality, same-source fusion, semi-join to
//! dependent join, and user hints.

use std::collections::HashSet;

use super::plan::{default_algo, guide_for, AdapterQuerySpec, PlanNode, PlanOp, SourceBinding};
use crate::frontend::{Cond, Hint, VarPath};
use crate::xalgebra::join::{JoinAlgo, DEPENDENT_BATCH};
use crate::xalgebra::predicate::{Operand, Predicate};
use crate::xalgebra::relation::Attr;

#[derive(Clone, Debug)]
pub struct OptimizeOptions {
    /// Largest left input turned into a dependent join, in declared tuples.
    pub dependent_limit: u64,
    pub fuse_same_source: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { dependent_limit: DEPENDENT_BATCH as u64, fuse_same_source: true }
    }
}

/// Rewrite `plan`; warnings report hints that name no join.
pub fn optimize(plan: &PlanNode, hints: &[Hint], opts: &OptimizeOptions) -> (PlanNode, Vec<String>) {
    let mut used = HashSet::new();
    let out = rewrite(plan, hints, opts, &mut used);
    let warnings = hints
        .iter()
        .filter(|h| !used.contains(&h.join))
        .map(|h| format!("hint names unknown join {}; ignored", h.join))
        .collect();
    (out, warnings)
}

fn rewrite(node: &PlanNode, hints: &[Hint], opts: &OptimizeOptions, used: &mut HashSet<String>) -> PlanNode {
    match &node.op {
        PlanOp::Join { .. } | PlanOp::Product => join_region(node, hints, opts, used),
        PlanOp::Restrict { .. } | PlanOp::Union | PlanOp::Source(_) | PlanOp::Project { .. } if is_leaf_group(node) => {
            leaf_group(node)
        }
        _ => PlanNode { op: node.op.clone(), children: node.children.iter().map(|c| rewrite(c, hints, opts, used)).collect() },
    }
}

/// A Restrict/Union/Project stack over sources only.
fn is_leaf_group(node: &PlanNode) -> bool {
    match &node.op {
        PlanOp::Source(_) => true,
        PlanOp::Restrict { .. } | PlanOp::Union | PlanOp::Project { .. } => node.children.iter().all(is_leaf_group),
        _ => false,
    }
}

fn collect_sources(node: &PlanNode, out: &mut Vec<SourceBinding>, restrictions: &mut Vec<(Predicate, Cond)>) {
    match &node.op {
        PlanOp::Source(s) => out.push((**s).clone()),
        PlanOp::Restrict { pred, cond } => {
            if !restrictions.iter().any(|(p, _)| p == pred) {
                restrictions.push((pred.clone(), cond.clone()));
            }
            node.children.iter().for_each(|c| collect_sources(c, out, restrictions));
        }
        _ => node.children.iter().for_each(|c| collect_sources(c, out, restrictions)),
    }
}

fn var_path_of(a: &Attr, s: &SourceBinding) -> VarPath {
    let var = a.var.as_deref().unwrap_or_default();
    let root_len = s.spec.fors.iter().find(|(v, _, _)| v == var).map_or(0, |(_, _, r)| r.len());
    VarPath { var: var.to_string(), steps: a.path.steps().skip(root_len).map(str::to_string).collect() }
}

/// Push the restriction into every source when all of them can evaluate it,
/// then project each source down to the attributes still needed.
fn leaf_group(node: &PlanNode) -> PlanNode {
    let mut sources = Vec::new();
    let mut restrictions = Vec::new();
    collect_sources(node, &mut sources, &mut restrictions);
    let (pred, cond) = match restrictions.len() {
        0 => (None, None),
        _ => (
            Some(Predicate::and(restrictions.iter().map(|(p, _)| p.clone()).collect())),
            Cond::and(restrictions.iter().map(|(_, c)| c.clone()).collect()),
        ),
    };
    let pushable = pred.as_ref().is_some_and(|p| {
        let paths: Vec<_> = p.attrs().into_iter().map(|a| a.path.clone()).collect();
        sources.iter().all(|s| s.capability.can_select(&paths))
    });
    let mut needed: Vec<Attr> = Vec::new();
    for s in &sources {
        for a in &s.atoms {
            for p in &a.returns {
                let attr = s.attrs.iter().find(|x| x.var.as_deref() == Some(a.var.as_str()) && var_path_of(x, s) == *p).cloned();
                if let Some(attr) = attr {
                    if !needed.contains(&attr) {
                        needed.push(attr);
                    }
                }
            }
        }
        // Fused sources keep every attribute they were built with.
        if s.atoms.len() > 1 {
            for attr in &s.attrs {
                if !needed.contains(attr) {
                    needed.push(attr.clone());
                }
            }
        }
    }
    if !pushable {
        if let Some(p) = &pred {
            for a in p.attrs() {
                if let Some(attr) = sources.first().and_then(|s| s.attrs.iter().find(|x| *x == a)) {
                    if !needed.contains(attr) {
                        needed.push(attr.clone());
                    }
                }
            }
        }
    }
    let children: Vec<PlanNode> = sources
        .into_iter()
        .map(|mut s| {
            if pushable {
                let existing = s.spec.restriction.take();
                s.spec.restriction = Cond::and(existing.into_iter().chain(cond.clone()).collect());
            }
            s.attrs = needed.clone();
            if s.capability.can_project() {
                s.spec.returns = Some(needed.iter().map(|a| var_path_of(a, &s)).collect());
                s.guide = guide_for(&s.collection_guide, &needed);
                PlanNode::leaf(PlanOp::Source(Box::new(s)))
            } else {
                s.spec.returns = None;
                s.guide = s.collection_guide.clone();
                PlanNode::unary(PlanOp::Project { attrs: needed.clone() }, PlanNode::leaf(PlanOp::Source(Box::new(s))))
            }
        })
        .collect();
    let mut out = if children.len() == 1 {
        children.into_iter().next().unwrap()
    } else {
        PlanNode { op: PlanOp::Union, children }
    };
    if let (false, Some(pred), Some(cond)) = (pushable, pred, cond) {
        out = PlanNode::unary(PlanOp::Restrict { pred, cond }, out);
    }
    out
}

struct Leaf {
    node: PlanNode,
    /// `(variable, atom number)` of every atom below.
    atoms: Vec<(String, usize)>,
    cardinality: u64,
}

impl Leaf {
    fn has_var(&self, v: &str) -> bool {
        self.atoms.iter().any(|(x, _)| x == v)
    }

    fn first_id(&self) -> usize {
        self.atoms.iter().map(|(_, i)| *i).min().unwrap_or(usize::MAX)
    }
}

fn atom_index(id: &str) -> usize {
    id.trim_start_matches('t').parse().unwrap_or(usize::MAX)
}

/// Replicas add up their cardinalities.
fn leaf_info(node: PlanNode) -> Leaf {
    let mut atoms: Vec<(String, usize)> = Vec::new();
    let mut cardinality = 0u64;
    node.walk(&mut |n| {
        if let PlanOp::Source(s) = &n.op {
            cardinality += s.cardinality;
            for a in &s.atoms {
                if !atoms.iter().any(|(v, _)| *v == a.var) {
                    atoms.push((a.var.clone(), atom_index(&a.id)));
                }
            }
        }
    });
    Leaf { node, atoms, cardinality }
}

fn flatten(node: &PlanNode, leaves: &mut Vec<PlanNode>, conds: &mut Vec<(Predicate, Cond)>) {
    match &node.op {
        PlanOp::Join { pred, cond, .. } => {
            let preds: Vec<&Predicate> = pred.conjuncts();
            let cs: Vec<&Cond> = cond.conjuncts();
            if preds.len() == cs.len() {
                conds.extend(preds.into_iter().cloned().zip(cs.into_iter().cloned()));
            } else {
                conds.push((pred.clone(), cond.clone()));
            }
            node.children.iter().for_each(|c| flatten(c, leaves, conds));
        }
        PlanOp::Product => node.children.iter().for_each(|c| flatten(c, leaves, conds)),
        _ => leaves.push(node.clone()),
    }
}

fn single_source(node: &PlanNode) -> Option<&SourceBinding> {
    match &node.op {
        PlanOp::Source(s) => Some(s),
        _ => None,
    }
}

/// A restricted single-source input small enough to drive a dependent join.
fn drives_dependent(leaf: &Leaf, limit: u64) -> bool {
    let restricted = match &leaf.node.op {
        PlanOp::Source(s) => s.spec.restriction.is_some(),
        PlanOp::Restrict { .. } => leaf.node.children.iter().all(|c| single_source(c).is_some()),
        PlanOp::Project { .. } => {
            leaf.node.children.iter().all(|c| single_source(c).is_some_and(|s| s.spec.restriction.is_some()))
        }
        _ => false,
    };
    restricted && leaf.cardinality > 0 && leaf.cardinality <= limit
}

/// Sources, projections over sources, and unions of those can be re-queried per key batch.
pub(crate) fn rebindable(node: &PlanNode) -> bool {
    match &node.op {
        PlanOp::Source(_) => true,
        PlanOp::Project { .. } | PlanOp::Union => node.children.iter().all(rebindable),
        _ => false,
    }
}

/// The right-hand attribute of the equality a dependent join probes with.
pub(crate) fn dependent_key(pred: &Predicate, left: &[Attr], right: &[Attr]) -> Option<Attr> {
    pred.conjuncts().iter().find_map(|p| match p {
        Predicate::Compare { lhs, op: crate::xalgebra::predicate::CmpOp::Eq, rhs: Operand::Attr(r) } => {
            if left.contains(lhs) && right.contains(r) {
                Some(r.clone())
            } else if left.contains(r) && right.contains(lhs) {
                Some(lhs.clone())
            } else {
                None
            }
        }
        _ => None,
    })
}

fn fusable(left: &PlanNode, right: &PlanNode) -> bool {
    let (Some(l), Some(r)) = (single_source(left), single_source(right)) else { return false };
    let roots = |s: &SourceBinding| s.spec.fors.iter().map(|(_, _, root)| root.clone()).collect::<Vec<_>>();
    l.source == r.source
        && l.capability.can_join()
        && r.capability.can_join()
        && roots(l).iter().all(|x| !roots(r).contains(x))
}

fn fuse(left: PlanNode, right: PlanNode, cond: Cond) -> PlanNode {
    let (PlanOp::Source(l), PlanOp::Source(r)) = (left.op, right.op) else { unreachable!() };
    let mut atoms = l.atoms.clone();
    atoms.extend(r.atoms.iter().cloned());
    let mut attrs = l.attrs.clone();
    attrs.extend(r.attrs.iter().cloned());
    let mut guide = l.guide.clone();
    guide.extend(r.guide.iter().filter(|p| !l.guide.contains(p)).cloned());
    let mut collection_guide = l.collection_guide.clone();
    collection_guide.extend(r.collection_guide.iter().filter(|p| !l.collection_guide.contains(p)).cloned());
    let restriction = Cond::and(l.spec.restriction.clone().into_iter().chain(r.spec.restriction.clone()).chain([cond]).collect());
    let returns = match (&l.spec.returns, &r.spec.returns) {
        (Some(a), Some(b)) => Some(a.iter().chain(b).cloned().collect()),
        _ => None,
    };
    let mut fors = l.spec.fors.clone();
    fors.extend(r.spec.fors.iter().cloned());
    PlanNode::leaf(PlanOp::Source(Box::new(SourceBinding {
        atoms,
        source: l.source.clone(),
        capability: l.capability,
        cardinality: l.cardinality.max(r.cardinality),
        spec: AdapterQuerySpec { fors, restriction, returns },
        attrs,
        guide,
        collection_guide,
    })))
}

/// Re-order a join/product subtree greedily: smallest declared input first,
/// then the smallest input connected to what is already joined.
fn join_region(node: &PlanNode, hints: &[Hint], opts: &OptimizeOptions, used: &mut HashSet<String>) -> PlanNode {
    let mut raw = Vec::new();
    let mut conds = Vec::new();
    flatten(node, &mut raw, &mut conds);
    let mut leaves: Vec<Leaf> = raw.iter().map(|n| leaf_info(rewrite(n, hints, opts, used))).collect();
    let key = |l: &Leaf| (l.cardinality, l.first_id());
    let mut conds: Vec<(Predicate, Cond, bool)> = conds.into_iter().map(|(p, c)| (p, c, false)).collect();
    let connected = |l: &Leaf, cur: &Leaf, conds: &[(Predicate, Cond, bool)]| {
        conds.iter().any(|(_, c, done)| !done && c.vars().iter().any(|v| l.has_var(v)) && c.vars().iter().any(|v| cur.has_var(v)))
    };
    let first = (0..leaves.len()).min_by_key(|i| key(&leaves[*i])).unwrap();
    let mut current = leaves.remove(first);
    while !leaves.is_empty() {
        let pick = (0..leaves.len())
            .filter(|i| connected(&leaves[*i], &current, &conds))
            .min_by_key(|i| key(&leaves[*i]))
            .unwrap_or_else(|| (0..leaves.len()).min_by_key(|i| key(&leaves[*i])).unwrap());
        let right = leaves.remove(pick);
        let mut preds = Vec::new();
        let mut cs = Vec::new();
        for (p, c, done) in conds.iter_mut() {
            if !*done && c.vars().iter().all(|v| current.has_var(v) || right.has_var(v)) {
                *done = true;
                preds.push(p.clone());
                cs.push(c.clone());
            }
        }
        let mut atoms = current.atoms.clone();
        atoms.extend(right.atoms.iter().cloned());
        let node = match Cond::and(cs) {
            None => PlanNode { op: PlanOp::Product, children: vec![current.node, right.node] },
            Some(cond) => {
                let pred = Predicate::and(preds);
                let mut touched: Vec<usize> =
                    cond.vars().iter().filter_map(|v| atoms.iter().find(|(x, _)| x == v).map(|(_, i)| *i)).collect();
                touched.sort_unstable();
                touched.dedup();
                let id = touched.iter().map(|i| format!("t{i}")).collect::<Vec<_>>().join("_");
                let hinted = hints.iter().find(|h| h.join == id).map(|h| h.algo);
                if hinted.is_none() && opts.fuse_same_source && fusable(&current.node, &right.node) {
                    fuse(current.node, right.node, cond)
                } else {
                    let (la, ra) = (current.node.attrs(), right.node.attrs());
                    let feasible = rebindable(&right.node) && dependent_key(&pred, &la, &ra).is_some();
                    let algo = match hinted {
                        Some(a) => {
                            used.insert(id.clone());
                            a
                        }
                        None if feasible && drives_dependent(&current, opts.dependent_limit) => JoinAlgo::Dependent,
                        None => default_algo(&pred, &la, &ra),
                    };
                    let algo = if algo == JoinAlgo::Dependent && !feasible { default_algo(&pred, &la, &ra) } else { algo };
                    PlanNode { op: PlanOp::Join { id, pred, cond, algo }, children: vec![current.node, right.node] }
                }
            }
        };
        let cardinality = current.cardinality.max(right.cardinality);
        current = Leaf { node, atoms, cardinality };
    }
    current.node
}
