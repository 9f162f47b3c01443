//! Forest surgery shared by the operators: pruning to referenced nodes and
//! unifying trees along shared paths.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use super::path::Path;
use super::relation::{NodeRef, XTuple};
use super::tree::{NodeId, XTree};

type TreeMap = (usize, Option<HashMap<NodeId, NodeId>>);

/// Rebuild a tuple keeping only the trees and nodes reachable from `refs`:
/// every referenced node with its whole subtree, plus its ancestor spine.
pub fn prune_to_refs(forest: &[Arc<XTree>], refs: Vec<Vec<NodeRef>>) -> XTuple {
    let mut masks: Vec<Option<Vec<bool>>> = vec![None; forest.len()];
    for r in refs.iter().flatten() {
        let tree = &forest[r.tree as usize];
        let mask = masks[r.tree as usize].get_or_insert_with(|| vec![false; tree.len()]);
        for n in tree.preorder(r.node) {
            mask[n as usize] = true;
        }
        let mut cur = tree.node(r.node).parent;
        while let Some(p) = cur {
            if mask[p as usize] {
                break;
            }
            mask[p as usize] = true;
            cur = tree.node(p).parent;
        }
    }
    let mut new_forest = Vec::new();
    // Per input tree: its index in the new forest and, if pruned, the node renumbering.
    let mut tree_maps: Vec<Option<TreeMap>> = vec![None; forest.len()];
    for (i, mask) in masks.iter().enumerate() {
        let Some(mask) = mask else { continue };
        if mask.iter().all(|k| *k) {
            // Untouched tree: share it.
            tree_maps[i] = Some((new_forest.len(), None));
            new_forest.push(forest[i].clone());
        } else if let Some((t, map)) = forest[i].retain(mask) {
            tree_maps[i] = Some((new_forest.len(), Some(map)));
            new_forest.push(Arc::new(t));
        }
    }
    let refs = refs
        .into_iter()
        .map(|rs| {
            rs.into_iter()
                .map(|r| {
                    let (idx, map) = tree_maps[r.tree as usize].as_ref().expect("referenced tree kept");
                    let node = map.as_ref().map_or(r.node, |m| m[&r.node]);
                    NodeRef::new(*idx, node)
                })
                .collect()
        })
        .collect();
    XTuple { refs, forest: new_forest }
}

/// Which nodes may unify when two trees meet.
#[derive(Clone, Copy)]
pub enum MergeScope<'a> {
    /// Any shared path (product, join).
    AllPaths,
    /// Only paths that are a prefix or an extension of one of these (nest).
    Spine(&'a HashSet<Path>),
}

impl MergeScope<'_> {
    fn allows(&self, p: &Path) -> bool {
        match self {
            MergeScope::AllPaths => true,
            MergeScope::Spine(spine) => spine.iter().any(|s| s.is_prefix_of(p) || p.is_prefix_of(s)),
        }
    }
}

fn unifiable(a: &XTree, an: NodeId, b: &XTree, bn: NodeId) -> bool {
    let (x, y) = (a.node(an), b.node(bn));
    if x.text.is_some() || y.text.is_some() {
        x.children.is_empty() && y.children.is_empty() && x.text == y.text
    } else {
        true
    }
}

/// Unify `src` (rooted at `src_node`) into `dst` at `dst_node`. Children
/// unify only when each side has exactly one child with that label; other
/// right-hand branches are appended after the existing children.
fn unify(dst: &mut XTree, dst_node: NodeId, src: &XTree, src_node: NodeId, scope: MergeScope, map: &mut HashMap<NodeId, NodeId>) {
    map.insert(src_node, dst_node);
    let mut left_counts: HashMap<String, (usize, NodeId)> = HashMap::new();
    for c in &dst.node(dst_node).children {
        let e = left_counts.entry(dst.node(*c).label.clone()).or_insert((0, *c));
        e.0 += 1;
    }
    let mut right_counts: HashMap<&str, usize> = HashMap::new();
    for c in &src.node(src_node).children {
        *right_counts.entry(src.node(*c).label.as_str()).or_default() += 1;
    }
    let dst_path = if matches!(scope, MergeScope::Spine(_)) { Some(dst.path_of(dst_node)) } else { None };
    for rc in src.node(src_node).children.clone() {
        let label = src.node(rc).label.clone();
        let target = match left_counts.get(&label) {
            Some((1, lc)) if right_counts[label.as_str()] == 1 => {
                let in_scope = match &dst_path {
                    Some(p) => scope.allows(&p.child(&label).expect("valid label")),
                    None => true,
                };
                (in_scope && unifiable(dst, *lc, src, rc)).then_some(*lc)
            }
            _ => None,
        };
        match target {
            Some(lc) => unify(dst, lc, src, rc, scope, map),
            None => {
                dst.graft(dst_node, src, rc, map);
            }
        }
    }
}

/// Merge the right forest into the left one. Trees with equal root labels
/// (one on each side) unify; the rest of the right forest is appended.
/// Left node identities are unchanged; the returned closure maps right refs.
pub fn merge_forests(left: &[Arc<XTree>], right: &[Arc<XTree>], scope: MergeScope) -> (Vec<Arc<XTree>>, RightMap) {
    let mut out: Vec<Arc<XTree>> = left.to_vec();
    let mut maps: Vec<(usize, Option<HashMap<NodeId, NodeId>>)> = Vec::with_capacity(right.len());
    let count = |forest: &[Arc<XTree>], label: &str| forest.iter().filter(|t| t.root_label() == label).count();
    for rt in right {
        let label = rt.root_label();
        let target = if count(left, label) == 1 && count(right, label) == 1 {
            let li = left.iter().position(|t| t.root_label() == label).unwrap();
            let root_path = Path::parse(label).expect("valid label");
            (scope.allows(&root_path) && unifiable(&left[li], 0, rt, 0)).then_some(li)
        } else {
            None
        };
        match target {
            Some(li) => {
                let mut map = HashMap::new();
                let tree = Arc::make_mut(&mut out[li]);
                unify(tree, 0, rt, 0, scope, &mut map);
                maps.push((li, Some(map)));
            }
            None => {
                maps.push((out.len(), None));
                out.push(rt.clone());
            }
        }
    }
    (out, RightMap(maps))
}

/// Maps right-hand refs into a merged forest.
pub struct RightMap(Vec<(usize, Option<HashMap<NodeId, NodeId>>)>);

impl RightMap {
    pub fn map(&self, r: NodeRef) -> NodeRef {
        let (idx, m) = &self.0[r.tree as usize];
        NodeRef::new(*idx, m.as_ref().map_or(r.node, |m| m[&r.node]))
    }

    pub fn map_all(&self, refs: &[NodeRef]) -> Vec<NodeRef> {
        refs.iter().map(|r| self.map(*r)).collect()
    }
}

/// Combine two tuples as a product: merged forest, left refs then right refs.
pub fn product_tuple(l: &XTuple, r: &XTuple) -> XTuple {
    let (forest, map) = merge_forests(&l.forest, &r.forest, MergeScope::AllPaths);
    let mut refs = l.refs.clone();
    refs.extend(r.refs.iter().map(|rs| map.map_all(rs)));
    XTuple { refs, forest }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xalgebra::path::path;
    use crate::xalgebra::tree::parse_trees;

    fn forest(xml: &str) -> Vec<Arc<XTree>> {
        parse_trees(xml).unwrap().into_iter().map(Arc::new).collect()
    }

    #[test]
    fn merge_unifies_shared_spine() {
        let l = forest("<personne><nom>Dupont</nom></personne>");
        let r = forest("<personne><adresse><ville>Paris</ville></adresse></personne>");
        let (out, _) = merge_forests(&l, &r, MergeScope::AllPaths);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].canonical(0), "<personne><nom>Dupont</nom><adresse><ville>Paris</ville></adresse></personne>");
    }

    #[test]
    fn differing_leaves_and_repeats_are_appended() {
        let l = forest("<a><b>1</b><c>x</c><c>y</c></a>");
        let r = forest("<a><b>2</b><c>z</c></a>");
        let (out, map) = merge_forests(&l, &r, MergeScope::AllPaths);
        assert_eq!(out[0].canonical(0), "<a><b>1</b><c>x</c><c>y</c><b>2</b><c>z</c></a>");
        let rb = NodeRef::new(0, r[0].find(&path("a/b"))[0]);
        assert_eq!(out[0].string_value(map.map(rb).node), "2");
    }

    #[test]
    fn spine_scope_blocks_off_spine_unification() {
        let l = forest("<s><k>5</k><c><p>1</p></c></s>");
        let r = forest("<s><k>5</k><c><p>1</p></c></s>");
        let spine: HashSet<Path> = [path("s/k")].into_iter().collect();
        let (out, _) = merge_forests(&l, &r, MergeScope::Spine(&spine));
        assert_eq!(out[0].canonical(0), "<s><k>5</k><c><p>1</p></c><c><p>1</p></c></s>");
    }

    #[test]
    fn prune_keeps_ancestor_spine() {
        let f = forest("<a><b>1</b><c><d>2</d><e>3</e></c></a><z>9</z>");
        let d = f[0].find(&path("a/c/d"))[0];
        let t = prune_to_refs(&f, vec![vec![NodeRef::new(0, d)]]);
        assert_eq!(t.forest.len(), 1);
        assert_eq!(t.forest[0].canonical(0), "<a><c><d>2</d></c></a>");
        assert_eq!(t.value(t.refs[0][0]), "2");
    }
}
