//! XNest and its inverse XUnnest.

use std::collections::HashSet;
use std::sync::Arc;

use super::forest::{merge_forests, prune_to_refs, MergeScope};
use super::path::Path;
use super::relation::{deferred, Attr, XRelation, XTuple};
use super::sort::first_key;
use super::AlgebraError;

/// Group tuples with equal `group_by` values (canonical text) and merge
/// their forests. Trees unify only along the group-by spine; every other
/// branch is appended in input order. Non-group bindings become
/// multi-valued. Blocking; output is in group-key order.
pub fn x_nest(rel: XRelation, group_by: &[Attr]) -> Result<XRelation, AlgebraError> {
    let groups: Vec<usize> = group_by.iter().map(|a| rel.schema.resolve(a)).collect::<Result<_, _>>()?;
    let spine: HashSet<Path> = groups.iter().map(|i| rel.schema.attributes[*i].path.clone()).collect();
    let XRelation { schema, diagnostics, tuples, .. } = rel;
    let out = deferred(move || {
        let mut rows: Vec<(Vec<_>, Vec<String>, XTuple)> = tuples
            .map(|t| {
                t.map(|t| {
                    let sort: Vec<_> = groups.iter().map(|i| first_key(&t, *i)).collect();
                    let canon: Vec<String> = groups.iter().map(|i| t.canonical_binding(*i)).collect();
                    (sort, canon, t)
                })
            })
            .collect::<Result<_, _>>()?;
        rows.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        let mut out: Vec<XTuple> = Vec::new();
        let mut current: Option<Vec<String>> = None;
        for (_, canon, t) in rows {
            if current.as_ref() == Some(&canon) {
                let acc = out.last_mut().unwrap();
                *acc = merge_into(acc, &t, &groups, &spine);
            } else {
                current = Some(canon);
                out.push(t);
            }
        }
        Ok(out)
    });
    Ok(XRelation::derived(diagnostics, schema, true, out))
}

fn merge_into(acc: &XTuple, t: &XTuple, groups: &[usize], spine: &HashSet<Path>) -> XTuple {
    let (forest, map) = merge_forests(&acc.forest, &t.forest, MergeScope::Spine(spine));
    let refs = acc
        .refs
        .iter()
        .zip(&t.refs)
        .enumerate()
        .map(|(i, (mine, theirs))| {
            let mut rs = mine.clone();
            if !groups.contains(&i) {
                for r in map.map_all(theirs) {
                    if !rs.contains(&r) {
                        rs.push(r);
                    }
                }
            }
            rs
        })
        .collect();
    XTuple { refs, forest }
}

/// One output tuple per node bound to `multi`, with the pivot bindings
/// duplicated and the forest pruned to the pivots plus that node. Output
/// attributes are the input's, restricted to the pivots and `multi`.
pub fn x_unnest(rel: XRelation, multi: &Attr, pivots: &[Attr]) -> Result<XRelation, AlgebraError> {
    let m = rel.schema.resolve(multi)?;
    let mut keep: Vec<usize> = pivots.iter().map(|a| rel.schema.resolve(a)).collect::<Result<_, _>>()?;
    keep.push(m);
    keep.sort_unstable();
    keep.dedup();
    let attrs: Vec<Attr> = keep.iter().map(|i| rel.schema.attributes[*i].clone()).collect();
    let schema = Arc::new(super::unary::projected_schema(&rel.schema, attrs));
    let XRelation { diagnostics, ordered, tuples, .. } = rel;
    let out = Box::new(tuples.flat_map(move |t| -> Vec<Result<XTuple, AlgebraError>> {
        let t = match t {
            Ok(t) => t,
            Err(e) => return vec![Err(e)],
        };
        t.refs[m]
            .iter()
            .map(|r| {
                let refs = keep.iter().map(|i| if *i == m { vec![*r] } else { t.refs[*i].clone() }).collect();
                Ok(prune_to_refs(&t.forest, refs))
            })
            .collect()
    }));
    Ok(XRelation::derived(diagnostics, schema, ordered, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xalgebra::path::path;
    use crate::xalgebra::source::x_source;
    use crate::xml::parse_events;

    fn suppliers() -> XRelation {
        let xml = "<supplier><name>A</name><contact><localisation><nationkey>7</nationkey></localisation></contact></supplier>\
                   <supplier><name>B</name><contact><localisation><nationkey>3</nationkey></localisation></contact></supplier>\
                   <supplier><name>C</name><contact><localisation><nationkey>7</nationkey></localisation></contact></supplier>\
                   <supplier><name>D</name><contact><localisation><nationkey>7</nationkey></localisation></contact></supplier>";
        let attrs = vec![Attr::new(path("supplier/contact/localisation/nationkey")), Attr::new(path("supplier/name"))];
        let guide: Vec<_> = attrs.iter().map(|a| a.path.clone()).collect();
        x_source(parse_events(xml).unwrap().into_iter(), guide, attrs).unwrap()
    }

    #[test]
    fn groups_by_key_and_merges_spine() {
        let out = x_nest(suppliers(), &[Attr::new(path("supplier/contact/localisation/nationkey"))]).unwrap().collect().unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].values(1), ["B"]);
        assert_eq!(out[1].values(1), ["A", "C", "D"]);
        assert_eq!(out[1].forest.len(), 1);
        assert_eq!(
            out[1].forest[0].canonical(0),
            "<supplier><name>A</name><contact><localisation><nationkey>7</nationkey></localisation></contact><name>C</name><name>D</name></supplier>"
        );
    }

    #[test]
    fn unnest_inverts_nest() {
        let key = Attr::new(path("supplier/contact/localisation/nationkey"));
        let nested = x_nest(suppliers(), std::slice::from_ref(&key)).unwrap();
        let flat = x_unnest(nested, &Attr::new(path("supplier/name")), &[key]).unwrap().materialize().unwrap();
        assert_eq!(flat.tuples.len(), 4);
        let original = suppliers().materialize().unwrap();
        assert_eq!(flat.canonical_multiset(), original.canonical_multiset());
    }

    #[test]
    fn empty_multi_drops_tuple() {
        let xml = "<a><k>1</k></a>";
        let attrs = vec![Attr::new(path("a/k")), Attr::new(path("a/m"))];
        let r = x_source(parse_events(xml).unwrap().into_iter(), [path("a/k"), path("a/m")], attrs).unwrap();
        let out = x_unnest(r, &Attr::new(path("a/m")), &[Attr::new(path("a/k"))]).unwrap().collect().unwrap();
        assert!(out.is_empty());
    }
}
