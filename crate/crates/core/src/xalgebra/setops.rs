//! Set operators. Tuple identity is the canonical serialization of every
//! binding; outputs are duplicate-free.

use std::collections::HashSet;
use std::sync::Arc;

use super::relation::{deferred, XRelation, XRelationSchema, XTuple};
use super::AlgebraError;

fn union_schema(l: &XRelationSchema, r: &XRelationSchema) -> Result<XRelationSchema, AlgebraError> {
    if l.attributes != r.attributes {
        return Err(AlgebraError::Plan(format!("set operands differ: {:?} vs {:?}", l.attributes, r.attributes)));
    }
    let mut guide = l.guide.clone();
    guide.extend(r.guide.iter().cloned());
    Ok(XRelationSchema { attributes: l.attributes.clone(), guide })
}

/// Left then right, first occurrence kept. Streaming.
pub fn x_union(l: XRelation, r: XRelation) -> Result<XRelation, AlgebraError> {
    let schema = Arc::new(union_schema(&l.schema, &r.schema)?);
    let diag = l.diagnostics.clone();
    diag.link(&r.diagnostics);
    let ordered = l.ordered && r.ordered;
    let mut seen: HashSet<String> = HashSet::new();
    let out = Box::new(l.tuples.chain(r.tuples).filter(move |t| match t {
        Ok(t) => seen.insert(t.canonical()),
        Err(_) => true,
    }));
    Ok(XRelation::derived(diag, schema, ordered, out))
}

fn filtered(l: XRelation, r: XRelation, keep_if_in_r: bool) -> Result<XRelation, AlgebraError> {
    let schema = Arc::new(union_schema(&l.schema, &r.schema)?);
    let diag = l.diagnostics.clone();
    diag.link(&r.diagnostics);
    let ordered = l.ordered;
    let (left, right) = (l.tuples, r.tuples);
    // Blocking on the right operand only; the left side is filtered lazily
    // once the right set is known.
    let mut right = Some(right);
    let mut set: Option<HashSet<String>> = None;
    let mut seen: HashSet<String> = HashSet::new();
    let mut failed = false;
    let out = Box::new(left.filter_map(move |t| {
        if failed {
            return None;
        }
        if set.is_none() {
            match right.take().unwrap().map(|t| t.map(|t| t.canonical())).collect::<Result<HashSet<_>, _>>() {
                Ok(s) => set = Some(s),
                Err(e) => {
                    failed = true;
                    return Some(Err(e));
                }
            }
        }
        let t = match t {
            Ok(t) => t,
            Err(e) => return Some(Err(e)),
        };
        let c = t.canonical();
        (set.as_ref().unwrap().contains(&c) == keep_if_in_r && seen.insert(c)).then_some(Ok(t))
    }));
    Ok(XRelation::derived(diag, schema, ordered, out))
}

pub fn x_difference(l: XRelation, r: XRelation) -> Result<XRelation, AlgebraError> {
    filtered(l, r, false)
}

pub fn x_intersection(l: XRelation, r: XRelation) -> Result<XRelation, AlgebraError> {
    filtered(l, r, true)
}

/// Duplicate-free copy of a relation, first occurrences in order.
pub fn x_distinct(rel: XRelation) -> XRelation {
    let XRelation { schema, ordered, diagnostics, tuples } = rel;
    let out = deferred(move || {
        let mut seen = HashSet::new();
        let rows: Vec<XTuple> = tuples.collect::<Result<_, _>>()?;
        Ok(rows.into_iter().filter(|t| seen.insert(t.canonical())).collect())
    });
    XRelation::derived(diagnostics, schema, ordered, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xalgebra::path::path;
    use crate::xalgebra::relation::Attr;
    use crate::xalgebra::source::x_source;
    use crate::xml::parse_events;

    fn rel(xml: &str) -> XRelation {
        x_source(parse_events(xml).unwrap().into_iter(), [path("a/k")], vec![Attr::new(path("a/k"))]).unwrap()
    }

    fn keys(r: XRelation) -> Vec<String> {
        r.collect().unwrap().iter().map(|t| t.first_value(0).unwrap()).collect()
    }

    #[test]
    fn union_dedups_in_order() {
        let out = x_union(rel("<a><k>2</k></a><a><k>1</k></a><a><k>2</k></a>"), rel("<a><k>3</k></a><a><k>1</k></a>")).unwrap();
        assert_eq!(keys(out), ["2", "1", "3"]);
    }

    #[test]
    fn difference_and_intersection() {
        let l = "<a><k>1</k></a><a><k>2</k></a><a><k>3</k></a>";
        let r = "<a><k>2</k></a><a><k>9</k></a>";
        assert_eq!(keys(x_difference(rel(l), rel(r)).unwrap()), ["1", "3"]);
        assert_eq!(keys(x_intersection(rel(l), rel(r)).unwrap()), ["2"]);
        assert!(keys(x_difference(rel(l), rel(l)).unwrap()).is_empty());
    }

    #[test]
    fn schema_mismatch_is_a_plan_error() {
        let other = x_source(parse_events("<b><k>1</k></b>").unwrap().into_iter(), [path("b/k")], vec![Attr::new(path("b/k"))]).unwrap();
        assert!(matches!(x_union(rel("<a><k>1</k></a>"), other), Err(AlgebraError::Plan(_))));
    }
}
