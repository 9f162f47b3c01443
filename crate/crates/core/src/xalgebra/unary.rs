//! Pipelined unary operators: project and restrict.

use std::sync::Arc;

use super::forest::prune_to_refs;
use super::predicate::Predicate;
use super::relation::{Attr, XRelation, XRelationSchema};
use super::AlgebraError;

/// Guide paths still reachable from the kept attributes: their prefixes and
/// everything below them.
pub(crate) fn projected_schema(schema: &XRelationSchema, keep: Vec<Attr>) -> XRelationSchema {
    let guide = schema
        .guide
        .iter()
        .filter(|g| keep.iter().any(|a| g.is_prefix_of(&a.path) || a.path.is_prefix_of(g)))
        .cloned()
        .collect();
    XRelationSchema { attributes: keep, guide }
}

/// Keep only the listed attributes and prune tree branches nobody references.
pub fn x_project(rel: XRelation, keep: &[Attr]) -> Result<XRelation, AlgebraError> {
    let positions: Vec<usize> = keep.iter().map(|a| rel.schema.resolve(a)).collect::<Result<_, _>>()?;
    let attrs = positions.iter().map(|i| rel.schema.attributes[*i].clone()).collect();
    let schema = Arc::new(projected_schema(&rel.schema, attrs));
    let out = Box::new(rel.tuples.map(move |t| {
        let t = t?;
        let refs = positions.iter().map(|i| t.refs[*i].clone()).collect();
        Ok(prune_to_refs(&t.forest, refs))
    }));
    Ok(XRelation::derived(rel.diagnostics, schema, rel.ordered, out))
}

/// Keep the tuples satisfying `p`, forests intact.
pub fn x_restrict(rel: XRelation, p: &Predicate) -> Result<XRelation, AlgebraError> {
    let bound = p.bind(&rel.schema)?;
    let diag = rel.diagnostics.clone();
    let out = Box::new(rel.tuples.filter(move |t| match t {
        Ok(t) => bound.eval(t, &diag),
        Err(_) => true,
    }));
    Ok(XRelation::derived(rel.diagnostics, rel.schema, rel.ordered, out))
}
