//! Structural invariants of tuples and schemas.

use std::sync::Arc;

use super::relation::{is_prefix_closed, TupleStream, XRelationSchema, XTuple};
use super::AlgebraError;

pub fn validate_schema(schema: &XRelationSchema) -> Result<(), AlgebraError> {
    if !is_prefix_closed(&schema.guide) {
        return Err(AlgebraError::Invariant("guide is not prefix-closed".into()));
    }
    for a in &schema.attributes {
        if !schema.guide.contains(&a.path) {
            return Err(AlgebraError::Invariant(format!("attribute {a} outside the guide")));
        }
    }
    Ok(())
}

/// Binding-path consistency, refs inside the forest, forest paths inside the guide.
pub fn validate_tuple(schema: &XRelationSchema, t: &XTuple) -> Result<(), AlgebraError> {
    if t.refs.len() != schema.attributes.len() {
        return Err(AlgebraError::Invariant(format!(
            "tuple binds {} attributes, schema has {}",
            t.refs.len(),
            schema.attributes.len()
        )));
    }
    for (attr, refs) in schema.attributes.iter().zip(&t.refs) {
        for r in refs {
            let tree = t
                .forest
                .get(r.tree as usize)
                .ok_or_else(|| AlgebraError::Invariant(format!("{attr}: dangling tree index {}", r.tree)))?;
            if !tree.contains(r.node) {
                return Err(AlgebraError::Invariant(format!("{attr}: dangling node {}", r.node)));
            }
            let p = tree.path_of(r.node);
            if p != attr.path {
                return Err(AlgebraError::Invariant(format!("{attr} references a node at {p}")));
            }
        }
    }
    for tree in &t.forest {
        tree.validate()?;
        for n in tree.preorder(tree.root()) {
            let p = tree.path_of(n);
            if !schema.guide.contains(&p) {
                return Err(AlgebraError::Invariant(format!("forest path {p} missing from guide")));
            }
        }
    }
    Ok(())
}

/// Wrap a stream so each tuple is validated as it passes.
pub fn checked(schema: Arc<XRelationSchema>, tuples: TupleStream) -> TupleStream {
    if let Err(e) = validate_schema(&schema) {
        return Box::new(std::iter::once(Err(e)));
    }
    Box::new(tuples.map(move |t| {
        let t = t?;
        validate_tuple(&schema, &t)?;
        Ok(t)
    }))
}
