use std::cmp::Ordering;

use super::relation::{deferred, Attr, XRelation, XTuple};
use super::AlgebraError;
use crate::value::SortKey;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum SortOrder {
    #[default]
    Asc,
    Desc,
}

/// Sort key of one attribute: the first bound value. Absent sorts first.
pub(crate) fn first_key(t: &XTuple, attr: usize) -> Option<SortKey> {
    t.first_value(attr).map(|v| SortKey::of(&v))
}

/// Stable, blocking sort on the listed keys.
pub fn x_sort(rel: XRelation, keys: &[(Attr, SortOrder)]) -> Result<XRelation, AlgebraError> {
    let positions: Vec<(usize, SortOrder)> =
        keys.iter().map(|(a, o)| rel.schema.resolve(a).map(|i| (i, *o))).collect::<Result<_, _>>()?;
    if positions.is_empty() {
        return Ok(rel);
    }
    let XRelation { schema, diagnostics, tuples, .. } = rel;
    let out = deferred(move || {
        let mut rows: Vec<(Vec<Option<SortKey>>, XTuple)> = tuples
            .map(|t| t.map(|t| (positions.iter().map(|(i, _)| first_key(&t, *i)).collect(), t)))
            .collect::<Result<_, _>>()?;
        rows.sort_by(|(a, _), (b, _)| {
                for ((x, y), (_, o)) in a.iter().zip(b).zip(&positions) {
                    let c = x.cmp(y);
                    let c = if *o == SortOrder::Desc { c.reverse() } else { c };
                    if c != Ordering::Equal {
                        return c;
                    }
                }
                Ordering::Equal
            });
        Ok(rows.into_iter().map(|(_, t)| t).collect())
    });
    Ok(XRelation::derived(diagnostics, schema, true, out))
}
