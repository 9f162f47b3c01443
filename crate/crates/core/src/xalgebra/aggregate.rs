use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rust_decimal::Decimal;

use super::path::Path;
use super::relation::{deferred, Attr, NodeRef, XRelation, XRelationSchema, XTuple};
use super::tree::XTree;
use super::AlgebraError;
use crate::value::{format_decimal, parse_decimal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AggregateFn {
    Min,
    Max,
    Count,
    Avg,
    Sum,
}

impl AggregateFn {
    pub fn name(self) -> &'static str {
        match self {
            AggregateFn::Min => "min",
            AggregateFn::Max => "max",
            AggregateFn::Count => "count",
            AggregateFn::Avg => "avg",
            AggregateFn::Sum => "sum",
        }
    }

    /// Apply to the values of one binding. `None` means the output stays absent;
    /// `Err` marks a non-numeric input.
    pub fn apply(self, values: &[String]) -> Result<Option<String>, String> {
        if self == AggregateFn::Count {
            return Ok(Some(values.len().to_string()));
        }
        if values.is_empty() {
            return Ok(None);
        }
        let nums: Vec<Decimal> = values.iter().map(|v| parse_decimal(v).ok_or_else(|| v.clone())).collect::<Result<_, _>>()?;
        let out = match self {
            AggregateFn::Min => nums.iter().copied().min().unwrap(),
            AggregateFn::Max => nums.iter().copied().max().unwrap(),
            AggregateFn::Sum => checked_sum(&nums).ok_or("decimal overflow")?,
            AggregateFn::Avg => checked_sum(&nums)
                .and_then(|s| s.checked_div(Decimal::from(nums.len())))
                .ok_or("decimal overflow")?,
            AggregateFn::Count => unreachable!(),
        };
        Ok(Some(format_decimal(out)))
    }
}

fn checked_sum(nums: &[Decimal]) -> Option<Decimal> {
    nums.iter().try_fold(Decimal::ZERO, |acc, n| acc.checked_add(*n))
}

impl fmt::Display for AggregateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AggregateFn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "min" => AggregateFn::Min,
            "max" => AggregateFn::Max,
            "count" => AggregateFn::Count,
            "avg" => AggregateFn::Avg,
            "sum" => AggregateFn::Sum,
            other => return Err(format!("unknown aggregate function {other:?}")),
        })
    }
}

/// Per tuple, apply `fun` to the values bound to `attr` and bind the result
/// to `out`, a fresh single-step path, as a synthetic leaf tree. Blocking;
/// output order is not guaranteed.
pub fn x_aggregate(rel: XRelation, fun: AggregateFn, attr: &Attr, out: &Path) -> Result<XRelation, AlgebraError> {
    let pos = rel.schema.resolve(attr)?;
    if out.len() != 1 {
        return Err(AlgebraError::Plan(format!("aggregate output {out} must be a single step")));
    }
    if rel.schema.guide.contains(out) {
        return Err(AlgebraError::Plan(format!("aggregate output {out} already in the guide")));
    }
    let mut attributes = rel.schema.attributes.clone();
    attributes.push(Attr::new(out.clone()));
    let mut guide = rel.schema.guide.clone();
    guide.insert(out.clone());
    let schema = Arc::new(XRelationSchema { attributes, guide });
    let label = out.as_str().to_string();
    let XRelation { diagnostics, tuples, .. } = rel;
    let diag = diagnostics.clone();
    let rows = deferred(move || {
        let input: Vec<XTuple> = tuples.collect::<Result<_, _>>()?;
        Ok(input
            .into_iter()
            .map(|mut t| {
                let result = match fun.apply(&t.values(pos)) {
                    Ok(v) => v,
                    Err(_) => {
                        diag.aggregate_failure();
                        None
                    }
                };
                let binding = match result {
                    Some(v) => {
                        t.forest.push(Arc::new(XTree::leaf(&label, &v)));
                        vec![NodeRef::new(t.forest.len() - 1, 0)]
                    }
                    None => Vec::new(),
                };
                t.refs.push(binding);
                t
            })
            .collect())
    });
    Ok(XRelation::derived(diagnostics, schema, false, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn sum_is_exact() {
        assert_eq!(AggregateFn::Sum.apply(&s(&["10", "20.5"])).unwrap().unwrap(), "30.5");
        assert_eq!(AggregateFn::Sum.apply(&s(&["0.1", "0.2"])).unwrap().unwrap(), "0.3");
    }

    #[test]
    fn count_and_empty() {
        assert_eq!(AggregateFn::Count.apply(&s(&["a", "b", "c"])).unwrap().unwrap(), "3");
        assert_eq!(AggregateFn::Count.apply(&[]).unwrap().unwrap(), "0");
        assert_eq!(AggregateFn::Max.apply(&[]).unwrap(), None);
    }

    #[test]
    fn avg_min_max() {
        assert_eq!(AggregateFn::Avg.apply(&s(&["45"])).unwrap().unwrap(), "45");
        assert_eq!(AggregateFn::Avg.apply(&s(&["1", "2"])).unwrap().unwrap(), "1.5");
        assert_eq!(AggregateFn::Min.apply(&s(&["3", "-2", "10"])).unwrap().unwrap(), "-2");
        assert_eq!(AggregateFn::Max.apply(&s(&["3", "-2", "10"])).unwrap().unwrap(), "10");
    }

    #[test]
    fn non_numeric_is_an_error() {
        assert!(AggregateFn::Sum.apply(&s(&["1", "x"])).is_err());
    }
}
