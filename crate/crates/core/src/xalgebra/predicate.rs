use std::cmp::Ordering;
use std::fmt;

use super::relation::{Attr, Diagnostics, XRelationSchema, XTuple};
use super::AlgebraError;
use crate::value::{compare_values, parse_decimal, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    /// The operator with its operands swapped (`a < b` iff `b > a`).
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            o => o,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Attr(Attr),
    Const(Value),
}

/// Boolean expression over attribute atoms.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Predicate {
    Compare { lhs: Attr, op: CmpOp, rhs: Operand },
    Contains { attr: Attr, needle: String },
    /// Key-set membership, used for batched dependent-join lookups.
    InSet { attr: Attr, values: Vec<Value> },
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    pub fn always() -> Predicate {
        Predicate::And(Vec::new())
    }

    pub fn never() -> Predicate {
        Predicate::Or(Vec::new())
    }

    pub fn cmp(lhs: impl Into<Attr>, op: CmpOp, rhs: Value) -> Predicate {
        Predicate::Compare { lhs: lhs.into(), op, rhs: Operand::Const(rhs) }
    }

    pub fn cmp_attr(lhs: impl Into<Attr>, op: CmpOp, rhs: impl Into<Attr>) -> Predicate {
        Predicate::Compare { lhs: lhs.into(), op, rhs: Operand::Attr(rhs.into()) }
    }

    pub fn contains(attr: impl Into<Attr>, needle: &str) -> Predicate {
        Predicate::Contains { attr: attr.into(), needle: needle.to_string() }
    }

    pub fn is_always(&self) -> bool {
        matches!(self, Predicate::And(v) if v.is_empty())
    }

    /// Top-level conjuncts, with nested `And`s flattened.
    pub fn conjuncts(&self) -> Vec<&Predicate> {
        match self {
            Predicate::And(items) => items.iter().flat_map(|p| p.conjuncts()).collect(),
            p => vec![p],
        }
    }

    pub fn and(items: Vec<Predicate>) -> Predicate {
        let mut flat = Vec::new();
        for p in items {
            match p {
                Predicate::And(inner) => flat.extend(inner),
                p => flat.push(p),
            }
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Predicate::And(flat)
        }
    }

    pub fn attrs(&self) -> Vec<&Attr> {
        let mut out = Vec::new();
        self.collect_attrs(&mut out);
        out
    }

    fn collect_attrs<'a>(&'a self, out: &mut Vec<&'a Attr>) {
        match self {
            Predicate::Compare { lhs, rhs, .. } => {
                out.push(lhs);
                if let Operand::Attr(a) = rhs {
                    out.push(a);
                }
            }
            Predicate::Contains { attr, .. } | Predicate::InSet { attr, .. } => out.push(attr),
            Predicate::And(v) | Predicate::Or(v) => v.iter().for_each(|p| p.collect_attrs(out)),
            Predicate::Not(p) => p.collect_attrs(out),
        }
    }

    pub fn bind(&self, schema: &XRelationSchema) -> Result<BoundPredicate, AlgebraError> {
        Ok(match self {
            Predicate::Compare { lhs, op, rhs } => BoundPredicate::Compare {
                lhs: schema.resolve(lhs)?,
                op: *op,
                rhs: match rhs {
                    Operand::Attr(a) => BoundOperand::Attr(schema.resolve(a)?),
                    Operand::Const(v) => BoundOperand::Const(v.clone()),
                },
            },
            Predicate::Contains { attr, needle } => {
                BoundPredicate::Contains { attr: schema.resolve(attr)?, needle: needle.clone() }
            }
            Predicate::InSet { attr, values } => {
                BoundPredicate::InSet { attr: schema.resolve(attr)?, values: values.iter().map(Value::text).collect() }
            }
            Predicate::And(v) => BoundPredicate::And(v.iter().map(|p| p.bind(schema)).collect::<Result<_, _>>()?),
            Predicate::Or(v) => BoundPredicate::Or(v.iter().map(|p| p.bind(schema)).collect::<Result<_, _>>()?),
            Predicate::Not(p) => BoundPredicate::Not(Box::new(p.bind(schema)?)),
        })
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Compare { lhs, op, rhs } => {
                write!(f, "{} {} ", lhs, op.symbol())?;
                match rhs {
                    Operand::Attr(a) => write!(f, "{a}"),
                    Operand::Const(v) => write!(f, "{v}"),
                }
            }
            Predicate::Contains { attr, needle } => write!(f, "contains({}, {})", attr, Value::Str(needle.clone())),
            Predicate::InSet { attr, values } => {
                let vs: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                write!(f, "{} in ({})", attr, vs.join(", "))
            }
            Predicate::And(v) if v.is_empty() => write!(f, "true"),
            Predicate::Or(v) if v.is_empty() => write!(f, "false"),
            Predicate::And(v) | Predicate::Or(v) => {
                let sep = if matches!(self, Predicate::And(_)) { " and " } else { " or " };
                let parts: Vec<String> = v.iter().map(|p| format!("({p})")).collect();
                f.write_str(&parts.join(sep))
            }
            Predicate::Not(p) => write!(f, "not({p})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoundOperand {
    Attr(usize),
    Const(Value),
}

/// A predicate with attributes resolved to schema positions.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundPredicate {
    Compare { lhs: usize, op: CmpOp, rhs: BoundOperand },
    Contains { attr: usize, needle: String },
    InSet { attr: usize, values: Vec<String> },
    And(Vec<BoundPredicate>),
    Or(Vec<BoundPredicate>),
    Not(Box<BoundPredicate>),
}

impl BoundPredicate {
    /// Atoms are existential over multi-valued bindings; absent attributes make an atom false.
    pub fn eval(&self, t: &XTuple, diag: &Diagnostics) -> bool {
        self.eval_on(&|i| t.values(i), diag)
    }

    /// [`eval`](Self::eval) over the values an accessor yields per attribute position.
    pub fn eval_on(&self, values: &dyn Fn(usize) -> Vec<String>, diag: &Diagnostics) -> bool {
        match self {
            BoundPredicate::Compare { lhs, op, rhs } => {
                let left = values(*lhs);
                match rhs {
                    BoundOperand::Const(Value::Num(n)) => left.iter().any(|v| match parse_decimal(v) {
                        Some(d) => op.holds(d.cmp(n)),
                        None => {
                            diag.non_numeric_comparison();
                            false
                        }
                    }),
                    BoundOperand::Const(Value::Str(s)) => left.iter().any(|v| op.holds(compare_values(v, s))),
                    BoundOperand::Attr(r) => {
                        let right = values(*r);
                        left.iter().any(|a| right.iter().any(|b| op.holds(compare_values(a, b))))
                    }
                }
            }
            BoundPredicate::Contains { attr, needle } => values(*attr).iter().any(|v| v.contains(needle.as_str())),
            BoundPredicate::InSet { attr, values: keys } => {
                values(*attr).iter().any(|v| keys.iter().any(|k| compare_values(v, k) == Ordering::Equal))
            }
            BoundPredicate::And(v) => v.iter().all(|p| p.eval_on(values, diag)),
            BoundPredicate::Or(v) => v.iter().any(|p| p.eval_on(values, diag)),
            BoundPredicate::Not(p) => !p.eval_on(values, diag),
        }
    }
}
