use std::fmt;

use crate::value::Value;
use crate::xalgebra::aggregate::AggregateFn;
use crate::xalgebra::join::JoinAlgo;
use crate::xalgebra::predicate::CmpOp;

/// `$var/step/step`; steps may be `*`. An empty step list is the variable itself.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VarPath {
    pub var: String,
    pub steps: Vec<String>,
}

impl VarPath {
    pub fn new(var: &str, rel: &str) -> VarPath {
        let steps = if rel.is_empty() { Vec::new() } else { rel.split('/').map(str::to_string).collect() };
        VarPath { var: var.to_string(), steps }
    }

    pub fn rel(&self) -> String {
        self.steps.join("/")
    }

    /// Rebase onto another variable path: `$w/c` with `$w := $x/b` becomes `$x/b/c`.
    pub fn rebased(&self, onto: &VarPath) -> VarPath {
        VarPath { var: onto.var.clone(), steps: onto.steps.iter().chain(&self.steps).cloned().collect() }
    }
}

impl fmt::Display for VarPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${}", self.var)?;
        for s in &self.steps {
            write!(f, "/{s}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ForSource {
    /// `Collection("NAME")/p`; the name may be `*`.
    Collection { name: String, steps: Vec<String> },
    /// Iteration over another variable's path.
    Var(VarPath),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForClause {
    pub var: String,
    pub source: ForSource,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LetExpr {
    Path(VarPath),
    Flwr(Box<QueryAst>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LetClause {
    pub var: String,
    pub expr: LetExpr,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Path(VarPath),
    Lit(Value),
}

impl Operand {
    pub fn path(&self) -> Option<&VarPath> {
        match self {
            Operand::Path(p) => Some(p),
            Operand::Lit(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Cond {
    Cmp { lhs: Operand, op: CmpOp, rhs: Operand },
    Contains { path: VarPath, needle: String },
    /// `$x/p = (v1, v2, …)`: general comparison against a literal sequence.
    In { path: VarPath, values: Vec<Value> },
    And(Vec<Cond>),
    Or(Vec<Cond>),
    Not(Box<Cond>),
}

impl Cond {
    pub fn paths(&self) -> Vec<&VarPath> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a VarPath>) {
        match self {
            Cond::Cmp { lhs, rhs, .. } => out.extend(lhs.path().into_iter().chain(rhs.path())),
            Cond::Contains { path, .. } | Cond::In { path, .. } => out.push(path),
            Cond::And(v) | Cond::Or(v) => v.iter().for_each(|c| c.collect(out)),
            Cond::Not(c) => c.collect(out),
        }
    }

    /// Distinct variables in first-appearance order.
    pub fn vars(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for p in self.paths() {
            if !out.contains(&p.var.as_str()) {
                out.push(&p.var);
            }
        }
        out
    }

    pub fn conjuncts(&self) -> Vec<&Cond> {
        match self {
            Cond::And(v) => v.iter().flat_map(|c| c.conjuncts()).collect(),
            c => vec![c],
        }
    }

    /// Conjunction with nested `and`s flattened; a single item stays bare.
    pub fn and(items: Vec<Cond>) -> Option<Cond> {
        let mut flat = Vec::new();
        for c in items {
            match c {
                Cond::And(inner) => flat.extend(inner),
                c => flat.push(c),
            }
        }
        match flat.len() {
            0 => None,
            1 => flat.pop(),
            _ => Some(Cond::And(flat)),
        }
    }

    pub fn map_paths(&self, f: &mut impl FnMut(&VarPath) -> VarPath) -> Cond {
        let op = |o: &Operand, f: &mut dyn FnMut(&VarPath) -> VarPath| match o {
            Operand::Path(p) => Operand::Path(f(p)),
            Operand::Lit(v) => Operand::Lit(v.clone()),
        };
        match self {
            Cond::Cmp { lhs, op: o, rhs } => Cond::Cmp { lhs: op(lhs, f), op: *o, rhs: op(rhs, f) },
            Cond::Contains { path, needle } => Cond::Contains { path: f(path), needle: needle.clone() },
            Cond::In { path, values } => Cond::In { path: f(path), values: values.clone() },
            Cond::And(v) => Cond::And(v.iter().map(|c| c.map_paths(f)).collect()),
            Cond::Or(v) => Cond::Or(v.iter().map(|c| c.map_paths(f)).collect()),
            Cond::Not(c) => Cond::Not(Box::new(c.map_paths(f))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReturnItem {
    Element { label: String, children: Vec<ReturnItem> },
    Text(String),
    Path(VarPath),
    /// Parenthesized sequence.
    Group(Vec<ReturnItem>),
    Aggregate { fun: AggregateFn, path: VarPath },
    Flwr(Box<QueryAst>),
}

impl ReturnItem {
    pub fn element(label: &str, children: Vec<ReturnItem>) -> ReturnItem {
        ReturnItem::Element { label: label.to_string(), children }
    }
}

/// Per-join algorithm directive: `(:: hint join=t1_t2 algo=dependent ::)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hint {
    pub join: String,
    pub algo: JoinAlgo,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryAst {
    pub fors: Vec<ForClause>,
    pub lets: Vec<LetClause>,
    pub where_: Option<Cond>,
    pub ret: Vec<ReturnItem>,
    /// Only the outermost query carries hints.
    pub hints: Vec<Hint>,
}

impl QueryAst {
    /// Nested FLWRs in return position, in document order, not descending into them.
    pub fn nested(&self) -> Vec<&QueryAst> {
        fn walk<'a>(items: &'a [ReturnItem], out: &mut Vec<&'a QueryAst>) {
            for i in items {
                match i {
                    ReturnItem::Element { children, .. } | ReturnItem::Group(children) => walk(children, out),
                    ReturnItem::Flwr(q) => out.push(q),
                    _ => {}
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.ret, &mut out);
        out
    }

    pub fn declared_vars(&self) -> impl Iterator<Item = &str> {
        self.fors.iter().map(|f| f.var.as_str()).chain(self.lets.iter().map(|l| l.var.as_str()))
    }
}
