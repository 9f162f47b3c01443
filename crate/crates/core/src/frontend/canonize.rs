//! Canonization: one simple query per FLWR level plus a reconstruction
//! template. A nested level ranges over the simple query that declares the
//! outer variables it references.

use std::collections::HashMap;
use std::fmt;

use super::ast::{Cond, ForSource, Hint, QueryAst, ReturnItem, VarPath};
use super::FrontendError;
use crate::value::Value;
use crate::xalgebra::aggregate::AggregateFn;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SimpleSource {
    Collection { name: String, steps: Vec<String> },
    /// Output of an earlier simple query.
    Query(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimpleFor {
    pub var: String,
    pub source: SimpleSource,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimpleQuery {
    pub id: String,
    pub parent: Option<String>,
    pub fors: Vec<SimpleFor>,
    pub where_: Option<Cond>,
    /// Path expressions only, one parenthesized group per variable, later
    /// variables nested inside earlier ones.
    pub ret: Vec<ReturnItem>,
    /// The same grouping restricted to paths used by the reconstruction template.
    pub template_ret: Vec<ReturnItem>,
}

impl SimpleQuery {
    /// Variables bound to collections (not inherited from another query).
    pub fn own_vars(&self) -> Vec<&str> {
        self.fors.iter().filter(|f| matches!(f.source, SimpleSource::Collection { .. })).map(|f| f.var.as_str()).collect()
    }

    pub fn return_paths(&self) -> Vec<&VarPath> {
        flat_paths(&self.ret)
    }
}

pub(crate) fn flat_paths(items: &[ReturnItem]) -> Vec<&VarPath> {
    let mut out = Vec::new();
    for i in items {
        match i {
            ReturnItem::Path(p) => out.push(p),
            ReturnItem::Group(g) => out.extend(flat_paths(g)),
            _ => {}
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReconNode {
    Element { label: String, children: Vec<ReconNode> },
    Text(String),
    Placeholder(VarPath),
    Aggregate { fun: AggregateFn, path: VarPath },
    /// The output of a nested FLWR: repeated once per tuple of simple query `query`.
    Nested { query: String, children: Vec<ReconNode> },
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ReconstructionQuery {
    pub nodes: Vec<ReconNode>,
}

impl ReconstructionQuery {
    pub fn placeholders(&self) -> Vec<&VarPath> {
        fn walk<'a>(n: &'a ReconNode, out: &mut Vec<&'a VarPath>) {
            match n {
                ReconNode::Element { children, .. } | ReconNode::Nested { children, .. } => {
                    children.iter().for_each(|c| walk(c, out))
                }
                ReconNode::Placeholder(p) | ReconNode::Aggregate { path: p, .. } => out.push(p),
                ReconNode::Text(_) => {}
            }
        }
        let mut out = Vec::new();
        self.nodes.iter().for_each(|n| walk(n, &mut out));
        out
    }

    /// Whether every template leaf is a bare path (no constructor, text or aggregate).
    pub fn is_path_sequence(&self) -> bool {
        self.nodes.iter().all(|n| matches!(n, ReconNode::Placeholder(_)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Canonical {
    pub simple: Vec<SimpleQuery>,
    pub recon: ReconstructionQuery,
    pub hints: Vec<Hint>,
}

#[derive(Default)]
struct VarInfo {
    query: String,
    correlation: Vec<VarPath>,
    join: Vec<VarPath>,
    template: Vec<VarPath>,
}

fn push_unique(v: &mut Vec<VarPath>, p: &VarPath) {
    if !v.contains(p) {
        v.push(p.clone());
    }
}

struct Level<'a> {
    id: String,
    parent: Option<String>,
    q: &'a QueryAst,
}

/// Split a normalized query into simple queries and a reconstruction query.
pub fn canonize(q: &QueryAst) -> Result<Canonical, FrontendError> {
    let mut levels = Vec::new();
    collect_levels(q, None, &mut levels);
    let mut vars: HashMap<String, VarInfo> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    for l in &levels {
        for f in &l.q.fors {
            if !matches!(f.source, ForSource::Collection { .. }) {
                return Err(FrontendError::Unsupported(format!("${} is not bound to a collection; normalize first", f.var)));
            }
            vars.insert(f.var.clone(), VarInfo { query: l.id.clone(), ..Default::default() });
            order.push(f.var.clone());
        }
        if !l.q.lets.is_empty() {
            return Err(FrontendError::Unsupported("let clauses remain; normalize first".into()));
        }
    }
    for l in &levels {
        let own: Vec<&str> = l.q.fors.iter().map(|f| f.var.as_str()).collect();
        if let Some(w) = &l.q.where_ {
            for atom in w.conjuncts() {
                let avars = atom.vars();
                let correlated = avars.iter().any(|v| !own.contains(v));
                for p in atom.paths() {
                    let info = vars.get_mut(&p.var).ok_or_else(|| FrontendError::Unsupported(format!("unbound ${}", p.var)))?;
                    if correlated {
                        push_unique(&mut info.correlation, p);
                    } else if avars.len() >= 2 {
                        push_unique(&mut info.join, p);
                    }
                }
            }
        }
        for p in template_paths(&l.q.ret) {
            let info = vars.get_mut(&p.var).ok_or_else(|| FrontendError::Unsupported(format!("unbound ${}", p.var)))?;
            push_unique(&mut info.template, p);
        }
    }
    let mut simple = Vec::new();
    for l in &levels {
        let own: Vec<&str> = l.q.fors.iter().map(|f| f.var.as_str()).collect();
        let mut fors = Vec::new();
        if let Some(w) = &l.q.where_ {
            for v in w.vars() {
                if !own.contains(&v) && !fors.iter().any(|f: &SimpleFor| f.var == v) {
                    fors.push(SimpleFor { var: v.to_string(), source: SimpleSource::Query(vars[v].query.clone()) });
                }
            }
        }
        for f in &l.q.fors {
            let ForSource::Collection { name, steps } = &f.source else { unreachable!() };
            fors.push(SimpleFor { var: f.var.clone(), source: SimpleSource::Collection { name: name.clone(), steps: steps.clone() } });
        }
        let all = |v: &str| {
            let i = &vars[v];
            let mut out = Vec::new();
            for p in i.correlation.iter().chain(&i.join).chain(&i.template) {
                push_unique(&mut out, p);
            }
            out
        };
        let ret = nest_groups(&own, &|v| all(v));
        let template_ret = nest_groups(&own, &|v| vars[v].template.clone());
        simple.push(SimpleQuery {
            id: l.id.clone(),
            parent: l.parent.clone(),
            fors,
            where_: l.q.where_.clone(),
            ret,
            template_ret,
        });
    }
    let mut next = 1;
    let recon = ReconstructionQuery { nodes: recon_seq(&q.ret, &mut next) };
    Ok(Canonical { simple, recon, hints: q.hints.clone() })
}

fn collect_levels<'a>(q: &'a QueryAst, parent: Option<String>, out: &mut Vec<Level<'a>>) {
    let id = format!("t{}", out.len() + 1);
    out.push(Level { id: id.clone(), parent, q });
    for inner in q.nested() {
        collect_levels(inner, Some(id.clone()), out);
    }
}

/// Paths in return position outside nested FLWRs.
fn template_paths(items: &[ReturnItem]) -> Vec<&VarPath> {
    let mut out = Vec::new();
    for i in items {
        match i {
            ReturnItem::Path(p) | ReturnItem::Aggregate { path: p, .. } => out.push(p),
            ReturnItem::Element { children, .. } | ReturnItem::Group(children) => out.extend(template_paths(children)),
            ReturnItem::Text(_) | ReturnItem::Flwr(_) => {}
        }
    }
    out
}

/// `(v1 paths…, (v2 paths…, (…)))`, skipping variables without paths.
fn nest_groups(vars: &[&str], paths_of: &dyn Fn(&str) -> Vec<VarPath>) -> Vec<ReturnItem> {
    let mut inner: Vec<ReturnItem> = Vec::new();
    for v in vars.iter().rev() {
        let mut items: Vec<ReturnItem> = paths_of(v).into_iter().map(ReturnItem::Path).collect();
        if items.is_empty() {
            continue;
        }
        items.extend(inner);
        inner = vec![ReturnItem::Group(items)];
    }
    inner
}

fn recon_seq(items: &[ReturnItem], next: &mut usize) -> Vec<ReconNode> {
    items.iter().flat_map(|i| recon_nodes(i, next)).collect()
}

/// `next` tracks simple-query ids, assigned in the same preorder as `collect_levels`.
fn recon_nodes(i: &ReturnItem, next: &mut usize) -> Vec<ReconNode> {
    match i {
        ReturnItem::Element { label, children } => {
            vec![ReconNode::Element { label: label.clone(), children: recon_seq(children, next) }]
        }
        ReturnItem::Text(t) => vec![ReconNode::Text(t.clone())],
        ReturnItem::Path(p) => vec![ReconNode::Placeholder(p.clone())],
        ReturnItem::Aggregate { fun, path } => vec![ReconNode::Aggregate { fun: *fun, path: path.clone() }],
        ReturnItem::Group(items) => recon_seq(items, next),
        ReturnItem::Flwr(q) => {
            *next += 1;
            let query = format!("t{next}");
            vec![ReconNode::Nested { query, children: recon_seq(&q.ret, next) }]
        }
    }
}

impl fmt::Display for SimpleFor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            SimpleSource::Collection { name, steps } => {
                let src = ForSource::Collection { name: name.clone(), steps: steps.clone() };
                write!(f, "${} in {src}", self.var)
            }
            SimpleSource::Query(id) => write!(f, "${} in ${id}", self.var),
        }
    }
}

impl fmt::Display for SimpleQuery {
    /// `let tN ::= for … where … return (…)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fors: Vec<String> = self.fors.iter().map(|x| x.to_string()).collect();
        write!(f, "let {} ::= for {}", self.id, fors.join(", "))?;
        if let Some(w) = &self.where_ {
            write!(f, " where {w}")?;
        }
        let ret: Vec<String> = self.ret.iter().map(|x| x.to_string()).collect();
        write!(f, " return {}", ret.join(", "))
    }
}

impl fmt::Display for ReconNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReconNode::Element { label, children } if children.is_empty() => write!(f, "<{label}/>"),
            ReconNode::Element { label, children } => {
                let inline = children.len() == 1 && !matches!(children[0], ReconNode::Element { .. } | ReconNode::Nested { .. });
                write!(f, "<{label}>")?;
                for c in children {
                    if inline {
                        write!(f, "{c}")?;
                    } else {
                        write!(f, " {c}")?;
                    }
                }
                if !inline {
                    f.write_str(" ")?;
                }
                write!(f, "</{label}>")
            }
            ReconNode::Text(t) => write!(f, "{}", Value::Str(t.clone())),
            ReconNode::Placeholder(p) => write!(f, "{p}"),
            ReconNode::Aggregate { fun, path } => write!(f, "aggregate({fun}, {path})"),
            ReconNode::Nested { children, .. } => {
                let parts: Vec<String> = children.iter().map(|c| c.to_string()).collect();
                f.write_str(&parts.join(" "))
            }
        }
    }
}

impl fmt::Display for ReconstructionQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.nodes.iter().map(|n| n.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

impl fmt::Display for Canonical {
    /// One simple query per line, then the reconstruction query.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.simple {
            writeln!(f, "{s}")?;
        }
        write!(f, "{}", self.recon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{normalize, parse};

    fn canon(text: &str) -> Canonical {
        canonize(&normalize(&parse(text).unwrap()).unwrap()).unwrap()
    }

    #[test]
    fn constructor_free_query() {
        let c = canon("for $x in Collection(\"C\")/a where $x/k > 1 return $x/b");
        assert_eq!(c.simple.len(), 1);
        assert_eq!(c.simple[0].to_string(), "let t1 ::= for $x in Collection(\"C\")/a where $x/k > 1 return ($x/b)");
        assert_eq!(c.recon.nodes, vec![ReconNode::Placeholder(VarPath::new("x", "b"))]);
        assert!(c.recon.is_path_sequence());
    }

    #[test]
    fn sibling_inner_queries_share_the_outer_query() {
        let c = canon(
            "for $n in Collection(\"*\")/nation return <n>$n/name \
             <a>for $s in Collection(\"*\")/supplier where $s/nk = $n/nationkey return $s/name</a> \
             <b>for $c in Collection(\"*\")/customer where $c/nk = $n/nationkey return $c/name</b></n>",
        );
        let text: Vec<String> = c.simple.iter().map(|s| s.to_string()).collect();
        assert_eq!(
            text,
            [
                "let t1 ::= for $n in Collection(\"*\")/nation return ($n/nationkey, $n/name)",
                "let t2 ::= for $n in $t1, $s in Collection(\"*\")/supplier where $s/nk = $n/nationkey return ($s/nk, $s/name)",
                "let t3 ::= for $n in $t1, $c in Collection(\"*\")/customer where $c/nk = $n/nationkey return ($c/nk, $c/name)",
            ]
        );
        assert_eq!(c.simple[1].parent.as_deref(), Some("t1"));
        assert_eq!(c.simple[2].parent.as_deref(), Some("t1"));
        assert_eq!(c.recon.to_string(), "<n> $n/name <a> $s/name </a> <b> $c/name </b> </n>");
    }

    #[test]
    fn no_atom_is_lost() {
        let n = normalize(
            &parse(
                "for $a in Collection(\"A\")/a, $b in Collection(\"B\")/b where $a/k = $b/k and $a/x > 3 and contains($b/c, \"z\") \
                 return <r>$a/y <i>for $c in Collection(\"C\")/c where $c/k = $b/k and ($c/q = 1 or $c/q = 2) return $c/z</i></r>",
            )
            .unwrap(),
        )
        .unwrap();
        let c = canonize(&n).unwrap();
        let count = |w: &Option<Cond>| w.as_ref().map_or(0, |w| w.conjuncts().len());
        let inner = n.nested()[0];
        assert_eq!(c.simple.iter().map(|s| count(&s.where_)).sum::<usize>(), count(&n.where_) + count(&inner.where_));
        assert_eq!(c.simple[0].to_string().split(" return ").nth(1).unwrap(), "($a/k, $a/y, ($b/k))");
    }
}
