use std::collections::HashMap;

use super::ast::{Cond, ForSource, LetExpr, QueryAst, ReturnItem, VarPath};
use super::FrontendError;

/// Inline LET definitions and `for $y in $x` aliases, flatten conjunctions,
/// and check that every nested FLWR is correlated with an enclosing
/// variable. Idempotent.
pub fn normalize(q: &QueryAst) -> Result<QueryAst, FrontendError> {
    normalize_in(q, &HashMap::new(), &[])
}

fn normalize_in(q: &QueryAst, inherited: &HashMap<String, VarPath>, outer: &[String]) -> Result<QueryAst, FrontendError> {
    let mut subst = inherited.clone();
    let mut fors = Vec::new();
    for f in &q.fors {
        match &f.source {
            ForSource::Collection { .. } => fors.push(f.clone()),
            ForSource::Var(p) => {
                let target = resolve(p, &subst);
                if !target.steps.is_empty() {
                    return Err(FrontendError::Unsupported(format!(
                        "for ${} iterates over the path {target}; only collections and plain variables are supported",
                        f.var
                    )));
                }
                subst.insert(f.var.clone(), target);
            }
        }
    }
    for l in &q.lets {
        match &l.expr {
            LetExpr::Path(p) => {
                let target = resolve(p, &subst);
                subst.insert(l.var.clone(), target);
            }
            LetExpr::Flwr(_) => {
                return Err(FrontendError::Unsupported(format!("let ${} binds a FLWR expression, which cannot be inlined", l.var)))
            }
        }
    }
    let where_ = q.where_.as_ref().map(|w| flatten(&w.map_paths(&mut |p| resolve(p, &subst)))).and_then(|w| match w {
        Cond::And(v) if v.is_empty() => None,
        w => Some(w),
    });
    let mut visible: Vec<String> = outer.to_vec();
    visible.extend(fors.iter().map(|f| f.var.clone()));
    let ret = q.ret.iter().map(|i| rewrite_item(i, &subst, &visible)).collect::<Result<_, _>>()?;
    Ok(QueryAst { fors, lets: Vec::new(), where_, ret, hints: q.hints.clone() })
}

fn resolve(p: &VarPath, subst: &HashMap<String, VarPath>) -> VarPath {
    match subst.get(&p.var) {
        Some(target) => p.rebased(target),
        None => p.clone(),
    }
}

fn rewrite_item(i: &ReturnItem, subst: &HashMap<String, VarPath>, visible: &[String]) -> Result<ReturnItem, FrontendError> {
    Ok(match i {
        ReturnItem::Element { label, children } => ReturnItem::Element {
            label: label.clone(),
            children: children.iter().map(|c| rewrite_item(c, subst, visible)).collect::<Result<_, _>>()?,
        },
        ReturnItem::Group(items) => {
            ReturnItem::Group(items.iter().map(|c| rewrite_item(c, subst, visible)).collect::<Result<_, _>>()?)
        }
        ReturnItem::Text(t) => ReturnItem::Text(t.clone()),
        ReturnItem::Path(p) => ReturnItem::Path(resolve(p, subst)),
        ReturnItem::Aggregate { fun, path } => ReturnItem::Aggregate { fun: *fun, path: resolve(path, subst) },
        ReturnItem::Flwr(inner) => {
            let n = normalize_in(inner, subst, visible)?;
            let correlated = n.where_.as_ref().is_some_and(|w| w.vars().iter().any(|v| visible.iter().any(|o| o == v)));
            if !correlated {
                return Err(FrontendError::Unsupported(
                    "nested FLWR without a where-clause reference to an enclosing variable".into(),
                ));
            }
            ReturnItem::Flwr(Box::new(n))
        }
    })
}

/// Flatten nested `and`/`or` of the same kind.
fn flatten(c: &Cond) -> Cond {
    match c {
        Cond::And(items) => {
            let mut out = Vec::new();
            for i in items.iter().map(flatten) {
                match i {
                    Cond::And(inner) => out.extend(inner),
                    i => out.push(i),
                }
            }
            if out.len() == 1 {
                out.pop().unwrap()
            } else {
                Cond::And(out)
            }
        }
        Cond::Or(items) => {
            let mut out = Vec::new();
            for i in items.iter().map(flatten) {
                match i {
                    Cond::Or(inner) => out.extend(inner),
                    i => out.push(i),
                }
            }
            if out.len() == 1 {
                out.pop().unwrap()
            } else {
                Cond::Or(out)
            }
        }
        Cond::Not(inner) => Cond::Not(Box::new(flatten(inner))),
        c => c.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    fn norm(text: &str) -> QueryAst {
        normalize(&parse(text).unwrap()).unwrap()
    }

    #[test]
    fn lets_are_inlined() {
        let q = norm("for $x in Collection(\"C\")/a let $c := $x/b, $d := $c/e where $d = 1 return <r>$c</r>");
        assert!(q.lets.is_empty());
        assert_eq!(q, norm("for $x in Collection(\"C\")/a where $x/b/e = 1 return <r>$x/b</r>"));
    }

    #[test]
    fn idempotent_and_flat_fixpoint() {
        let text = "for $x in Collection(\"C\")/a, $y in $x where ($x/k = 1 and ($y/j = 2 and $x/m = 3)) \
                    return <r>for $z in Collection(\"D\")/d where $z/k = $x/k return $z</r>";
        let once = norm(text);
        assert_eq!(normalize(&once).unwrap(), once);
        assert_eq!(once.where_.as_ref().unwrap().conjuncts().len(), 3);
        assert_eq!(once.fors.len(), 1);
        let flat = parse("for $x in Collection(\"C\")/a return $x/b").unwrap();
        assert_eq!(normalize(&flat).unwrap(), flat);
    }

    #[test]
    fn unsupported_forms() {
        for text in [
            "for $x in Collection(\"C\")/a let $q := for $y in Collection(\"D\")/d return $y return $x",
            "for $x in Collection(\"C\")/a return <r>for $y in Collection(\"D\")/d return $y</r>",
            "for $x in Collection(\"C\")/a, $y in $x/b return $y",
        ] {
            assert!(matches!(normalize(&parse(text).unwrap()), Err(FrontendError::Unsupported(_))), "{text}");
        }
    }
}
