//! Query text rendering. `parse(print(q)) == q` for every parsed `q`.

use std::fmt::{self, Display, Write};

use super::ast::{Cond, ForClause, ForSource, LetExpr, Operand, QueryAst, ReturnItem};
use crate::value::Value;

impl Display for ForSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForSource::Collection { name, steps } => {
                write!(f, "Collection({})", Value::Str(name.clone()))?;
                for s in steps {
                    write!(f, "/{s}")?;
                }
                Ok(())
            }
            ForSource::Var(p) => write!(f, "{p}"),
        }
    }
}

impl Display for ForClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${} in {}", self.var, self.source)
    }
}

impl Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Path(p) => write!(f, "{p}"),
            Operand::Lit(v) => write!(f, "{v}"),
        }
    }
}

impl Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cond::Cmp { lhs, op, rhs } => write!(f, "{lhs} {} {rhs}", op.symbol()),
            Cond::Contains { path, needle } => write!(f, "contains({path}, {})", Value::Str(needle.clone())),
            Cond::In { path, values } => {
                let vs: Vec<String> = values.iter().map(Value::to_string).collect();
                write!(f, "{path} = ({})", vs.join(", "))
            }
            Cond::And(items) => {
                for (i, c) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" and ")?;
                    }
                    match c {
                        Cond::Or(_) | Cond::And(_) => write!(f, "({c})")?,
                        c => write!(f, "{c}")?,
                    }
                }
                Ok(())
            }
            Cond::Or(items) => {
                for (i, c) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" or ")?;
                    }
                    match c {
                        Cond::Or(_) => write!(f, "({c})")?,
                        c => write!(f, "{c}")?,
                    }
                }
                Ok(())
            }
            Cond::Not(c) => write!(f, "not({c})"),
        }
    }
}

impl Display for ReturnItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReturnItem::Element { label, children } if children.is_empty() => write!(f, "<{label}/>"),
            ReturnItem::Element { label, children } => {
                write!(f, "<{label}>")?;
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_char(' ')?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, "</{label}>")
            }
            ReturnItem::Text(t) => write!(f, "{}", Value::Str(t.clone())),
            ReturnItem::Path(p) => write!(f, "{p}"),
            ReturnItem::Group(items) => write!(f, "({})", join(items, ", ")),
            ReturnItem::Aggregate { fun, path } => write!(f, "aggregate({fun}, {path})"),
            ReturnItem::Flwr(q) => write!(f, "{q}"),
        }
    }
}

fn join<T: Display>(items: &[T], sep: &str) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

impl Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for h in &self.hints {
            write!(f, "(:: hint join={} algo={} ::) ", h.join, h.algo.name())?;
        }
        write!(f, "for {}", join(&self.fors, ", "))?;
        for l in &self.lets {
            match &l.expr {
                LetExpr::Path(p) => write!(f, " let ${} := {p}", l.var)?,
                LetExpr::Flwr(q) => write!(f, " let ${} := ({q})", l.var)?,
            }
        }
        if let Some(w) = &self.where_ {
            write!(f, " where {w}")?;
        }
        write!(f, " return {}", join(&self.ret, ", "))
    }
}

#[cfg(test)]
mod tests {
    use crate::frontend::parse;

    #[test]
    fn print_parse_fixpoint() {
        for text in [
            "for $x in Collection(\"C\")/a return <r>$x/b</r>",
            "(:: hint join=t1_t2 algo=dependent ::) for $a in collection(\"A\"), $b in Collection(\"*\")/b/c \
             let $k := $a/k where ($a/x = 1 or $b/y != \"q\\\"z\") and not(contains($k, \"iron\")) and $a/v = (1, 2.5) \
             return <r>\"t\" <e/> ($a/x, ($b/y,)) aggregate(avg, $b/v)</r>, $a",
            "for $n in Collection(\"*\")/nation return <n>$n/name <s>for $s in Collection(\"*\")/s where $s/k = $n/k return <x>$s/name</x> $s/p</s></n>",
            "for $x in Collection(\"C\")/a let $q := (for $y in Collection(\"D\")/d return $y) return $x",
        ] {
            let q = parse(text).unwrap();
            let printed = q.to_string();
            let again = parse(&printed).unwrap_or_else(|e| panic!("{printed}: {e}"));
            assert_eq!(again, q, "{printed}");
            assert_eq!(again.to_string(), printed);
        }
    }
}
