//! Query frontend: parse the FLWR subset, normalize it, and canonize it into
//! simple queries plus one reconstruction query.

pub mod ast;
mod canonize;
mod normalize;
mod parser;
mod print;

pub use ast::{Cond, ForClause, ForSource, Hint, LetClause, LetExpr, Operand, QueryAst, ReturnItem, VarPath};
pub use canonize::{canonize, Canonical, ReconNode, ReconstructionQuery, SimpleFor, SimpleQuery, SimpleSource};
pub use normalize::normalize;
pub use parser::parse;

pub(crate) use canonize::flat_paths;


#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrontendError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown variable ${name} at {line}:{col}")]
    UnknownVariable { name: String, line: usize, col: usize },
    #[error("variable ${name} declared twice ({line}:{col})")]
    DuplicateVariable { name: String, line: usize, col: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// The worked nation/supplier/partsupp query.
pub const NATION_SUPPLIERS_QUERY: &str = r#"for $n in Collection("*")/nation
where contains($n/comment, "iron")
return
<nation>
<name>$n/name</name>
<suppliers>
for $s in Collection("*")/supplier,
    $ps in Collection("*")/partsupp
where $s/id/suppkey = $ps/suppkey
    and $ps/availqty > 45
    and $s/contact/localisation/nationkey = $n/nationkey
return
<supplier>$s/name</supplier>
<phone>$s/contact/phone</phone>
<partsupp>
<partkey>$ps/partkey</partkey>
<supplycost>$ps/supplycost</supplycost>
</partsupp>
</suppliers>
</nation>
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_query_canonical_form() {
        let ast = parse(NATION_SUPPLIERS_QUERY).unwrap();
        assert_eq!(ast.fors.len(), 1);
        let inner = ast.nested();
        assert_eq!(inner.len(), 1);
        assert_eq!(inner[0].fors.iter().map(|f| f.var.as_str()).collect::<Vec<_>>(), ["s", "ps"]);
        assert_eq!(inner[0].where_.as_ref().unwrap().conjuncts().len(), 3);
        let c = canonize(&normalize(&ast).unwrap()).unwrap();
        assert_eq!(
            c.to_string(),
            "let t1 ::= for $n in Collection(\"*\")/nation where contains($n/comment, \"iron\") return ($n/nationkey, $n/name)\n\
             let t2 ::= for $n in $t1, $s in Collection(\"*\")/supplier, $ps in Collection(\"*\")/partsupp \
             where $s/id/suppkey = $ps/suppkey and $ps/availqty > 45 and $s/contact/localisation/nationkey = $n/nationkey \
             return ($s/contact/localisation/nationkey, $s/id/suppkey, $s/name, $s/contact/phone, ($ps/suppkey, $ps/partkey, $ps/supplycost))\n\
             <nation> <name>$n/name</name> <suppliers> <supplier>$s/name</supplier> <phone>$s/contact/phone</phone> \
             <partsupp> <partkey>$ps/partkey</partkey> <supplycost>$ps/supplycost</supplycost> </partsupp> </suppliers> </nation>"
        );
    }
}
