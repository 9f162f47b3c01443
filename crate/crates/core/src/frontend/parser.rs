//! Recursive-descent parser for the FLWR subset.
//!
//! ```text
//! query   := flwr
//! flwr    := for+ let* (where cond)? return seq
//! for     := 'for' bind (',' bind)*
//! bind    := $v 'in' (Collection("N") ('/' steps)? | varpath)
//! let     := 'let' $v ':=' (varpath | flwr | '(' flwr ')')
//! cond    := and ('or' and)* ; and := not ('and' not)*
//! not     := 'not' '(' cond ')' | '(' cond ')' | atom
//! atom    := contains(varpath, "s") | operand op operand | varpath '=' '(' lit, … ')'
//! seq     := item (','? item)*
//! item    := <a>content</a> | <a/> | varpath | '(' seq? ')' | "text" | aggregate(fn, varpath) | flwr
//! ```
//!
//! Comments are `(: … :)`; hints are `(:: hint join=<id> algo=<name> ::)`.

use super::ast::{Cond, ForClause, ForSource, Hint, LetClause, LetExpr, Operand, QueryAst, ReturnItem, VarPath};
use super::FrontendError;
use crate::value::{parse_decimal, Value};
use crate::xalgebra::join::JoinAlgo;
use crate::xalgebra::predicate::CmpOp;

pub fn parse(text: &str) -> Result<QueryAst, FrontendError> {
    let mut p = Parser { src: text, pos: 0, scopes: vec![Vec::new()], hints: Vec::new() };
    p.skip_ws()?;
    let mut q = p.flwr()?;
    p.skip_ws()?;
    if p.pos < p.src.len() {
        return Err(p.err("unexpected input after the query"));
    }
    q.hints = std::mem::take(&mut p.hints);
    Ok(q)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    scopes: Vec<Vec<String>>,
    hints: Vec<Hint>,
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

fn line_col(src: &str, pos: usize) -> (usize, usize) {
    let before = &src[..pos.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.chars().count(), |i| before[i + 1..].chars().count()) + 1;
    (line, col)
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn err_at(&self, pos: usize, msg: impl Into<String>) -> FrontendError {
        let (line, col) = line_col(self.src, pos);
        FrontendError::Syntax { line, col, msg: msg.into() }
    }

    fn err(&self, msg: impl Into<String>) -> FrontendError {
        self.err_at(self.pos, msg)
    }

    fn skip_ws(&mut self) -> Result<(), FrontendError> {
        loop {
            let r = self.rest();
            let trimmed = r.trim_start();
            self.pos += r.len() - trimmed.len();
            if self.rest().starts_with("(::") {
                self.hint()?;
            } else if self.rest().starts_with("(:") {
                self.comment()?;
            } else {
                return Ok(());
            }
        }
    }

    fn comment(&mut self) -> Result<(), FrontendError> {
        let start = self.pos;
        let mut depth = 0;
        while self.pos < self.src.len() {
            let r = self.rest();
            if r.starts_with("(:") {
                depth += 1;
                self.pos += 2;
            } else if r.starts_with(":)") {
                depth -= 1;
                self.pos += 2;
                if depth == 0 {
                    return Ok(());
                }
            } else {
                self.pos += r.chars().next().unwrap().len_utf8();
            }
        }
        Err(self.err_at(start, "unterminated comment"))
    }

    fn hint(&mut self) -> Result<(), FrontendError> {
        let start = self.pos;
        let body_start = start + 3;
        let Some(end) = self.src[body_start..].find("::)") else {
            return Err(self.err_at(start, "unterminated hint"));
        };
        let body = &self.src[body_start..body_start + end];
        self.pos = body_start + end + 3;
        let mut words = body.split_whitespace();
        if words.next() != Some("hint") {
            return Err(self.err_at(start, "pragma must start with `hint`"));
        }
        let (mut join, mut algo) = (None, None);
        for w in words {
            match w.split_once('=') {
                Some(("join", v)) if !v.is_empty() => join = Some(v.to_string()),
                Some(("algo", v)) => {
                    algo = Some(JoinAlgo::parse(v).ok_or_else(|| self.err_at(start, format!("unknown join algorithm {v:?}")))?)
                }
                _ => return Err(self.err_at(start, format!("bad hint item {w:?}"))),
            }
        }
        match (join, algo) {
            (Some(join), Some(algo)) => {
                self.hints.push(Hint { join, algo });
                Ok(())
            }
            _ => Err(self.err_at(start, "hint needs join=<id> and algo=<name>")),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        let r = self.rest();
        r.len() >= kw.len()
            && r[..kw.len()].eq_ignore_ascii_case(kw)
            && !r[kw.len()..].chars().next().is_some_and(is_name_char)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), FrontendError> {
        if !self.at_keyword(kw) {
            return Err(self.err(format!("expected `{kw}`")));
        }
        self.pos += kw.len();
        self.skip_ws()
    }

    fn eat(&mut self, s: &str) -> Result<bool, FrontendError> {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            self.skip_ws()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), FrontendError> {
        if self.eat(s)? {
            Ok(())
        } else {
            Err(self.err(format!("expected `{s}`")))
        }
    }

    fn name(&mut self) -> Result<String, FrontendError> {
        let r = self.rest();
        match r.chars().next() {
            Some(c) if is_name_start(c) => {}
            _ => return Err(self.err("expected a name")),
        }
        let len = r.find(|c: char| !is_name_char(c)).unwrap_or(r.len());
        self.pos += len;
        Ok(r[..len].to_string())
    }

    /// `/step/step…` with `*` allowed; no whitespace inside a path.
    fn steps(&mut self) -> Result<Vec<String>, FrontendError> {
        let mut steps = Vec::new();
        while self.rest().starts_with('/') {
            self.pos += 1;
            if self.rest().starts_with('*') {
                self.pos += 1;
                steps.push("*".to_string());
            } else {
                steps.push(self.name()?);
            }
        }
        Ok(steps)
    }

    fn is_declared(&self, v: &str) -> bool {
        self.scopes.iter().any(|s| s.iter().any(|d| d == v))
    }

    fn declare(&mut self, v: &str, at: usize) -> Result<(), FrontendError> {
        if self.is_declared(v) {
            let (line, col) = line_col(self.src, at);
            return Err(FrontendError::DuplicateVariable { name: v.to_string(), line, col });
        }
        self.scopes.last_mut().unwrap().push(v.to_string());
        Ok(())
    }

    fn var_name(&mut self) -> Result<(String, usize), FrontendError> {
        let at = self.pos;
        if !self.rest().starts_with('$') {
            return Err(self.err("expected a variable"));
        }
        self.pos += 1;
        Ok((self.name()?, at))
    }

    fn varpath(&mut self) -> Result<VarPath, FrontendError> {
        let (var, at) = self.var_name()?;
        if !self.is_declared(&var) {
            let (line, col) = line_col(self.src, at);
            return Err(FrontendError::UnknownVariable { name: var, line, col });
        }
        let steps = self.steps()?;
        self.skip_ws()?;
        Ok(VarPath { var, steps })
    }

    fn string_lit(&mut self) -> Result<String, FrontendError> {
        let start = self.pos;
        let quote = match self.peek() {
            Some(q @ ('"' | '\'')) => q,
            _ => return Err(self.err("expected a string literal")),
        };
        self.pos += 1;
        let mut out = String::new();
        let mut chars = self.rest().char_indices();
        while let Some((i, c)) = chars.next() {
            if c == quote {
                self.pos += i + 1;
                self.skip_ws()?;
                return Ok(out);
            }
            if c == '\\' {
                match chars.next() {
                    Some((_, e)) => out.push(e),
                    None => break,
                }
            } else {
                out.push(c);
            }
        }
        Err(self.err_at(start, "unterminated string literal"))
    }

    fn number(&mut self) -> Result<Value, FrontendError> {
        let r = self.rest();
        let len = r
            .char_indices()
            .find(|&(i, c)| !(c.is_ascii_digit() || c == '.' || (i == 0 && (c == '-' || c == '+'))))
            .map_or(r.len(), |(i, _)| i);
        let text = &r[..len];
        let d = parse_decimal(text).ok_or_else(|| self.err(format!("bad number {text:?}")))?;
        self.pos += len;
        self.skip_ws()?;
        Ok(Value::Num(d))
    }

    fn literal(&mut self) -> Result<Value, FrontendError> {
        match self.peek() {
            Some('"' | '\'') => Ok(Value::Str(self.string_lit()?)),
            Some(c) if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => self.number(),
            _ => Err(self.err("expected a literal")),
        }
    }

    fn flwr(&mut self) -> Result<QueryAst, FrontendError> {
        if !self.at_keyword("for") {
            return Err(self.err("expected `for`"));
        }
        let mut fors = Vec::new();
        while self.at_keyword("for") {
            self.keyword("for")?;
            loop {
                fors.push(self.binding()?);
                if !self.eat(",")? {
                    break;
                }
            }
        }
        let mut lets = Vec::new();
        while self.at_keyword("let") {
            self.keyword("let")?;
            loop {
                let (var, at) = self.var_name()?;
                self.skip_ws()?;
                self.expect(":=")?;
                let expr = if self.rest().starts_with('$') {
                    LetExpr::Path(self.varpath()?)
                } else {
                    let paren = self.rest().starts_with('(') && !self.rest().starts_with("(:");
                    if paren {
                        self.expect("(")?;
                    }
                    let q = self.nested_flwr()?;
                    if paren {
                        self.expect(")")?;
                    }
                    LetExpr::Flwr(Box::new(q))
                };
                self.declare(&var, at)?;
                lets.push(LetClause { var, expr });
                if !self.eat(",")? {
                    break;
                }
            }
        }
        if self.at_keyword("for") {
            return Err(self.err("`for` after `let` is not supported; declare for clauses first"));
        }
        let where_ = if self.at_keyword("where") {
            self.keyword("where")?;
            Some(self.cond()?)
        } else {
            None
        };
        self.keyword("return")?;
        let ret = self.seq()?;
        if ret.is_empty() {
            return Err(self.err("empty return clause"));
        }
        Ok(QueryAst { fors, lets, where_, ret, hints: Vec::new() })
    }

    fn nested_flwr(&mut self) -> Result<QueryAst, FrontendError> {
        self.scopes.push(Vec::new());
        let q = self.flwr();
        self.scopes.pop();
        q
    }

    fn binding(&mut self) -> Result<ForClause, FrontendError> {
        let (var, at) = self.var_name()?;
        self.skip_ws()?;
        self.keyword("in")?;
        let source = if self.at_keyword("collection") {
            self.pos += "collection".len();
            self.skip_ws()?;
            self.expect("(")?;
            let name = self.string_lit()?;
            self.expect(")")?;
            let at = self.pos;
            let steps = self.steps()?;
            self.skip_ws()?;
            if steps.iter().any(|s| s == "*") {
                return Err(self.err_at(at, "a for-binding path may not contain `*`"));
            }
            ForSource::Collection { name, steps }
        } else if self.rest().starts_with('$') {
            ForSource::Var(self.varpath()?)
        } else {
            return Err(self.err("expected Collection(\"…\") or a variable path"));
        };
        self.declare(&var, at)?;
        Ok(ForClause { var, source })
    }

    fn cond(&mut self) -> Result<Cond, FrontendError> {
        let mut items = vec![self.and_cond()?];
        while self.at_keyword("or") {
            self.keyword("or")?;
            items.push(self.and_cond()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Cond::Or(items) })
    }

    fn and_cond(&mut self) -> Result<Cond, FrontendError> {
        let mut items = vec![self.not_cond()?];
        while self.at_keyword("and") {
            self.keyword("and")?;
            items.push(self.not_cond()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Cond::And(items) })
    }

    fn not_cond(&mut self) -> Result<Cond, FrontendError> {
        if self.at_keyword("not") {
            self.keyword("not")?;
            self.expect("(")?;
            let c = self.cond()?;
            self.expect(")")?;
            return Ok(Cond::Not(Box::new(c)));
        }
        if self.rest().starts_with('(') {
            self.expect("(")?;
            let c = self.cond()?;
            self.expect(")")?;
            return Ok(c);
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Cond, FrontendError> {
        if self.at_keyword("contains") {
            self.keyword("contains")?;
            self.expect("(")?;
            let path = self.varpath()?;
            self.expect(",")?;
            let needle = self.string_lit()?;
            self.expect(")")?;
            return Ok(Cond::Contains { path, needle });
        }
        let lhs = self.operand()?;
        let op_at = self.pos;
        let op = self.cmp_op()?;
        if self.rest().starts_with('(') {
            let Operand::Path(path) = lhs else {
                return Err(self.err_at(op_at, "a literal sequence needs a path on the left"));
            };
            if op != CmpOp::Eq {
                return Err(self.err_at(op_at, "only `=` applies to a literal sequence"));
            }
            self.expect("(")?;
            let mut values = vec![self.literal()?];
            while self.eat(",")? {
                values.push(self.literal()?);
            }
            self.expect(")")?;
            return Ok(Cond::In { path, values });
        }
        let rhs = self.operand()?;
        Ok(Cond::Cmp { lhs, op, rhs })
    }

    fn operand(&mut self) -> Result<Operand, FrontendError> {
        if self.rest().starts_with('$') {
            Ok(Operand::Path(self.varpath()?))
        } else {
            Ok(Operand::Lit(self.literal()?))
        }
    }

    fn cmp_op(&mut self) -> Result<CmpOp, FrontendError> {
        for (s, op) in [("!=", CmpOp::Ne), ("<=", CmpOp::Le), (">=", CmpOp::Ge), ("=", CmpOp::Eq), ("<", CmpOp::Lt), (">", CmpOp::Gt)] {
            if self.eat(s)? {
                return Ok(op);
            }
        }
        Err(self.err("expected a comparison operator"))
    }

    fn at_seq_end(&self) -> bool {
        let r = self.rest();
        r.is_empty()
            || r.starts_with("</")
            || r.starts_with(')')
            || ["where", "return", "let"].iter().any(|k| self.at_keyword(k))
    }

    fn seq(&mut self) -> Result<Vec<ReturnItem>, FrontendError> {
        let mut items = Vec::new();
        while !self.at_seq_end() {
            items.push(self.item(false)?);
            self.eat(",")?;
        }
        Ok(items)
    }

    fn item(&mut self, in_content: bool) -> Result<ReturnItem, FrontendError> {
        let r = self.rest();
        if r.starts_with('<') {
            return self.element();
        }
        if r.starts_with('$') {
            return Ok(ReturnItem::Path(self.varpath()?));
        }
        if r.starts_with('(') {
            self.expect("(")?;
            let items = self.seq()?;
            self.expect(")")?;
            return Ok(ReturnItem::Group(items));
        }
        if r.starts_with('"') || r.starts_with('\'') {
            return Ok(ReturnItem::Text(self.string_lit()?));
        }
        if self.at_keyword("aggregate") {
            self.keyword("aggregate")?;
            self.expect("(")?;
            let at = self.pos;
            let fname = self.name()?;
            let fun = fname.parse().map_err(|_| self.err_at(at, format!("unknown aggregate function {fname:?}")))?;
            self.skip_ws()?;
            self.expect(",")?;
            let path = self.varpath()?;
            self.expect(")")?;
            return Ok(ReturnItem::Aggregate { fun, path });
        }
        if self.at_keyword("for") {
            return Ok(ReturnItem::Flwr(Box::new(self.nested_flwr()?)));
        }
        if in_content {
            let len = r.find(['<', '$']).unwrap_or(r.len());
            let text = r[..len].trim_end().to_string();
            self.pos += len;
            return Ok(ReturnItem::Text(text));
        }
        Err(self.err("expected a return expression"))
    }

    fn element(&mut self) -> Result<ReturnItem, FrontendError> {
        let open_at = self.pos;
        self.pos += 1;
        let label = self.name()?;
        let tail = self.rest();
        let after = tail.trim_start();
        self.pos += tail.len() - after.len();
        if self.rest().starts_with("/>") {
            self.pos += 2;
            self.skip_ws()?;
            return Ok(ReturnItem::Element { label, children: Vec::new() });
        }
        if !self.rest().starts_with('>') {
            return Err(self.err("expected `>`"));
        }
        self.pos += 1;
        self.skip_ws()?;
        let mut children = Vec::new();
        loop {
            if self.rest().is_empty() {
                return Err(self.err_at(open_at, format!("element <{label}> is never closed")));
            }
            if self.rest().starts_with("</") {
                let close_at = self.pos;
                self.pos += 2;
                let end = self.name()?;
                if end != label {
                    return Err(self.err_at(close_at, format!("</{end}> does not close <{label}>")));
                }
                self.skip_ws()?;
                if !self.rest().starts_with('>') {
                    return Err(self.err("expected `>`"));
                }
                self.pos += 1;
                self.skip_ws()?;
                return Ok(ReturnItem::Element { label, children });
            }
            if self.rest().starts_with(')') {
                return Err(self.err(format!("unexpected `)` inside <{label}>")));
            }
            children.push(self.item(true)?);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_query() {
        let q = parse("for $x in Collection(\"C\")/a return <r>$x/b</r>").unwrap();
        assert_eq!(q.fors.len(), 1);
        assert_eq!(q.fors[0].source, ForSource::Collection { name: "C".into(), steps: vec!["a".into()] });
        assert_eq!(q.ret, vec![ReturnItem::element("r", vec![ReturnItem::Path(VarPath::new("x", "b"))])]);
    }

    #[test]
    fn unbalanced_constructor_reports_position() {
        let err = parse("for $n in Collection(\"*\")/nation\nreturn <nation>$n/name").unwrap_err();
        match err {
            FrontendError::Syntax { line, col, msg } => {
                assert_eq!((line, col), (2, 8));
                assert!(msg.contains("never closed"), "{msg}");
            }
            e => panic!("{e}"),
        }
        let err = parse("for $n in Collection(\"*\")/nation return <a>$n/name</b>").unwrap_err();
        assert!(matches!(err, FrontendError::Syntax { col: 51, .. }), "{err:?}");
    }

    #[test]
    fn variable_checks() {
        assert!(matches!(
            parse("for $x in Collection(\"C\")/a return $y/b"),
            Err(FrontendError::UnknownVariable { ref name, line: 1, col: 36 }) if name == "y"
        ));
        assert!(matches!(
            parse("for $x in Collection(\"C\")/a, $x in Collection(\"D\")/b return $x"),
            Err(FrontendError::DuplicateVariable { .. })
        ));
        // Inner variables are not visible outside their FLWR.
        assert!(parse("for $x in Collection(\"C\")/a return <r>for $y in Collection(\"D\")/b where $y/k = $x/k return $y</r> $y").is_err());
    }

    #[test]
    fn conditions_and_hints() {
        let q = parse(
            "(: a comment :) (:: hint join=t1_t2 algo=sort-merge ::)\n\
             for $o in collection(\"ORDERS\") where ($o/k < 10 or not($o/k = 3)) and $o/c = (1, \"x\") return $o/c",
        )
        .unwrap();
        assert_eq!(q.hints, vec![Hint { join: "t1_t2".into(), algo: JoinAlgo::SortMerge }]);
        assert_eq!(q.fors[0].source, ForSource::Collection { name: "ORDERS".into(), steps: vec![] });
        let Some(Cond::And(items)) = &q.where_ else { panic!() };
        assert!(matches!(items[0], Cond::Or(_)));
        assert!(matches!(&items[1], Cond::In { values, .. } if values.len() == 2));
        assert!(parse("for $o in collection(\"O\") (:: hint join=x algo=hash ::) return $o").is_err());
    }

    #[test]
    fn text_content_and_aggregates() {
        let q = parse("for $x in Collection(\"C\")/a return <r>total: <n>aggregate(sum, $x/v)</n> \"lit\"</r>").unwrap();
        let ReturnItem::Element { children, .. } = &q.ret[0] else { panic!() };
        assert_eq!(children[0], ReturnItem::Text("total:".into()));
        assert!(matches!(&children[1], ReturnItem::Element { children, .. } if matches!(children[0], ReturnItem::Aggregate { .. })));
        assert_eq!(children[2], ReturnItem::Text("lit".into()));
    }
}
