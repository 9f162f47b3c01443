//! Leaf value typing and comparison.
//!
//! There is no schema typing: a leaf is numeric when its text parses as a
//! plain decimal (`-12`, `3.50`), otherwise it is text.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rust_decimal::Decimal;

/// Parse `text` as a plain decimal literal. Exponents and separators are not accepted.
pub fn parse_decimal(text: &str) -> Option<Decimal> {
    let t = text.trim();
    let digits = t.strip_prefix(['-', '+']).unwrap_or(t);
    if digits.is_empty() {
        return None;
    }
    let (int, frac) = match digits.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (digits, None),
    };
    let int_ok = int.bytes().all(|b| b.is_ascii_digit());
    let frac_ok = frac.is_none_or(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()));
    if !int_ok || !frac_ok || (int.is_empty() && frac.is_none()) {
        return None;
    }
    Decimal::from_str_exact(t.strip_prefix('+').unwrap_or(t)).ok()
}

/// Canonical text of a decimal: no trailing fractional zeros, no `-0`.
pub fn format_decimal(d: Decimal) -> String {
    let n = d.normalize();
    if n.is_zero() {
        "0".to_string()
    } else {
        n.to_string()
    }
}

/// Predicate comparison: numeric when both sides parse, else UTF-8 byte order.
pub fn compare_values(a: &str, b: &str) -> Ordering {
    match (parse_decimal(a), parse_decimal(b)) {
        (Some(x), Some(y)) => x.cmp(&y),
        _ => a.as_bytes().cmp(b.as_bytes()),
    }
}

/// Sort/merge key. Numbers order before text; the derived order agrees with
/// [`compare_values`] equality.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SortKey {
    Num(Decimal),
    Text(String),
}

impl SortKey {
    pub fn of(text: &str) -> SortKey {
        match parse_decimal(text) {
            Some(d) => SortKey::Num(d.normalize()),
            None => SortKey::Text(text.to_string()),
        }
    }
}

/// A typed constant appearing in predicates and dependent-join key batches.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Value {
    Str(String),
    Num(Decimal),
}

impl Value {
    pub fn text(&self) -> String {
        match self {
            Value::Str(s) => s.clone(),
            Value::Num(d) => format_decimal(*d),
        }
    }

    /// Numeric when the text parses, otherwise a string.
    pub fn infer(text: &str) -> Value {
        match parse_decimal(text) {
            Some(d) => Value::Num(d),
            None => Value::Str(text.to_string()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => write!(f, "\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
            Value::Num(d) => f.write_str(&format_decimal(*d)),
        }
    }
}

impl FromStr for Value {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Value::infer(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing() {
        assert!(parse_decimal("45").is_some());
        assert!(parse_decimal("-3.25").is_some());
        assert!(parse_decimal("+7").is_some());
        assert!(parse_decimal(".5").is_some());
        assert!(parse_decimal("5.").is_none());
        assert!(parse_decimal("1e5").is_none());
        assert!(parse_decimal("1_000").is_none());
        assert!(parse_decimal("abc").is_none());
        assert!(parse_decimal("").is_none());
        assert!(parse_decimal("-").is_none());
    }

    #[test]
    fn comparison_rule() {
        assert_eq!(compare_values("10", "9"), Ordering::Greater);
        assert_eq!(compare_values("10.0", "10"), Ordering::Equal);
        assert_eq!(compare_values("10", "9a"), Ordering::Less);
        assert_eq!(compare_values("b", "a"), Ordering::Greater);
    }

    #[test]
    fn numbers_sort_before_text() {
        let mut keys = vec![SortKey::of("b"), SortKey::of("10"), SortKey::of("a"), SortKey::of("9")];
        keys.sort();
        assert_eq!(
            keys,
            vec![SortKey::of("9"), SortKey::of("10"), SortKey::of("a"), SortKey::of("b")]
        );
        assert_eq!(SortKey::of("10.0"), SortKey::of("10"));
    }

    #[test]
    fn canonical_decimal_text() {
        assert_eq!(format_decimal(parse_decimal("30.50").unwrap()), "30.5");
        assert_eq!(format_decimal(parse_decimal("-0.0").unwrap()), "0");
        assert_eq!(format_decimal(parse_decimal("45").unwrap()), "45");
    }
}
