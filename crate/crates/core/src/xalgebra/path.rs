use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::AlgebraError;

/// A rooted label path such as `personne/adresse/ville`.
///
/// Stored in canonical text form; equality, ordering and hashing all use that
/// form. Steps are element names, never empty, never wildcards.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(Arc<str>);

pub(crate) fn is_valid_step(step: &str) -> bool {
    let mut chars = step.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl Path {
    pub fn parse(text: &str) -> Result<Path, AlgebraError> {
        let text = text.trim();
        if text.is_empty() || !text.split('/').all(is_valid_step) {
            return Err(AlgebraError::InvalidPath(text.to_string()));
        }
        Ok(Path(Arc::from(text)))
    }

    pub fn from_steps<S: AsRef<str>>(steps: &[S]) -> Result<Path, AlgebraError> {
        let joined = steps.iter().map(|s| s.as_ref()).collect::<Vec<_>>().join("/");
        Path::parse(&joined)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn steps(&self) -> impl Iterator<Item = &str> + '_ {
        self.0.split('/')
    }

    pub fn len(&self) -> usize {
        self.steps().count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn root(&self) -> &str {
        self.0.split('/').next().unwrap_or_default()
    }

    pub fn last(&self) -> &str {
        self.0.rsplit('/').next().unwrap_or_default()
    }

    pub fn parent(&self) -> Option<Path> {
        self.0.rfind('/').map(|idx| Path(Arc::from(&self.0[..idx])))
    }

    pub fn child(&self, step: &str) -> Result<Path, AlgebraError> {
        if !is_valid_step(step) {
            return Err(AlgebraError::InvalidPath(format!("{}/{}", self.0, step)));
        }
        Ok(Path(Arc::from(format!("{}/{}", self.0, step))))
    }

    /// True when `self` equals `other` or is one of its ancestors.
    pub fn is_prefix_of(&self, other: &Path) -> bool {
        let (a, b) = (self.as_str(), other.as_str());
        b.len() >= a.len() && b.starts_with(a) && (b.len() == a.len() || b.as_bytes()[a.len()] == b'/')
    }

    pub fn is_proper_prefix_of(&self, other: &Path) -> bool {
        self.len() < other.len() && self.is_prefix_of(other)
    }

    /// All prefixes from the root step down to `self`, inclusive.
    pub fn prefixes(&self) -> Vec<Path> {
        let mut out = Vec::new();
        for (idx, b) in self.0.bytes().enumerate() {
            if b == b'/' {
                out.push(Path(Arc::from(&self.0[..idx])));
            }
        }
        out.push(self.clone());
        out
    }
}

impl FromStr for Path {
    type Err = AlgebraError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Path::parse(s)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Path({})", self.0)
    }
}

/// Shorthand used heavily in tests and examples. Panics on invalid input.
pub fn path(text: &str) -> Path {
    Path::parse(text).unwrap_or_else(|e| panic!("{e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_steps() {
        assert!(Path::parse("").is_err());
        assert!(Path::parse("a//b").is_err());
        assert!(Path::parse("/a").is_err());
        assert!(Path::parse("a/*").is_err());
        assert!(Path::parse("9a").is_err());
        assert!(Path::parse("a-b/_c9").is_ok());
    }

    #[test]
    fn prefix_relations() {
        let a = path("a/b");
        assert!(a.is_prefix_of(&path("a/b/c")));
        assert!(a.is_prefix_of(&path("a/b")));
        assert!(!a.is_proper_prefix_of(&path("a/b")));
        assert!(!a.is_prefix_of(&path("a/bc")));
        assert_eq!(path("a/b/c").prefixes(), vec![path("a"), path("a/b"), path("a/b/c")]);
        assert_eq!(path("a/b/c").parent(), Some(path("a/b")));
        assert_eq!(path("a").parent(), None);
        assert_eq!(path("x/y").root(), "x");
        assert_eq!(path("x/y").last(), "y");
    }
}
