//! Metadata manager: registered sources, their collections and dataguides,
//! and wildcard path lookup.

mod descriptor;

use std::fmt;
use std::sync::RwLock;

use indexmap::{IndexMap, IndexSet};

pub use descriptor::{Capability, CollectionMetadata, SourceDescriptor, Transport};

use crate::xalgebra::path::{is_valid_step, Path};
use crate::xalgebra::relation::prefix_close;
use crate::xalgebra::tree::XTree;

/// More expansions than this for one wildcard path is treated as a runaway.
pub const MAX_EXPANSIONS: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("malformed descriptor: {0}")]
    Malformed(String),
    #[error("wildcard path {pattern} expands to {count} paths (limit {MAX_EXPANSIONS})")]
    RunawayWildcard { pattern: String, count: usize },
    #[error("invalid path pattern {0:?}")]
    BadPattern(String),
}

/// A path whose steps may be `*`, matching exactly one element name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathPattern(Vec<String>);

impl PathPattern {
    pub fn parse(text: &str) -> Result<PathPattern, CatalogError> {
        let steps: Vec<String> = text.split('/').map(str::to_string).collect();
        if steps.iter().any(|s| s != "*" && !is_valid_step(s)) {
            return Err(CatalogError::BadPattern(text.to_string()));
        }
        Ok(PathPattern(steps))
    }

    pub fn from_steps(steps: Vec<String>) -> Result<PathPattern, CatalogError> {
        PathPattern::parse(&steps.join("/"))
    }

    pub fn steps(&self) -> &[String] {
        &self.0
    }

    pub fn has_wildcard(&self) -> bool {
        self.0.iter().any(|s| s == "*")
    }

    /// The concrete path, when there is no wildcard.
    pub fn concrete(&self) -> Option<Path> {
        if self.has_wildcard() {
            None
        } else {
            Path::parse(&self.0.join("/")).ok()
        }
    }

    pub fn matches(&self, p: &Path) -> bool {
        p.len() == self.0.len() && self.0.iter().zip(p.steps()).all(|(a, b)| a == "*" || a == b)
    }
}

impl fmt::Display for PathPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("/"))
    }
}

impl From<&Path> for PathPattern {
    fn from(p: &Path) -> Self {
        PathPattern(p.steps().map(str::to_string).collect())
    }
}

/// One (source, collection) able to answer a set of required paths.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LookupMatch {
    pub source: String,
    pub collection: String,
    pub capability: Capability,
    pub cardinality: u64,
    /// Each required pattern with the guide paths it expands to.
    pub expansions: Vec<(PathPattern, Vec<Path>)>,
}

/// Registered sources, readable concurrently, replaced atomically per source.
#[derive(Default)]
pub struct Catalog {
    sources: RwLock<IndexMap<String, SourceDescriptor>>,
    warnings: RwLock<Vec<String>>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a descriptor document. Re-registering an id replaces it.
    pub fn register_source(&self, doc: &str) -> Result<String, CatalogError> {
        let (d, warnings) = SourceDescriptor::parse(doc)?;
        self.warnings.write().unwrap().extend(warnings);
        Ok(self.register(d))
    }

    pub fn register(&self, mut d: SourceDescriptor) -> String {
        for c in &mut d.collections {
            c.guide = prefix_close(c.guide.iter().cloned());
        }
        let id = d.id.clone();
        self.sources.write().unwrap().insert(id.clone(), d);
        id
    }

    pub fn unregister(&self, id: &str) -> Option<SourceDescriptor> {
        self.sources.write().unwrap().shift_remove(id)
    }

    pub fn source(&self, id: &str) -> Option<SourceDescriptor> {
        self.sources.read().unwrap().get(id).cloned()
    }

    /// All descriptors, sorted by id.
    pub fn sources(&self) -> Vec<SourceDescriptor> {
        let mut v: Vec<SourceDescriptor> = self.sources.read().unwrap().values().cloned().collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }

    pub fn warnings(&self) -> Vec<String> {
        self.warnings.read().unwrap().clone()
    }

    /// Every (source, collection) whose dataguide covers all `required`
    /// patterns. `pattern` is a collection name (case-insensitive) or `*`.
    pub fn lookup(&self, pattern: &str, required: &[PathPattern]) -> Result<Vec<LookupMatch>, CatalogError> {
        let mut out = Vec::new();
        for s in self.sources() {
            for c in &s.collections {
                if pattern != "*" && !c.name.eq_ignore_ascii_case(pattern) {
                    continue;
                }
                let mut expansions = Vec::with_capacity(required.len());
                for r in required {
                    let found: Vec<Path> = c.guide.iter().filter(|p| r.matches(p)).cloned().collect();
                    if found.len() > MAX_EXPANSIONS {
                        return Err(CatalogError::RunawayWildcard { pattern: r.to_string(), count: found.len() });
                    }
                    if found.is_empty() {
                        break;
                    }
                    expansions.push((r.clone(), found));
                }
                if expansions.len() == required.len() && !c.guide.is_empty() {
                    out.push(LookupMatch {
                        source: s.id.clone(),
                        collection: c.name.clone(),
                        capability: s.capability,
                        cardinality: c.cardinality,
                        expansions,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Default schema of a collection: every root-to-node path of the samples,
/// prefix-closed, in first-appearance order.
pub fn infer_default_guide<'a>(samples: impl IntoIterator<Item = &'a XTree>) -> IndexSet<Path> {
    prefix_close(samples.into_iter().flat_map(|t| t.paths()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xalgebra::path::path;
    use crate::xalgebra::tree::parse_trees;

    fn catalog() -> Catalog {
        let c = Catalog::new();
        c.register(SourceDescriptor::new(
            "A6",
            Capability::XmlFile,
            vec![
                CollectionMetadata::new("NATION", [path("nation/nationkey"), path("nation/name"), path("nation/comment")], 25),
                CollectionMetadata::new(
                    "SUPPLIER",
                    [path("supplier/id/suppkey"), path("supplier/contact/phone"), path("supplier/contact/localisation/nationkey")],
                    50,
                ),
            ],
        ));
        c
    }

    fn pats(ps: &[&str]) -> Vec<PathPattern> {
        ps.iter().map(|p| PathPattern::parse(p).unwrap()).collect()
    }

    #[test]
    fn wildcard_collection_and_step() {
        let c = catalog();
        let m = c.lookup("*", &pats(&["nation/comment", "nation/nationkey", "nation/name"])).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].source.as_str(), m[0].collection.as_str()), ("A6", "NATION"));
        let m = c.lookup("*", &pats(&["supplier/*/phone"])).unwrap();
        assert_eq!(m[0].expansions[0].1, [path("supplier/contact/phone")]);
        assert!(c.lookup("ORDERS", &pats(&["orders/orderkey"])).unwrap().is_empty());
        assert!(c.lookup("*", &pats(&["nation/missing"])).unwrap().is_empty());
    }

    #[test]
    fn runaway_wildcard() {
        let c = Catalog::new();
        let guide: Vec<Path> = (0..40).map(|i| path(&format!("r/c{i}"))).collect();
        c.register(SourceDescriptor::new("S", Capability::Tabular, vec![CollectionMetadata::new("R", guide, 0)]));
        assert!(matches!(c.lookup("*", &pats(&["r/*"])), Err(CatalogError::RunawayWildcard { .. })));
    }

    #[test]
    fn reregistration_replaces() {
        let c = catalog();
        c.register(SourceDescriptor::new("A6", Capability::XmlFile, vec![CollectionMetadata::new("NATION", [path("nation/x")], 0)]));
        assert!(c.lookup("NATION", &pats(&["nation/name"])).unwrap().is_empty());
        assert_eq!(c.lookup("NATION", &pats(&["nation/x"])).unwrap().len(), 1);
    }

    #[test]
    fn infer_guide_from_samples() {
        let trees = parse_trees("<a><b>1</b></a>").unwrap();
        let g = infer_default_guide(&trees);
        assert_eq!(g.iter().map(|p| p.as_str()).collect::<Vec<_>>(), ["a", "a/b"]);
        let trees = parse_trees("<a><b>1</b></a><a><c><d>2</d></c></a>").unwrap();
        let g = infer_default_guide(&trees);
        assert_eq!(g.iter().map(|p| p.as_str()).collect::<Vec<_>>(), ["a", "a/b", "a/c", "a/c/d"]);
    }
}
