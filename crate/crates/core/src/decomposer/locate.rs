use std::collections::HashMap;

use super::atomize::AtomicQuery;
use super::DecomposeError;
use crate::catalog::{Capability, Catalog, PathPattern};
use crate::frontend::VarPath;
use crate::xalgebra::path::Path;

/// An atomic query bound to one (source, collection), wildcards filled in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundAtom {
    pub atom: AtomicQuery,
    pub source: String,
    pub collection: String,
    pub capability: Capability,
    pub cardinality: u64,
    /// Dataguide of the bound collection.
    pub guide: Vec<Path>,
}

/// Every source whose dataguide covers all paths the atom uses. An empty
/// result is not an error; the plan gets an empty leaf.
pub fn locate_sources(atom: &AtomicQuery, catalog: &Catalog) -> Result<Vec<BoundAtom>, DecomposeError> {
    let mut patterns: Vec<PathPattern> = Vec::new();
    let root_pattern = PathPattern::from_steps(atom.root.clone())?;
    patterns.push(root_pattern.clone());
    for p in &atom.used {
        let pat = PathPattern::from_steps(atom.full_steps(p))?;
        if !patterns.contains(&pat) {
            patterns.push(pat);
        }
    }
    let matches = catalog.lookup(&atom.collection, &patterns)?;
    let mut out: Vec<BoundAtom> = Vec::new();
    for m in matches {
        let mut concrete: HashMap<&PathPattern, &Path> = HashMap::new();
        for (pat, found) in &m.expansions {
            if found.len() > 1 {
                let alts: Vec<&str> = found.iter().map(|p| p.as_str()).collect();
                return Err(DecomposeError::Ambiguous(format!("{pat} expands to {} in {}", alts.join(", "), m.source)));
            }
            concrete.insert(pat, &found[0]);
        }
        let root: Vec<String> = concrete[&root_pattern].steps().map(str::to_string).collect();
        let mut rewrite = |p: &VarPath| -> VarPath {
            let pat = PathPattern::from_steps(atom.full_steps(p)).expect("checked above");
            let full = concrete.get(&pat).map_or_else(|| atom.full_steps(p), |c| c.steps().map(str::to_string).collect());
            VarPath { var: p.var.clone(), steps: full[root.len()..].to_vec() }
        };
        let bound = AtomicQuery {
            root: root.clone(),
            used: atom.used.iter().map(&mut rewrite).collect(),
            restriction: atom.restriction.as_ref().map(|r| r.map_paths(&mut rewrite)),
            returns: atom.returns.iter().map(&mut rewrite).collect(),
            ..atom.clone()
        };
        if let Some(first) = out.first() {
            if first.atom.used != bound.used || first.atom.root != bound.root {
                return Err(DecomposeError::Ambiguous(format!(
                    "{} expands differently on {} and {}",
                    atom.id, first.source, m.source
                )));
            }
        }
        let guide = catalog
            .source(&m.source)
            .and_then(|s| s.collection(&m.collection).map(|c| c.guide.iter().cloned().collect()))
            .unwrap_or_default();
        out.push(BoundAtom {
            atom: bound,
            source: m.source,
            collection: m.collection,
            capability: m.capability,
            cardinality: m.cardinality,
            guide,
        });
    }
    Ok(out)
}

/// Rows `id<TAB>used paths<TAB>sources`, paths written `Collection("NAME")/path`.
pub fn binding_table(rows: &[(AtomicQuery, Vec<BoundAtom>)]) -> String {
    let mut out = String::new();
    for (atom, bound) in rows {
        let (name, used) = match bound.first() {
            Some(b) => (b.collection.clone(), b.atom.used_paths()),
            None => (atom.collection.clone(), atom.used_paths()),
        };
        let paths: Vec<String> = used.iter().map(|p| format!("Collection(\"{name}\")/{p}")).collect();
        let sources: Vec<&str> = bound.iter().map(|b| b.source.as_str()).collect();
        let sources = if sources.is_empty() { "-".to_string() } else { sources.join(", ") };
        out.push_str(&format!("{}\t{}\t{}\n", atom.id, paths.join(" "), sources));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{CollectionMetadata, SourceDescriptor};
    use crate::decomposer::atomize::{atomize, default_root};
    use crate::frontend::{canonize, normalize, parse};
    use crate::xalgebra::path::path;

    fn catalog() -> Catalog {
        let c = Catalog::new();
        let supplier = |card| {
            CollectionMetadata::new(
                "SUPPLIER",
                [path("supplier/id/suppkey"), path("supplier/name"), path("supplier/contact/phone")],
                card,
            )
        };
        c.register(SourceDescriptor::new("A4", Capability::XmlFile, vec![supplier(10)]));
        c.register(SourceDescriptor::new("A6", Capability::XmlFile, vec![supplier(12)]));
        c.register(SourceDescriptor::new("A1", Capability::Tabular, vec![CollectionMetadata::new("PARTSUPP", [path("partsupp/suppkey")], 5)]));
        c
    }

    fn atoms(text: &str) -> Vec<AtomicQuery> {
        atomize(&canonize(&normalize(&parse(text).unwrap()).unwrap()).unwrap(), &default_root).unwrap().0
    }

    #[test]
    fn wildcards_expand_and_replicas_are_listed() {
        let a = &atoms("for $s in Collection(\"*\")/supplier return <x>$s/*/phone $s/name</x>")[0];
        let bound = locate_sources(a, &catalog()).unwrap();
        assert_eq!(bound.iter().map(|b| b.source.as_str()).collect::<Vec<_>>(), ["A4", "A6"]);
        assert_eq!(bound[0].atom.returns[0], VarPath::new("s", "contact/phone"));
        assert_eq!(
            binding_table(&[(a.clone(), bound)]),
            "t1\tCollection(\"SUPPLIER\")/supplier/contact/phone Collection(\"SUPPLIER\")/supplier/name\tA4, A6\n"
        );
    }

    #[test]
    fn absent_path_binds_nothing() {
        let a = &atoms("for $s in Collection(\"*\")/supplier return $s/fax")[0];
        assert!(locate_sources(a, &catalog()).unwrap().is_empty());
        let b = &atoms("for $p in collection(\"PARTSUPP\") return $p/suppkey")[0];
        assert_eq!(locate_sources(b, &catalog()).unwrap()[0].source, "A1");
    }

    #[test]
    fn more_paths_never_add_sources() {
        let cat = catalog();
        let few = locate_sources(&atoms("for $s in Collection(\"*\")/supplier return $s/name")[0], &cat).unwrap();
        let more = locate_sources(&atoms("for $s in Collection(\"*\")/supplier return <a>$s/name $s/id/suppkey</a>")[0], &cat).unwrap();
        assert!(more.iter().all(|m| few.iter().any(|f| f.source == m.source)));
    }
}
