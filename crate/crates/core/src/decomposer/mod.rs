//! Decomposition of canonical queries into per-collection atomic queries,
//! their binding to sources, and the algebra plan that recombines them.

pub mod atomize;
pub mod locate;
pub mod optimize;
pub mod plan;

pub use atomize::{atomize, default_root, AtomicQuery, GlobalQuery, NestLevel};
pub use locate::{binding_table, locate_sources, BoundAtom};
pub use optimize::{optimize, OptimizeOptions};
pub use plan::{build_plan, AdapterQuerySpec, Output, PlanNode, PlanOp, SourceBinding};

use crate::catalog::{Catalog, CatalogError};
use crate::frontend::{canonize, normalize, Canonical, FrontendError, QueryAst};
use crate::xalgebra::AlgebraError;

#[derive(Debug, thiserror::Error)]
pub enum DecomposeError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("ambiguous wildcard: {0}")]
    Ambiguous(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

#[derive(Clone, Debug, Default)]
pub struct PlanOptions {
    pub output: Output,
    /// Skip the optimizer and keep the straightforward plan.
    pub unoptimized: bool,
    pub optimizer: OptimizeOptions,
}

/// Every intermediate form of one query's planning.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub canonical: Canonical,
    pub atoms: Vec<AtomicQuery>,
    pub global: GlobalQuery,
    pub bindings: Vec<(AtomicQuery, Vec<BoundAtom>)>,
    pub initial: Option<PlanNode>,
    /// `None` when some atom has no source: the result is empty.
    pub plan: Option<PlanNode>,
    pub warnings: Vec<String>,
}

impl Decomposition {
    pub fn binding_table(&self) -> String {
        binding_table(&self.bindings)
    }

    pub fn plan_text(&self) -> String {
        match &self.plan {
            Some(p) => p.to_string(),
            None => "Empty\n".to_string(),
        }
    }
}

/// Root element of a collection's documents, from the catalog when known.
pub fn catalog_root(catalog: &Catalog, name: &str) -> Option<String> {
    catalog
        .sources()
        .iter()
        .flat_map(|s| s.collections.iter())
        .find(|c| c.name.eq_ignore_ascii_case(name))
        .and_then(|c| c.root().map(str::to_string))
        .or_else(|| default_root(name))
}

/// normalize → canonize → atomize → locate → build → optimize.
pub fn decompose(ast: &QueryAst, catalog: &Catalog, options: &PlanOptions) -> Result<Decomposition, DecomposeError> {
    let canonical = canonize(&normalize(ast)?)?;
    let resolve = |name: &str| catalog_root(catalog, name);
    let (atoms, global) = atomize(&canonical, &resolve)?;
    let mut warnings = Vec::new();
    let mut bindings = Vec::new();
    for a in &atoms {
        let bound = locate_sources(a, catalog)?;
        if bound.is_empty() {
            warnings.push(format!(
                "no source provides collection {} with paths {}; the result is empty",
                a.collection,
                a.used_paths().join(", ")
            ));
        }
        bindings.push((a.clone(), bound));
    }
    let initial = build_plan(&bindings, &global, &canonical.recon, options.output)?;
    let plan = match (&initial, options.unoptimized) {
        (Some(p), false) => {
            let (p, w) = optimize(p, &canonical.hints, &options.optimizer);
            warnings.extend(w);
            Some(p)
        }
        (p, _) => p.clone(),
    };
    Ok(Decomposition { canonical, atoms, global, bindings, initial, plan, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Capability, CollectionMetadata, SourceDescriptor};
    use crate::frontend::{parse, NATION_SUPPLIERS_QUERY};
    use crate::xalgebra::path::path;

    /// The worked-example placement: partsupp rows on A1, suppliers split
    /// over A4 and A6, nations on A6.
    fn catalog() -> Catalog {
        let c = Catalog::new();
        let supplier = |n| {
            CollectionMetadata::new(
                "SUPPLIER",
                [
                    path("supplier/id/suppkey"),
                    path("supplier/name"),
                    path("supplier/contact/phone"),
                    path("supplier/contact/localisation/nationkey"),
                ],
                n,
            )
        };
        c.register(SourceDescriptor::new(
            "A1",
            Capability::Tabular,
            vec![CollectionMetadata::new(
                "PARTSUPP",
                [path("partsupp/partkey"), path("partsupp/suppkey"), path("partsupp/availqty"), path("partsupp/supplycost")],
                800,
            )],
        ));
        c.register(SourceDescriptor::new("A4", Capability::XmlFile, vec![supplier(50)]));
        c.register(SourceDescriptor::new(
            "A6",
            Capability::XmlFile,
            vec![
                supplier(50),
                CollectionMetadata::new("NATION", [path("nation/nationkey"), path("nation/name"), path("nation/comment")], 25),
            ],
        ));
        c
    }

    fn run(text: &str, options: &PlanOptions) -> Decomposition {
        decompose(&parse(text).unwrap(), &catalog(), options).unwrap()
    }

    #[test]
    fn worked_query_bindings_and_initial_plan() {
        let d = run(NATION_SUPPLIERS_QUERY, &PlanOptions::default());
        let table: Vec<String> =
            d.binding_table().lines().map(|l| { let c: Vec<&str> = l.split('\t').collect(); format!("{} {}", c[0], c[2]) }).collect();
        assert_eq!(table, ["t1 A6", "t2 A4, A6", "t3 A1"]);
        let initial = d.initial.as_ref().unwrap().to_string();
        let ops: Vec<&str> = initial.lines().map(|l| l.trim_start().split(' ').next().unwrap()).collect();
        assert_eq!(ops, ["Reconstruct", "Nest", "Join", "Join", "Union", "Source", "Source", "Restrict", "Source", "Restrict", "Source"]);
        assert!(initial.contains("Join t1_t2 sort-merge"), "{initial}");
        assert!(initial.contains("Join t2_t3 sort-merge"), "{initial}");
    }

    #[test]
    fn optimized_plan_pushes_orders_and_is_a_fixpoint() {
        let d = run(NATION_SUPPLIERS_QUERY, &PlanOptions::default());
        let plan = d.plan.as_ref().unwrap();
        let text = plan.to_string();
        assert!(!text.contains("Restrict"), "{text}");
        assert_eq!(plan.joins(), [("t2_t3", crate::xalgebra::JoinAlgo::SortMerge), ("t1_t2", crate::xalgebra::JoinAlgo::Dependent)]);
        assert!(text.contains("Source t3 @A1 [tabular] for $ps in Collection(\"PARTSUPP\")/partsupp where $ps/availqty > 45 return ($ps/suppkey, $ps/partkey, $ps/supplycost)"), "{text}");
        assert!(text.contains("Project ($n:nation/nationkey, $n:nation/name)"), "{text}");
        let (again, _) = optimize(plan, &d.canonical.hints, &OptimizeOptions::default());
        assert_eq!(&again, plan);
        assert_eq!(run(NATION_SUPPLIERS_QUERY, &PlanOptions::default()).plan_text(), d.plan_text());
    }

    #[test]
    fn hints_override_and_unknown_hints_warn() {
        let q = format!("(:: hint join=t2_t3 algo=nested-loop ::) (:: hint join=t9_t1 algo=sort-merge ::) {NATION_SUPPLIERS_QUERY}");
        let d = run(&q, &PlanOptions::default());
        assert!(d.plan.unwrap().joins().contains(&("t2_t3", crate::xalgebra::JoinAlgo::NestedLoop)));
        assert_eq!(d.warnings.len(), 1);
        assert!(d.warnings[0].contains("t9_t1"));
    }

    #[test]
    fn unknown_collection_gives_empty_plan_with_warning() {
        let d = run("for $x in collection(\"NOPE\") return $x/a", &PlanOptions::default());
        assert!(d.plan.is_none());
        assert_eq!(d.warnings.len(), 1);
    }

    #[test]
    fn single_atom_plan_is_reconstruct_over_source() {
        let d = run("for $n in collection(\"NATION\") return <r>$n/name</r>", &PlanOptions { unoptimized: true, ..Default::default() });
        let ops: Vec<String> = d.plan_text().lines().map(|l| l.trim_start().split(' ').next().unwrap().to_string()).collect();
        assert_eq!(ops, ["Reconstruct", "Source"]);
        let d = run("for $s in collection(\"SUPPLIER\") return <r>$s/name</r>", &PlanOptions { unoptimized: true, ..Default::default() });
        let ops: Vec<String> = d.plan_text().lines().map(|l| l.trim_start().split(' ').next().unwrap().to_string()).collect();
        assert_eq!(ops, ["Reconstruct", "Union", "Source", "Source"]);
    }
}
