//! Decompose the nation/supplier query over a hand-written catalog:
//! atomic queries, the source binding table, and the optimized plan.

use xfed::catalog::{Capability, Catalog, CollectionMetadata, SourceDescriptor};
use xfed::decomposer::{decompose, PlanOptions};
use xfed::frontend::{parse, NATION_SUPPLIERS_QUERY};
use xfed::xalgebra::path;

fn catalog() -> Catalog {
    let c = Catalog::new();
    let supplier = |n| {
        CollectionMetadata::new(
            "SUPPLIER",
            [path("supplier/id/suppkey"), path("supplier/name"), path("supplier/contact/phone"), path("supplier/contact/localisation/nationkey")],
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
        vec![supplier(50), CollectionMetadata::new("NATION", [path("nation/nationkey"), path("nation/name"), path("nation/comment")], 25)],
    ));
    c
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = decompose(&parse(NATION_SUPPLIERS_QUERY)?, &catalog(), &PlanOptions::default())?;
    println!("atomic queries:");
    for a in &d.atoms {
        println!("  {a}");
    }
    println!("global query:\n  {}", d.global);
    println!("bindings:\n{}", d.binding_table());
    println!("plan:\n{}", d.plan_text());
    for (name, algo) in d.plan.as_ref().map(|p| p.joins()).unwrap_or_default() {
        println!("join {name}: {}", algo.name());
    }
    Ok(())
}
