//! A mediator over the six generated stores, configured from TOML, running
//! the nation/supplier query with phase timings.

use std::fs;

use xfed::bench::{generate, DatasetSpec};
use xfed::frontend::NATION_SUPPLIERS_QUERY;
use xfed::mediator::FederationConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    generate(&DatasetSpec::new(0.5, 1)).write(dir.path())?;
    let config = r#"
[mediator]
id = "M0"
batch_size = 32

[[source]]
kind = "tabular"
id = "A1"
path = "A1"

[[source]]
kind = "file"
id = "A4"
path = "A4"

[[source]]
kind = "file"
id = "A6"
path = "A6"
"#;
    let file = dir.path().join("federation.toml");
    fs::write(&file, config)?;
    let mediator = FederationConfig::load(&file)?.build()?;
    for c in mediator.collections() {
        println!("{}: {} documents, {} paths", c.name, c.cardinality, c.guide.len());
    }
    let result = mediator.run(NATION_SUPPLIERS_QUERY)?;
    for doc in &result.documents {
        println!("{}...", &doc[..doc.len().min(100)]);
    }
    let t = result.timings;
    println!(
        "{} documents; parse {:.3} ms, plan {:.3} ms, first result {:.3} ms, local {:.3} ms, global {:.3} ms, total {:.3} ms",
        result.documents.len(),
        t.parse,
        t.plan,
        t.first_result,
        t.local_exec,
        t.global_exec,
        t.total
    );
    Ok(())
}
