//! The seeded benchmark dataset: row counts, the nations whose comment has
//! the selection token, and the per-store file layout.

use xfed::bench::{generate, DatasetSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scale: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1.0);
    let spec = DatasetSpec::new(scale, 1);
    let data = generate(&spec);
    println!(
        "{} nations, {} regions, {} suppliers, {} parts, {} partsupp, {} customers, {} orders, {} lineitems",
        data.nations.len(),
        data.regions.len(),
        data.suppliers.len(),
        data.parts.len(),
        data.partsupp.len(),
        data.customers.len(),
        data.orders.len(),
        data.lineitems.len()
    );
    let iron: Vec<&str> = data.nations.iter().filter(|n| n.comment.contains("iron")).map(|n| n.name.as_str()).collect();
    println!("{} of {} nations mention iron: {}", iron.len(), data.nations.len(), iron.join(", "));

    let dir = tempfile::tempdir()?;
    data.write(dir.path())?;
    let mut files: Vec<String> = Vec::new();
    for store in std::fs::read_dir(dir.path())? {
        let store = store?;
        for f in std::fs::read_dir(store.path())? {
            let f = f?;
            files.push(format!("{}/{} ({} bytes)", store.file_name().to_string_lossy(), f.file_name().to_string_lossy(), f.metadata()?.len()));
        }
    }
    files.sort();
    for f in files {
        println!("{f}");
    }
    Ok(())
}
