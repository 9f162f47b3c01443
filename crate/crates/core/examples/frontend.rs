//! Parse the nation/supplier query, normalize it, and split it into simple
//! queries plus one reconstruction template.

use xfed::frontend::{canonize, normalize, parse, NATION_SUPPLIERS_QUERY};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::env::args().nth(1).unwrap_or_else(|| NATION_SUPPLIERS_QUERY.to_string());
    let ast = parse(&text)?;
    println!("{} for clause(s), {} nested block(s)", ast.fors.len(), ast.nested().len());
    let canonical = canonize(&normalize(&ast)?)?;
    println!("{canonical}");
    Ok(())
}
