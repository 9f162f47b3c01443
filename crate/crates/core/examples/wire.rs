//! Binary wire encoding of a tuple stream: size against the XML text and a
//! lossless decode.

use xfed::wire::{decode_bytes, encode_to_vec};
use xfed::xalgebra::{path, x_source, Attr};
use xfed::xml::parse_events;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let xml: String = (0..50)
        .map(|i| format!("<partsupp><partkey>{i}</partkey><suppkey>{}</suppkey><supplycost>{}.{:02}</supplycost></partsupp>", i % 7, 100 + i, i))
        .collect();
    let attrs: Vec<Attr> = ["partsupp/partkey", "partsupp/suppkey", "partsupp/supplycost"].iter().map(|p| Attr::new(path(p))).collect();
    let guide: Vec<_> = attrs.iter().map(|a| a.path.clone()).collect();
    let rel = x_source(parse_events(&xml)?.into_iter(), guide, attrs)?.materialize()?;

    let bytes = encode_to_vec(rel.relation())?;
    println!("{} tuples: {} wire bytes, {} XML bytes", rel.tuples.len(), bytes.len(), xml.len());
    let back = decode_bytes(&bytes)?;
    println!("round trip equal: {}", back.canonical() == rel.canonical());
    println!("first tuple: {}", back.tuples[0].canonical());
    Ok(())
}
