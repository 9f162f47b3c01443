//! File and tabular adapters answering single-collection queries, plus the
//! descriptor each one publishes.

use std::fs;

use xfed::adapters::{Adapter, AdapterQuery, FileAdapter, TabularAdapter};
use xfed::xml::documents;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let (xml, tbl) = (dir.path().join("xml"), dir.path().join("tbl"));
    fs::create_dir_all(&xml)?;
    fs::create_dir_all(&tbl)?;
    fs::write(
        xml.join("NATION.xml"),
        "<nation><nationkey>0</nationkey><name>ALGERIA</name><comment>iron deposits</comment></nation>\n\
         <nation><nationkey>1</nationkey><name>BRAZIL</name><comment>quick foxes</comment></nation>\n",
    )?;
    fs::write(tbl.join("PARTSUPP.tbl"), "partkey|suppkey|availqty|supplycost\n1|7|12|10.00\n2|7|80|3.25\n3|9|46|1.10\n")?;

    let files = FileAdapter::new("X", &xml);
    let rows = TabularAdapter::new("T", &tbl);
    for (adapter, q) in [
        (&files as &dyn Adapter, r#"for $n in Collection("NATION")/nation where contains($n/comment, "iron") return $n"#),
        (&rows as &dyn Adapter, r#"for $ps in Collection("PARTSUPP")/partsupp where $ps/availqty > 45 return ($ps/partkey, $ps/supplycost)"#),
    ] {
        println!("{} <- {q}", adapter.id());
        let events: Vec<_> = adapter.execute(&AdapterQuery::new(q))?.collect();
        for doc in documents(&events)? {
            println!("  {doc}");
        }
        println!("{}", adapter.get_metadata()?);
    }
    Ok(())
}
