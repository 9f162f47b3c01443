//! Row stores: one `NAME.tbl` file per table, `|`-delimited with a header row.
//! A row becomes `<name><column>value</column>...</name>`, names lower-cased.

use std::fs::{self, File};
use std::path::{Path as FsPath, PathBuf};

use super::{Adapter, AdapterError, AdapterQuery, LocalPlan, LocalQuery};
use crate::catalog::{Capability, CollectionMetadata, SourceDescriptor};
use crate::xalgebra::path::Path;
use crate::xalgebra::XTree;
use crate::xml::{EventStream, XmlEvent};

pub const EXTENSION: &str = "tbl";

/// Select/project adapter over a directory of delimited tables.
#[derive(Clone, Debug)]
pub struct TabularAdapter {
    id: String,
    dir: PathBuf,
}

fn reader(file: &FsPath) -> Result<csv::Reader<File>, AdapterError> {
    csv::ReaderBuilder::new()
        .delimiter(b'|')
        .from_path(file)
        .map_err(|e| AdapterError::Store(format!("{}: {e}", file.display())))
}

/// Write a table in the adapter's storage format.
pub fn write_table<S: AsRef<str>>(file: &FsPath, columns: &[&str], rows: impl IntoIterator<Item = Vec<S>>) -> Result<(), AdapterError> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'|')
        .from_path(file)
        .map_err(|e| AdapterError::Store(format!("{}: {e}", file.display())))?;
    let store = |e: csv::Error| AdapterError::Store(e.to_string());
    w.write_record(columns).map_err(store)?;
    for row in rows {
        w.write_record(row.iter().map(|s| s.as_ref())).map_err(store)?;
    }
    w.flush()?;
    Ok(())
}

impl TabularAdapter {
    pub fn new(id: &str, dir: impl AsRef<FsPath>) -> TabularAdapter {
        TabularAdapter { id: id.to_string(), dir: dir.as_ref().to_path_buf() }
    }

    fn tables(&self) -> Result<Vec<(String, PathBuf)>, AdapterError> {
        let mut out = Vec::new();
        let entries = fs::read_dir(&self.dir).map_err(|e| AdapterError::Store(format!("{}: {e}", self.dir.display())))?;
        for entry in entries {
            let p = entry?.path();
            if p.extension().is_some_and(|e| e == EXTENSION) {
                if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                    out.push((stem.to_string(), p.clone()));
                }
            }
        }
        out.sort();
        Ok(out)
    }

    fn columns(file: &FsPath) -> Result<Vec<String>, AdapterError> {
        let mut r = reader(file)?;
        let header = r.headers().map_err(|e| AdapterError::Store(format!("{}: {e}", file.display())))?;
        Ok(header.iter().map(str::to_lowercase).collect())
    }

    fn guide(table: &str, columns: &[String]) -> Result<Vec<Path>, AdapterError> {
        let root = Path::parse(&table.to_lowercase()).map_err(|e| AdapterError::Store(e.to_string()))?;
        let mut guide = vec![root.clone()];
        for c in columns {
            guide.push(root.child(c).map_err(|e| AdapterError::Store(e.to_string()))?);
        }
        Ok(guide)
    }

    /// Answers in file order. Rows hold only the columns the plan reads and
    /// are tested before any XML is produced, so only answers pay for event
    /// construction.
    fn scan(table: &str, file: &FsPath, plan: LocalPlan) -> Result<EventStream, AdapterError> {
        let columns = Self::columns(file)?;
        let keep: Vec<bool> = match plan.columns() {
            Some(used) => columns.iter().map(|c| used.contains(c.as_str())).collect(),
            None => vec![true; columns.len()],
        };
        // Column of each attribute that is a plain column path; the row test
        // runs on the raw record when the condition reads only such columns.
        let column_of: Vec<Option<usize>> = plan
            .attributes()
            .iter()
            .map(|a| if a.path.len() == 2 { columns.iter().position(|c| c == a.path.last()) } else { None })
            .collect();
        let raw_test = plan.tested().iter().all(|i| column_of[*i].is_some());
        let root = table.to_lowercase();
        let mut failed = false;
        let rows = reader(file)?.into_records().map_while(move |rec| {
            if failed {
                return None;
            }
            Some(match rec {
                Ok(rec) => {
                    if raw_test && !plan.admits(&|i| column_of[i].and_then(|c| rec.get(c)).map(str::to_string).into_iter().collect()) {
                        return Some(Vec::new());
                    }
                    let mut tree = XTree::new(&root);
                    for ((c, v), _) in columns.iter().zip(rec.iter()).zip(&keep).filter(|(_, k)| **k) {
                        if v.is_empty() {
                            tree.add_child(tree.root(), c);
                        } else {
                            tree.add_leaf(tree.root(), c, v);
                        }
                    }
                    let t = plan.bind(tree);
                    if raw_test { plan.emit(&t) } else { plan.answer(&t) }
                }
                Err(e) => {
                    failed = true;
                    vec![XmlEvent::Error(format!("row scan: {e}"))]
                }
            })
        });
        Ok(Box::new(rows.flatten()))
    }
}

impl Adapter for TabularAdapter {
    fn id(&self) -> &str {
        &self.id
    }

    fn get_metadata(&self) -> Result<String, AdapterError> {
        let mut collections = Vec::new();
        for (name, file) in self.tables()? {
            let columns = Self::columns(&file)?;
            let rows = reader(&file)?.records().count() as u64;
            collections.push(CollectionMetadata::new(&name, Self::guide(&name, &columns)?, rows));
        }
        Ok(SourceDescriptor::new(&self.id, Capability::Tabular, collections).to_xml())
    }

    fn execute(&self, q: &AdapterQuery) -> Result<EventStream, AdapterError> {
        let local = LocalQuery::parse(&q.text)?;
        local.check_capability(Capability::Tabular)?;
        let Some((name, file)) = self.tables()?.into_iter().find(|(n, _)| n.eq_ignore_ascii_case(&local.collection)) else {
            return Err(AdapterError::Rejected(format!("{} holds no table {}", self.id, local.collection)));
        };
        let guide = Self::guide(&name, &Self::columns(&file)?)?;
        Self::scan(&name, &file, LocalPlan::new(guide, &local)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;
    use crate::xml::documents;

    fn adapter() -> (tempfile::TempDir, TabularAdapter) {
        let dir = tempfile::tempdir().unwrap();
        let rows = (1..=6).map(|i| vec![i.to_string(), (i * 10).to_string(), format!("c{i}")]);
        write_table(&dir.path().join("PARTSUPP.tbl"), &["PARTKEY", "AVAILQTY", "COMMENT"], rows).unwrap();
        write_table(&dir.path().join("ORDERS.tbl"), &["orderkey", "comment"], Vec::<Vec<String>>::new()).unwrap();
        let a = TabularAdapter::new("T", dir.path());
        (dir, a)
    }

    fn docs(a: &TabularAdapter, text: &str) -> Vec<String> {
        documents(&a.execute(&AdapterQuery::new(text)).unwrap().collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn columns_map_to_paths() {
        let (_d, a) = adapter();
        let d = a.descriptor().unwrap();
        let orders: Vec<&str> = d.collection("ORDERS").unwrap().guide.iter().map(|p| p.as_str()).collect();
        assert_eq!(orders, ["orders", "orders/orderkey", "orders/comment"]);
        assert_eq!(d.collection("PARTSUPP").unwrap().cardinality, 6);
        assert_eq!(d.capability, Capability::Tabular);
    }

    #[test]
    fn scan_filter_project_in_storage_order() {
        let (_d, a) = adapter();
        assert_eq!(
            docs(&a, "for $p in Collection(\"PARTSUPP\")/partsupp where $p/availqty > 45 return ($p/partkey)"),
            ["<partsupp><partkey>5</partkey></partsupp>", "<partsupp><partkey>6</partkey></partsupp>"]
        );
        let first = docs(&a, "for $p in Collection(\"PARTSUPP\")/partsupp return $p");
        assert_eq!(first[0], "<partsupp><partkey>1</partkey><availqty>10</availqty><comment>c1</comment></partsupp>");
        assert_eq!(first, docs(&a, "for $p in Collection(\"PARTSUPP\")/partsupp return $p"));
    }

    #[test]
    fn batches_split_transparently() {
        let (_d, a) = adapter();
        let q = AdapterQuery::with_param("for $p in Collection(\"PARTSUPP\")/partsupp return $p", crate::frontend::VarPath::new("p", "partkey"));
        let keys: Vec<Value> = (0..200).map(|i| Value::infer(&(i % 7).to_string())).collect();
        let out = documents(&a.execute_batched(&q, &keys).unwrap().collect::<Vec<_>>()).unwrap();
        // Four batches, each matching all six rows.
        assert_eq!(out.len(), 24);
        assert!(matches!(a.execute_batched(&q, &[]), Err(AdapterError::Rejected(_))));
    }

    #[test]
    fn nested_paths_are_beyond_tabular() {
        let (_d, a) = adapter();
        assert!(matches!(
            a.execute(&AdapterQuery::new("for $p in Collection(\"PARTSUPP\")/partsupp where $p/a/b = 1 return $p")),
            Err(AdapterError::Rejected(_))
        ));
    }
}
