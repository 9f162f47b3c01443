//! XML collections stored as one `NAME.xml` file each, documents side by side.

use std::collections::HashMap;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use super::{eval_local, events_guide, Adapter, AdapterError, AdapterQuery, LocalQuery};
use crate::catalog::{Capability, CollectionMetadata, SourceDescriptor};
use crate::xalgebra::path::Path;
use crate::xml::{parse_events, EventStream, XmlEvent};

/// Selection-only adapter over a directory of XML files.
#[derive(Clone, Debug)]
pub struct FileAdapter {
    id: String,
    dir: PathBuf,
}

impl FileAdapter {
    pub fn new(id: &str, dir: impl AsRef<FsPath>) -> FileAdapter {
        FileAdapter { id: id.to_string(), dir: dir.as_ref().to_path_buf() }
    }

    /// `(collection name, file)` for every `*.xml` file, sorted by name.
    fn collections(&self) -> Result<Vec<(String, PathBuf)>, AdapterError> {
        let mut out = Vec::new();
        let entries = fs::read_dir(&self.dir).map_err(|e| AdapterError::Store(format!("{}: {e}", self.dir.display())))?;
        for entry in entries {
            let p = entry?.path();
            if p.extension().is_some_and(|e| e == "xml") {
                if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                    out.push((stem.to_string(), p.clone()));
                }
            }
        }
        out.sort();
        Ok(out)
    }

    fn load(&self, file: &FsPath) -> Result<Vec<XmlEvent>, AdapterError> {
        let text = fs::read_to_string(file).map_err(|e| AdapterError::Store(format!("{}: {e}", file.display())))?;
        parse_events(&text).map_err(|e| AdapterError::Store(format!("{}: {e}", file.display())))
    }
}

/// Collections of one file: the file itself when its documents share a
/// root, otherwise one `STEM_ROOT` collection per root element.
fn split_by_root(stem: &str, events: &[XmlEvent]) -> Vec<(String, Vec<Path>, u64)> {
    let guide = events_guide(events);
    let mut roots: Vec<&str> = guide.iter().filter(|p| p.len() == 1).map(|p| p.as_str()).collect();
    roots.dedup();
    let mut counts: HashMap<&str, u64> = HashMap::new();
    let mut depth = 0usize;
    for ev in events {
        match ev {
            XmlEvent::Open(l) => {
                if depth == 0 {
                    *counts.entry(l.as_str()).or_default() += 1;
                }
                depth += 1;
            }
            XmlEvent::Close => depth = depth.saturating_sub(1),
            _ => {}
        }
    }
    if roots.len() <= 1 {
        let n = counts.values().sum();
        return vec![(stem.to_string(), guide, n)];
    }
    roots
        .iter()
        .map(|r| {
            let name = format!("{stem}_{}", r.to_uppercase());
            let g = guide.iter().filter(|p| p.root() == *r).cloned().collect();
            (name, g, counts[r])
        })
        .collect()
}

impl Adapter for FileAdapter {
    fn id(&self) -> &str {
        &self.id
    }

    fn get_metadata(&self) -> Result<String, AdapterError> {
        let mut collections = Vec::new();
        for (stem, file) in self.collections()? {
            for (name, guide, docs) in split_by_root(&stem, &self.load(&file)?) {
                collections.push(CollectionMetadata::new(&name, guide, docs));
            }
        }
        Ok(SourceDescriptor::new(&self.id, Capability::XmlFile, collections).to_xml())
    }

    fn execute(&self, q: &AdapterQuery) -> Result<EventStream, AdapterError> {
        let local = LocalQuery::parse(&q.text)?;
        local.check_capability(Capability::XmlFile)?;
        let wanted = &local.collection;
        let file = self.collections()?.into_iter().find_map(|(stem, file)| {
            let split = wanted.len() > stem.len()
                && wanted[..stem.len()].eq_ignore_ascii_case(&stem)
                && wanted.as_bytes()[stem.len()] == b'_';
            (stem.eq_ignore_ascii_case(wanted) || split).then_some(file)
        });
        let Some(file) = file else {
            return Err(AdapterError::Rejected(format!("{} holds no collection {wanted}", self.id)));
        };
        let events = self.load(&file)?;
        let guide = events_guide(&events);
        eval_local(Box::new(events.into_iter()), guide, &local)
    }
}
