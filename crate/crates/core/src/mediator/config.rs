//! TOML description of a federation: mediator settings and its sources.
//!
//! ```toml
//! [mediator]
//! id = "M2"
//! queue_capacity = 64
//!
//! [[source]]
//! kind = "tabular"
//! id = "A3"
//! path = "data/A3"
//!
//! [[source]]
//! kind = "tcp"
//! id = "A7"
//! addr = "127.0.0.1:7007"
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use super::{Mediator, MediatorConfig, MediatorError};
use crate::adapters::{Adapter, FileAdapter, TabularAdapter, TcpAdapter};

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SourceConfig {
    File { id: String, path: PathBuf },
    Tabular { id: String, path: PathBuf },
    Tcp { id: String, addr: String },
}

/// `id` plus the settings; unknown keys are errors.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(try_from = "toml::Table")]
struct MediatorSection {
    id: String,
    settings: MediatorConfig,
}

impl TryFrom<toml::Table> for MediatorSection {
    type Error = toml::de::Error;

    fn try_from(mut t: toml::Table) -> Result<Self, Self::Error> {
        let id = match t.remove("id") {
            Some(v) => v.try_into()?,
            None => default_id(),
        };
        Ok(MediatorSection { id, settings: toml::Value::Table(t).try_into()? })
    }
}

fn default_id() -> String {
    "M".to_string()
}

impl Default for MediatorSection {
    fn default() -> Self {
        MediatorSection { id: default_id(), settings: MediatorConfig::default() }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FederationConfig {
    #[serde(default)]
    mediator: MediatorSection,
    #[serde(default, rename = "source")]
    pub sources: Vec<SourceConfig>,
}

impl FederationConfig {
    pub fn parse(text: &str) -> Result<FederationConfig, MediatorError> {
        toml::from_str(text).map_err(|e| MediatorError::Config(e.to_string()))
    }

    pub fn load(file: &Path) -> Result<FederationConfig, MediatorError> {
        let text = std::fs::read_to_string(file).map_err(|e| MediatorError::Config(format!("{}: {e}", file.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = file.parent().unwrap_or(Path::new("."));
        for s in &mut cfg.sources {
            if let SourceConfig::File { path, .. } | SourceConfig::Tabular { path, .. } = s {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn id(&self) -> &str {
        &self.mediator.id
    }

    pub fn settings(&self) -> &MediatorConfig {
        &self.mediator.settings
    }

    /// A mediator with every source registered.
    pub fn build(&self) -> Result<Mediator, MediatorError> {
        let m = Mediator::new(&self.mediator.id, self.mediator.settings.clone());
        for s in &self.sources {
            let adapter: Arc<dyn Adapter> = match s {
                SourceConfig::File { id, path } => Arc::new(FileAdapter::new(id, path)),
                SourceConfig::Tabular { id, path } => Arc::new(TabularAdapter::new(id, path)),
                SourceConfig::Tcp { id, addr } => Arc::new(TcpAdapter::new(id, addr.clone())),
            };
            m.register(adapter)?;
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_defaults() {
        let cfg = FederationConfig::parse(
            "[mediator]\nid = \"M2\"\nbatch_size = 8\n\n[[source]]\nkind = \"tabular\"\nid = \"A3\"\npath = \"d\"\n\n[[source]]\nkind = \"tcp\"\nid = \"A7\"\naddr = \"h:1\"\n",
        )
        .unwrap();
        assert_eq!(cfg.id(), "M2");
        assert_eq!(cfg.settings().batch_size, 8);
        assert_eq!(cfg.settings().queue_capacity, 64);
        assert_eq!(cfg.sources[1], SourceConfig::Tcp { id: "A7".into(), addr: "h:1".into() });
        assert_eq!(FederationConfig::parse("").unwrap().settings(), &MediatorConfig::default());
        assert!(FederationConfig::parse("[mediator]\nqueue = 3\n").is_err());
        assert!(FederationConfig::parse("[[source]]\nkind = \"ftp\"\nid = \"x\"\n").is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("fed.toml");
        std::fs::write(&f, "[[source]]\nkind = \"file\"\nid = \"A4\"\npath = \"xml\"\n").unwrap();
        let cfg = FederationConfig::load(&f).unwrap();
        assert_eq!(cfg.sources[0], SourceConfig::File { id: "A4".into(), path: dir.path().join("xml") });
    }
}
