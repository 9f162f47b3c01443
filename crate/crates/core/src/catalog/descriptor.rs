//! Source descriptor documents:
//!
//! ```text
//! <source id="A6">
//!   <capability>xml-file</capability>
//!   <transport>in-process</transport>
//!   <collection name="NATION" cardinality="25"><path>nation</path><path>nation/name</path></collection>
//! </source>
//! ```

use std::fmt;
use std::str::FromStr;

use indexmap::IndexSet;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::CatalogError;
use crate::xalgebra::path::Path;
use crate::xml::escape_text;

/// What an adapter can evaluate, by source category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Capability {
    /// The whole query subset, including joins across its own collections.
    QueryLanguage,
    /// Selection and projection over one table of flat rows.
    Tabular,
    /// Per-document selection filters over stored XML.
    XmlFile,
}

impl Capability {
    pub fn name(self) -> &'static str {
        match self {
            Capability::QueryLanguage => "query-language",
            Capability::Tabular => "tabular",
            Capability::XmlFile => "xml-file",
        }
    }

    pub fn can_project(self) -> bool {
        !matches!(self, Capability::XmlFile)
    }

    pub fn can_join(self) -> bool {
        matches!(self, Capability::QueryLanguage)
    }

    /// Whether a restriction over these paths can run at the source.
    pub fn can_select(self, paths: &[Path]) -> bool {
        match self {
            Capability::Tabular => paths.iter().all(|p| p.len() == 2),
            Capability::QueryLanguage | Capability::XmlFile => true,
        }
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Capability {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "query-language" => Ok(Capability::QueryLanguage),
            "tabular" => Ok(Capability::Tabular),
            "xml-file" => Ok(Capability::XmlFile),
            other => Err(CatalogError::Malformed(format!("unknown capability {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum Transport {
    #[default]
    InProcess,
    /// `host:port` of a framed TCP adapter server.
    Tcp(String),
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transport::InProcess => f.write_str("in-process"),
            Transport::Tcp(addr) => write!(f, "tcp:{addr}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CollectionMetadata {
    pub name: String,
    /// Prefix-closed set of instantiated paths.
    pub guide: IndexSet<Path>,
    /// 0 when unknown.
    pub cardinality: u64,
}

impl CollectionMetadata {
    pub fn new(name: &str, guide: impl IntoIterator<Item = Path>, cardinality: u64) -> Self {
        CollectionMetadata { name: name.to_string(), guide: crate::xalgebra::relation::prefix_close(guide), cardinality }
    }

    /// The shared root step of the guide.
    pub fn root(&self) -> Option<&str> {
        self.guide.first().map(|p| p.root())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceDescriptor {
    pub id: String,
    pub transport: Transport,
    pub capability: Capability,
    pub collections: Vec<CollectionMetadata>,
}

impl SourceDescriptor {
    pub fn new(id: &str, capability: Capability, collections: Vec<CollectionMetadata>) -> Self {
        SourceDescriptor { id: id.to_string(), transport: Transport::InProcess, capability, collections }
    }

    pub fn collection(&self, name: &str) -> Option<&CollectionMetadata> {
        self.collections.iter().find(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn to_xml(&self) -> String {
        let mut s = format!("<source id=\"{}\">", escape_attr(&self.id));
        s.push_str(&format!("<capability>{}</capability>", self.capability));
        s.push_str(&format!("<transport>{}</transport>", escape_text(&self.transport.to_string())));
        for c in &self.collections {
            s.push_str(&format!("<collection name=\"{}\" cardinality=\"{}\">", escape_attr(&c.name), c.cardinality));
            for p in &c.guide {
                s.push_str(&format!("<path>{p}</path>"));
            }
            s.push_str("</collection>");
        }
        s.push_str("</source>");
        s
    }

    /// Parse a descriptor document. A guide that is not prefix-closed is
    /// closed here and reported in the returned warnings.
    pub fn parse(doc: &str) -> Result<(SourceDescriptor, Vec<String>), CatalogError> {
        let mut reader = Reader::from_str(doc);
        let mut warnings = Vec::new();
        let mut id: Option<String> = None;
        let mut capability: Option<Capability> = None;
        let mut transport = Transport::InProcess;
        let mut collections = Vec::new();
        let mut current: Option<(String, u64, Vec<Path>)> = None;
        let mut stack: Vec<String> = Vec::new();
        let mut text = String::new();
        let malformed = |m: String| CatalogError::Malformed(m);
        loop {
            match reader.read_event().map_err(|e| malformed(e.to_string()))? {
                Event::Start(e) => {
                    let name = e.local_name().as_ref().to_string();
                    match (stack.last().map(String::as_str), name.as_str()) {
                        (None, "source") => id = Some(attr(&e, "id")?.ok_or_else(|| malformed("source without id".into()))?),
                        (Some("source"), "collection") => {
                            let cname = attr(&e, "name")?.ok_or_else(|| malformed("collection without name".into()))?;
                            let card = match attr(&e, "cardinality")? {
                                Some(c) => c.trim().parse().map_err(|_| malformed(format!("bad cardinality {c:?}")))?,
                                None => 0,
                            };
                            current = Some((cname, card, Vec::new()));
                        }
                        (Some("source"), "capability" | "transport") | (Some("collection"), "path") => {}
                        (parent, child) => return Err(malformed(format!("unexpected <{child}> in {parent:?}"))),
                    }
                    stack.push(name);
                    text.clear();
                }
                Event::Empty(e) => {
                    let name = e.local_name().as_ref().to_string();
                    match (stack.last().map(String::as_str), name.as_str()) {
                        (Some("source"), "collection") => {
                            let cname = attr(&e, "name")?.ok_or_else(|| malformed("collection without name".into()))?;
                            let card = attr(&e, "cardinality")?.and_then(|c| c.trim().parse().ok()).unwrap_or(0);
                            collections.push(CollectionMetadata { name: cname, guide: IndexSet::new(), cardinality: card });
                        }
                        (None, "source") => {
                            id = Some(attr(&e, "id")?.ok_or_else(|| malformed("source without id".into()))?);
                        }
                        (parent, child) => return Err(malformed(format!("unexpected <{child}/> in {parent:?}"))),
                    }
                }
                Event::Text(t) => text.push_str(&quick_xml::escape::unescape(&t).map_err(|e| malformed(e.to_string()))?),
                Event::GeneralRef(r) => {
                    let entity = format!("&{};", &*r);
                    text.push_str(&quick_xml::escape::unescape(&entity).map_err(|e| malformed(e.to_string()))?);
                }
                Event::End(_) => {
                    let name = stack.pop().ok_or_else(|| malformed("unbalanced end tag".into()))?;
                    match name.as_str() {
                        "capability" => capability = Some(text.parse()?),
                        "transport" => {
                            let t = text.trim();
                            transport = match t.strip_prefix("tcp:") {
                                Some(addr) => Transport::Tcp(addr.to_string()),
                                None if t == "in-process" || t.is_empty() => Transport::InProcess,
                                None => return Err(malformed(format!("unknown transport {t:?}"))),
                            };
                        }
                        "path" => {
                            let p = Path::parse(text.trim()).map_err(|e| malformed(e.to_string()))?;
                            current.as_mut().expect("path inside collection").2.push(p);
                        }
                        "collection" => {
                            let (cname, card, paths) = current.take().expect("open collection");
                            let closed = crate::xalgebra::relation::prefix_close(paths.iter().cloned());
                            if closed.len() != paths.iter().collect::<std::collections::HashSet<_>>().len() {
                                warnings.push(format!("collection {cname}: dataguide was not prefix-closed; closed it"));
                            }
                            let roots: std::collections::HashSet<&str> = closed.iter().map(|p| p.root()).collect();
                            if roots.len() > 1 {
                                return Err(malformed(format!("collection {cname}: paths have several roots")));
                            }
                            collections.push(CollectionMetadata { name: cname, guide: closed, cardinality: card });
                        }
                        _ => {}
                    }
                    text.clear();
                }
                Event::Eof => break,
                _ => {}
            }
        }
        if !stack.is_empty() {
            return Err(malformed("unclosed element".into()));
        }
        let id = id.ok_or_else(|| malformed("missing <source>".into()))?;
        let capability = capability.ok_or_else(|| malformed(format!("source {id}: missing <capability>")))?;
        let mut seen = std::collections::HashSet::new();
        for c in &collections {
            if !seen.insert(c.name.to_ascii_lowercase()) {
                return Err(malformed(format!("source {id}: duplicate collection {}", c.name)));
            }
        }
        Ok((SourceDescriptor { id, transport, capability, collections }, warnings))
    }
}

fn attr(e: &BytesStart, name: &str) -> Result<Option<String>, CatalogError> {
    for a in e.attributes() {
        let a = a.map_err(|e| CatalogError::Malformed(e.to_string()))?;
        if a.key.local_name().as_ref() == name {
            let v = a.normalized_value(quick_xml::XmlVersion::Implicit1_0).map_err(|e| CatalogError::Malformed(e.to_string()))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

fn escape_attr(s: &str) -> String {
    escape_text(s).replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xalgebra::path::path;

    #[test]
    fn round_trip() {
        let d = SourceDescriptor {
            id: "A6".into(),
            transport: Transport::Tcp("127.0.0.1:9000".into()),
            capability: Capability::XmlFile,
            collections: vec![CollectionMetadata::new("NATION", [path("nation/name"), path("nation/comment")], 25)],
        };
        let (back, warnings) = SourceDescriptor::parse(&d.to_xml()).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(back, d);
    }

    #[test]
    fn closes_guides_with_a_warning() {
        let doc = r#"<source id="X"><capability>tabular</capability>
            <collection name="ORDERS" cardinality="3"><path>orders/orderkey</path></collection></source>"#;
        let (d, warnings) = SourceDescriptor::parse(doc).unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(d.collections[0].guide.iter().map(|p| p.as_str()).collect::<Vec<_>>(), ["orders", "orders/orderkey"]);
        assert_eq!(d.transport, Transport::InProcess);
    }

    #[test]
    fn rejects_garbage() {
        assert!(SourceDescriptor::parse("<source><capability>sql</capability></source>").is_err());
        assert!(SourceDescriptor::parse("<source id='a'><capability>tabular</capability>").is_err());
        assert!(SourceDescriptor::parse("<other/>").is_err());
    }

    #[test]
    fn empty_collection_list_is_valid() {
        let (d, _) = SourceDescriptor::parse(r#"<source id="E"><capability>xml-file</capability></source>"#).unwrap();
        assert!(d.collections.is_empty());
    }
}
