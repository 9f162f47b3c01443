//! Binary encoding of tuple streams.
//!
//! A stream is a header (magic `XTW1`, version, flags, path dictionary,
//! attribute list) followed by records. A record carries one tuple's forest
//! as a sequence of `(path-id, typed value)` leaf events in document order,
//! then its attribute bindings. Interior nodes are implied by path prefixes;
//! an explicit interior event (tag `0x00`) is written only for roots, empty
//! elements, and a new instance of an interior path that directly follows
//! another instance of the same path. All integers are big-endian.

use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::sync::Arc;

use indexmap::IndexSet;

use crate::value::{format_decimal, parse_decimal};
use crate::xalgebra::path::Path;
use crate::xalgebra::tree::{NodeId, TreeBuilder};
use crate::xalgebra::{AlgebraError, Attr, Materialized, NodeRef, XRelation, XRelationSchema, XTree, XTuple};
use crate::xml::{EventStream, XmlEvent};

pub const MAGIC: &[u8; 4] = b"XTW1";
pub const VERSION: u8 = 1;
/// Largest dictionary: id `0xFFFF` ends a record's event list.
pub const MAX_PATHS: usize = 0xFFFF;

const REC_START: u8 = 0xF1;
const REC_END: u8 = 0xF0;
const DICT_ADD: u8 = 0xD0;
const EVENTS_END: u16 = 0xFFFF;
const TAG_INTERIOR: u8 = 0x00;
const TAG_STRING: u8 = 0x01;
const TAG_DECIMAL: u8 = 0x02;
const FLAG_ORDERED: u8 = 0x01;

#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    Version(u8),
    #[error("truncated record")]
    Truncated,
    #[error("unknown type tag 0x{0:02x}")]
    UnknownTag(u8),
    #[error("unknown record marker 0x{0:02x}")]
    UnknownMarker(u8),
    #[error("path dictionary overflow ({0} paths)")]
    DictionaryOverflow(usize),
    #[error("malformed stream: {0}")]
    Malformed(String),
    #[error("node has both text and children")]
    MixedContent,
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for WireError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            WireError::Truncated
        } else {
            WireError::Io(e)
        }
    }
}

fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_str16(out: &mut Vec<u8>, s: &str) -> Result<(), WireError> {
    let len = u16::try_from(s.len()).map_err(|_| WireError::Malformed(format!("name too long: {} bytes", s.len())))?;
    put_u16(out, len);
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

/// Writes the header and then one record per tuple. Paths missing from the
/// header dictionary are added by `0xD0` entries ahead of the record.
#[derive(Debug)]
pub struct Encoder {
    dict: IndexSet<Path>,
}

impl Encoder {
    pub fn header(schema: &XRelationSchema, ordered: bool, out: &mut Vec<u8>) -> Result<Encoder, WireError> {
        let mut dict: IndexSet<Path> = schema.guide.iter().cloned().collect();
        dict.extend(schema.attributes.iter().map(|a| a.path.clone()));
        if dict.len() > MAX_PATHS {
            return Err(WireError::DictionaryOverflow(dict.len()));
        }
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(if ordered { FLAG_ORDERED } else { 0 });
        put_u16(out, dict.len() as u16);
        for p in &dict {
            put_str16(out, p.as_str())?;
        }
        put_u16(out, schema.attributes.len() as u16);
        for a in &schema.attributes {
            match &a.var {
                Some(v) => {
                    out.push(1);
                    put_str16(out, v)?;
                }
                None => out.push(0),
            }
            put_u16(out, dict.get_index_of(&a.path).expect("added above") as u16);
        }
        Ok(Encoder { dict })
    }

    fn id(&mut self, p: Path, out: &mut Vec<u8>) -> Result<u16, WireError> {
        if let Some(i) = self.dict.get_index_of(&p) {
            return Ok(i as u16);
        }
        if self.dict.len() >= MAX_PATHS {
            return Err(WireError::DictionaryOverflow(self.dict.len() + 1));
        }
        out.push(DICT_ADD);
        put_str16(out, p.as_str())?;
        self.dict.insert(p);
        Ok((self.dict.len() - 1) as u16)
    }

    pub fn record(&mut self, t: &XTuple, out: &mut Vec<u8>) -> Result<(), WireError> {
        let mut body = Vec::new();
        let mut ordinal: HashMap<(u32, NodeId), u32> = HashMap::new();
        for (ti, tree) in t.forest.iter().enumerate() {
            let mut last_interior: HashMap<NodeId, &str> = HashMap::new();
            for n in tree.preorder(tree.root()) {
                ordinal.insert((ti as u32, n), ordinal.len() as u32);
                let node = tree.node(n);
                let id = self.id(tree.path_of(n), out)?;
                match (&node.text, node.children.is_empty()) {
                    (Some(_), false) => return Err(WireError::MixedContent),
                    (Some(text), true) => {
                        put_u16(&mut body, id);
                        let decimal = parse_decimal(text).is_some_and(|d| format_decimal(d) == *text);
                        body.push(if decimal { TAG_DECIMAL } else { TAG_STRING });
                        put_u32(&mut body, text.len() as u32);
                        body.extend_from_slice(text.as_bytes());
                    }
                    (None, empty) => {
                        let explicit = match node.parent {
                            None => true,
                            Some(p) => empty || last_interior.get(&p) == Some(&node.label.as_str()),
                        };
                        if let Some(p) = node.parent {
                            last_interior.insert(p, &node.label);
                        }
                        if explicit {
                            put_u16(&mut body, id);
                            body.push(TAG_INTERIOR);
                        }
                    }
                }
            }
        }
        put_u16(&mut body, EVENTS_END);
        for refs in &t.refs {
            put_u16(&mut body, refs.len() as u16);
            for r in refs {
                let id = self.id(t.tree(*r).path_of(r.node), out)?;
                put_u16(&mut body, id);
                put_u32(&mut body, ordinal[&(r.tree, r.node)]);
            }
        }
        out.push(REC_START);
        out.extend_from_slice(&body);
        out.push(REC_END);
        Ok(())
    }
}

/// Encode a whole relation, returning the bytes written.
pub fn encode(rel: XRelation, mut w: impl Write) -> Result<u64, WireError> {
    let mut buf = Vec::new();
    let mut enc = Encoder::header(&rel.schema, rel.ordered, &mut buf)?;
    let mut written = 0u64;
    for t in rel.tuples {
        enc.record(&t?, &mut buf)?;
        if buf.len() >= 1 << 16 {
            w.write_all(&buf)?;
            written += buf.len() as u64;
            buf.clear();
        }
    }
    w.write_all(&buf)?;
    Ok(written + buf.len() as u64)
}

pub fn encode_to_vec(rel: XRelation) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::new();
    encode(rel, &mut out)?;
    Ok(out)
}

struct Input<R> {
    r: R,
}

impl<R: Read> Input<R> {
    fn u8(&mut self) -> Result<u8, WireError> {
        let mut b = [0u8; 1];
        self.r.read_exact(&mut b)?;
        Ok(b[0])
    }

    /// A marker byte, or `None` at a clean end of stream.
    fn marker(&mut self) -> Result<Option<u8>, WireError> {
        let mut b = [0u8; 1];
        loop {
            return match self.r.read(&mut b) {
                Ok(0) => Ok(None),
                Ok(_) => Ok(Some(b[0])),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => Err(e.into()),
            };
        }
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        let mut b = [0u8; 2];
        self.r.read_exact(&mut b)?;
        Ok(u16::from_be_bytes(b))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        let mut b = [0u8; 4];
        self.r.read_exact(&mut b)?;
        Ok(u32::from_be_bytes(b))
    }

    fn bytes(&mut self, len: usize) -> Result<String, WireError> {
        let mut buf = Vec::new();
        (&mut self.r).take(len as u64).read_to_end(&mut buf)?;
        if buf.len() < len {
            return Err(WireError::Truncated);
        }
        String::from_utf8(buf).map_err(|e| WireError::Malformed(e.to_string()))
    }

    fn str16(&mut self) -> Result<String, WireError> {
        let len = self.u16()? as usize;
        self.bytes(len)
    }
}

/// Reads records one at a time after the header.
pub struct Decoder<R> {
    input: Input<R>,
    dict: Vec<Path>,
    pub schema: XRelationSchema,
    pub ordered: bool,
    failed: bool,
}

impl<R: Read> Decoder<R> {
    pub fn new(r: R) -> Result<Decoder<R>, WireError> {
        let mut input = Input { r };
        let mut magic = [0u8; 4];
        input.r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(WireError::BadMagic(magic));
        }
        let version = input.u8()?;
        if version != VERSION {
            return Err(WireError::Version(version));
        }
        let flags = input.u8()?;
        let n = input.u16()? as usize;
        let mut dict = Vec::with_capacity(n);
        for _ in 0..n {
            dict.push(Path::parse(&input.str16()?)?);
        }
        let n_attrs = input.u16()? as usize;
        let mut attrs = Vec::with_capacity(n_attrs);
        for _ in 0..n_attrs {
            let var = match input.u8()? {
                0 => None,
                1 => Some(input.str16()?),
                b => return Err(WireError::Malformed(format!("attribute flag {b}"))),
            };
            let id = input.u16()? as usize;
            let path = dict.get(id).cloned().ok_or_else(|| WireError::Malformed(format!("path id {id}")))?;
            attrs.push(match var {
                Some(v) => Attr::qualified(&v, path),
                None => Attr::new(path),
            });
        }
        let schema = XRelationSchema::new(attrs, dict.iter().cloned())?;
        Ok(Decoder { input, dict, schema, ordered: flags & FLAG_ORDERED != 0, failed: false })
    }

    fn path(&self, id: u16) -> Result<&Path, WireError> {
        self.dict.get(id as usize).ok_or_else(|| WireError::Malformed(format!("path id {id}")))
    }

    /// The next tuple, or `None` at end of stream.
    pub fn next_tuple(&mut self) -> Result<Option<XTuple>, WireError> {
        loop {
            match self.input.marker()? {
                None => return Ok(None),
                Some(DICT_ADD) => {
                    let p = Path::parse(&self.input.str16()?)?;
                    self.dict.push(p);
                }
                Some(REC_START) => return self.record().map(Some),
                Some(b) => return Err(WireError::UnknownMarker(b)),
            }
        }
    }

    fn record(&mut self) -> Result<XTuple, WireError> {
        let mut forest: Vec<XTree> = Vec::new();
        let mut stack: Vec<(NodeId, Path)> = Vec::new();
        let mut order: Vec<NodeRef> = Vec::new();
        loop {
            let id = self.input.u16()?;
            if id == EVENTS_END {
                break;
            }
            let p = self.path(id)?.clone();
            let tag = self.input.u8()?;
            let text = match tag {
                TAG_INTERIOR => None,
                TAG_STRING => Some(self.read_text()?),
                TAG_DECIMAL => {
                    let t = self.read_text()?;
                    if parse_decimal(&t).is_none() {
                        return Err(WireError::Malformed(format!("decimal value {t:?}")));
                    }
                    Some(t)
                }
                t => return Err(WireError::UnknownTag(t)),
            };
            if p.len() == 1 {
                stack.clear();
                let tree = match &text {
                    Some(t) => XTree::leaf(p.root(), t),
                    None => XTree::new(p.root()),
                };
                forest.push(tree);
                order.push(NodeRef::new(forest.len() - 1, 0));
                if text.is_none() {
                    stack.push((0, p));
                }
                continue;
            }
            while stack.last().is_some_and(|(_, top)| !top.is_proper_prefix_of(&p)) {
                stack.pop();
            }
            let ti = forest.len().checked_sub(1).filter(|_| !stack.is_empty()).ok_or_else(|| {
                WireError::Malformed(format!("{p} has no open ancestor"))
            })?;
            let tree = &mut forest[ti];
            let steps: Vec<&str> = p.steps().collect();
            while stack.len() < steps.len() - 1 {
                let (parent, parent_path) = stack.last().expect("non-empty").clone();
                let label = steps[parent_path.len()];
                let n = tree.add_child(parent, label);
                order.push(NodeRef::new(ti, n));
                stack.push((n, parent_path.child(label)?));
            }
            let parent = stack.last().expect("non-empty").0;
            let n = match &text {
                Some(t) => tree.add_leaf(parent, p.last(), t),
                None => tree.add_child(parent, p.last()),
            };
            order.push(NodeRef::new(ti, n));
            if text.is_none() {
                stack.push((n, p));
            }
        }
        let mut refs = Vec::with_capacity(self.schema.attributes.len());
        for _ in 0..self.schema.attributes.len() {
            let n = self.input.u16()? as usize;
            let mut bound = Vec::with_capacity(n);
            for _ in 0..n {
                let id = self.input.u16()?;
                let ord = self.input.u32()? as usize;
                let r = *order.get(ord).ok_or_else(|| WireError::Malformed(format!("node ordinal {ord}")))?;
                if forest[r.tree as usize].path_of(r.node) != *self.path(id)? {
                    return Err(WireError::Malformed(format!("binding ordinal {ord} is not at {}", self.path(id)?)));
                }
                bound.push(r);
            }
            refs.push(bound);
        }
        match self.input.u8()? {
            REC_END => Ok(XTuple { refs, forest: forest.into_iter().map(Arc::new).collect() }),
            b => Err(WireError::UnknownMarker(b)),
        }
    }

    fn read_text(&mut self) -> Result<String, WireError> {
        let len = self.input.u32()? as usize;
        self.input.bytes(len)
    }
}

impl<R: Read> Iterator for Decoder<R> {
    type Item = Result<XTuple, WireError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let r = self.next_tuple().transpose();
        if matches!(r, Some(Err(_))) {
            self.failed = true;
        }
        r
    }
}

/// Decode lazily: the header is read now, tuples as the stream is pulled.
/// A failure mid-stream surfaces as an error item after the tuples already read.
pub fn decode<R: Read + Send + 'static>(r: R) -> Result<XRelation, WireError> {
    let dec = Decoder::new(r)?;
    let schema = dec.schema.clone();
    let ordered = dec.ordered;
    let mut rel = XRelation::new(schema, Box::new(dec.map(|t| t.map_err(|e| AlgebraError::Stream(e.to_string())))));
    rel.ordered = ordered;
    Ok(rel)
}

pub fn decode_bytes(bytes: &[u8]) -> Result<Materialized, WireError> {
    let dec = Decoder::new(bytes)?;
    let schema = Arc::new(dec.schema.clone());
    let ordered = dec.ordered;
    let tuples = dec.collect::<Result<Vec<_>, _>>()?;
    Ok(Materialized { schema, ordered, diagnostics: Default::default(), tuples })
}

/// Wire chunks for a document stream: the header, then one record per
/// document with the document's trees as its forest and no attributes.
/// An in-band error ends the sequence with `Err`.
pub fn encode_documents(events: EventStream) -> impl Iterator<Item = Result<Vec<u8>, String>> + Send {
    let schema = XRelationSchema::new(Vec::new(), Vec::<Path>::new()).expect("empty schema");
    let mut header = Vec::new();
    let mut enc = Encoder::header(&schema, true, &mut header).expect("empty header");
    let mut events = events;
    let mut builder = TreeBuilder::new();
    let mut trees: Vec<Arc<XTree>> = Vec::new();
    let mut done = false;
    let mut flush = move |trees: &mut Vec<Arc<XTree>>| -> Result<Vec<u8>, String> {
        let mut out = Vec::new();
        let t = XTuple { refs: Vec::new(), forest: std::mem::take(trees) };
        enc.record(&t, &mut out).map_err(|e| e.to_string())?;
        Ok(out)
    };
    std::iter::once(Ok(header)).chain(std::iter::from_fn(move || {
        if done {
            return None;
        }
        loop {
            let step = match events.next() {
                None => {
                    done = true;
                    return (!trees.is_empty()).then(|| flush(&mut trees));
                }
                Some(XmlEvent::Open(l)) => {
                    builder.open(&l);
                    Ok(())
                }
                Some(XmlEvent::Text(t)) => builder.text(&t).map_err(|e| e.to_string()),
                Some(XmlEvent::Close) => match builder.close() {
                    Ok(Some(t)) => {
                        trees.push(Arc::new(t));
                        Ok(())
                    }
                    Ok(None) => Ok(()),
                    Err(e) => Err(e.to_string()),
                },
                Some(XmlEvent::DocumentBoundary) if !trees.is_empty() => return Some(flush(&mut trees)),
                Some(XmlEvent::DocumentBoundary) => Ok(()),
                Some(XmlEvent::Error(msg)) => Err(msg),
            };
            if let Err(e) = step {
                done = true;
                return Some(Err(e));
            }
        }
    }))
}

/// Inverse of [`encode_documents`]: events with a boundary after each record.
/// Decoding failures become an in-band error event.
pub fn decode_documents<R: Read + Send + 'static>(r: R) -> EventStream {
    let mut dec = match Decoder::new(r) {
        Ok(d) => d,
        Err(e) => return Box::new(std::iter::once(XmlEvent::Error(format!("wire: {e}")))),
    };
    let mut failed = false;
    Box::new(
        std::iter::from_fn(move || {
            if failed {
                return None;
            }
            match dec.next_tuple() {
                Ok(Some(t)) => {
                    let mut evs = Vec::new();
                    for tree in &t.forest {
                        tree.write_events(tree.root(), &mut evs);
                    }
                    evs.push(XmlEvent::DocumentBoundary);
                    Some(evs)
                }
                Ok(None) => None,
                Err(e) => {
                    failed = true;
                    Some(vec![XmlEvent::Error(format!("wire: {e}"))])
                }
            }
        })
        .flatten(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xalgebra::path::path;
    use crate::xalgebra::tree::parse_trees;
    use crate::xalgebra::{x_source, Attr};
    use crate::xml::{documents, parse_events, serialize_events};

    fn relation(xml: &str, guide: &[&str], attrs: &[&str]) -> Materialized {
        let events = parse_events(xml).unwrap();
        x_source(events.into_iter(), guide.iter().map(|p| path(p)), attrs.iter().map(|a| Attr::new(path(a))).collect())
            .unwrap()
            .materialize()
            .unwrap()
    }

    fn round_trip(m: &Materialized) -> Materialized {
        decode_bytes(&encode_to_vec(m.relation()).unwrap()).unwrap()
    }

    #[test]
    fn empty_relation_is_header_only() {
        let m = relation("", &["a", "a/b"], &["a/b"]);
        let bytes = encode_to_vec(m.relation()).unwrap();
        assert_eq!(&bytes[..4], MAGIC);
        let back = decode_bytes(&bytes).unwrap();
        assert!(back.tuples.is_empty());
        assert_eq!(back.schema.attributes, m.schema.attributes);
    }

    #[test]
    fn single_decimal_leaf_golden_bytes() {
        let m = relation("<v>45</v>", &["v"], &["v"]);
        let bytes = encode_to_vec(m.relation()).unwrap();
        #[rustfmt::skip]
        let expected: Vec<u8> = [
            b"XTW1".as_slice(), &[1, 1],
            &[0, 1], &[0, 1], b"v",
            &[0, 1], &[0], &[0, 0],
            &[0xF1], &[0, 0], &[0x02], &[0, 0, 0, 2], b"45", &[0xFF, 0xFF],
            &[0, 1], &[0, 0], &[0, 0, 0, 0],
            &[0xF0],
        ]
        .concat();
        assert_eq!(bytes, expected);
    }

    #[test]
    fn repeated_siblings_and_nested_repeats_survive() {
        let xml = "<r><a><b>1</b><b>2</b></a><a><b>3</b></a><c/><a><d><e>x</e></d><d><e>y</e></d></a><f>t</f></r>";
        let m = relation(xml, &["r", "r/a", "r/a/b", "r/a/d", "r/a/d/e", "r/c", "r/f"], &["r/a", "r/a/d/e"]);
        let back = round_trip(&m);
        assert_eq!(back.canonical(), m.canonical());
        assert_eq!(back.tuples[0].forest[0].canonical(0), parse_trees(xml).unwrap()[0].canonical(0));
    }

    #[test]
    fn qualified_attributes_and_multi_tree_forests() {
        let t1 = XTree::leaf("a", "1");
        let mut t2 = XTree::new("b");
        t2.add_leaf(0, "c", "hello");
        let t3 = XTree::leaf("a", "2");
        let schema =
            XRelationSchema::new(vec![Attr::qualified("x", path("a")), Attr::qualified("y", path("b/c"))], [path("a"), path("b/c")])
                .unwrap();
        let t = XTuple {
            refs: vec![vec![NodeRef::new(0, 0), NodeRef::new(2, 0)], vec![NodeRef::new(1, 1)]],
            forest: vec![Arc::new(t1), Arc::new(t2), Arc::new(t3)],
        };
        let m = XRelation::from_tuples(schema, vec![t.clone()]).materialize().unwrap();
        let back = round_trip(&m);
        assert_eq!(back.schema.attributes, m.schema.attributes);
        assert_eq!(back.tuples, vec![t]);
    }

    #[test]
    fn truncation_keeps_prior_tuples() {
        let m = relation("<v>1</v><v>2</v><v>3</v>", &["v"], &["v"]);
        let bytes = encode_to_vec(m.relation()).unwrap();
        let cut = &bytes[..bytes.len() - 5];
        let items: Vec<_> = Decoder::new(cut).unwrap().collect();
        assert_eq!(items.len(), 3);
        assert!(items[0].is_ok() && items[1].is_ok());
        assert!(matches!(items[2], Err(WireError::Truncated)));
        assert!(matches!(Decoder::new(&b"XTW2\x01"[..]), Err(WireError::BadMagic(_))));
    }

    #[test]
    fn unknown_tag_is_rejected() {
        let m = relation("<v>x</v>", &["v"], &[]);
        let mut bytes = encode_to_vec(m.relation()).unwrap();
        let pos = bytes.iter().position(|b| *b == REC_START).unwrap() + 3;
        bytes[pos] = 0x07;
        assert!(matches!(decode_bytes(&bytes), Err(WireError::UnknownTag(0x07))));
    }

    #[test]
    fn decode_encode_decode_is_stable() {
        let m = relation("<r><a>1.50</a><a>x</a></r>", &["r", "r/a"], &["r/a"]);
        let once = encode_to_vec(m.relation()).unwrap();
        let twice = encode_to_vec(decode_bytes(&once).unwrap().into_relation()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn documents_round_trip() {
        let xml = "<a><b>1</b></a><c>2</c><d/>";
        let events = parse_events(xml).unwrap();
        let bytes: Vec<u8> = encode_documents(Box::new(events.clone().into_iter())).flat_map(Result::unwrap).collect();
        let back: Vec<XmlEvent> = decode_documents(io::Cursor::new(bytes)).collect();
        assert_eq!(documents(&back).unwrap(), documents(&events).unwrap());
        assert_eq!(serialize_events(&back).unwrap(), serialize_events(&events).unwrap());
    }

    #[test]
    fn document_stream_error_is_reported() {
        let events = vec![XmlEvent::Open("a".into()), XmlEvent::Close, XmlEvent::DocumentBoundary, XmlEvent::Error("boom".into())];
        let chunks: Vec<_> = encode_documents(Box::new(events.into_iter())).collect();
        assert_eq!(chunks.len(), 3);
        assert_eq!(chunks[2], Err("boom".to_string()));
    }
}
