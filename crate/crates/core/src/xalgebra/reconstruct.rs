//! XReconstruct: instantiate a template once per tuple, or once per group
//! of tuples when the template has nested regions.

use std::fmt;

use indexmap::IndexMap;

use super::aggregate::AggregateFn;
use super::relation::{Attr, XRelation, XRelationSchema, XTuple};
use super::AlgebraError;
use crate::xml::{escape_text, EventStream, XmlEvent};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TemplateNode {
    Element { label: String, children: Vec<TemplateNode> },
    Text(String),
    /// Expands to every subtree bound to the attribute, in ref order, taken
    /// from the first tuple of the current group.
    Placeholder(Attr),
    /// Repeats its children once per distinct `key` binding among the
    /// tuples of the current group.
    Region { key: Vec<Attr>, children: Vec<TemplateNode> },
    /// Text of `fun` over the values bound to `attr` across the current group.
    Aggregate { fun: AggregateFn, attr: Attr },
}

impl TemplateNode {
    pub fn element(label: &str, children: Vec<TemplateNode>) -> TemplateNode {
        TemplateNode::Element { label: label.to_string(), children }
    }

    fn placeholders<'a>(&'a self, out: &mut Vec<&'a Attr>) {
        match self {
            TemplateNode::Element { children, .. } => children.iter().for_each(|c| c.placeholders(out)),
            TemplateNode::Region { key, children } => {
                out.extend(key);
                children.iter().for_each(|c| c.placeholders(out));
            }
            TemplateNode::Text(_) => {}
            TemplateNode::Placeholder(a) | TemplateNode::Aggregate { attr: a, .. } => out.push(a),
        }
    }
}

/// A constructor fragment: a sequence of template nodes.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ReconstructTemplate {
    pub nodes: Vec<TemplateNode>,
}

impl ReconstructTemplate {
    pub fn new(nodes: Vec<TemplateNode>) -> Self {
        ReconstructTemplate { nodes }
    }

    pub fn placeholders(&self) -> Vec<&Attr> {
        let mut out = Vec::new();
        self.nodes.iter().for_each(|n| n.placeholders(&mut out));
        out
    }

    pub fn validate(&self, schema: &XRelationSchema) -> Result<(), AlgebraError> {
        for a in self.placeholders() {
            schema.resolve(a)?;
        }
        Ok(())
    }

    /// Events of one instance. An element that directly holds placeholders
    /// is omitted when all of them are absent.
    pub fn instantiate(&self, schema: &XRelationSchema, t: &XTuple, out: &mut Vec<XmlEvent>) {
        self.instantiate_group(schema, &[t], out);
    }

    /// Events of one instance over a group of tuples.
    pub fn instantiate_group(&self, schema: &XRelationSchema, group: &[&XTuple], out: &mut Vec<XmlEvent>) {
        for n in &self.nodes {
            emit(n, schema, group, out);
        }
    }
}

fn bound(schema: &XRelationSchema, t: &XTuple, a: &Attr) -> usize {
    schema.position(a).map_or(0, |i| t.refs[i].len())
}

/// Split `group` by the canonical bindings of `key`, in first-appearance order.
fn split<'a>(schema: &XRelationSchema, group: &[&'a XTuple], key: &[Attr]) -> Vec<Vec<&'a XTuple>> {
    let pos: Vec<Option<usize>> = key.iter().map(|a| schema.position(a)).collect();
    let mut parts: IndexMap<Vec<String>, Vec<&XTuple>> = IndexMap::new();
    for t in group {
        let k = pos.iter().map(|p| p.map(|i| t.canonical_binding(i)).unwrap_or_default()).collect();
        parts.entry(k).or_default().push(t);
    }
    parts.into_values().collect()
}

fn emit(n: &TemplateNode, schema: &XRelationSchema, group: &[&XTuple], out: &mut Vec<XmlEvent>) {
    let Some(first) = group.first() else { return };
    match n {
        TemplateNode::Element { label, children } => {
            let direct: Vec<&Attr> = children
                .iter()
                .filter_map(|c| match c {
                    TemplateNode::Placeholder(a) => Some(a),
                    _ => None,
                })
                .collect();
            if !direct.is_empty() && direct.iter().all(|a| bound(schema, first, a) == 0) {
                return;
            }
            out.push(XmlEvent::Open(label.clone()));
            for c in children {
                emit(c, schema, group, out);
            }
            out.push(XmlEvent::Close);
        }
        TemplateNode::Text(s) => out.push(XmlEvent::Text(s.clone())),
        TemplateNode::Placeholder(a) => {
            if let Some(i) = schema.position(a) {
                for r in &first.refs[i] {
                    first.tree(*r).write_events(r.node, out);
                }
            }
        }
        TemplateNode::Region { key, children } => {
            for part in split(schema, group, key) {
                for c in children {
                    emit(c, schema, &part, out);
                }
            }
        }
        TemplateNode::Aggregate { fun, attr } => {
            let values: Vec<String> = match schema.position(attr) {
                Some(i) => group.iter().flat_map(|t| t.values(i)).collect(),
                None => Vec::new(),
            };
            if let Ok(Some(v)) = fun.apply(&values) {
                out.push(XmlEvent::Text(v));
            }
        }
    }
}

impl fmt::Display for TemplateNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateNode::Element { label, children } => {
                write!(f, "<{label}>")?;
                write_seq(f, children)?;
                write!(f, "</{label}>")
            }
            TemplateNode::Text(s) => f.write_str(&escape_text(s)),
            TemplateNode::Placeholder(a) => write_attr(f, a),
            TemplateNode::Region { children, .. } => write_seq(f, children),
            TemplateNode::Aggregate { fun, attr } => {
                write!(f, "aggregate({fun}, ")?;
                write_attr(f, attr)?;
                f.write_str(")")
            }
        }
    }
}

fn write_attr(f: &mut fmt::Formatter<'_>, a: &Attr) -> fmt::Result {
    match &a.var {
        Some(v) => write!(f, "${}/{}", v, a.path),
        None => write!(f, "{}", a.path),
    }
}

fn write_seq(f: &mut fmt::Formatter<'_>, nodes: &[TemplateNode]) -> fmt::Result {
    for (i, n) in nodes.iter().enumerate() {
        if i > 0 {
            f.write_str(" ")?;
        }
        write!(f, "{n}")?;
    }
    Ok(())
}

impl fmt::Display for ReconstructTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_seq(f, &self.nodes)
    }
}

fn events_stream(mut tuples: impl Iterator<Item = Result<Vec<XmlEvent>, AlgebraError>> + Send + 'static) -> EventStream {
    let mut buf: std::collections::VecDeque<XmlEvent> = Default::default();
    let mut done = false;
    Box::new(std::iter::from_fn(move || loop {
        if let Some(e) = buf.pop_front() {
            return Some(e);
        }
        if done {
            return None;
        }
        match tuples.next() {
            None => done = true,
            Some(Err(e)) => {
                done = true;
                return Some(XmlEvent::Error(e.to_string()));
            }
            Some(Ok(evs)) => {
                buf.extend(evs);
                buf.push_back(XmlEvent::DocumentBoundary);
            }
        }
    }))
}

/// One instantiated template per tuple, each followed by a document
/// boundary. Streaming; a tuple stream error ends the output with an
/// in-band error event.
pub fn x_reconstruct(rel: XRelation, tpl: &ReconstructTemplate) -> Result<EventStream, AlgebraError> {
    tpl.validate(&rel.schema)?;
    let tpl = tpl.clone();
    let schema = rel.schema.clone();
    Ok(events_stream(rel.tuples.map(move |t| {
        let t = t?;
        let mut evs = Vec::new();
        tpl.instantiate(&schema, &t, &mut evs);
        Ok(evs)
    })))
}

/// One instantiated template per distinct `key` binding, over all tuples
/// sharing it, in first-appearance order. Blocking.
pub fn x_reconstruct_grouped(rel: XRelation, key: &[Attr], tpl: &ReconstructTemplate) -> Result<EventStream, AlgebraError> {
    tpl.validate(&rel.schema)?;
    for a in key {
        rel.schema.resolve(a)?;
    }
    let tpl = tpl.clone();
    let key = key.to_vec();
    let schema = rel.schema.clone();
    let mut pending = Some(rel.tuples);
    let mut docs = Vec::new().into_iter();
    Ok(events_stream(std::iter::from_fn(move || {
        if let Some(tuples) = pending.take() {
            let all: Vec<XTuple> = match tuples.collect() {
                Ok(all) => all,
                Err(e) => return Some(Err(e)),
            };
            let refs: Vec<&XTuple> = all.iter().collect();
            let built: Vec<Vec<XmlEvent>> = split(&schema, &refs, &key)
                .into_iter()
                .map(|g| {
                    let mut evs = Vec::new();
                    tpl.instantiate_group(&schema, &g, &mut evs);
                    evs
                })
                .collect();
            docs = built.into_iter();
        }
        docs.next().map(Ok)
    })))
}
