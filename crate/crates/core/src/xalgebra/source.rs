use std::collections::HashSet;
use std::sync::Arc;

use super::path::Path;
use super::relation::{Attr, Diagnostics, NodeRef, XRelation, XRelationSchema, XTuple};
use super::tree::{TreeBuilder, XTree};
use super::AlgebraError;
use crate::xml::XmlEvent;

/// How top-level trees group into documents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Framing {
    /// Every top-level element is one document; boundaries are ignored.
    #[default]
    Element,
    /// Top-level trees accumulate until a document boundary.
    Boundary,
}

/// Build a relation from a document event stream, one tuple per document in
/// arrival order. Tuples are emitted as soon as their document closes.
pub fn x_source<I>(events: I, guide: impl IntoIterator<Item = Path>, attrs: Vec<Attr>) -> Result<XRelation, AlgebraError>
where
    I: Iterator<Item = XmlEvent> + Send + 'static,
{
    x_source_framed(events, guide, attrs, Framing::Element)
}

pub fn x_source_framed<I>(
    events: I,
    guide: impl IntoIterator<Item = Path>,
    attrs: Vec<Attr>,
    framing: Framing,
) -> Result<XRelation, AlgebraError>
where
    I: Iterator<Item = XmlEvent> + Send + 'static,
{
    let schema = XRelationSchema::new(attrs, guide)?;
    let diag = Diagnostics::new();
    let iter = SourceIter {
        events,
        builder: TreeBuilder::new(),
        pending: Vec::new(),
        framing,
        guide: schema.guide.iter().cloned().collect(),
        attrs: schema.attributes.iter().map(|a| a.path.clone()).collect(),
        diag: diag.clone(),
        done: false,
    };
    let schema = Arc::new(schema);
    Ok(XRelation::derived(diag, schema, true, Box::new(iter)))
}

struct SourceIter<I> {
    events: I,
    builder: TreeBuilder,
    pending: Vec<Arc<XTree>>,
    framing: Framing,
    guide: HashSet<Path>,
    attrs: Vec<Path>,
    diag: Diagnostics,
    done: bool,
}

impl<I: Iterator<Item = XmlEvent>> SourceIter<I> {
    /// Drop nodes outside the guide; skip documents whose root is unknown.
    fn admit(&mut self, tree: XTree) {
        let root = Path::parse(tree.root_label()).expect("valid label");
        if !self.guide.contains(&root) {
            self.diag.skipped_document();
            return;
        }
        let keep: Vec<bool> = (0..tree.len() as u32).map(|n| self.guide.contains(&tree.path_of(n))).collect();
        let tree = if keep.iter().all(|k| *k) { tree } else { tree.retain(&keep).expect("root kept").0 };
        self.pending.push(Arc::new(tree));
    }

    fn flush(&mut self) -> Option<XTuple> {
        if self.pending.is_empty() {
            return None;
        }
        let forest = std::mem::take(&mut self.pending);
        let refs = self
            .attrs
            .iter()
            .map(|p| {
                forest
                    .iter()
                    .enumerate()
                    .flat_map(|(i, t)| t.find(p).into_iter().map(move |n| NodeRef::new(i, n)))
                    .collect()
            })
            .collect();
        Some(XTuple { refs, forest })
    }

    fn step(&mut self) -> Result<Option<XTuple>, AlgebraError> {
        loop {
            let Some(ev) = self.events.next() else {
                self.done = true;
                if self.builder.depth() != 0 {
                    return Err(AlgebraError::Stream("event stream ends inside an element".into()));
                }
                return Ok(self.flush());
            };
            match ev {
                XmlEvent::Open(label) => self.builder.open(&label),
                XmlEvent::Text(t) => self.builder.text(&t)?,
                XmlEvent::Close => {
                    if let Some(tree) = self.builder.close()? {
                        self.admit(tree);
                        if self.framing == Framing::Element {
                            if let Some(t) = self.flush() {
                                return Ok(Some(t));
                            }
                        }
                    }
                }
                XmlEvent::DocumentBoundary => {
                    if self.builder.depth() != 0 {
                        return Err(AlgebraError::Stream("document boundary inside an element".into()));
                    }
                    if let Some(t) = self.flush() {
                        return Ok(Some(t));
                    }
                }
                XmlEvent::Error(msg) => return Err(AlgebraError::Stream(msg)),
            }
        }
    }
}

impl<I: Iterator<Item = XmlEvent>> Iterator for SourceIter<I> {
    type Item = Result<XTuple, AlgebraError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.step() {
            Ok(Some(t)) => Some(Ok(t)),
            Ok(None) => None,
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}
