//! Turns a plan into a pipeline of algebra operators over adapter streams.

use std::collections::HashMap;
use std::sync::atomic::AtomicU64;
use std::sync::mpsc::sync_channel;
use std::sync::Arc;
use std::thread;

use super::timing::{Timed, TimingHandle};
use super::{MediatorConfig, MediatorError};
use crate::adapters::{Adapter, AdapterQuery};
use crate::decomposer::{PlanNode, PlanOp, SourceBinding};
use crate::frontend::VarPath;
use crate::value::Value;
use crate::xalgebra::forest::prune_to_refs;
use crate::xalgebra::{
    x_join, x_join_dependent, x_product, x_project, x_reconstruct, x_reconstruct_grouped, x_restrict, x_source_framed, x_union,
    AlgebraError, Attr, Framing, JoinAlgo, Predicate, RebindableSource, XRelation, XRelationSchema, XTuple,
};
use crate::xml::{EventStream, XmlEvent};

pub(crate) struct Executor<'a> {
    pub adapters: &'a HashMap<String, Arc<dyn Adapter>>,
    pub config: &'a MediatorConfig,
    pub clock: &'a TimingHandle,
}

/// Adapter events, requested on first pull. A refused request becomes an
/// in-band error.
fn lazy_events(adapter: Arc<dyn Adapter>, q: AdapterQuery, keys: Option<Vec<Value>>) -> EventStream {
    let mut inner: Option<EventStream> = None;
    Box::new(std::iter::from_fn(move || {
        if inner.is_none() {
            let opened = match &keys {
                Some(k) => adapter.execute_batched(&q, k),
                None => adapter.execute(&q),
            };
            inner = Some(match opened {
                Ok(s) => s,
                Err(e) => Box::new(std::iter::once(XmlEvent::Error(format!("{}: {e}", adapter.id())))),
            });
        }
        inner.as_mut().unwrap().next()
    }))
}

fn timed(rel: XRelation, clock: Arc<AtomicU64>) -> XRelation {
    XRelation { tuples: Box::new(Timed { inner: rel.tuples, clock }), ..rel }
}

/// Pull `rel` on its own thread through a queue of about `capacity` tuples.
fn threaded(rel: XRelation, capacity: usize) -> XRelation {
    let (tx, rx) = sync_channel::<Vec<Result<XTuple, AlgebraError>>>(capacity.div_ceil(MAX_CHUNK).max(1));
    let XRelation { schema, ordered, diagnostics, tuples } = rel;
    thread::spawn(move || {
        // Chunks double up to MAX_CHUNK, so the first tuple is handed over alone.
        let mut size = 1;
        let mut chunk = Vec::with_capacity(size);
        for t in tuples {
            let stop = t.is_err();
            chunk.push(t);
            if chunk.len() >= size || stop {
                if tx.send(std::mem::take(&mut chunk)).is_err() || stop {
                    return;
                }
                size = (size * 2).min(MAX_CHUNK);
                chunk.reserve(size);
            }
        }
        if !chunk.is_empty() {
            let _ = tx.send(chunk);
        }
    });
    XRelation { schema, ordered, diagnostics, tuples: Box::new(rx.into_iter().flatten()) }
}

const MAX_CHUNK: usize = 64;

impl Executor<'_> {
    fn adapter(&self, id: &str) -> Result<Arc<dyn Adapter>, MediatorError> {
        self.adapters.get(id).cloned().ok_or_else(|| MediatorError::UnknownSource(id.to_string()))
    }

    /// The answer stream of a whole plan.
    pub fn run(&self, plan: &PlanNode) -> Result<EventStream, MediatorError> {
        match &plan.op {
            PlanOp::Reconstruct { template } => {
                let child = &plan.children[0];
                if let PlanOp::Nest { key } = &child.op {
                    let rel = self.relation(&child.children[0])?;
                    return Ok(x_reconstruct_grouped(rel, key, template)?);
                }
                Ok(x_reconstruct(self.relation(child)?, template)?)
            }
            PlanOp::EmitForest { attrs } => {
                let rel = self.relation(&plan.children[0])?;
                let pos: Vec<usize> = attrs.iter().map(|a| rel.schema.resolve(a)).collect::<Result<_, _>>()?;
                let mut failed = false;
                Ok(Box::new(
                    rel.tuples
                        .map_while(move |t| {
                            if failed {
                                return None;
                            }
                            Some(match t {
                                Ok(t) => {
                                    let pruned = prune_to_refs(&t.forest, pos.iter().map(|i| t.refs[*i].clone()).collect());
                                    let mut evs = Vec::new();
                                    for tree in &pruned.forest {
                                        tree.write_events(tree.root(), &mut evs);
                                    }
                                    if !evs.is_empty() {
                                        evs.push(XmlEvent::DocumentBoundary);
                                    }
                                    evs
                                }
                                Err(e) => {
                                    failed = true;
                                    vec![XmlEvent::Error(e.to_string())]
                                }
                            })
                        })
                        .flatten(),
                ))
            }
            _ => Err(MediatorError::Plan(format!("plan root must reconstruct or emit, found {}", op_name(&plan.op)))),
        }
    }

    fn relation(&self, node: &PlanNode) -> Result<XRelation, MediatorError> {
        let child = |i: usize| self.relation(&node.children[i]);
        Ok(match &node.op {
            PlanOp::Source(b) => self.source(b)?,
            PlanOp::Empty { attrs, guide } => XRelation::empty(XRelationSchema::new(attrs.clone(), guide.clone())?),
            PlanOp::Project { attrs } => x_project(child(0)?, attrs)?,
            PlanOp::Restrict { pred, .. } => x_restrict(child(0)?, pred)?,
            PlanOp::Join { pred, algo: JoinAlgo::Dependent, .. } => {
                let left = child(0)?;
                let right = self.rebindable(&node.children[1], pred, &left.schema.attributes)?;
                x_join_dependent(left, Box::new(right), pred, self.config.batch_size)?
            }
            PlanOp::Join { pred, algo, .. } => x_join(child(0)?, child(1)?, pred, *algo)?,
            PlanOp::Product => x_product(child(0)?, child(1)?)?,
            PlanOp::Union => {
                let mut rels = node.children.iter().map(|c| self.relation(c));
                let first = rels.next().ok_or_else(|| MediatorError::Plan("union without inputs".into()))??;
                rels.try_fold(first, |acc, r| Ok::<_, MediatorError>(x_union(acc, r?)?))?
            }
            op => return Err(MediatorError::Plan(format!("{} cannot appear inside a plan", op_name(op)))),
        })
    }

    fn source(&self, b: &SourceBinding) -> Result<XRelation, MediatorError> {
        let adapter = self.adapter(&b.source)?;
        let events = lazy_events(adapter, AdapterQuery::new(b.spec.text()), None);
        let rel = x_source_framed(events, b.guide.clone(), b.attrs.clone(), Framing::Boundary)?;
        let rel = timed(rel, self.clock.source_clock());
        Ok(if self.config.parallel_sources { threaded(rel, self.config.queue_capacity) } else { rel })
    }

    fn rebindable(&self, node: &PlanNode, pred: &Predicate, left: &[Attr]) -> Result<AdapterRebindable, MediatorError> {
        let right = node.attrs();
        let key = crate::decomposer::optimize::dependent_key(pred, left, &right)
            .ok_or_else(|| MediatorError::Plan(format!("no equality to bind in {pred}")))?;
        let tree = self.rebind_tree(node, &key)?;
        let schema = tree.fetch(None)?.schema;
        Ok(AdapterRebindable { tree, schema, key, calls: 0, clock: self.clock.source_clock() })
    }

    fn rebind_tree(&self, node: &PlanNode, key: &Attr) -> Result<Rebind, MediatorError> {
        Ok(match &node.op {
            PlanOp::Source(b) => {
                let var = key.var.as_deref().unwrap_or_default();
                let (_, _, root) = b
                    .spec
                    .fors
                    .iter()
                    .find(|(v, _, _)| v == var)
                    .ok_or_else(|| MediatorError::Plan(format!("{} does not bind ${var}", b.source)))?;
                let steps: Vec<String> = key.path.steps().skip(root.len()).map(str::to_string).collect();
                Rebind::Source {
                    adapter: self.adapter(&b.source)?,
                    query: AdapterQuery::with_param(b.spec.text(), VarPath { var: var.to_string(), steps }),
                    guide: b.guide.clone(),
                    attrs: b.attrs.clone(),
                }
            }
            PlanOp::Project { attrs } => Rebind::Project(attrs.clone(), Box::new(self.rebind_tree(&node.children[0], key)?)),
            PlanOp::Union => Rebind::Union(node.children.iter().map(|c| self.rebind_tree(c, key)).collect::<Result<_, _>>()?),
            op => return Err(MediatorError::Plan(format!("{} cannot be re-executed per key batch", op_name(op)))),
        })
    }
}

fn op_name(op: &PlanOp) -> &'static str {
    match op {
        PlanOp::Source(_) => "Source",
        PlanOp::Empty { .. } => "Empty",
        PlanOp::Project { .. } => "Project",
        PlanOp::Restrict { .. } => "Restrict",
        PlanOp::Join { .. } => "Join",
        PlanOp::Product => "Product",
        PlanOp::Union => "Union",
        PlanOp::Nest { .. } => "Nest",
        PlanOp::Reconstruct { .. } => "Reconstruct",
        PlanOp::EmitForest { .. } => "EmitForest",
    }
}

enum Rebind {
    Source { adapter: Arc<dyn Adapter>, query: AdapterQuery, guide: Vec<crate::xalgebra::Path>, attrs: Vec<Attr> },
    Project(Vec<Attr>, Box<Rebind>),
    Union(Vec<Rebind>),
}

impl Rebind {
    /// The subplan with its sources bound to `keys`; `None` builds it over
    /// empty inputs, which only serves to learn the schema.
    fn fetch(&self, keys: Option<&[Value]>) -> Result<XRelation, AlgebraError> {
        match self {
            Rebind::Source { adapter, query, guide, attrs } => {
                let events = match keys {
                    Some(k) if !k.is_empty() => lazy_events(adapter.clone(), query.clone(), Some(k.to_vec())),
                    _ => crate::xml::empty_stream(),
                };
                x_source_framed(events, guide.clone(), attrs.clone(), Framing::Boundary)
            }
            Rebind::Project(attrs, inner) => x_project(inner.fetch(keys)?, attrs),
            Rebind::Union(parts) => {
                let mut rels = parts.iter().map(|p| p.fetch(keys));
                let first = rels.next().ok_or_else(|| AlgebraError::Plan("union without inputs".into()))??;
                rels.try_fold(first, |acc, r| x_union(acc, r?))
            }
        }
    }
}

/// The inner side of a dependent join: its sources re-queried with the key
/// values of each batch bound into the condition.
struct AdapterRebindable {
    tree: Rebind,
    schema: Arc<XRelationSchema>,
    key: Attr,
    calls: usize,
    clock: Arc<AtomicU64>,
}

impl RebindableSource for AdapterRebindable {
    fn schema(&self) -> Arc<XRelationSchema> {
        self.schema.clone()
    }

    fn key_attr(&self) -> &Attr {
        &self.key
    }

    fn fetch(&mut self, keys: &[Value]) -> Result<XRelation, AlgebraError> {
        self.calls += 1;
        Ok(timed(self.tree.fetch(Some(keys))?, self.clock.clone()))
    }

    fn calls(&self) -> usize {
        self.calls
    }
}
