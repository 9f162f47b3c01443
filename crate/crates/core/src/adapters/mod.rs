//! Source wrappers behind one interface: metadata, query execution, and
//! batched execution for dependent joins.

pub mod file;
pub mod tabular;
pub mod tcp;

use std::collections::{HashMap, HashSet};
use std::io;
use std::sync::Arc;

pub use file::FileAdapter;
pub use tabular::TabularAdapter;
pub use tcp::{serve, TcpAdapter, TcpServer};

use crate::catalog::{Capability, CatalogError, SourceDescriptor};
use crate::decomposer::plan::{attr_of, to_predicate};
use crate::frontend::{normalize, parse, Cond, ForSource, FrontendError, QueryAst, ReturnItem, VarPath};
use crate::value::Value;
use crate::xalgebra::forest::prune_to_refs;
use crate::xalgebra::path::Path;
use crate::xalgebra::predicate::BoundPredicate;
use crate::xalgebra::{x_source_framed, Attr, Diagnostics, Framing, NodeRef, XRelationSchema, XTree, XTuple};
use crate::xml::{EventStream, XmlEvent};

/// Keys per call of a batched execution.
pub const BATCH_LIMIT: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum AdapterError {
    #[error("query rejected: {0}")]
    Rejected(String),
    #[error(transparent)]
    Query(#[from] FrontendError),
    #[error(transparent)]
    Metadata(#[from] CatalogError),
    #[error("backing store: {0}")]
    Store(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Query text in the frontend grammar, plus the path a key batch binds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdapterQuery {
    pub text: String,
    pub param: Option<VarPath>,
}

impl AdapterQuery {
    pub fn new(text: impl Into<String>) -> AdapterQuery {
        AdapterQuery { text: text.into(), param: None }
    }

    pub fn with_param(text: impl Into<String>, param: VarPath) -> AdapterQuery {
        AdapterQuery { text: text.into(), param: Some(param) }
    }

    /// The query restricted to documents whose parameter path holds one of `keys`.
    pub fn bind_keys(&self, keys: &[Value]) -> Result<AdapterQuery, AdapterError> {
        let param = self.param.clone().ok_or_else(|| AdapterError::Rejected("query has no parameter slot".into()))?;
        let mut ast = parse(&self.text)?;
        let key_set = Cond::In { path: param, values: keys.to_vec() };
        ast.where_ = Cond::and(ast.where_.take().into_iter().chain([key_set]).collect());
        Ok(AdapterQuery::new(ast.to_string()))
    }
}

pub trait Adapter: Send + Sync {
    fn id(&self) -> &str;

    /// The descriptor document of this source.
    fn get_metadata(&self) -> Result<String, AdapterError>;

    fn execute(&self, q: &AdapterQuery) -> Result<EventStream, AdapterError>;

    /// Same answer as executing once per key, issued as one membership
    /// query per [`BATCH_LIMIT`] keys.
    fn execute_batched(&self, q: &AdapterQuery, keys: &[Value]) -> Result<EventStream, AdapterError> {
        if keys.is_empty() {
            return Err(AdapterError::Rejected("empty key batch".into()));
        }
        let streams: Vec<EventStream> =
            keys.chunks(BATCH_LIMIT).map(|chunk| self.execute(&q.bind_keys(chunk)?)).collect::<Result<_, _>>()?;
        Ok(Box::new(streams.into_iter().flatten()))
    }

    fn descriptor(&self) -> Result<SourceDescriptor, AdapterError> {
        Ok(SourceDescriptor::parse(&self.get_metadata()?)?.0)
    }
}

/// A single-collection query as file and tabular adapters understand it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalQuery {
    pub var: String,
    pub collection: String,
    pub root: Vec<String>,
    pub cond: Option<Cond>,
    /// `None` returns whole documents.
    pub returns: Option<Vec<VarPath>>,
}

impl LocalQuery {
    pub fn parse(text: &str) -> Result<LocalQuery, AdapterError> {
        let ast = normalize(&parse(text)?)?;
        LocalQuery::from_ast(&ast)
    }

    fn from_ast(ast: &QueryAst) -> Result<LocalQuery, AdapterError> {
        let reject = |m: &str| Err(AdapterError::Rejected(m.to_string()));
        let [f] = ast.fors.as_slice() else { return reject("exactly one collection binding is supported") };
        let ForSource::Collection { name, steps } = &f.source else { return reject("binding must range over a collection") };
        if name == "*" {
            return reject("collection wildcard");
        }
        if steps.is_empty() {
            return reject("collection binding needs a root path");
        }
        let mut paths = Vec::new();
        let whole = flat_return(&ast.ret, &mut paths)?;
        if let Some(p) = paths.iter().chain(ast.where_.iter().flat_map(|c| c.paths())).find(|p| p.var != f.var) {
            return Err(AdapterError::Rejected(format!("unbound variable ${}", p.var)));
        }
        Ok(LocalQuery {
            var: f.var.clone(),
            collection: name.clone(),
            root: steps.clone(),
            cond: ast.where_.clone(),
            returns: (!whole).then_some(paths),
        })
    }

    pub fn paths(&self) -> Vec<Path> {
        let mut out: Vec<&VarPath> = self.cond.iter().flat_map(|c| c.paths()).collect();
        out.extend(self.returns.iter().flatten());
        out.iter()
            .map(|p| Path::from_steps(&self.root.iter().chain(&p.steps).collect::<Vec<_>>()).expect("valid steps"))
            .collect()
    }

    pub fn check_capability(&self, cap: Capability) -> Result<(), AdapterError> {
        if self.returns.is_some() && !cap.can_project() {
            return Err(AdapterError::Rejected(format!("{cap} sources do not project")));
        }
        if self.cond.is_some() && !cap.can_select(&self.paths()) {
            return Err(AdapterError::Rejected(format!("{cap} sources cannot select on these paths")));
        }
        Ok(())
    }
}

/// Path items of a return clause; `true` when it returns the bound variable itself.
fn flat_return(items: &[ReturnItem], out: &mut Vec<VarPath>) -> Result<bool, AdapterError> {
    let mut whole = false;
    for item in items {
        match item {
            ReturnItem::Path(p) if p.steps.is_empty() => whole = true,
            ReturnItem::Path(p) => out.push(p.clone()),
            ReturnItem::Group(g) => whole |= flat_return(g, out)?,
            other => return Err(AdapterError::Rejected(format!("unsupported return item {other}"))),
        }
    }
    if whole && !out.is_empty() {
        return Err(AdapterError::Rejected("mixes a whole binding with paths".into()));
    }
    Ok(whole || out.is_empty())
}

/// Every path instantiated by a document event sequence, prefix-closed.
pub fn events_guide(events: &[XmlEvent]) -> Vec<Path> {
    let mut seen = indexmap::IndexSet::new();
    let mut stack: Vec<Path> = Vec::new();
    for ev in events {
        match ev {
            XmlEvent::Open(label) => {
                let p = match stack.last() {
                    Some(parent) => parent.child(label),
                    None => Path::parse(label),
                };
                let Ok(p) = p else { break };
                seen.insert(p.clone());
                stack.push(p);
            }
            XmlEvent::Close => {
                stack.pop();
            }
            _ => {}
        }
    }
    seen.into_iter().collect()
}

/// A local query compiled against a collection guide: the predicate bound
/// to the returned and tested paths.
pub struct LocalPlan {
    schema: XRelationSchema,
    pred: Option<BoundPredicate>,
    /// Attribute positions the condition reads.
    tested: Vec<usize>,
    returned: usize,
    diag: Diagnostics,
}

impl LocalPlan {
    pub fn new(guide: Vec<Path>, q: &LocalQuery) -> Result<LocalPlan, AdapterError> {
        let roots: HashMap<String, Vec<String>> = [(q.var.clone(), q.root.clone())].into();
        let bad = |e: crate::decomposer::DecomposeError| AdapterError::Rejected(e.to_string());
        let store = |e: crate::xalgebra::AlgebraError| AdapterError::Store(e.to_string());
        let mut attrs: Vec<Attr> = Vec::new();
        let ret: Vec<VarPath> = q.returns.clone().unwrap_or_else(|| vec![VarPath { var: q.var.clone(), steps: Vec::new() }]);
        for p in &ret {
            let a = attr_of(p, &roots).map_err(bad)?;
            if !attrs.contains(&a) {
                attrs.push(a);
            }
        }
        let returned = attrs.len();
        let mut tested = Vec::new();
        for p in q.cond.iter().flat_map(|c| c.paths()) {
            let a = attr_of(p, &roots).map_err(bad)?;
            let i = attrs.iter().position(|x| *x == a).unwrap_or_else(|| {
                attrs.push(a);
                attrs.len() - 1
            });
            if !tested.contains(&i) {
                tested.push(i);
            }
        }
        let mut guide = guide;
        for a in &attrs {
            for p in a.path.prefixes() {
                if !guide.contains(&p) {
                    guide.push(p);
                }
            }
        }
        let schema = XRelationSchema::new(attrs, guide).map_err(store)?;
        let pred = match &q.cond {
            Some(c) => Some(to_predicate(c, &roots).map_err(bad)?.bind(&schema).map_err(store)?),
            None => None,
        };
        Ok(LocalPlan { schema, pred, tested, returned, diag: Diagnostics::new() })
    }

    /// Child names of the root that some attribute reaches: the columns a
    /// row scan has to materialize. `None` when an attribute binds the root.
    pub fn columns(&self) -> Option<HashSet<&str>> {
        self.schema.attributes.iter().map(|a| a.path.steps().nth(1)).collect()
    }

    pub fn attributes(&self) -> &[Attr] {
        &self.schema.attributes
    }

    pub fn tested(&self) -> &[usize] {
        &self.tested
    }

    /// Whether the condition holds, given the values of each attribute.
    pub fn admits(&self, values: &dyn Fn(usize) -> Vec<String>) -> bool {
        self.pred.as_ref().is_none_or(|p| p.eval_on(values, &self.diag))
    }

    /// One document as a tuple over the plan's attributes.
    pub fn bind(&self, tree: XTree) -> XTuple {
        let refs = self.schema.attributes.iter().map(|a| tree.find(&a.path).into_iter().map(|n| NodeRef::new(0, n)).collect()).collect();
        XTuple { refs, forest: vec![Arc::new(tree)] }
    }

    /// The answer events for one tuple: nothing when it fails the
    /// condition or prunes to an empty forest.
    pub fn answer(&self, t: &XTuple) -> Vec<XmlEvent> {
        if !self.admits(&|i| t.values(i)) {
            return Vec::new();
        }
        self.emit(t)
    }

    /// The answer events for a tuple already known to pass.
    pub fn emit(&self, t: &XTuple) -> Vec<XmlEvent> {
        let pruned = prune_to_refs(&t.forest, t.refs[..self.returned].to_vec());
        let mut evs = Vec::new();
        for tree in &pruned.forest {
            tree.write_events(tree.root(), &mut evs);
        }
        if !evs.is_empty() {
            evs.push(XmlEvent::DocumentBoundary);
        }
        evs
    }
}

/// Evaluate a single-collection query over a document stream: bind, filter
/// per document, and prune to the returned paths.
pub fn eval_local(events: EventStream, guide: Vec<Path>, q: &LocalQuery) -> Result<EventStream, AdapterError> {
    let plan = LocalPlan::new(guide, q)?;
    let rel = x_source_framed(events, plan.schema.guide.iter().cloned(), plan.schema.attributes.clone(), Framing::Boundary)
        .map_err(|e| AdapterError::Store(e.to_string()))?;
    let mut failed = false;
    Ok(Box::new(
        rel.tuples
            .map_while(move |t| {
                if failed {
                    return None;
                }
                Some(match t {
                    Ok(t) => plan.answer(&t),
                    Err(e) => {
                        failed = true;
                        vec![XmlEvent::Error(e.to_string())]
                    }
                })
            })
            .flatten(),
    ))
}
