//! The mediator: a catalog of registered adapters, the decomposer, and the
//! executor that runs plans over adapter streams. A mediator is itself an
//! adapter, so mediators stack.

pub mod config;
mod exec;
pub mod timing;

use std::collections::HashMap;
use std::net::ToSocketAddrs;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use indexmap::IndexMap;
use serde::Deserialize;

pub use config::{FederationConfig, SourceConfig};
pub use timing::{PhaseTimings, TimingHandle};

use crate::adapters::{serve, Adapter, AdapterError, AdapterQuery, TcpServer};
use crate::catalog::{Capability, Catalog, CatalogError, CollectionMetadata, SourceDescriptor};
use crate::decomposer::{decompose, DecomposeError, Decomposition, OptimizeOptions, Output, PlanOptions};
use crate::frontend::{parse, FrontendError};
use crate::xalgebra::AlgebraError;
use crate::xml::{documents, EventStream, XmlEvent};

#[derive(Debug, thiserror::Error)]
pub enum MediatorError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("no adapter registered for source {0}")]
    UnknownSource(String),
    #[error("plan: {0}")]
    Plan(String),
    #[error("query failed while streaming: {0}")]
    Stream(String),
    #[error("config: {0}")]
    Config(String),
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MediatorConfig {
    /// Tuples buffered between a source thread and the operators above it.
    pub queue_capacity: usize,
    /// Distinct keys per dependent-join request.
    pub batch_size: usize,
    /// Pull every source on its own thread.
    pub parallel_sources: bool,
    pub unoptimized: bool,
    /// Largest declared left input turned into a dependent join.
    pub dependent_limit: u64,
    pub fuse_same_source: bool,
}

impl Default for MediatorConfig {
    fn default() -> Self {
        let o = OptimizeOptions::default();
        MediatorConfig {
            queue_capacity: 64,
            batch_size: crate::xalgebra::join::DEPENDENT_BATCH,
            parallel_sources: true,
            unoptimized: false,
            dependent_limit: o.dependent_limit,
            fuse_same_source: o.fuse_same_source,
        }
    }
}

impl MediatorConfig {
    fn plan_options(&self, output: Output) -> PlanOptions {
        PlanOptions {
            output,
            unoptimized: self.unoptimized,
            optimizer: OptimizeOptions { dependent_limit: self.dependent_limit, fuse_same_source: self.fuse_same_source },
        }
    }
}

/// A running query: its answer stream and a clock to read phases from.
pub struct QueryExecution {
    pub events: EventStream,
    pub timings: TimingHandle,
    pub warnings: Vec<String>,
    pub decomposition: Decomposition,
}

/// A query run to completion.
#[derive(Clone, Debug)]
pub struct QueryResult {
    pub documents: Vec<String>,
    pub timings: PhaseTimings,
    pub warnings: Vec<String>,
}

pub struct Mediator {
    id: String,
    catalog: Catalog,
    adapters: RwLock<HashMap<String, Arc<dyn Adapter>>>,
    config: MediatorConfig,
}

impl Mediator {
    pub fn new(id: &str, config: MediatorConfig) -> Mediator {
        Mediator { id: id.to_string(), catalog: Catalog::new(), adapters: Default::default(), config }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn config(&self) -> &MediatorConfig {
        &self.config
    }

    /// Fetch the adapter's metadata into the catalog. Returns the source id.
    pub fn register(&self, adapter: Arc<dyn Adapter>) -> Result<String, MediatorError> {
        let id = self.catalog.register_source(&adapter.get_metadata()?)?;
        self.adapters.write().unwrap().insert(id.clone(), adapter);
        Ok(id)
    }

    pub fn unregister(&self, id: &str) -> bool {
        self.adapters.write().unwrap().remove(id);
        self.catalog.unregister(id).is_some()
    }

    pub fn decompose(&self, text: &str, output: Output) -> Result<Decomposition, MediatorError> {
        Ok(decompose(&parse(text)?, &self.catalog, &self.config.plan_options(output))?)
    }

    /// Plan `text` and open its answer stream. Sources start pulling now;
    /// the stream yields documents as they complete.
    pub fn execute(&self, text: &str) -> Result<QueryExecution, MediatorError> {
        self.execute_as(text, Output::Documents)
    }

    pub fn execute_as(&self, text: &str, output: Output) -> Result<QueryExecution, MediatorError> {
        let clock = TimingHandle::start();
        let ast = parse(text)?;
        clock.parsed();
        let decomposition = decompose(&ast, &self.catalog, &self.config.plan_options(output))?;
        clock.planned();
        let events = match &decomposition.plan {
            Some(plan) => {
                let adapters = self.adapters.read().unwrap();
                exec::Executor { adapters: &adapters, config: &self.config, clock: &clock }.run(plan)?
            }
            None => crate::xml::empty_stream(),
        };
        let mut warnings = self.catalog.warnings();
        warnings.extend(decomposition.warnings.iter().cloned());
        Ok(QueryExecution { events: clock.observe(events), timings: clock, warnings, decomposition })
    }

    /// Run `text` and collect the answer documents.
    pub fn run(&self, text: &str) -> Result<QueryResult, MediatorError> {
        let q = self.execute(text)?;
        let events: Vec<XmlEvent> = q.events.collect();
        if let Some(XmlEvent::Error(e)) = events.iter().find(|e| matches!(e, XmlEvent::Error(_))) {
            return Err(MediatorError::Stream(e.clone()));
        }
        let docs = documents(&events).map_err(|e| MediatorError::Stream(e.to_string()))?;
        Ok(QueryResult { documents: docs, timings: q.timings.snapshot(), warnings: q.warnings })
    }

    /// Every collection the registered sources hold, merged by name:
    /// guides united, cardinalities summed.
    pub fn collections(&self) -> Vec<CollectionMetadata> {
        let mut merged: IndexMap<String, CollectionMetadata> = IndexMap::new();
        for s in self.catalog.sources() {
            for c in s.collections {
                match merged.get_mut(&c.name.to_uppercase()) {
                    Some(m) => {
                        m.guide.extend(c.guide);
                        m.cardinality += c.cardinality;
                    }
                    None => {
                        merged.insert(c.name.to_uppercase(), c);
                    }
                }
            }
        }
        merged.into_values().collect()
    }

    /// This mediator as a query-language source for another mediator.
    pub fn into_adapter(self: Arc<Self>) -> MediatorAdapter {
        MediatorAdapter { mediator: self }
    }

    /// Serve this mediator over TCP as an adapter.
    pub fn serve(self: Arc<Self>, addr: impl ToSocketAddrs, frame_delay: Option<Duration>) -> std::io::Result<TcpServer> {
        serve(Arc::new(self.into_adapter()), addr, frame_delay)
    }
}

/// A mediator answering adapter queries: bare path returns come back as
/// pruned source documents, constructed returns as built documents.
#[derive(Clone)]
pub struct MediatorAdapter {
    mediator: Arc<Mediator>,
}

impl Adapter for MediatorAdapter {
    fn id(&self) -> &str {
        self.mediator.id()
    }

    fn get_metadata(&self) -> Result<String, AdapterError> {
        Ok(SourceDescriptor::new(self.mediator.id(), Capability::QueryLanguage, self.mediator.collections()).to_xml())
    }

    fn execute(&self, q: &AdapterQuery) -> Result<EventStream, AdapterError> {
        match self.mediator.execute_as(&q.text, Output::Forest) {
            Ok(run) => Ok(run.events),
            Err(MediatorError::Frontend(e)) => Err(AdapterError::Query(e)),
            Err(e @ (MediatorError::Decompose(_) | MediatorError::Plan(_))) => Err(AdapterError::Rejected(e.to_string())),
            Err(e) => Err(AdapterError::Store(e.to_string())),
        }
    }
}
