//! Desk-scale reproduction of the measurements: a seeded dataset, the
//! mediator arrangements M0..M4 over adapters A1..A7, and three experiments.
//!
//! | topology | sources |
//! |----------|---------|
//! | M0 | A1..A6 |
//! | M1 | M2, M3 |
//! | M2 | A1, A2, A3 |
//! | M3 | A4, A5, A6 |
//! | M4 | A7, A4, A5, A6 |
//!
//! A7 holds copies of the relational tables behind a query-language
//! interface, so joins between them can be shipped to it.

pub mod datagen;
pub mod report;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use rand::rngs::ChaCha8Rng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

pub use datagen::{generate, Counts, Dataset, DatasetSpec};
pub use report::{BenchReport, BenchRow, Phase};

use crate::adapters::{serve, Adapter, AdapterError, AdapterQuery, FileAdapter, TabularAdapter, TcpAdapter, TcpServer};
use crate::mediator::{Mediator, MediatorConfig, MediatorError, PhaseTimings};
use crate::xml::{documents, XmlEvent};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Mediator(#[from] MediatorError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{experiment} at N={n}: {topology} differs from {reference}")]
    Mismatch { experiment: String, n: u64, topology: String, reference: String },
    #[error("report: {0}")]
    Report(String),
    #[error("unknown experiment {0:?}; expected overhead, phases or xjoin")]
    UnknownExperiment(String),
}

/// The query of the overhead and phase experiments.
pub fn orders_query(n: u64) -> String {
    format!("for $O in collection(\"ORDERS\") where $O/orderkey < {n} return <result><O>$O/comment</O></result>")
}

/// The same selection in the adapter's own query form.
pub fn orders_adapter_query(n: u64) -> String {
    format!("for $O in Collection(\"ORDERS\")/orders where $O/orderkey < {n} return ($O/comment)")
}

/// The cross-site join of the xjoin experiment.
pub fn xjoin_query(n: u64) -> String {
    format!(
        "for $L in collection(\"LINEITEM\") for $O in collection(\"ORDERS\") where $O/orderkey = $L/orderkey and $L/orderkey < {n} \
         return <result><lcom>$L/comment</lcom><ocom>$O/comment</ocom></result>"
    )
}

/// How mediators reach their sources.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Link {
    #[default]
    InProcess,
    /// Every adapter and inner mediator behind a local TCP server, with an
    /// optional sleep before each chunk frame.
    Tcp { frame_delay: Option<Duration> },
}

/// Mediators and adapters of every arrangement, over one dataset directory.
pub struct Topologies {
    /// A1..A7 as the mediators see them.
    pub adapters: IndexMap<String, Arc<dyn Adapter>>,
    pub mediators: IndexMap<String, Arc<Mediator>>,
    servers: Vec<TcpServer>,
}

impl Topologies {
    pub fn build(dir: &Path, config: &MediatorConfig, link: Link) -> Result<Topologies, BenchError> {
        let a7 = Arc::new(Mediator::new("A7", config.clone()));
        a7.register(Arc::new(TabularAdapter::new("A7-store", dir.join("A7"))))?;
        let local: Vec<(&str, Arc<dyn Adapter>)> = vec![
            ("A1", Arc::new(TabularAdapter::new("A1", dir.join("A1")))),
            ("A2", Arc::new(TabularAdapter::new("A2", dir.join("A2")))),
            ("A3", Arc::new(TabularAdapter::new("A3", dir.join("A3")))),
            ("A4", Arc::new(FileAdapter::new("A4", dir.join("A4")))),
            ("A5", Arc::new(FileAdapter::new("A5", dir.join("A5")))),
            ("A6", Arc::new(FileAdapter::new("A6", dir.join("A6")))),
            ("A7", Arc::new(a7.into_adapter())),
        ];
        let mut servers = Vec::new();
        let mut expose = |id: &str, a: Arc<dyn Adapter>| -> Result<Arc<dyn Adapter>, BenchError> {
            Ok(match link {
                Link::InProcess => a,
                Link::Tcp { frame_delay } => {
                    let s = serve(a, "127.0.0.1:0", frame_delay)?;
                    let remote = Arc::new(TcpAdapter::new(id, s.addr().to_string()));
                    servers.push(s);
                    remote
                }
            })
        };
        let mut adapters = IndexMap::new();
        for (id, a) in local {
            adapters.insert(id.to_string(), expose(id, a)?);
        }
        let mediator = |id: &str, sources: &[&str], adapters: &IndexMap<String, Arc<dyn Adapter>>| -> Result<Arc<Mediator>, BenchError> {
            let m = Mediator::new(id, config.clone());
            for s in sources {
                m.register(adapters[*s].clone())?;
            }
            Ok(Arc::new(m))
        };
        let mut mediators = IndexMap::new();
        mediators.insert("M0".to_string(), mediator("M0", &["A1", "A2", "A3", "A4", "A5", "A6"], &adapters)?);
        let m2 = mediator("M2", &["A1", "A2", "A3"], &adapters)?;
        let m3 = mediator("M3", &["A4", "A5", "A6"], &adapters)?;
        let mut inner = IndexMap::new();
        inner.insert("M2".to_string(), expose("M2", Arc::new(m2.clone().into_adapter()))?);
        inner.insert("M3".to_string(), expose("M3", Arc::new(m3.clone().into_adapter()))?);
        mediators.insert("M1".to_string(), mediator("M1", &["M2", "M3"], &inner)?);
        mediators.insert("M2".to_string(), m2);
        mediators.insert("M3".to_string(), m3);
        mediators.insert("M4".to_string(), mediator("M4", &["A7", "A4", "A5", "A6"], &adapters)?);
        Ok(Topologies { adapters, mediators, servers })
    }

    pub fn mediator(&self, id: &str) -> Option<&Arc<Mediator>> {
        self.mediators.get(id)
    }

    pub fn server_count(&self) -> usize {
        self.servers.len()
    }

    /// Run `query` on a mediator: documents and phase timings.
    pub fn run(&self, mediator: &str, query: &str) -> Result<(Vec<String>, PhaseTimings), BenchError> {
        let m = self.mediators.get(mediator).ok_or_else(|| BenchError::Report(format!("no mediator {mediator}")))?;
        let r = m.run(query)?;
        Ok((r.documents, r.timings))
    }

    /// The ORDERS selection sent straight to A3. Its documents are wrapped
    /// the way the mediator's template does, so answers compare directly.
    pub fn run_direct(&self, n: u64) -> Result<(Vec<String>, PhaseTimings), BenchError> {
        let start = Instant::now();
        let mut first = None;
        let mut events = Vec::new();
        for ev in self.adapters["A3"].execute(&AdapterQuery::new(orders_adapter_query(n)))? {
            first.get_or_insert_with(|| start.elapsed());
            if let XmlEvent::Error(e) = ev {
                return Err(MediatorError::Stream(e).into());
            }
            events.push(ev);
        }
        let total = start.elapsed();
        let docs = documents(&events).map_err(|e| MediatorError::Stream(e.to_string()))?;
        let docs = docs
            .into_iter()
            .map(|d| {
                let inner = d.strip_prefix("<orders>").and_then(|d| d.strip_suffix("</orders>")).unwrap_or(&d);
                format!("<result><O>{inner}</O></result>")
            })
            .collect();
        let ms = |d: Duration| d.as_secs_f64() * 1000.0;
        let total = ms(total);
        let t = PhaseTimings { first_result: ms(first.unwrap_or_default()), local_exec: total, total, ..Default::default() };
        Ok((docs, t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    /// ORDERS selection on M0, M1 and directly on A3.
    Overhead,
    /// ORDERS selection on M0, every phase.
    Phases,
    /// LINEITEM-ORDERS join on M2 (joined by the mediator) and M4 (joined at A7).
    Xjoin,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::Overhead, Experiment::Phases, Experiment::Xjoin];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Overhead => "overhead",
            Experiment::Phases => "phases",
            Experiment::Xjoin => "xjoin",
        }
    }

    pub fn topologies(self) -> &'static [&'static str] {
        match self {
            Experiment::Overhead => &["M0", "M1", "A3"],
            Experiment::Phases => &["M0"],
            Experiment::Xjoin => &["M2", "M4"],
        }
    }

    pub fn query(self, n: u64) -> String {
        match self {
            Experiment::Overhead | Experiment::Phases => orders_query(n),
            Experiment::Xjoin => xjoin_query(n),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Experiment, BenchError> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| BenchError::UnknownExperiment(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchOptions {
    pub reps: usize,
    /// Unrecorded runs per (topology, N) before measuring.
    pub warmup: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { reps: 5, warmup: 1 }
    }
}

/// Run `experiment` for every N of `sweep`. Each repetition visits every
/// (N, topology) pair in a fresh seeded order, so no cell always follows the
/// same neighbour; answers must agree across topologies and repetitions.
const ORDER_SEED: u64 = 0x5eed;

pub fn run_experiment(experiment: Experiment, sweep: &[u64], topo: &Topologies, opts: &BenchOptions) -> Result<BenchReport, BenchError> {
    let run = |t: &str, n: u64| match t {
        "A3" => topo.run_direct(n),
        m => topo.run(m, &experiment.query(n)),
    };
    let names = experiment.topologies();
    for _ in 0..opts.warmup {
        for &n in sweep {
            for t in names {
                run(t, n)?;
            }
        }
    }
    let mut answers: Vec<Vec<Option<Vec<String>>>> = vec![vec![None; names.len()]; sweep.len()];
    let mut timings: Vec<Vec<Vec<PhaseTimings>>> = vec![vec![Vec::new(); names.len()]; sweep.len()];
    let mut cells: Vec<(usize, usize)> = (0..sweep.len()).flat_map(|j| (0..names.len()).map(move |i| (j, i))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(ORDER_SEED);
    for _ in 0..opts.reps.max(1) {
        cells.shuffle(&mut rng);
        for &(j, i) in &cells {
            let (n, t) = (sweep[j], names[i]);
            let (mut docs, timing) = run(t, n)?;
            docs.sort();
            match &answers[j][i] {
                Some(prev) if *prev != docs => {
                    return Err(BenchError::Mismatch { experiment: experiment.to_string(), n, topology: t.to_string(), reference: t.to_string() })
                }
                _ => answers[j][i] = Some(docs),
            }
            timings[j][i].push(timing);
        }
    }
    let mut report = BenchReport::default();
    for (j, &n) in sweep.iter().enumerate() {
        for (i, t) in names.iter().enumerate() {
            if answers[j][i] != answers[j][0] {
                return Err(BenchError::Mismatch { experiment: experiment.to_string(), n, topology: t.to_string(), reference: names[0].to_string() });
            }
            let count = answers[j][i].as_ref().map_or(0, Vec::len);
            report.record(experiment.name(), t, n, &timings[j][i], count);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (tempfile::TempDir, Dataset, Topologies) {
        let dir = tempfile::tempdir().unwrap();
        let data = generate(&DatasetSpec::new(0.1, 3));
        data.write(dir.path()).unwrap();
        let topo = Topologies::build(dir.path(), &MediatorConfig::default(), Link::InProcess).unwrap();
        (dir, data, topo)
    }

    #[test]
    fn overhead_counts_agree_with_the_data() {
        let (_d, data, topo) = setup();
        let opts = BenchOptions { reps: 2, warmup: 0 };
        let r = run_experiment(Experiment::Overhead, &[1, 10, 100], &topo, &opts).unwrap();
        for n in [1, 10, 100] {
            let want = data.orders.iter().filter(|o| (o.key as u64) < n).count();
            for t in ["M0", "M1", "A3"] {
                assert_eq!(r.get("overhead", t, n, Phase::Total).unwrap().results, want, "{t} {n}");
            }
        }
        assert_eq!(r.rows.len(), 3 * 3 * Phase::ALL.len());
        assert_eq!(BenchReport::parse(&r.to_tsv()).unwrap(), r);
    }

    #[test]
    fn xjoin_agrees_on_both_topologies() {
        let (_d, data, topo) = setup();
        let r = run_experiment(Experiment::Xjoin, &[1, 20], &topo, &BenchOptions { reps: 1, warmup: 0 }).unwrap();
        let want = data.lineitems.iter().filter(|l| l.order < 20).count();
        assert_eq!(r.get("xjoin", "M4", 20, Phase::Total).unwrap().results, want);
        assert_eq!(r.get("xjoin", "M2", 20, Phase::Total).unwrap().results, want);
    }

    #[test]
    fn experiment_names_parse() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!(matches!("nope".parse::<Experiment>(), Err(BenchError::UnknownExperiment(_))));
    }

    #[test]
    fn tcp_topologies_answer_like_in_process_ones() {
        let (d, _data, local) = setup();
        let remote = Topologies::build(d.path(), &MediatorConfig::default(), Link::Tcp { frame_delay: None }).unwrap();
        assert_eq!(remote.server_count(), 9);
        for m in ["M0", "M1", "M4"] {
            let (mut a, _) = local.run(m, &xjoin_query(15)).unwrap();
            let (mut b, _) = remote.run(m, &xjoin_query(15)).unwrap();
            a.sort();
            b.sort();
            assert_eq!(a, b, "{m}");
        }
    }
}
