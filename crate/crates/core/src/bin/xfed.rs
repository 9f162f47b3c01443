//! Command line front end: generate the dataset, query a federation, run
//! the benchmark experiments.

use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{ArgGroup, Parser, Subcommand};

use xfed::bench::{generate, run_experiment, BenchOptions, BenchReport, DatasetSpec, Experiment, Link, Phase, Topologies};
use xfed::decomposer::Output;
use xfed::mediator::{FederationConfig, MediatorConfig};
use xfed::xml::{serialize_events, XmlEvent};

#[derive(Parser)]
#[command(name = "xfed", version, about = "Federated XML query mediator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the seeded dataset, one directory per adapter store.
    Gen {
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Share of nations whose comment mentions "iron".
        #[arg(long, default_value_t = 0.2)]
        iron_fraction: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plan or run one query against a federation described in TOML.
    #[command(group(ArgGroup::new("mode").required(true).args(["emit_canonical", "emit_plan", "run"])))]
    Query {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        emit_canonical: bool,
        #[arg(long)]
        emit_plan: bool,
        #[arg(long)]
        run: bool,
        /// Print phase timings to stderr after a run.
        #[arg(long)]
        timings: bool,
        /// Read the query from a file instead of the argument.
        #[arg(long, conflicts_with = "text")]
        file: Option<PathBuf>,
        text: Option<String>,
    },
    /// Run an experiment over a parameter sweep and write a report.
    Bench {
        #[arg(long)]
        experiment: String,
        /// Comma-separated values of N.
        #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
        sweep: Vec<u64>,
        /// Tab-delimited report; the plot series goes next to it as `.series.tsv`.
        #[arg(long)]
        report: PathBuf,
        /// Dataset directory from `gen`; generated into a temporary directory when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Put every adapter and inner mediator behind a local TCP server.
        #[arg(long)]
        tcp: bool,
        /// Sleep before each TCP chunk frame, in milliseconds.
        #[arg(long)]
        frame_delay_ms: Option<u64>,
    },
}

type Failure = Box<dyn std::error::Error>;

fn query(config: &Path, text: &str, canonical: bool, plan: bool, timings: bool) -> Result<(), Failure> {
    let mediator = FederationConfig::load(config)?.build()?;
    if canonical || plan {
        let d = mediator.decompose(text, Output::Documents)?;
        if canonical {
            println!("{}", d.canonical);
        }
        if plan {
            for a in &d.atoms {
                println!("{a}");
            }
            println!("{}", d.global);
            print!("{}", d.binding_table());
            print!("{}", d.plan_text());
        }
        for w in &d.warnings {
            eprintln!("warning: {w}");
        }
        return Ok(());
    }
    let q = mediator.execute(text)?;
    for w in &q.warnings {
        eprintln!("warning: {w}");
    }
    let mut out = std::io::stdout().lock();
    let mut doc = Vec::new();
    for ev in q.events {
        match ev {
            XmlEvent::DocumentBoundary => {
                match writeln!(out, "{}", serialize_events(&doc)?) {
                    Err(e) if e.kind() == ErrorKind::BrokenPipe => return Ok(()),
                    r => r?,
                }
                doc.clear();
            }
            XmlEvent::Error(e) => return Err(e.into()),
            ev => doc.push(ev),
        }
    }
    if timings {
        let t = q.timings.snapshot();
        eprintln!(
            "parse {:.3} ms, plan {:.3} ms, first result {:.3} ms, local {:.3} ms, global {:.3} ms, total {:.3} ms",
            t.parse, t.plan, t.first_result, t.local_exec, t.global_exec, t.total
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bench(
    experiment: &str,
    sweep: &[u64],
    report: &Path,
    data: Option<&Path>,
    scale: f64,
    seed: u64,
    reps: usize,
    link: Link,
) -> Result<(), Failure> {
    let experiment: Experiment = experiment.parse()?;
    let scratch;
    let dir = match data {
        Some(d) => d.to_path_buf(),
        None => {
            scratch = tempfile_dir()?;
            generate(&DatasetSpec::new(scale, seed)).write(&scratch.0)?;
            scratch.0.clone()
        }
    };
    let topo = Topologies::build(&dir, &MediatorConfig::default(), link)?;
    let r: BenchReport = run_experiment(experiment, sweep, &topo, &BenchOptions { reps, ..Default::default() })?;
    fs::write(report, r.to_tsv())?;
    let series = match experiment {
        Experiment::Phases => r.phase_series(experiment.name(), "M0"),
        _ => r.series(experiment.name(), Phase::Total),
    };
    fs::write(report.with_extension("series.tsv"), series)?;
    for t in r.topologies(experiment.name()) {
        let totals: Vec<String> =
            r.sweep(experiment.name()).iter().map(|n| format!("N={n}: {:.2} ms", r.median(experiment.name(), &t, *n, Phase::Total).unwrap_or(0.0))).collect();
        eprintln!("{t}\t{}", totals.join("\t"));
    }
    Ok(())
}

/// A directory removed on drop.
struct ScratchDir(PathBuf);

impl Drop for ScratchDir {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

fn tempfile_dir() -> std::io::Result<ScratchDir> {
    let dir = std::env::temp_dir().join(format!("xfed-bench-{}", std::process::id()));
    fs::create_dir_all(&dir)?;
    Ok(ScratchDir(dir))
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Gen { scale, seed, iron_fraction, out } => {
            let spec = DatasetSpec { iron_fraction, ..DatasetSpec::new(scale, seed) };
            generate(&spec).write(&out).map_err(Failure::from)
        }
        Command::Query { config, emit_canonical, emit_plan, run: _, timings, file, text } => {
            let text = match (file, text) {
                (Some(f), _) => fs::read_to_string(f).map_err(Failure::from),
                (None, Some(t)) => Ok(t),
                (None, None) => Err("a query text or --file is required".into()),
            };
            text.and_then(|t| query(&config, &t, emit_canonical, emit_plan, timings))
        }
        Command::Bench { experiment, sweep, report, data, scale, seed, reps, tcp, frame_delay_ms } => {
            let link = if tcp || frame_delay_ms.is_some() {
                Link::Tcp { frame_delay: frame_delay_ms.map(Duration::from_millis) }
            } else {
                Link::InProcess
            };
            bench(&experiment, &sweep, &report, data.as_deref(), scale, seed, reps, link)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
