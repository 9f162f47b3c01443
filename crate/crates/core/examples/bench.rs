//! A short run of the three experiments over the in-process topologies,
//! printed as plot-ready series.

use xfed::bench::{generate, run_experiment, BenchOptions, DatasetSpec, Experiment, Link, Phase, Topologies};
use xfed::mediator::MediatorConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    generate(&DatasetSpec::new(1.0, 1)).write(dir.path())?;
    let topo = Topologies::build(dir.path(), &MediatorConfig::default(), Link::InProcess)?;
    let opts = BenchOptions { reps: 5, warmup: 1 };

    let overhead = run_experiment(Experiment::Overhead, &[1, 10, 100, 1000], &topo, &opts)?;
    println!("overhead, median total ms\n{}", overhead.series("overhead", Phase::Total));
    let phases = run_experiment(Experiment::Phases, &[10, 1000], &topo, &opts)?;
    println!("phases on M0, median ms\n{}", phases.phase_series("phases", "M0"));
    let xjoin = run_experiment(Experiment::Xjoin, &[1, 100, 1000], &topo, &opts)?;
    println!("xjoin, median total ms\n{}", xjoin.series("xjoin", Phase::Total));
    Ok(())
}
