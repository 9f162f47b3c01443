//! Tab-delimited benchmark report: one row per (experiment, topology, N, phase).

use std::fmt;
use std::str::FromStr;

use super::BenchError;
use crate::mediator::PhaseTimings;

pub const HEADER: &str = "experiment\ttopology\tn\tphase\tmedian_ms\treps\tresults";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Parse,
    Plan,
    FirstResult,
    /// Parse, plan and first result together.
    Init,
    LocalExec,
    GlobalExec,
    Total,
}

impl Phase {
    pub const ALL: [Phase; 7] = [Phase::Parse, Phase::Plan, Phase::FirstResult, Phase::Init, Phase::LocalExec, Phase::GlobalExec, Phase::Total];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Parse => "parse",
            Phase::Plan => "plan",
            Phase::FirstResult => "first_result",
            Phase::Init => "init",
            Phase::LocalExec => "local_exec",
            Phase::GlobalExec => "global_exec",
            Phase::Total => "total",
        }
    }

    pub fn of(self, t: &PhaseTimings) -> f64 {
        match self {
            Phase::Parse => t.parse,
            Phase::Plan => t.plan,
            Phase::FirstResult => t.first_result,
            Phase::Init => t.initialization(),
            Phase::LocalExec => t.local_exec,
            Phase::GlobalExec => t.global_exec,
            Phase::Total => t.total,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Phase, BenchError> {
        Phase::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| BenchError::Report(format!("unknown phase {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub experiment: String,
    pub topology: String,
    pub n: u64,
    pub phase: Phase,
    pub median_ms: f64,
    pub reps: usize,
    pub results: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

/// Median of `v`; the mean of the middle pair for even lengths.
pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 { s[m] } else { (s[m - 1] + s[m]) / 2.0 }
}

impl BenchReport {
    /// Rows for one (topology, N) from its repeated runs.
    pub fn record(&mut self, experiment: &str, topology: &str, n: u64, runs: &[PhaseTimings], results: usize) {
        for phase in Phase::ALL {
            let v: Vec<f64> = runs.iter().map(|t| phase.of(t)).collect();
            self.rows.push(BenchRow {
                experiment: experiment.to_string(),
                topology: topology.to_string(),
                n,
                phase,
                median_ms: median(&v),
                reps: runs.len(),
                results,
            });
        }
    }

    pub fn extend(&mut self, other: BenchReport) {
        self.rows.extend(other.rows);
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from(HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.experiment, r.topology, r.n, r.phase, r.median_ms, r.reps, r.results));
        }
        s
    }

    pub fn parse(text: &str) -> Result<BenchReport, BenchError> {
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(BenchError::Report("missing header".into()));
        }
        let bad = |line: &str, what: &str| BenchError::Report(format!("{what} in {line:?}"));
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let c: Vec<&str> = line.split('\t').collect();
            if c.len() != 7 {
                return Err(bad(line, "expected 7 fields"));
            }
            rows.push(BenchRow {
                experiment: c[0].to_string(),
                topology: c[1].to_string(),
                n: c[2].parse().map_err(|_| bad(line, "bad n"))?,
                phase: c[3].parse()?,
                median_ms: c[4].parse().map_err(|_| bad(line, "bad median"))?,
                reps: c[5].parse().map_err(|_| bad(line, "bad reps"))?,
                results: c[6].parse().map_err(|_| bad(line, "bad result count"))?,
            });
        }
        Ok(BenchReport { rows })
    }

    pub fn get(&self, experiment: &str, topology: &str, n: u64, phase: Phase) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.experiment == experiment && r.topology == topology && r.n == n && r.phase == phase)
    }

    pub fn median(&self, experiment: &str, topology: &str, n: u64, phase: Phase) -> Option<f64> {
        self.get(experiment, topology, n, phase).map(|r| r.median_ms)
    }

    /// Topologies of an experiment, in first-appearance order.
    pub fn topologies(&self, experiment: &str) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in self.rows.iter().filter(|r| r.experiment == experiment) {
            if !out.contains(&r.topology) {
                out.push(r.topology.clone());
            }
        }
        out
    }

    /// Sweep values of an experiment, ascending.
    pub fn sweep(&self, experiment: &str) -> Vec<u64> {
        let mut v: Vec<u64> = self.rows.iter().filter(|r| r.experiment == experiment).map(|r| r.n).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Whether `phase` never decreases along the sweep on `topology`.
    pub fn is_monotone(&self, experiment: &str, topology: &str, phase: Phase) -> bool {
        let v: Vec<f64> = self.sweep(experiment).iter().filter_map(|n| self.median(experiment, topology, *n, phase)).collect();
        v.windows(2).all(|w| w[0] <= w[1])
    }

    /// Plot-ready columns: N then one median per topology.
    pub fn series(&self, experiment: &str, phase: Phase) -> String {
        let topos = self.topologies(experiment);
        let mut s = format!("n\t{}\n", topos.join("\t"));
        for n in self.sweep(experiment) {
            let cells: Vec<String> =
                topos.iter().map(|t| self.median(experiment, t, n, phase).map_or_else(String::new, |v| format!("{v:.3}"))).collect();
            s.push_str(&format!("{n}\t{}\n", cells.join("\t")));
        }
        s
    }

    /// Plot-ready columns for one topology: N then one median per phase.
    pub fn phase_series(&self, experiment: &str, topology: &str) -> String {
        let names: Vec<&str> = Phase::ALL.iter().map(|p| p.name()).collect();
        let mut s = format!("n\t{}\n", names.join("\t"));
        for n in self.sweep(experiment) {
            let cells: Vec<String> = Phase::ALL
                .iter()
                .map(|p| self.median(experiment, topology, n, *p).map_or_else(String::new, |v| format!("{v:.3}")))
                .collect();
            s.push_str(&format!("{n}\t{}\n", cells.join("\t")));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(total: f64) -> PhaseTimings {
        PhaseTimings { parse: 0.1, plan: 0.2, first_result: 0.3, local_exec: total / 3.0, global_exec: total / 2.0, total }
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[]), 0.0);
    }

    #[test]
    fn tsv_round_trips_exactly() {
        let mut r = BenchReport::default();
        r.record("overhead", "M0", 1, &[t(1.0 / 3.0), t(0.7), t(2.0)], 0);
        r.record("overhead", "M0", 10, &[t(5.123456789), t(5.2)], 9);
        let back = BenchReport::parse(&r.to_tsv()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.median("overhead", "M0", 1, Phase::Total), Some(0.7));
        assert_eq!(back.median("overhead", "M0", 1, Phase::Init), Some(t(0.0).initialization()));
        assert!(back.is_monotone("overhead", "M0", Phase::Total));
        assert!(back.series("overhead", Phase::Total).starts_with("n\tM0\n1\t0.700\n"));
        assert!(BenchReport::parse("nope\n").is_err());
        assert!(BenchReport::parse(&format!("{HEADER}\nx\ty\n")).is_err());
    }
}
