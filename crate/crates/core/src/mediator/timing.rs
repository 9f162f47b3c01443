//! Per-query phase timings.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crate::xml::{EventStream, XmlEvent};

/// Phase durations of one query in milliseconds. `local_exec` is the
/// longest time any one source spent producing tuples; `global_exec` is the
/// rest of execution.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub parse: f64,
    pub plan: f64,
    pub first_result: f64,
    pub local_exec: f64,
    pub global_exec: f64,
    pub total: f64,
}

impl PhaseTimings {
    /// Time before the first answer event: parse, plan and first result.
    pub fn initialization(&self) -> f64 {
        self.parse + self.plan + self.first_result
    }

    /// All phases non-negative and none longer than the total.
    pub fn is_consistent(&self) -> bool {
        let parts = [self.parse, self.plan, self.first_result, self.local_exec, self.global_exec];
        parts.iter().all(|p| *p >= 0.0 && *p <= self.total + 1e-6) && self.initialization() <= self.total + 1e-6
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

#[derive(Debug, Default)]
struct Marks {
    parsed: Option<Instant>,
    planned: Option<Instant>,
    first: Option<Instant>,
    end: Option<Instant>,
}

/// Shared clock of a running query. Cheap to clone.
#[derive(Clone, Debug)]
pub struct TimingHandle {
    start: Instant,
    marks: Arc<Mutex<Marks>>,
    sources: Arc<Mutex<Vec<Arc<AtomicU64>>>>,
}

impl TimingHandle {
    pub fn start() -> TimingHandle {
        TimingHandle { start: Instant::now(), marks: Default::default(), sources: Default::default() }
    }

    pub fn parsed(&self) {
        self.marks.lock().unwrap().parsed = Some(Instant::now());
    }

    pub fn planned(&self) {
        self.marks.lock().unwrap().planned = Some(Instant::now());
    }

    fn first_event(&self) {
        let mut m = self.marks.lock().unwrap();
        if m.first.is_none() {
            m.first = Some(Instant::now());
        }
    }

    fn finished(&self) {
        let mut m = self.marks.lock().unwrap();
        if m.end.is_none() {
            m.end = Some(Instant::now());
        }
    }

    /// A counter of nanoseconds spent in one source.
    pub fn source_clock(&self) -> Arc<AtomicU64> {
        let c = Arc::new(AtomicU64::new(0));
        self.sources.lock().unwrap().push(c.clone());
        c
    }

    pub fn is_finished(&self) -> bool {
        self.marks.lock().unwrap().end.is_some()
    }

    /// Timings so far. Before the stream ends, the total runs to now.
    pub fn snapshot(&self) -> PhaseTimings {
        let m = self.marks.lock().unwrap();
        let end = m.end.unwrap_or_else(Instant::now);
        let parsed = m.parsed.unwrap_or(self.start);
        let planned = m.planned.unwrap_or(parsed).max(parsed);
        let first = m.first.unwrap_or(end).max(planned);
        let total = ms(end - self.start);
        let exec = ms(end.saturating_duration_since(planned));
        let local = self.sources.lock().unwrap().iter().map(|c| c.load(Ordering::Relaxed)).max().unwrap_or(0);
        let local = (local as f64 / 1e6).min(exec);
        PhaseTimings {
            parse: ms(parsed - self.start),
            plan: ms(planned - parsed),
            first_result: ms(first - planned),
            local_exec: local,
            global_exec: (exec - local).max(0.0),
            total,
        }
    }

    /// Wrap the answer stream so the first event and the end are stamped.
    pub fn observe(&self, events: EventStream) -> EventStream {
        let clock = self.clone();
        let mut events = events;
        Box::new(std::iter::from_fn(move || match events.next() {
            Some(ev) => {
                clock.first_event();
                if matches!(ev, XmlEvent::Error(_)) {
                    clock.finished();
                }
                Some(ev)
            }
            None => {
                clock.finished();
                None
            }
        }))
    }
}

/// Adds the time spent in each `next` call to `clock`.
pub struct Timed<I> {
    pub inner: I,
    pub clock: Arc<AtomicU64>,
}

impl<I: Iterator> Iterator for Timed<I> {
    type Item = I::Item;

    fn next(&mut self) -> Option<I::Item> {
        let t = Instant::now();
        let out = self.inner.next();
        self.clock.fetch_add(t.elapsed().as_nanos() as u64, Ordering::Relaxed);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phases_fit_inside_the_total() {
        let h = TimingHandle::start();
        h.parsed();
        h.planned();
        let clock = h.source_clock();
        let events: EventStream = Box::new(
            Timed { inner: vec![XmlEvent::Open("a".into()), XmlEvent::Close].into_iter().inspect(|_| std::thread::sleep(Duration::from_millis(2))), clock }
                .collect::<Vec<_>>()
                .into_iter(),
        );
        let out: Vec<XmlEvent> = h.observe(events).collect();
        assert_eq!(out.len(), 2);
        assert!(h.is_finished());
        let t = h.snapshot();
        assert!(t.is_consistent(), "{t:?}");
        assert!(t.local_exec >= 4.0, "{t:?}");
    }

    #[test]
    fn unfinished_queries_report_time_so_far() {
        let h = TimingHandle::start();
        std::thread::sleep(Duration::from_millis(3));
        let t = h.snapshot();
        assert!(t.total >= 3.0 && t.is_consistent());
        assert!(!h.is_finished());
    }
}
