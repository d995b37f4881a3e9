//! Timestamping engines.

mod djitp;
mod orderedlist;
mod sampling;
mod uclock;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::clock::VectorClock;
use crate::history::{DetectionMode, RaceReport};
use crate::metrics::RunMetrics;
use crate::trace::{Event, Op, ThreadId, Trace};

pub use djitp::DjitpEngine;
pub use orderedlist::{merge_prefix, MergeStats, OrderedListEngine};
pub use sampling::SamplingEngine;
pub use uclock::{join_fresh, UclockEngine};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Djitp,
    Sampling,
    Uclock,
    OrderedList,
}

impl EngineKind {
    pub const ALL: [EngineKind; 4] = [
        EngineKind::Djitp,
        EngineKind::Sampling,
        EngineKind::Uclock,
        EngineKind::OrderedList,
    ];

    pub fn token(self) -> &'static str {
        match self {
            EngineKind::Djitp => "djitp",
            EngineKind::Sampling => "sampling",
            EngineKind::Uclock => "uclock",
            EngineKind::OrderedList => "orderedlist",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown engine `{0}` (expected djitp, sampling, uclock or orderedlist)")]
pub struct UnknownEngine(pub String);

impl FromStr for EngineKind {
    type Err = UnknownEngine;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EngineKind::ALL
            .into_iter()
            .find(|k| k.token() == s)
            .ok_or_else(|| UnknownEngine(s.to_owned()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EngineConfig {
    pub kind: EngineKind,
    pub mode: DetectionMode,
    /// Only meaningful for the ordered-list engine.
    pub local_epoch_opt: bool,
}

impl EngineConfig {
    pub fn new(kind: EngineKind) -> Self {
        Self {
            kind,
            mode: DetectionMode::SampledOnly,
            local_epoch_opt: true,
        }
    }

    pub fn with_mode(mut self, mode: DetectionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_local_epoch_opt(mut self, on: bool) -> Self {
        self.local_epoch_opt = on;
        self
    }

    pub fn build(&self, threads: usize, locks: usize, vars: usize) -> Box<dyn Engine> {
        match self.kind {
            EngineKind::Djitp => Box::new(DjitpEngine::new(threads, locks, vars)),
            EngineKind::Sampling => Box::new(SamplingEngine::new(threads, locks, vars, self.mode)),
            EngineKind::Uclock => Box::new(UclockEngine::new(threads, locks, vars, self.mode)),
            EngineKind::OrderedList => Box::new(OrderedListEngine::new(
                threads,
                locks,
                vars,
                self.mode,
                self.local_epoch_opt,
            )),
        }
    }

    pub fn build_for(&self, trace: &Trace) -> Box<dyn Engine> {
        self.build(trace.num_threads(), trace.num_locks(), trace.num_vars())
    }
}

/// A streaming analysis over one trace.
pub trait Engine {
    fn kind(&self) -> EngineKind;

    /// Processes the next event, appending any races declared on it.
    fn process(&mut self, ev: &Event, races: &mut Vec<RaceReport>);

    /// Timestamp of `t`'s most recently processed event: the sampling
    /// timestamp for sampling engines, the full happens-before timestamp for
    /// Djit+.
    fn timestamp(&self, t: ThreadId) -> VectorClock;

    fn metrics(&self) -> RunMetrics;

    /// Full-width access-history comparisons performed so far.
    fn race_checks(&self) -> u64;
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    /// Sorted by event index, then kind.
    pub races: Vec<RaceReport>,
    pub metrics: RunMetrics,
    pub race_checks: u64,
}

/// Runs one engine over a whole trace.
pub fn run_engine(trace: &Trace, cfg: &EngineConfig) -> RunResult {
    replay(trace, cfg, |_, _| {})
}

/// Like [`run_engine`] but calls `observe` after every event.
pub fn replay(trace: &Trace, cfg: &EngineConfig, mut observe: impl FnMut(&Event, &dyn Engine)) -> RunResult {
    let mut engine = cfg.build_for(trace);
    let mut races = Vec::new();
    for ev in trace.events() {
        engine.process(ev, &mut races);
        observe(ev, engine.as_ref());
    }
    races.sort();
    let mut metrics = engine.metrics();
    metrics.race_count = races.len() as u64;
    RunResult {
        races,
        metrics,
        race_checks: engine.race_checks(),
    }
}

/// Per-event counters shared by all engines.
pub(crate) fn count_event(m: &mut RunMetrics, ev: &Event) {
    m.events_total += 1;
    match ev.op {
        Op::Acquire(_) => m.acquires_total += 1,
        Op::Release(_) => m.releases_total += 1,
        Op::Read(_) | Op::Write(_) => {
            m.accesses_total += 1;
            if ev.marked {
                m.accesses_sampled += 1;
            }
        }
    }
}
