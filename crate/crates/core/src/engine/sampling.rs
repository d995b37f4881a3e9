//! Sampling timestamps: local time advances only at the first release after
//! a sampled access.

use crate::clock::VectorClock;
use crate::history::{AccessHistory, DetectionMode, RaceReport};
use crate::metrics::RunMetrics;
use crate::trace::{Event, LockId, Op, ThreadId};

use super::{count_event, Engine, EngineKind};

pub struct SamplingEngine {
    c_t: Vec<VectorClock>,
    epoch: Vec<u64>,
    new_sample: Vec<bool>,
    c_l: Vec<VectorClock>,
    history: AccessHistory,
    metrics: RunMetrics,
}

impl SamplingEngine {
    pub fn new(threads: usize, locks: usize, vars: usize, mode: DetectionMode) -> Self {
        Self {
            c_t: vec![VectorClock::bottom(threads); threads],
            epoch: vec![1; threads],
            new_sample: vec![false; threads],
            c_l: vec![VectorClock::bottom(threads); locks],
            history: AccessHistory::new(threads, vars, mode),
            metrics: RunMetrics::default(),
        }
    }

    pub fn thread_clock(&self, t: ThreadId) -> &VectorClock {
        &self.c_t[t.index()]
    }

    pub fn lock_clock(&self, l: LockId) -> &VectorClock {
        &self.c_l[l.index()]
    }

    pub fn epoch(&self, t: ThreadId) -> u64 {
        self.epoch[t.index()]
    }
}

impl Engine for SamplingEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::Sampling
    }

    fn process(&mut self, ev: &Event, races: &mut Vec<RaceReport>) {
        count_event(&mut self.metrics, ev);
        let t = ev.thread;
        let ti = t.index();
        match ev.op {
            Op::Acquire(l) => {
                self.c_t[ti].join_assign(&self.c_l[l.index()]);
                self.metrics.full_traversals += 1;
            }
            Op::Release(l) => {
                if self.new_sample[ti] {
                    self.c_t[ti].set(t, self.epoch[ti]);
                    self.epoch[ti] += 1;
                    self.new_sample[ti] = false;
                    self.metrics.epoch_increments += 1;
                }
                self.c_l[l.index()].clone_from(&self.c_t[ti]);
                self.metrics.releases_copied += 1;
                self.metrics.full_traversals += 1;
            }
            Op::Read(_) | Op::Write(_) => {
                if ev.marked {
                    self.new_sample[ti] = true;
                }
                let (c, e) = (&self.c_t[ti], self.epoch[ti]);
                self.history
                    .on_access(ev, ev.marked, e, |u| if u == t { e } else { c.get(u) }, races);
            }
        }
        debug_assert!(self.c_t[ti].get(t) < self.epoch[ti]);
    }

    fn timestamp(&self, t: ThreadId) -> VectorClock {
        let mut c = self.c_t[t.index()].clone();
        if self.new_sample[t.index()] {
            c.set(t, self.epoch[t.index()]);
        }
        c
    }

    fn metrics(&self) -> RunMetrics {
        self.metrics.clone()
    }

    fn race_checks(&self) -> u64 {
        self.history.race_checks()
    }
}
