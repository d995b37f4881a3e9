//! Full happens-before vector-clock detector. Every access is checked.

use crate::clock::VectorClock;
use crate::history::{AccessHistory, DetectionMode, RaceReport};
use crate::metrics::RunMetrics;
use crate::trace::{Event, Op, ThreadId};

use super::{count_event, Engine, EngineKind};

pub struct DjitpEngine {
    c_t: Vec<VectorClock>,
    c_l: Vec<VectorClock>,
    /// Whether the thread's last event was a release.
    after_release: Vec<bool>,
    history: AccessHistory,
    metrics: RunMetrics,
}

impl DjitpEngine {
    pub fn new(threads: usize, locks: usize, vars: usize) -> Self {
        let c_t = (0..threads)
            .map(|t| {
                let mut c = VectorClock::bottom(threads);
                c.set(ThreadId::from(t), 1);
                c
            })
            .collect();
        Self {
            c_t,
            c_l: vec![VectorClock::bottom(threads); locks],
            after_release: vec![false; threads],
            history: AccessHistory::new(threads, vars, DetectionMode::SampledOnly),
            metrics: RunMetrics::default(),
        }
    }

    pub fn thread_clock(&self, t: ThreadId) -> &VectorClock {
        &self.c_t[t.index()]
    }

    pub fn lock_clock(&self, l: crate::trace::LockId) -> &VectorClock {
        &self.c_l[l.index()]
    }
}

impl Engine for DjitpEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::Djitp
    }

    fn process(&mut self, ev: &Event, races: &mut Vec<RaceReport>) {
        count_event(&mut self.metrics, ev);
        let t = ev.thread;
        let ti = t.index();
        self.after_release[ti] = false;
        match ev.op {
            Op::Acquire(l) => {
                self.c_t[ti].join_assign(&self.c_l[l.index()]);
                self.metrics.full_traversals += 1;
            }
            Op::Release(l) => {
                self.c_l[l.index()].clone_from(&self.c_t[ti]);
                self.c_t[ti].increment(t, 1);
                self.after_release[ti] = true;
                self.metrics.releases_copied += 1;
                self.metrics.full_traversals += 1;
                self.metrics.epoch_increments += 1;
            }
            Op::Read(_) | Op::Write(_) => {
                let c = &self.c_t[ti];
                self.history.on_access(ev, true, c.get(t), |u| c.get(u), races);
            }
        }
    }

    fn timestamp(&self, t: ThreadId) -> VectorClock {
        let mut c = self.c_t[t.index()].clone();
        if self.after_release[t.index()] {
            c.set(t, c.get(t) - 1);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{parse_trace, LockId};

    #[test]
    fn lock_ordered_writes_do_not_race() {
        let tr = parse_trace("T1|acq(l)\nT1|w(x)\nT1|rel(l)\nT2|acq(l)\nT2|w(x)").unwrap();
        let mut e = DjitpEngine::new(2, 1, 1);
        let mut races = Vec::new();
        for ev in tr.events() {
            e.process(ev, &mut races);
        }
        assert!(races.is_empty());
        assert_eq!(e.thread_clock(ThreadId(1)).as_slice(), &[1, 1]);
        assert_eq!(e.lock_clock(LockId(0)).as_slice(), &[1, 0]);
    }

    #[test]
    fn unordered_writes_race() {
        let tr = parse_trace("T1|w(x)\nT2|w(x)").unwrap();
        let mut e = DjitpEngine::new(2, 0, 1);
        let mut races = Vec::new();
        for ev in tr.events() {
            e.process(ev, &mut races);
        }
        assert_eq!(races.len(), 1);
        assert_eq!(races[0].event, 2);
    }
}
