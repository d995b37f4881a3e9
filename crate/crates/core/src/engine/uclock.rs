//! Sampling timestamps plus freshness clocks `U` that let acquires and
//! releases skip joins and copies carrying no new information.

use crate::clock::VectorClock;
use crate::history::{AccessHistory, DetectionMode, RaceReport};
use crate::metrics::RunMetrics;
use crate::trace::{Event, LockId, Op, ThreadId};

use super::{count_event, Engine, EngineKind};

/// Freshness-aware join of a lock's `(C, U)` into thread `t`'s `(C, U)`.
/// `U_t(t)` grows by one per component of `C_t` that changes; returns that
/// count.
pub fn join_fresh(
    t: ThreadId,
    c_t: &mut VectorClock,
    u_t: &mut VectorClock,
    c_l: &VectorClock,
    u_l: &VectorClock,
) -> usize {
    u_t.join_assign(u_l);
    let changed = c_t.join_assign(c_l);
    u_t.increment(t, changed as u64);
    changed
}

pub struct UclockEngine {
    c_t: Vec<VectorClock>,
    u_t: Vec<VectorClock>,
    epoch: Vec<u64>,
    new_sample: Vec<bool>,
    c_l: Vec<VectorClock>,
    u_l: Vec<VectorClock>,
    last_releaser: Vec<Option<ThreadId>>,
    skipping: bool,
    history: AccessHistory,
    metrics: RunMetrics,
}

impl UclockEngine {
    pub fn new(threads: usize, locks: usize, vars: usize, mode: DetectionMode) -> Self {
        Self {
            c_t: vec![VectorClock::bottom(threads); threads],
            u_t: vec![VectorClock::bottom(threads); threads],
            epoch: vec![1; threads],
            new_sample: vec![false; threads],
            c_l: vec![VectorClock::bottom(threads); locks],
            u_l: vec![VectorClock::bottom(threads); locks],
            last_releaser: vec![None; locks],
            skipping: true,
            history: AccessHistory::new(threads, vars, mode),
            metrics: RunMetrics::default(),
        }
    }

    /// Disables both skip rules. Used to check that skipping never changes
    /// the computed timestamps.
    pub fn without_skipping(mut self) -> Self {
        self.skipping = false;
        self
    }

    pub fn thread_clock(&self, t: ThreadId) -> &VectorClock {
        &self.c_t[t.index()]
    }

    pub fn freshness(&self, t: ThreadId) -> &VectorClock {
        &self.u_t[t.index()]
    }

    /// Whether `t` has a sampled access since its last release.
    pub fn pending_sample(&self, t: ThreadId) -> bool {
        self.new_sample[t.index()]
    }

    pub fn epoch(&self, t: ThreadId) -> u64 {
        self.epoch[t.index()]
    }

    pub fn lock_clock(&self, l: LockId) -> &VectorClock {
        &self.c_l[l.index()]
    }

    pub fn lock_freshness(&self, l: LockId) -> &VectorClock {
        &self.u_l[l.index()]
    }

    pub fn last_releaser(&self, l: LockId) -> Option<ThreadId> {
        self.last_releaser[l.index()]
    }

    fn acquire(&mut self, t: ThreadId, l: LockId) {
        let (ti, li) = (t.index(), l.index());
        let fresh = match self.last_releaser[li] {
            None => false,
            Some(lr) => self.u_l[li].get(lr) > self.u_t[ti].get(lr),
        };
        if self.skipping && !fresh {
            self.metrics.acquires_skipped += 1;
            return;
        }
        join_fresh(t, &mut self.c_t[ti], &mut self.u_t[ti], &self.c_l[li], &self.u_l[li]);
        self.metrics.full_traversals += 2;
    }

    fn release(&mut self, t: ThreadId, l: LockId) {
        let (ti, li) = (t.index(), l.index());
        self.last_releaser[li] = Some(t);
        if self.new_sample[ti] {
            self.c_t[ti].set(t, self.epoch[ti]);
            self.u_t[ti].increment(t, 1);
            self.epoch[ti] += 1;
            self.new_sample[ti] = false;
            self.metrics.epoch_increments += 1;
        }
        if self.skipping && self.u_t[ti].get(t) == self.u_l[li].get(t) {
            return;
        }
        self.c_l[li].clone_from(&self.c_t[ti]);
        self.u_l[li].clone_from(&self.u_t[ti]);
        self.metrics.releases_copied += 1;
        self.metrics.full_traversals += 2;
    }
}

impl Engine for UclockEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::Uclock
    }

    fn process(&mut self, ev: &Event, races: &mut Vec<RaceReport>) {
        count_event(&mut self.metrics, ev);
        let t = ev.thread;
        let ti = t.index();
        match ev.op {
            Op::Acquire(l) => self.acquire(t, l),
            Op::Release(l) => self.release(t, l),
            Op::Read(_) | Op::Write(_) => {
                if ev.marked {
                    self.new_sample[ti] = true;
                }
                let (c, e) = (&self.c_t[ti], self.epoch[ti]);
                self.history
                    .on_access(ev, ev.marked, e, |u| if u == t { e } else { c.get(u) }, races);
            }
        }
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::parse_trace;

    #[test]
    fn fresh_join_counts_changed_components() {
        let mut c = VectorClock::from_vec(vec![1, 5, 0]);
        let mut u = VectorClock::from_vec(vec![2, 3, 0]);
        let n = join_fresh(
            ThreadId(1),
            &mut c,
            &mut u,
            &VectorClock::from_vec(vec![4, 2, 1]),
            &VectorClock::from_vec(vec![6, 1, 2]),
        );
        assert_eq!(n, 2);
        assert_eq!(c.as_slice(), &[4, 5, 1]);
        assert_eq!(u.as_slice(), &[6, 5, 2]);
    }

    #[test]
    fn unsampled_trace_skips_after_first_release() {
        let tr =
            parse_trace("T1|acq(l)\nT1|w(x)\nT1|rel(l)\nT2|acq(l)\nT2|w(x)\nT2|rel(l)\nT1|acq(l)\nT1|rel(l)").unwrap();
        let mut e = UclockEngine::new(2, 1, 1, DetectionMode::SampledOnly);
        let mut races = Vec::new();
        for ev in tr.events() {
            e.process(ev, &mut races);
        }
        let m = e.metrics();
        assert_eq!((m.acquires_total, m.acquires_skipped), (3, 3));
        // Every freshness entry stays zero, so no release copies either.
        assert_eq!(m.releases_copied, 0);
    }
}
