//! Sampling timestamps stored in ordered lists. Locks hold shared views of
//! the releasing thread's list plus a scalar freshness, and an acquire only
//! walks as many list entries as the freshness gap.
//!
//! With the local-epoch optimization a release that advances the thread's
//! epoch does not touch the thread's list. The new epoch is kept beside the
//! list and published to the lock as a separate `(releaser, epoch)` scalar,
//! which acquirers merge like one extra list entry.

use crate::clock::VectorClock;
use crate::history::{AccessHistory, DetectionMode, RaceReport};
use crate::metrics::RunMetrics;
use crate::olist::{OrderedList, OwnedList, SharedList};
use crate::trace::{Event, LockId, Op, ThreadId};

use super::{count_event, Engine, EngineKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MergeStats {
    pub visited: usize,
    pub changed: usize,
    pub deep_copied: bool,
}

/// Merges the first `d` entries of `view` into `o_t` by pointwise max,
/// deep-copying `o_t` before its first mutation if it is shared.
pub fn merge_prefix(t: ThreadId, o_t: &mut OwnedList, view: &SharedList, d: usize) -> MergeStats {
    merge_prefix_with_own(t, o_t, None, view, d)
}

/// As [`merge_prefix`], with `own` overriding `o_t`'s entry for `t`.
fn merge_prefix_with_own(
    t: ThreadId,
    o_t: &mut OwnedList,
    own: Option<u64>,
    view: &SharedList,
    d: usize,
) -> MergeStats {
    let mut stats = MergeStats::default();
    for (u, n) in view.list().iter().take(d) {
        stats.visited += 1;
        let current = match own {
            Some(v) if u == t => v,
            _ => o_t.get(u),
        };
        if n > current {
            stats.deep_copied |= o_t.make_exclusive();
            o_t.set(u, n).expect("exclusive after deep copy");
            stats.changed += 1;
        }
    }
    stats
}

struct LockState {
    view: SharedList,
    last_releaser: Option<ThreadId>,
    freshness: Option<u64>,
    /// Releaser's own epoch at the last release (local-epoch optimization).
    releaser_epoch: u64,
}

pub struct OrderedListEngine {
    width: usize,
    o_t: Vec<OwnedList>,
    u_t: Vec<VectorClock>,
    epoch: Vec<u64>,
    new_sample: Vec<bool>,
    pending_local: Vec<Option<u64>>,
    locks: Vec<LockState>,
    local_epoch_opt: bool,
    deep_copies_per_thread: Vec<u64>,
    history: AccessHistory,
    metrics: RunMetrics,
}

impl OrderedListEngine {
    pub fn new(threads: usize, locks: usize, vars: usize, mode: DetectionMode, local_epoch_opt: bool) -> Self {
        Self {
            width: threads,
            o_t: (0..threads).map(|_| OwnedList::bottom(threads)).collect(),
            u_t: vec![VectorClock::bottom(threads); threads],
            epoch: vec![1; threads],
            new_sample: vec![false; threads],
            pending_local: vec![None; threads],
            locks: (0..locks)
                .map(|_| LockState {
                    view: SharedList::bottom(threads),
                    last_releaser: None,
                    freshness: None,
                    releaser_epoch: 0,
                })
                .collect(),
            local_epoch_opt,
            deep_copies_per_thread: vec![0; threads],
            history: AccessHistory::new(threads, vars, mode),
            metrics: RunMetrics::default(),
        }
    }

    pub fn list(&self, t: ThreadId) -> &OrderedList {
        self.o_t[t.index()].list()
    }

    pub fn freshness(&self, t: ThreadId) -> &VectorClock {
        &self.u_t[t.index()]
    }

    pub fn epoch(&self, t: ThreadId) -> u64 {
        self.epoch[t.index()]
    }

    pub fn lock_view(&self, l: LockId) -> &SharedList {
        &self.locks[l.index()].view
    }

    pub fn deep_copies_per_thread(&self) -> &[u64] {
        &self.deep_copies_per_thread
    }

    /// Latest value of `t`'s own sampling-clock component.
    fn own_value(&self, t: ThreadId) -> u64 {
        self.pending_local[t.index()].unwrap_or_else(|| self.o_t[t.index()].get(t))
    }

    fn note_deep_copy(&mut self, t: ThreadId) {
        self.metrics.deep_copies += 1;
        self.metrics.full_traversals += 1;
        self.deep_copies_per_thread[t.index()] += 1;
    }

    fn acquire(&mut self, t: ThreadId, l: LockId) {
        let (ti, li) = (t.index(), l.index());
        let (lr, u_l) = match (self.locks[li].last_releaser, self.locks[li].freshness) {
            (Some(lr), Some(u)) if u > self.u_t[ti].get(lr) => (lr, u),
            _ => {
                self.metrics.acquires_skipped += 1;
                return;
            }
        };
        // A thread's own release never looks fresh to itself.
        assert_ne!(lr, t, "self-handoff passed the freshness guard");
        let d = (u_l - self.u_t[ti].get(lr)) as usize;
        self.u_t[ti].set(lr, u_l);

        let mut changed = 0;
        let mut deep_copied = false;
        let own = self.local_epoch_opt.then(|| self.own_value(t));
        if self.local_epoch_opt {
            let n = self.locks[li].releaser_epoch;
            if n > self.o_t[ti].get(lr) {
                deep_copied |= self.o_t[ti].make_exclusive();
                self.o_t[ti].set(lr, n).expect("exclusive after deep copy");
                changed += 1;
            }
        }
        let view = self.locks[li].view.clone();
        let stats = merge_prefix_with_own(t, &mut self.o_t[ti], own, &view, d);
        changed += stats.changed;
        deep_copied |= stats.deep_copied;

        self.u_t[ti].increment(t, changed as u64);
        if deep_copied {
            self.note_deep_copy(t);
        }
        self.metrics.nodes_visited += stats.visited as u64;
        self.metrics.entries_saved += (self.width - stats.visited) as u64;
    }

    fn release(&mut self, t: ThreadId, l: LockId) {
        let (ti, li) = (t.index(), l.index());
        if self.new_sample[ti] {
            if self.local_epoch_opt {
                self.pending_local[ti] = Some(self.epoch[ti]);
            } else {
                if self.o_t[ti].make_exclusive() {
                    self.note_deep_copy(t);
                    self.metrics.releases_copied += 1;
                }
                self.o_t[ti].set(t, self.epoch[ti]).expect("exclusive after deep copy");
            }
            self.epoch[ti] += 1;
            self.u_t[ti].increment(t, 1);
            self.new_sample[ti] = false;
            self.metrics.epoch_increments += 1;
        }
        let view = self.o_t[ti].shallow_copy();
        self.metrics.shallow_copies += 1;
        let releaser_epoch = self.own_value(t);
        let lock = &mut self.locks[li];
        lock.view = view;
        lock.last_releaser = Some(t);
        lock.freshness = Some(self.u_t[ti].get(t));
        lock.releaser_epoch = releaser_epoch;
    }
}

impl Engine for OrderedListEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::OrderedList
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
                let (o, e) = (&self.o_t[ti], self.epoch[ti]);
                self.history
                    .on_access(ev, ev.marked, e, |u| if u == t { e } else { o.get(u) }, races);
            }
        }
    }

    fn timestamp(&self, t: ThreadId) -> VectorClock {
        let ti = t.index();
        let mut c = self.o_t[ti].list().snapshot();
        let own = if self.new_sample[ti] {
            self.epoch[ti]
        } else {
            self.own_value(t)
        };
        c.set(t, own);
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

    fn t(i: u32) -> ThreadId {
        ThreadId(i)
    }

    #[test]
    fn release_without_sample_only_shares() {
        let tr = parse_trace("T1|acq(l)\nT1|rel(l)\nT1|acq(m)\nT1|rel(m)").unwrap();
        let mut e = OrderedListEngine::new(1, 2, 0, DetectionMode::SampledOnly, false);
        let mut races = Vec::new();
        for ev in tr.events() {
            e.process(ev, &mut races);
        }
        let m = e.metrics();
        assert_eq!((m.shallow_copies, m.deep_copies, m.nodes_visited), (2, 0, 0));
        assert_eq!(e.lock_view(LockId(0)).share_count(), 3);
    }

    #[test]
    fn merge_visits_only_the_prefix() {
        let mut mine = OwnedList::new(OrderedList::from_entries(&[(t(0), 8), (t(1), 18), (t(2), 3)]));
        let mut theirs = OwnedList::new(OrderedList::from_entries(&[(t(0), 9), (t(1), 2), (t(2), 1)]));
        let view = theirs.shallow_copy();
        let _keep = mine.shallow_copy();
        let stats = merge_prefix(t(1), &mut mine, &view, 1);
        assert_eq!(
            stats,
            MergeStats {
                visited: 1,
                changed: 1,
                deep_copied: true
            }
        );
        assert_eq!(mine.list().snapshot().as_slice(), &[9, 18, 3]);
    }

    #[test]
    fn local_epoch_opt_avoids_release_deep_copies() {
        let tr = parse_trace(
            "T1|acq(l)\nT1|w(x)|*\nT1|rel(l)\nT1|acq(l)\nT1|w(x)|*\nT1|rel(l)\nT2|acq(l)\nT2|r(x)|*\nT2|rel(l)",
        )
        .unwrap();
        let run = |opt| {
            let mut e = OrderedListEngine::new(2, 1, 1, DetectionMode::SampledOnly, opt);
            let mut races = Vec::new();
            let mut stamps = Vec::new();
            for ev in tr.events() {
                e.process(ev, &mut races);
                stamps.push(e.timestamp(ev.thread));
            }
            (races, stamps, e.metrics().deep_copies)
        };
        let (r_off, s_off, d_off) = run(false);
        let (r_on, s_on, d_on) = run(true);
        assert_eq!(r_off, r_on);
        assert_eq!(s_off, s_on);
        assert!(r_on.is_empty());
        assert_eq!(d_off, 1);
        assert_eq!(d_on, 0);
    }
}
