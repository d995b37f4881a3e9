//! Brute-force reference timestamps.
//!
//! Everything here is computed directly from the definitions over an explicit
//! happens-before closure, with no shared code paths with the engines. It is
//! quadratic in the trace length and meant for traces of a few thousand
//! events at most.

use std::collections::BTreeSet;

use fixedbitset::FixedBitSet;

use crate::clock::VectorClock;
use crate::history::{DetectionMode, RaceKind};
use crate::trace::{Op, ThreadId, Trace};

/// Declarative per-event tables for one trace and its marked sample set.
/// All event arguments are 1-based trace indices.
pub struct Oracle {
    threads: usize,
    /// `preds[j]` = set of `i` with `e_i` happens-before `e_j` (0-based, reflexive).
    preds: Vec<FixedBitSet>,
    thread_of: Vec<usize>,
    access: Vec<Option<(usize, bool)>>,
    marked: Vec<bool>,
    rel_after: Vec<bool>,
    lt_ft: Vec<u64>,
    ct_ft: Vec<VectorClock>,
    lt_smp: Vec<u64>,
    ct_smp: Vec<VectorClock>,
    vt: Vec<u64>,
    u: Vec<VectorClock>,
    vtwork: u64,
}

fn hb_closure(trace: &Trace) -> Vec<FixedBitSet> {
    let n = trace.len();
    let mut preds: Vec<FixedBitSet> = Vec::with_capacity(n);
    let mut last_of_thread: Vec<Option<usize>> = vec![None; trace.num_threads()];
    let mut releases: Vec<Vec<usize>> = vec![Vec::new(); trace.num_locks()];
    for (j, ev) in trace.events().iter().enumerate() {
        let mut row = FixedBitSet::with_capacity(n);
        row.insert(j);
        let t = ev.thread.index();
        if let Some(p) = last_of_thread[t] {
            row.union_with(&preds[p]);
        }
        match ev.op {
            Op::Acquire(l) => {
                for &r in &releases[l.index()] {
                    row.union_with(&preds[r]);
                }
            }
            Op::Release(l) => releases[l.index()].push(j),
            _ => {}
        }
        last_of_thread[t] = Some(j);
        preds.push(row);
    }
    preds
}

/// Pointwise max of `value(i)` per thread over `i` in `row`, restricted by
/// `keep`.
fn max_over(
    row: &FixedBitSet,
    width: usize,
    thread_of: &[usize],
    keep: impl Fn(usize) -> bool,
    value: impl Fn(usize) -> u64,
) -> VectorClock {
    let mut c = vec![0u64; width];
    for i in row.ones() {
        if keep(i) {
            let t = thread_of[i];
            c[t] = c[t].max(value(i));
        }
    }
    VectorClock::from_vec(c)
}

/// Replays the sampling-timestamp algorithm abstractly and counts every
/// component of every thread or lock clock that changes value.
fn count_vtwork(trace: &Trace) -> u64 {
    let t_n = trace.num_threads();
    let mut c_t = vec![vec![0u64; t_n]; t_n];
    let mut c_l = vec![vec![0u64; t_n]; trace.num_locks()];
    let mut epoch = vec![1u64; t_n];
    let mut fresh = vec![false; t_n];
    let mut work = 0u64;
    for ev in trace.events() {
        let t = ev.thread.index();
        match ev.op {
            Op::Acquire(l) => {
                for u in 0..t_n {
                    if c_l[l.index()][u] > c_t[t][u] {
                        c_t[t][u] = c_l[l.index()][u];
                        work += 1;
                    }
                }
            }
            Op::Release(l) => {
                if fresh[t] {
                    c_t[t][t] = epoch[t];
                    work += 1;
                    epoch[t] += 1;
                    fresh[t] = false;
                }
                for u in 0..t_n {
                    if c_l[l.index()][u] != c_t[t][u] {
                        c_l[l.index()][u] = c_t[t][u];
                        work += 1;
                    }
                }
            }
            Op::Read(_) | Op::Write(_) => fresh[t] |= ev.marked,
        }
    }
    work
}

impl Oracle {
    pub fn new(trace: &Trace) -> Self {
        let n = trace.len();
        let width = trace.num_threads();
        let events = trace.events();
        let preds = hb_closure(trace);
        let thread_of: Vec<usize> = events.iter().map(|e| e.thread.index()).collect();
        let marked: Vec<bool> = events.iter().map(|e| e.marked).collect();
        let is_release: Vec<bool> = events.iter().map(|e| matches!(e.op, Op::Release(_))).collect();
        let access = events
            .iter()
            .map(|e| match e.op {
                Op::Read(x) => Some((x.index(), false)),
                Op::Write(x) => Some((x.index(), true)),
                _ => None,
            })
            .collect();

        // Local times: releases (resp. first releases after a sample) strictly
        // before each event in its thread, plus one.
        let mut rel_after = vec![false; n];
        let mut lt_ft = vec![0u64; n];
        let mut lt_smp = vec![0u64; n];
        let mut rel_count = vec![0u64; width];
        let mut smp_count = vec![0u64; width];
        let mut pending = vec![false; width];
        for j in 0..n {
            let t = thread_of[j];
            lt_ft[j] = rel_count[t] + 1;
            lt_smp[j] = smp_count[t] + 1;
            if is_release[j] {
                rel_count[t] += 1;
                if pending[t] {
                    rel_after[j] = true;
                    smp_count[t] += 1;
                    pending[t] = false;
                }
            }
            pending[t] |= marked[j];
        }

        let ct_ft: Vec<VectorClock> = (0..n)
            .map(|j| max_over(&preds[j], width, &thread_of, |_| true, |i| lt_ft[i]))
            .collect();
        let ct_smp: Vec<VectorClock> = (0..n)
            .map(|j| max_over(&preds[j], width, &thread_of, |i| marked[i], |i| lt_smp[i]))
            .collect();

        // VT: component changes along each thread's sequence of sampling
        // timestamps, starting from ⊥.
        let mut vt = vec![0u64; n];
        let mut prev: Vec<Option<usize>> = vec![None; width];
        let bottom = VectorClock::bottom(width);
        for j in 0..n {
            let t = thread_of[j];
            let (base, before) = match prev[t] {
                Some(p) => (vt[p], &ct_smp[p]),
                None => (0, &bottom),
            };
            vt[j] = base + before.diff_count(&ct_smp[j]) as u64;
            prev[t] = Some(j);
        }
        let u: Vec<VectorClock> = (0..n)
            .map(|j| max_over(&preds[j], width, &thread_of, |_| true, |i| vt[i]))
            .collect();

        Self {
            threads: width,
            preds,
            thread_of,
            access,
            marked,
            rel_after,
            lt_ft,
            ct_ft,
            lt_smp,
            ct_smp,
            vt,
            u,
            vtwork: count_vtwork(trace),
        }
    }

    pub fn len(&self) -> usize {
        self.preds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }

    pub fn num_threads(&self) -> usize {
        self.threads
    }

    pub fn thread_of(&self, e: usize) -> ThreadId {
        ThreadId::from(self.thread_of[e - 1])
    }

    pub fn in_sample(&self, e: usize) -> bool {
        self.marked[e - 1]
    }

    pub fn sample_size(&self) -> usize {
        self.marked.iter().filter(|&&m| m).count()
    }

    /// Whether `e1` happens-before `e2` (reflexive).
    pub fn hb(&self, e1: usize, e2: usize) -> bool {
        self.preds[e2 - 1].contains(e1 - 1)
    }

    pub fn is_rel_after(&self, e: usize) -> bool {
        self.rel_after[e - 1]
    }

    pub fn lt_ft(&self, e: usize) -> u64 {
        self.lt_ft[e - 1]
    }

    pub fn ct_ft(&self, e: usize) -> &VectorClock {
        &self.ct_ft[e - 1]
    }

    pub fn lt_smp(&self, e: usize) -> u64 {
        self.lt_smp[e - 1]
    }

    pub fn ct_smp(&self, e: usize) -> &VectorClock {
        &self.ct_smp[e - 1]
    }

    pub fn vt(&self, e: usize) -> u64 {
        self.vt[e - 1]
    }

    pub fn u(&self, e: usize) -> &VectorClock {
        &self.u[e - 1]
    }

    pub fn vtwork(&self) -> u64 {
        self.vtwork
    }

    /// Racy events with the kind of the offending earlier access. In
    /// sampled-only mode only sampled events are reported; in extended mode
    /// any access is. The earlier event is always sampled.
    pub fn racy_events(&self, mode: DetectionMode) -> BTreeSet<(usize, RaceKind)> {
        let mut out = BTreeSet::new();
        for j in 0..self.len() {
            let Some((x, j_write)) = self.access[j] else {
                continue;
            };
            if mode == DetectionMode::SampledOnly && !self.marked[j] {
                continue;
            }
            for i in 0..j {
                let Some((y, i_write)) = self.access[i] else {
                    continue;
                };
                if !self.marked[i]
                    || y != x
                    || !(i_write || j_write)
                    || self.thread_of[i] == self.thread_of[j]
                    || self.preds[j].contains(i)
                {
                    continue;
                }
                let kind = match (i_write, j_write) {
                    (true, true) => RaceKind::WriteWrite,
                    (true, false) => RaceKind::WriteRead,
                    _ => RaceKind::ReadWrite,
                };
                out.insert((j + 1, kind));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::parse_trace;

    #[test]
    fn single_thread_is_a_total_order() {
        let o = Oracle::new(&parse_trace("T1|w(x)\nT1|acq(l)\nT1|r(y)\nT1|rel(l)").unwrap());
        for i in 1..=4 {
            for j in 1..=4 {
                assert_eq!(o.hb(i, j), i <= j);
            }
        }
    }

    #[test]
    fn unsynchronized_threads_are_disjoint_chains() {
        let o = Oracle::new(&parse_trace("T1|w(x)\nT2|w(x)\nT1|r(x)\nT2|r(y)").unwrap());
        assert!(o.hb(1, 3) && o.hb(2, 4));
        assert!(!o.hb(1, 2) && !o.hb(1, 4) && !o.hb(2, 3));
    }

    #[test]
    fn release_orders_all_later_acquires() {
        let o = Oracle::new(&parse_trace("T1|acq(l)\nT1|rel(l)\nT2|w(x)\nT3|acq(l)\nT3|rel(l)\nT2|acq(l)").unwrap());
        assert!(o.hb(2, 4) && o.hb(2, 6) && o.hb(5, 6));
        assert!(!o.hb(3, 4));
    }

    #[test]
    fn empty_sample() {
        let o = Oracle::new(&parse_trace("T1|acq(l)\nT1|w(x)\nT1|rel(l)\nT2|acq(l)\nT2|w(x)").unwrap());
        assert_eq!(o.vtwork(), 0);
        for e in 1..=5 {
            assert_eq!(o.ct_smp(e), &VectorClock::bottom(2));
            assert_eq!(o.u(e), &VectorClock::bottom(2));
        }
        assert!(o.racy_events(DetectionMode::SampledOnly).is_empty());
        assert!(o.racy_events(DetectionMode::Extended).is_empty());
    }

    #[test]
    fn racy_pairs_and_kinds() {
        let o = Oracle::new(&parse_trace("T1|w(x)|*\nT2|r(x)\nT2|w(x)|*\nT1|r(x)|*").unwrap());
        let sampled: Vec<_> = o.racy_events(DetectionMode::SampledOnly).into_iter().collect();
        assert_eq!(sampled, [(3, RaceKind::WriteWrite), (4, RaceKind::WriteRead)]);
        let ext: Vec<_> = o.racy_events(DetectionMode::Extended).into_iter().collect();
        assert_eq!(
            ext,
            [
                (2, RaceKind::WriteRead),
                (3, RaceKind::WriteWrite),
                (4, RaceKind::WriteRead)
            ]
        );
    }

    #[test]
    fn local_times() {
        let o = Oracle::new(&parse_trace("T1|acq(l)\nT1|w(x)|*\nT1|rel(l)\nT1|acq(l)\nT1|rel(l)\nT1|r(x)").unwrap());
        assert_eq!((1..=6).map(|e| o.lt_ft(e)).collect::<Vec<_>>(), [1, 1, 1, 2, 2, 3]);
        assert_eq!((1..=6).map(|e| o.lt_smp(e)).collect::<Vec<_>>(), [1, 1, 1, 2, 2, 2]);
        assert!(o.is_rel_after(3) && !o.is_rel_after(5));
        assert_eq!(o.ct_smp(6).as_slice(), &[1]);
        // ⊥ -> [1] at the sampled write, nothing afterwards.
        assert_eq!(o.vt(1), 0);
        assert_eq!(o.vt(6), 1);
        assert_eq!(o.vtwork(), 2);
    }
}
