//! Per-variable access histories and race checks.
//!
//! A history keeps, for every thread, the epoch of its last sampled write
//! (`W`) and last sampled read (`R`) of the variable. An access by `t` with
//! effective timestamp `eff` is unordered after an earlier sampled access by
//! `t' != t` exactly when that access's epoch exceeds `eff(t')`, so checking
//! `W(t') > eff(t')` (resp. `R`) for every `t'` decides whether the access
//! races with *some* earlier sampled write (resp. read).
//!
//! In [`DetectionMode::Extended`] unsampled accesses are checked too. Each
//! `(variable, thread)` pair caches the result of its last full check against
//! `W` and against `R` as a list of offending `(thread, epoch)` entries, keyed
//! by the generation of that side. While the generation is unchanged the
//! offenders can only become ordered (effective timestamps grow), so a cached
//! check just drops offenders that are now covered.

use std::fmt;

use serde::Serialize;

use crate::trace::{Event, Op, ThreadId, VarId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectionMode {
    /// Only sampled accesses are checked.
    #[default]
    SampledOnly,
    /// Every access is checked against earlier sampled accesses.
    Extended,
}

impl DetectionMode {
    pub fn token(self) -> &'static str {
        match self {
            DetectionMode::SampledOnly => "sampled-only",
            DetectionMode::Extended => "extended",
        }
    }
}

/// Which earlier access kind the reported event conflicts with, followed by
/// the event's own kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RaceKind {
    WriteWrite,
    WriteRead,
    ReadWrite,
}

impl RaceKind {
    pub fn token(self) -> &'static str {
        match self {
            RaceKind::WriteWrite => "write-write",
            RaceKind::WriteRead => "write-read",
            RaceKind::ReadWrite => "read-write",
        }
    }
}

impl fmt::Display for RaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A race declared on `event` (the later event of the pair).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RaceReport {
    pub event: usize,
    pub kind: RaceKind,
    #[serde(skip)]
    pub var: VarId,
}

impl RaceReport {
    /// `RACE <kind> at e<idx> on <var>`.
    pub fn render(&self, var_name: &str) -> String {
        format!("RACE {} at e{} on {}", self.kind, self.event, var_name)
    }
}

#[derive(Clone, Debug, Default)]
struct SideCache {
    seen_gen: u64,
    offenders: Vec<(u32, u64)>,
}

#[derive(Clone, Debug, Default)]
struct ThreadCaches {
    w: SideCache,
    r: SideCache,
}

#[derive(Clone, Debug)]
struct VarHistory {
    w: Vec<u64>,
    r: Vec<u64>,
    gen_w: u64,
    gen_r: u64,
    caches: Vec<ThreadCaches>,
}

impl VarHistory {
    fn new(threads: usize, extended: bool) -> Self {
        Self {
            w: vec![0; threads],
            r: vec![0; threads],
            gen_w: 0,
            gen_r: 0,
            caches: if extended {
                vec![ThreadCaches::default(); threads]
            } else {
                Vec::new()
            },
        }
    }
}

fn offenders(epochs: &[u64], t: usize, eff: &impl Fn(ThreadId) -> u64, out: &mut Vec<(u32, u64)>) {
    out.clear();
    for (u, &v) in epochs.iter().enumerate() {
        if u != t && v > eff(ThreadId(u as u32)) {
            out.push((u as u32, v));
        }
    }
}

/// Drops offenders now covered by `eff`; true if any remain.
fn still_racy(cache: &mut SideCache, eff: &impl Fn(ThreadId) -> u64) -> bool {
    while let Some(&(u, v)) = cache.offenders.last() {
        if v > eff(ThreadId(u)) {
            return true;
        }
        cache.offenders.pop();
    }
    false
}

pub struct AccessHistory {
    mode: DetectionMode,
    threads: usize,
    vars: Vec<VarHistory>,
    race_checks: u64,
    scratch: Vec<(u32, u64)>,
}

impl AccessHistory {
    pub fn new(threads: usize, vars: usize, mode: DetectionMode) -> Self {
        let ext = mode == DetectionMode::Extended;
        Self {
            mode,
            threads,
            vars: vec![VarHistory::new(threads, ext); vars],
            race_checks: 0,
            scratch: Vec::new(),
        }
    }

    pub fn mode(&self) -> DetectionMode {
        self.mode
    }

    /// Full-width history comparisons performed so far.
    pub fn race_checks(&self) -> u64 {
        self.race_checks
    }

    /// Checks and records one access. `epoch` is the accessing thread's
    /// current local time and `eff` its effective timestamp.
    pub fn on_access(
        &mut self,
        ev: &Event,
        sampled: bool,
        epoch: u64,
        eff: impl Fn(ThreadId) -> u64,
        races: &mut Vec<RaceReport>,
    ) {
        let (x, is_write) = match ev.op {
            Op::Read(x) => (x, false),
            Op::Write(x) => (x, true),
            _ => return,
        };
        let t = ev.thread.index();
        debug_assert!(t < self.threads);
        let h = &mut self.vars[x.index()];
        let report = |kind| RaceReport {
            event: ev.index,
            kind,
            var: x,
        };

        if self.mode == DetectionMode::SampledOnly {
            if !sampled {
                return;
            }
            self.race_checks += 1;
            let ww_or_wr =
                h.w.iter()
                    .enumerate()
                    .any(|(u, &v)| u != t && v > eff(ThreadId(u as u32)));
            if is_write {
                if ww_or_wr {
                    races.push(report(RaceKind::WriteWrite));
                }
                self.race_checks += 1;
                if h.r
                    .iter()
                    .enumerate()
                    .any(|(u, &v)| u != t && v > eff(ThreadId(u as u32)))
                {
                    races.push(report(RaceKind::ReadWrite));
                }
                h.w[t] = epoch;
            } else {
                if ww_or_wr {
                    races.push(report(RaceKind::WriteRead));
                }
                h.r[t] = epoch;
            }
            return;
        }

        // Extended mode.
        let gen_w = h.gen_w;
        let gen_r = h.gen_r;
        let cache = &mut h.caches[t];
        let w_racy = if sampled || cache.w.seen_gen != gen_w {
            self.race_checks += 1;
            offenders(&h.w, t, &eff, &mut self.scratch);
            std::mem::swap(&mut cache.w.offenders, &mut self.scratch);
            cache.w.seen_gen = gen_w;
            !cache.w.offenders.is_empty()
        } else {
            still_racy(&mut cache.w, &eff)
        };
        let r_racy = is_write
            && if sampled || cache.r.seen_gen != gen_r {
                self.race_checks += 1;
                offenders(&h.r, t, &eff, &mut self.scratch);
                std::mem::swap(&mut cache.r.offenders, &mut self.scratch);
                cache.r.seen_gen = gen_r;
                !cache.r.offenders.is_empty()
            } else {
                still_racy(&mut cache.r, &eff)
            };
        if w_racy {
            races.push(report(if is_write {
                RaceKind::WriteWrite
            } else {
                RaceKind::WriteRead
            }));
        }
        if r_racy {
            races.push(report(RaceKind::ReadWrite));
        }
        if sampled {
            // Own entries never matter to this thread's checks, so a current
            // cache stays current across its own bump.
            if is_write {
                h.w[t] = epoch;
                h.gen_w += 1;
                if cache.w.seen_gen == gen_w {
                    cache.w.seen_gen = h.gen_w;
                }
            } else {
                h.r[t] = epoch;
                h.gen_r += 1;
                if cache.r.seen_gen == gen_r {
                    cache.r.seen_gen = h.gen_r;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{parse_trace, Trace};

    /// Feeds every access of a lock-free trace with per-thread constant
    /// epoch 1 and no cross-thread knowledge.
    fn run_unsynchronized(tr: &Trace, mode: DetectionMode) -> (Vec<RaceReport>, u64) {
        let mut h = AccessHistory::new(tr.num_threads(), tr.num_vars(), mode);
        let mut races = Vec::new();
        for ev in tr.events() {
            let me = ev.thread;
            h.on_access(ev, ev.marked, 1, |u| u64::from(u == me), &mut races);
        }
        (races, h.race_checks())
    }

    #[test]
    fn write_write_pair() {
        let tr = parse_trace("T1|w(x)|*\nT2|w(x)|*").unwrap();
        let (races, _) = run_unsynchronized(&tr, DetectionMode::SampledOnly);
        assert_eq!(races.len(), 1);
        assert_eq!((races[0].event, races[0].kind), (2, RaceKind::WriteWrite));
        assert_eq!(races[0].render("x"), "RACE write-write at e2 on x");
    }

    #[test]
    fn reads_do_not_conflict() {
        let tr = parse_trace("T1|r(x)|*\nT2|r(x)|*").unwrap();
        assert!(run_unsynchronized(&tr, DetectionMode::SampledOnly).0.is_empty());
    }

    #[test]
    fn same_thread_never_races() {
        let tr = parse_trace("T1|w(x)|*\nT1|r(x)|*\nT1|w(x)|*").unwrap();
        assert!(run_unsynchronized(&tr, DetectionMode::Extended).0.is_empty());
    }

    #[test]
    fn unsampled_events_ignored_in_sampled_only() {
        let tr = parse_trace("T1|w(x)|*\nT2|w(x)").unwrap();
        let (races, checks) = run_unsynchronized(&tr, DetectionMode::SampledOnly);
        assert!(races.is_empty());
        assert_eq!(checks, 2);
    }

    #[test]
    fn extended_reports_every_later_access() {
        let tr = parse_trace("T1|w(x)|*\nT2|r(x)\nT2|r(x)\nT2|w(x)").unwrap();
        let (races, checks) = run_unsynchronized(&tr, DetectionMode::Extended);
        let got: Vec<(usize, RaceKind)> = races.iter().map(|r| (r.event, r.kind)).collect();
        assert_eq!(
            got,
            [
                (2, RaceKind::WriteRead),
                (3, RaceKind::WriteRead),
                (4, RaceKind::WriteWrite)
            ]
        );
        // Event 1 checks both sides, event 2 refreshes the write side and
        // the rest are answered from the cache.
        assert_eq!(checks, 3);
    }

    #[test]
    fn cached_offenders_drop_once_ordered() {
        let tr = parse_trace("T1|w(x)|*\nT2|r(x)\nT2|r(x)").unwrap();
        let mut h = AccessHistory::new(2, 1, DetectionMode::Extended);
        let mut races = Vec::new();
        let evs = tr.events();
        h.on_access(&evs[0], true, 1, |u| u64::from(u.0 == 0), &mut races);
        h.on_access(&evs[1], false, 1, |_| 0, &mut races);
        // T2 has now learned T1's epoch 1.
        h.on_access(&evs[2], false, 1, |_| 1, &mut races);
        assert_eq!(races.len(), 1);
        assert_eq!(races[0].event, 2);
        assert_eq!(h.race_checks(), 3);
    }
}
