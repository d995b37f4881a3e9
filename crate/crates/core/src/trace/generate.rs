//! Synthetic trace generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{OpKind, Trace, TraceBuilder};

#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub threads: usize,
    pub locks: usize,
    pub vars: usize,
    pub events: usize,
    /// Probability that a step outside a critical section is an acquire.
    pub p_sync: f64,
    /// Probability that an acquire targets the most recently released lock.
    pub contention: f64,
    /// Mean number of steps a thread spends inside a critical section.
    pub accesses_per_cs: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            threads: 4,
            locks: 4,
            vars: 4,
            events: 200,
            p_sync: 0.3,
            contention: 0.5,
            accesses_per_cs: 2.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("infeasible generator config: {0}")]
    Infeasible(String),
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::Infeasible(m.to_owned()));
        if self.threads == 0 || self.locks == 0 || self.vars == 0 || self.events == 0 {
            return bad("threads, locks, vars and events must all be at least 1");
        }
        for (name, p) in [("p_sync", self.p_sync), ("contention", self.contention)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(GenError::Infeasible(format!("{name} = {p} is not in [0, 1]")));
            }
        }
        if !(self.accesses_per_cs >= 0.0 && self.accesses_per_cs.is_finite()) {
            return bad("accesses_per_cs must be a finite non-negative number");
        }
        Ok(())
    }
}

struct GenState {
    builder: TraceBuilder,
    held: Vec<Vec<usize>>,
    lock_free: Vec<bool>,
    lock_used: Vec<bool>,
    covered: usize,
    must_cover: usize,
    last_released: Option<usize>,
}

impl GenState {
    fn emit(&mut self, t: usize, kind: OpKind, object: String) {
        self.builder
            .push(&format!("T{}", t + 1), kind, &object, false)
            .expect("generator respects lock discipline");
    }

    fn acquire(&mut self, t: usize, l: usize) {
        debug_assert!(self.lock_free[l]);
        self.lock_free[l] = false;
        if !self.lock_used[l] {
            self.lock_used[l] = true;
            self.covered += 1;
        }
        self.held[t].push(l);
        self.emit(t, OpKind::Acquire, format!("l{}", l + 1));
    }

    fn release(&mut self, t: usize) {
        let l = self.held[t].pop().expect("thread holds a lock");
        self.lock_free[l] = true;
        self.last_released = Some(l);
        self.emit(t, OpKind::Release, format!("l{}", l + 1));
    }

    fn held_total(&self) -> usize {
        self.held.iter().map(Vec::len).sum()
    }
}

/// Generates a trace that satisfies the lock discipline by construction.
///
/// All critical sections are closed before the budget runs out, and every
/// lock is acquired at least once whenever `events >= 2 * locks`.
pub fn generate_trace(cfg: &GenConfig, seed: u64) -> Result<Trace, GenError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let must_cover = cfg.locks.min(cfg.events / 2);
    let p_release = 1.0 / (1.0 + cfg.accesses_per_cs);
    let mut st = GenState {
        builder: TraceBuilder::new(),
        held: vec![Vec::new(); cfg.threads],
        lock_free: vec![true; cfg.locks],
        lock_used: vec![false; cfg.locks],
        covered: 0,
        must_cover,
        last_released: None,
    };

    for step in 0..cfg.events {
        let remaining = cfg.events - step;
        let needed = st.held_total() + 2 * must_cover.saturating_sub(st.covered);
        if remaining <= needed {
            // Drain: close open critical sections, then cover unused locks.
            let holders: Vec<usize> = (0..cfg.threads).filter(|&t| !st.held[t].is_empty()).collect();
            if !holders.is_empty() {
                let t = holders[rng.gen_range(0..holders.len())];
                st.release(t);
            } else {
                let l = st.lock_used.iter().position(|u| !u).expect("uncovered lock");
                let t = rng.gen_range(0..cfg.threads);
                st.acquire(t, l);
            }
            continue;
        }

        let t = rng.gen_range(0..cfg.threads);
        let holding = !st.held[t].is_empty();
        let wants_release = holding && rng.gen_bool(p_release);
        if wants_release {
            st.release(t);
            continue;
        }
        let p_acq = if holding { cfg.p_sync * 0.25 } else { cfg.p_sync };
        if rng.gen_bool(p_acq) {
            if let Some(l) = pick_lock(&mut rng, cfg, &st, remaining, needed) {
                st.acquire(t, l);
                continue;
            }
        }
        let x = rng.gen_range(0..cfg.vars);
        let kind = if rng.gen_bool(0.5) { OpKind::Write } else { OpKind::Read };
        st.emit(t, kind, format!("x{}", x + 1));
    }
    debug_assert_eq!(st.held_total(), 0);
    Ok(st.builder.finish())
}

fn pick_lock(rng: &mut ChaCha8Rng, cfg: &GenConfig, st: &GenState, remaining: usize, needed: usize) -> Option<usize> {
    // An acquire raises the closing budget by one unless it covers a lock
    // that still has to be covered.
    let budget_ok = remaining >= needed + 2;
    let covering = |l: usize| !st.lock_used[l] && st.covered < st.must_cover;
    let allowed = |l: usize| st.lock_free[l] && (budget_ok || covering(l));
    if let Some(last) = st.last_released {
        if rng.gen_bool(cfg.contention) {
            // Contended: wait for the hot lock rather than pick another.
            return allowed(last).then_some(last);
        }
    }
    let free: Vec<usize> = (0..cfg.locks).filter(|&l| allowed(l)).collect();
    if free.is_empty() {
        return None;
    }
    Some(free[rng.gen_range(0..free.len())])
}

/// Two threads passing one lock back and forth `handoffs` times after a
/// single sampled write. Each critical section holds `accesses_per_cs`
/// unsampled accesses to a thread-local variable.
pub fn handoff_trace(handoffs: usize, accesses_per_cs: usize) -> Trace {
    let mut b = TraceBuilder::new();
    b.push("T1", OpKind::Acquire, "l", false).expect("valid");
    b.push("T1", OpKind::Write, "x", true).expect("valid");
    b.push("T1", OpKind::Release, "l", false).expect("valid");
    for i in 0..handoffs {
        let (t, var) = if i % 2 == 0 { ("T2", "y2") } else { ("T1", "y1") };
        b.push(t, OpKind::Acquire, "l", false).expect("valid");
        for _ in 0..accesses_per_cs {
            b.push(t, OpKind::Write, var, false).expect("valid");
        }
        b.push(t, OpKind::Release, "l", false).expect("valid");
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{parse_trace, serialize_trace, Op};

    #[test]
    fn single_thread_single_lock() {
        let cfg = GenConfig {
            threads: 1,
            locks: 1,
            vars: 1,
            events: 4,
            ..GenConfig::default()
        };
        for seed in 0..50 {
            let tr = generate_trace(&cfg, seed).unwrap();
            assert_eq!(tr.len(), 4);
            assert!(parse_trace(&serialize_trace(&tr)).is_ok());
            assert!(tr.events().iter().any(|e| matches!(e.op, Op::Acquire(_))));
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let cfg = GenConfig::default();
        assert_eq!(generate_trace(&cfg, 9).unwrap(), generate_trace(&cfg, 9).unwrap());
        assert_ne!(generate_trace(&cfg, 9).unwrap(), generate_trace(&cfg, 10).unwrap());
    }

    #[test]
    fn every_lock_is_used_when_budget_allows() {
        let cfg = GenConfig {
            locks: 8,
            events: 40,
            p_sync: 0.0,
            ..GenConfig::default()
        };
        let tr = generate_trace(&cfg, 1).unwrap();
        assert_eq!(tr.num_locks(), 8);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            GenConfig {
                threads: 0,
                ..GenConfig::default()
            },
            GenConfig {
                events: 0,
                ..GenConfig::default()
            },
            GenConfig {
                p_sync: 1.5,
                ..GenConfig::default()
            },
            GenConfig {
                contention: f64::NAN,
                ..GenConfig::default()
            },
            GenConfig {
                accesses_per_cs: -1.0,
                ..GenConfig::default()
            },
        ];
        for cfg in bad {
            assert!(generate_trace(&cfg, 0).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn full_contention_reuses_hot_lock() {
        let cfg = GenConfig {
            threads: 8,
            locks: 4,
            vars: 4,
            events: 4000,
            p_sync: 0.4,
            contention: 1.0,
            accesses_per_cs: 2.0,
        };
        let tr = generate_trace(&cfg, 5).unwrap();
        let mut last_rel = None;
        let (mut hits, mut acquires) = (0usize, 0usize);
        for ev in tr.events() {
            match ev.op {
                Op::Acquire(l) => {
                    acquires += 1;
                    hits += usize::from(last_rel == Some(l));
                }
                Op::Release(l) => last_rel = Some(l),
                _ => {}
            }
        }
        assert!(acquires > 100);
        assert!(hits as f64 / acquires as f64 > 0.9, "{hits}/{acquires}");
    }

    #[test]
    fn handoff_shape() {
        let tr = handoff_trace(100, 1);
        assert_eq!(tr.len(), 3 + 100 * 3);
        assert_eq!(tr.sample_size(), 1);
    }
}
