//! Sample-set policies.
//!
//! Bernoulli decisions are a pure function of `(seed, event index)`:
//!
//! ```text
//! z  = seed + index * 0x9E3779B97F4A7C15        (wrapping)
//! z  = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z  = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z  =  z ^ (z >> 31)
//! u  = (z >> 11) / 2^53                         in [0, 1)
//! sampled  iff  u < rate
//! ```
//!
//! so a decision never depends on the content of other events, and a given
//! seed yields nested sample sets as the rate grows.

use super::Trace;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SamplingMode {
    /// Clear every mark.
    None,
    /// Mark each access independently with the given probability.
    Bernoulli(f64),
    /// Keep the marks already present in the trace.
    PreMarked,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingPolicy {
    pub mode: SamplingMode,
    pub seed: u64,
}

impl SamplingPolicy {
    pub fn bernoulli(rate: f64, seed: u64) -> Self {
        Self {
            mode: SamplingMode::Bernoulli(rate),
            seed,
        }
    }

    pub fn pre_marked() -> Self {
        Self {
            mode: SamplingMode::PreMarked,
            seed: 0,
        }
    }

    pub fn apply(&self, trace: &Trace) -> Trace {
        match self.mode {
            SamplingMode::None => trace.with_marks(|_| false),
            SamplingMode::PreMarked => trace.with_marks(|e| e.marked),
            SamplingMode::Bernoulli(rate) => trace.with_marks(|e| sample_decision(self.seed, e.index, rate)),
        }
    }
}

/// splitmix64 finalizer over `seed + index * golden`.
pub fn mix64(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sample_decision(seed: u64, index: usize, rate: f64) -> bool {
    let u = (mix64(seed, index as u64) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    u < rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{OpKind, TraceBuilder};

    fn accesses(n: usize) -> Trace {
        let mut b = TraceBuilder::new();
        for i in 0..n {
            let kind = if i % 3 == 0 { OpKind::Write } else { OpKind::Read };
            b.push("T1", kind, "x", false).unwrap();
        }
        b.finish()
    }

    #[test]
    fn extreme_rates() {
        let tr = accesses(500);
        assert_eq!(SamplingPolicy::bernoulli(0.0, 7).apply(&tr).sample_size(), 0);
        assert_eq!(SamplingPolicy::bernoulli(1.0, 7).apply(&tr).sample_size(), 500);
    }

    #[test]
    fn three_percent_is_within_three_sigma() {
        let tr = accesses(10_000);
        let n = SamplingPolicy::bernoulli(0.03, 42).apply(&tr).sample_size() as f64;
        let sigma = (10_000.0f64 * 0.03 * 0.97).sqrt();
        assert!((n - 300.0).abs() <= 3.0 * sigma, "got {n}");
    }

    #[test]
    fn sync_events_are_never_marked() {
        let mut b = TraceBuilder::new();
        b.push("T1", OpKind::Acquire, "l", false).unwrap();
        b.push("T1", OpKind::Write, "x", false).unwrap();
        b.push("T1", OpKind::Release, "l", false).unwrap();
        let tr = SamplingPolicy::bernoulli(1.0, 1).apply(&b.finish());
        let marks: Vec<bool> = tr.events().iter().map(|e| e.marked).collect();
        assert_eq!(marks, [false, true, false]);
    }

    #[test]
    fn none_clears_and_premarked_keeps() {
        let tr = SamplingPolicy::bernoulli(0.5, 3).apply(&accesses(64));
        let none = SamplingPolicy {
            mode: SamplingMode::None,
            seed: 0,
        };
        assert_eq!(none.apply(&tr).sample_size(), 0);
        assert_eq!(SamplingPolicy::pre_marked().apply(&tr), tr);
    }
}
