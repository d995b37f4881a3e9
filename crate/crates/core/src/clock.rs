//! Dense vector clocks.

use std::fmt;

use thiserror::Error;

use crate::trace::ThreadId;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum ClockError {
    #[error("clock width mismatch: {0} vs {1}")]
    WidthMismatch(usize, usize),
    #[error("thread {index} out of range for width {width}")]
    OutOfRange { index: usize, width: usize },
}

/// One non-negative counter per thread. The all-zero clock is ⊥.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct VectorClock(Vec<u64>);

impl VectorClock {
    pub fn bottom(width: usize) -> Self {
        Self(vec![0; width])
    }

    pub fn from_vec(v: Vec<u64>) -> Self {
        Self(v)
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u64> {
        self.0
    }

    #[inline]
    pub fn get(&self, t: ThreadId) -> u64 {
        self.0[t.index()]
    }

    pub fn try_get(&self, t: ThreadId) -> Result<u64, ClockError> {
        self.0.get(t.index()).copied().ok_or(ClockError::OutOfRange {
            index: t.index(),
            width: self.width(),
        })
    }

    #[inline]
    pub fn set(&mut self, t: ThreadId, v: u64) {
        self.0[t.index()] = v;
    }

    #[inline]
    pub fn increment(&mut self, t: ThreadId, k: u64) {
        let c = &mut self.0[t.index()];
        *c = c.checked_add(k).expect("vector clock component overflow");
    }

    fn check_width(&self, other: &Self) -> Result<(), ClockError> {
        if self.width() == other.width() {
            Ok(())
        } else {
            Err(ClockError::WidthMismatch(self.width(), other.width()))
        }
    }

    pub fn try_join(&self, other: &Self) -> Result<Self, ClockError> {
        self.check_width(other)?;
        let mut out = self.clone();
        out.join_assign(other);
        Ok(out)
    }

    /// Pointwise maximum. Panics on width mismatch.
    pub fn join(&self, other: &Self) -> Self {
        self.try_join(other).expect("join of clocks with different widths")
    }

    /// In-place join; returns the number of components that changed.
    pub fn join_assign(&mut self, other: &Self) -> usize {
        assert_eq!(self.width(), other.width(), "clock width mismatch");
        let mut changed = 0;
        for (a, &b) in self.0.iter_mut().zip(&other.0) {
            if b > *a {
                *a = b;
                changed += 1;
            }
        }
        changed
    }

    pub fn try_leq(&self, other: &Self) -> Result<bool, ClockError> {
        self.check_width(other)?;
        Ok(self.0.iter().zip(&other.0).all(|(a, b)| a <= b))
    }

    /// Pointwise `⊑`. Panics on width mismatch.
    pub fn leq(&self, other: &Self) -> bool {
        self.try_leq(other).expect("comparison of clocks with different widths")
    }

    /// Number of components where the two clocks differ.
    pub fn diff_count(&self, other: &Self) -> usize {
        assert_eq!(self.width(), other.width(), "clock width mismatch");
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn sum(&self) -> u64 {
        self.0.iter().sum()
    }
}

impl fmt::Debug for VectorClock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("]")
    }
}

impl fmt::Display for VectorClock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl From<Vec<u64>> for VectorClock {
    fn from(v: Vec<u64>) -> Self {
        Self(v)
    }
}
