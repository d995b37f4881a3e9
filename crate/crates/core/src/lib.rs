//! Offline happens-before race detection restricted to a sample set of
//! access events.
//!
//! The crate bundles four timestamping engines that share a common
//! access-history layer:
//!
//! * [`engine::DjitpEngine`] - classic full vector-clock detector, checks every access.
//! * [`engine::SamplingEngine`] - advances local time only at the first release
//!   after a sampled access.
//! * [`engine::UclockEngine`] - adds freshness clocks to skip redundant joins and copies.
//! * [`engine::OrderedListEngine`] - move-to-front ordered lists with lazily shared
//!   lock views.
//!
//! Everything is driven from a validated [`trace::Trace`]. The [`oracle`] module
//! recomputes every timestamp from first principles on small traces and is used
//! for differential testing.

pub mod clock;
pub mod diff;
pub mod engine;
pub mod history;
pub mod metrics;
pub mod olist;
pub mod oracle;
pub mod trace;

pub use clock::VectorClock;
pub use engine::{run_engine, Engine, EngineConfig, EngineKind, RunResult};
pub use history::{DetectionMode, RaceKind, RaceReport};
pub use metrics::RunMetrics;
pub use trace::{Event, LockId, Op, ThreadId, Trace, VarId};
