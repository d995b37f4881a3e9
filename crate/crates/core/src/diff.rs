//! Differential comparison of every engine against the oracle.

use std::collections::BTreeSet;
use std::fmt;

use crate::clock::VectorClock;
use crate::engine::{replay, EngineConfig, EngineKind};
use crate::history::{DetectionMode, RaceKind};
use crate::oracle::Oracle;
use crate::trace::Trace;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Field {
    Timestamp {
        engine: VectorClock,
        oracle: VectorClock,
    },
    Races {
        engine: Vec<RaceKind>,
        oracle: Vec<RaceKind>,
    },
}

/// First point where an engine disagrees with the oracle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    pub engine: EngineKind,
    pub event: usize,
    pub field: Field,
}

fn kinds(ks: &[RaceKind]) -> String {
    let v: Vec<&str> = ks.iter().map(|k| k.token()).collect();
    format!("{{{}}}", v.join(","))
}

impl fmt::Display for Divergence {
    /// One `key=value` line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (field, e, o) = match &self.field {
            Field::Timestamp { engine, oracle } => ("timestamp", engine.to_string(), oracle.to_string()),
            Field::Races { engine, oracle } => ("races", kinds(engine), kinds(oracle)),
        };
        write!(
            f,
            "DIVERGENCE engine={} event={} field={} engine_value={} oracle_value={}",
            self.engine, self.event, field, e, o
        )
    }
}

fn kinds_at(set: &BTreeSet<(usize, RaceKind)>, event: usize) -> Vec<RaceKind> {
    set.range((event, RaceKind::WriteWrite)..=(event, RaceKind::ReadWrite))
        .map(|&(_, k)| k)
        .collect()
}

/// Runs all four engines on the trace's marks and returns the earliest
/// divergence, or `None` if everything agrees.
///
/// Djit+ is compared against full happens-before timestamps and against the
/// races of the trace with every access marked; the sampling engines against
/// sampling timestamps and the races for `mode`.
pub fn diff_trace(trace: &Trace, mode: DetectionMode, local_epoch_opt: bool) -> Option<Divergence> {
    let oracle = Oracle::new(trace);
    let full = Oracle::new(&trace.with_marks(|_| true));
    let mut first: Option<Divergence> = None;

    for kind in EngineKind::ALL {
        let cfg = EngineConfig::new(kind)
            .with_mode(mode)
            .with_local_epoch_opt(local_epoch_opt);
        let (expected_races, stamps) = if kind == EngineKind::Djitp {
            (full.racy_events(DetectionMode::SampledOnly), &full)
        } else {
            (oracle.racy_events(mode), &oracle)
        };
        let limit = first.as_ref().map_or(usize::MAX, |d| d.event);
        let mut found: Option<Divergence> = None;
        let run = replay(trace, &cfg, |ev, engine| {
            if found.is_some() || ev.index >= limit {
                return;
            }
            let got = engine.timestamp(ev.thread);
            let want = if kind == EngineKind::Djitp {
                stamps.ct_ft(ev.index)
            } else {
                stamps.ct_smp(ev.index)
            };
            if &got != want {
                found = Some(Divergence {
                    engine: kind,
                    event: ev.index,
                    field: Field::Timestamp {
                        engine: got,
                        oracle: want.clone(),
                    },
                });
            }
        });
        let got_races: BTreeSet<(usize, RaceKind)> = run.races.iter().map(|r| (r.event, r.kind)).collect();
        if let Some(&(event, _)) = got_races.symmetric_difference(&expected_races).next() {
            if found.as_ref().is_none_or(|d| event < d.event) {
                found = Some(Divergence {
                    engine: kind,
                    event,
                    field: Field::Races {
                        engine: kinds_at(&got_races, event),
                        oracle: kinds_at(&expected_races, event),
                    },
                });
            }
        }
        if let Some(d) = found {
            if first.as_ref().is_none_or(|f| d.event < f.event) {
                first = Some(d);
            }
        }
    }
    first
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::parse_trace;

    #[test]
    fn racy_pair_is_equivalent() {
        let tr = parse_trace("T1|w(x)|*\nT2|w(x)|*").unwrap();
        assert_eq!(diff_trace(&tr, DetectionMode::SampledOnly, true), None);
        assert_eq!(diff_trace(&tr, DetectionMode::Extended, false), None);
    }

    #[test]
    fn rendering() {
        let d = Divergence {
            engine: EngineKind::Uclock,
            event: 4,
            field: Field::Races {
                engine: vec![],
                oracle: vec![RaceKind::WriteWrite],
            },
        };
        assert_eq!(
            d.to_string(),
            "DIVERGENCE engine=uclock event=4 field=races engine_value={} oracle_value={write-write}"
        );
    }
}
