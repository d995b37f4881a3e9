//! Event and trace model.
//!
//! A [`Trace`] is an immutable, validated sequence of lock and access events.
//! Threads, locks and variables carry their textual names from the input and
//! a dense index assigned in order of first appearance.

mod format;
mod generate;
mod sampling;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub use format::{parse_trace, serialize_trace};
pub use generate::{generate_trace, handoff_trace, GenConfig, GenError};
pub use sampling::{mix64, sample_decision, SamplingMode, SamplingPolicy};

macro_rules! dense_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl From<usize> for $name {
            fn from(i: usize) -> Self {
                $name(u32::try_from(i).expect("id out of range"))
            }
        }
    };
}

dense_id!(
    /// Dense thread index in `[0, T)`.
    ThreadId
);
dense_id!(
    /// Dense lock index in `[0, L)`.
    LockId
);
dense_id!(
    /// Dense variable index in `[0, V)`.
    VarId
);

impl fmt::Display for ThreadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Acquire(LockId),
    Release(LockId),
    Read(VarId),
    Write(VarId),
}

impl Op {
    pub fn is_access(self) -> bool {
        matches!(self, Op::Read(_) | Op::Write(_))
    }

    pub fn var(self) -> Option<VarId> {
        match self {
            Op::Read(x) | Op::Write(x) => Some(x),
            _ => None,
        }
    }

    pub fn lock(self) -> Option<LockId> {
        match self {
            Op::Acquire(l) | Op::Release(l) => Some(l),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    /// 1-based position in the trace.
    pub index: usize,
    pub thread: ThreadId,
    pub op: Op,
    /// Membership in the sample set. Only access events may be marked.
    pub marked: bool,
}

/// Operation kind with an unresolved object name, as it appears in a file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Acquire,
    Release,
    Read,
    Write,
}

impl OpKind {
    pub fn token(self) -> &'static str {
        match self {
            OpKind::Acquire => "acq",
            OpKind::Release => "rel",
            OpKind::Read => "r",
            OpKind::Write => "w",
        }
    }

    fn is_access(self) -> bool {
        matches!(self, OpKind::Read | OpKind::Write)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DisciplineViolation {
    AcquireOfHeldLock,
    ReleaseByNonHolder,
    ReleaseOfFreeLock,
}

impl fmt::Display for DisciplineViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DisciplineViolation::AcquireOfHeldLock => "acquire-of-held-lock",
            DisciplineViolation::ReleaseByNonHolder => "release-by-non-holder",
            DisciplineViolation::ReleaseOfFreeLock => "release-of-free-lock",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{violation} at event {event} (lock {lock})")]
    Discipline {
        event: usize,
        lock: String,
        violation: DisciplineViolation,
    },
    #[error("mark on non-access event {event}")]
    MarkOnSync { event: usize },
}

/// A validated execution trace.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Trace {
    events: Vec<Event>,
    threads: Vec<String>,
    locks: Vec<String>,
    vars: Vec<String>,
}

impl Trace {
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn num_threads(&self) -> usize {
        self.threads.len()
    }

    pub fn num_locks(&self) -> usize {
        self.locks.len()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn thread_name(&self, t: ThreadId) -> &str {
        &self.threads[t.index()]
    }

    pub fn lock_name(&self, l: LockId) -> &str {
        &self.locks[l.index()]
    }

    pub fn var_name(&self, x: VarId) -> &str {
        &self.vars[x.index()]
    }

    /// Event by 1-based index.
    pub fn event(&self, index: usize) -> &Event {
        &self.events[index - 1]
    }

    /// Number of marked (sampled) events.
    pub fn sample_size(&self) -> usize {
        self.events.iter().filter(|e| e.marked).count()
    }

    /// Copy of this trace with marks replaced by `marks(event)` on access
    /// events. Synchronization events are never marked.
    pub fn with_marks(&self, mut marks: impl FnMut(&Event) -> bool) -> Trace {
        let mut out = self.clone();
        for ev in &mut out.events {
            ev.marked = ev.op.is_access() && marks(ev);
        }
        out
    }
}

/// Incremental trace construction with name interning and lock-discipline
/// validation.
#[derive(Debug, Default)]
pub struct TraceBuilder {
    trace: Trace,
    thread_ids: HashMap<String, ThreadId>,
    lock_ids: HashMap<String, LockId>,
    var_ids: HashMap<String, VarId>,
    holders: Vec<Option<ThreadId>>,
}

fn intern<I: Copy + From<usize>>(names: &mut Vec<String>, ids: &mut HashMap<String, I>, name: &str) -> I {
    if let Some(&id) = ids.get(name) {
        return id;
    }
    let id = I::from(names.len());
    names.push(name.to_owned());
    ids.insert(name.to_owned(), id);
    id
}

impl TraceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends one event. On error the builder is left unchanged except for
    /// possibly interned names.
    pub fn push(&mut self, thread: &str, kind: OpKind, object: &str, marked: bool) -> Result<&Event, TraceError> {
        let index = self.trace.events.len() + 1;
        if marked && !kind.is_access() {
            return Err(TraceError::MarkOnSync { event: index });
        }
        let t: ThreadId = intern(&mut self.trace.threads, &mut self.thread_ids, thread);
        let op = match kind {
            OpKind::Read | OpKind::Write => {
                let x: VarId = intern(&mut self.trace.vars, &mut self.var_ids, object);
                if kind == OpKind::Read {
                    Op::Read(x)
                } else {
                    Op::Write(x)
                }
            }
            OpKind::Acquire | OpKind::Release => {
                let l: LockId = intern(&mut self.trace.locks, &mut self.lock_ids, object);
                if self.holders.len() <= l.index() {
                    self.holders.resize(l.index() + 1, None);
                }
                let holder = self.holders[l.index()];
                let violation = match (kind, holder) {
                    (OpKind::Acquire, Some(_)) => Some(DisciplineViolation::AcquireOfHeldLock),
                    (OpKind::Release, None) => Some(DisciplineViolation::ReleaseOfFreeLock),
                    (OpKind::Release, Some(h)) if h != t => Some(DisciplineViolation::ReleaseByNonHolder),
                    _ => None,
                };
                if let Some(violation) = violation {
                    return Err(TraceError::Discipline {
                        event: index,
                        lock: object.to_owned(),
                        violation,
                    });
                }
                if kind == OpKind::Acquire {
                    self.holders[l.index()] = Some(t);
                    Op::Acquire(l)
                } else {
                    self.holders[l.index()] = None;
                    Op::Release(l)
                }
            }
        };
        self.trace.events.push(Event {
            index,
            thread: t,
            op,
            marked,
        });
        Ok(self.trace.events.last().expect("just pushed"))
    }

    pub fn finish(self) -> Trace {
        self.trace
    }
}
