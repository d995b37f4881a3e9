//! Move-to-front ordered lists with copy-on-write sharing.
//!
//! An [`OrderedList`] stores one `(thread, time)` node per thread in a doubly
//! linked sequence. Every `set`/`increment` moves the touched node to the
//! head, so the `k` most recently changed entries are always the first `k`.
//! Nodes live in an arena indexed by thread id, which doubles as the thread
//! map, so get/set/increment never traverse.

use std::cell::Cell;
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::clock::VectorClock;
use crate::trace::ThreadId;

const NIL: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Node {
    time: u64,
    prev: u32,
    next: u32,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum OlistError {
    #[error("mutation of a shared ordered list")]
    SharedMutation,
}

#[derive(Clone)]
pub struct OrderedList {
    nodes: Vec<Node>,
    head: u32,
    tail: u32,
    /// Node touches performed by get/set/increment, for constant-work checks.
    steps: Cell<u64>,
}

impl OrderedList {
    /// ⊥ list, ascending thread id from head to tail.
    pub fn bottom(width: usize) -> Self {
        let n = u32::try_from(width).expect("too many threads");
        assert!(n < NIL);
        let nodes = (0..n)
            .map(|i| Node {
                time: 0,
                prev: if i == 0 { NIL } else { i - 1 },
                next: if i + 1 == n { NIL } else { i + 1 },
            })
            .collect();
        Self {
            nodes,
            head: if n == 0 { NIL } else { 0 },
            tail: if n == 0 { NIL } else { n - 1 },
            steps: Cell::new(0),
        }
    }

    /// Builds a list from `(thread, time)` pairs given head first. Every
    /// thread in `[0, width)` must appear exactly once.
    pub fn from_entries(entries: &[(ThreadId, u64)]) -> Self {
        let width = entries.len();
        let mut seen = vec![false; width];
        let mut list = Self::bottom(width);
        for &(t, _) in entries {
            assert!(
                t.index() < width && !seen[t.index()],
                "entries must cover each thread once"
            );
            seen[t.index()] = true;
        }
        for &(t, v) in entries.iter().rev() {
            list.set(t, v);
        }
        list.steps.set(0);
        list
    }

    pub fn width(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn get(&self, t: ThreadId) -> u64 {
        self.steps.set(self.steps.get() + 1);
        self.nodes[t.index()].time
    }

    pub fn set(&mut self, t: ThreadId, v: u64) {
        self.nodes[t.index()].time = v;
        self.move_to_front(t.index() as u32);
    }

    pub fn increment(&mut self, t: ThreadId, k: u64) {
        let node = &mut self.nodes[t.index()];
        node.time = node.time.checked_add(k).expect("ordered list time overflow");
        self.move_to_front(t.index() as u32);
    }

    fn move_to_front(&mut self, i: u32) {
        self.steps.set(self.steps.get() + 1);
        if self.head == i {
            return;
        }
        let Node { prev, next, .. } = self.nodes[i as usize];
        // `i` is not the head, so it has a predecessor.
        self.nodes[prev as usize].next = next;
        if next == NIL {
            self.tail = prev;
        } else {
            self.nodes[next as usize].prev = prev;
        }
        self.nodes[i as usize].prev = NIL;
        self.nodes[i as usize].next = self.head;
        self.nodes[self.head as usize].prev = i;
        self.head = i;
    }

    /// Entries in list order, head first.
    pub fn iter(&self) -> Iter<'_> {
        Iter {
            list: self,
            cur: self.head,
        }
    }

    /// The first `min(k, T)` entries.
    pub fn prefix(&self, k: usize) -> Vec<(ThreadId, u64)> {
        self.iter().take(k).collect()
    }

    pub fn snapshot(&self) -> VectorClock {
        VectorClock::from_vec(self.nodes.iter().map(|n| n.time).collect())
    }

    /// Total node touches by get/set/increment so far.
    pub fn steps(&self) -> u64 {
        self.steps.get()
    }
}

impl PartialEq for OrderedList {
    /// Same values in the same order.
    fn eq(&self, other: &Self) -> bool {
        self.iter().eq(other.iter())
    }
}

impl Eq for OrderedList {}

impl fmt::Debug for OrderedList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (t, v)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(" -> ")?;
            }
            write!(f, "({t}:{v})")?;
        }
        Ok(())
    }
}

pub struct Iter<'a> {
    list: &'a OrderedList,
    cur: u32,
}

impl Iterator for Iter<'_> {
    type Item = (ThreadId, u64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.cur == NIL {
            return None;
        }
        let i = self.cur;
        let node = &self.list.nodes[i as usize];
        self.cur = node.next;
        Some((ThreadId(i), node.time))
    }
}

/// Read-only view held by a lock.
#[derive(Clone)]
pub struct SharedList(Rc<OrderedList>);

impl SharedList {
    pub fn bottom(width: usize) -> Self {
        Self(Rc::new(OrderedList::bottom(width)))
    }

    pub fn list(&self) -> &OrderedList {
        &self.0
    }

    pub fn share_count(&self) -> usize {
        Rc::strong_count(&self.0)
    }
}

impl fmt::Debug for SharedList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&*self.0, f)
    }
}

/// A thread's list plus its `shared` flag. The flag is set by
/// [`OwnedList::shallow_copy`] and cleared only by [`OwnedList::deep_copy`].
pub struct OwnedList {
    list: Rc<OrderedList>,
    shared: bool,
}

impl OwnedList {
    pub fn new(list: OrderedList) -> Self {
        Self {
            list: Rc::new(list),
            shared: false,
        }
    }

    pub fn bottom(width: usize) -> Self {
        Self::new(OrderedList::bottom(width))
    }

    pub fn list(&self) -> &OrderedList {
        &self.list
    }

    pub fn is_shared(&self) -> bool {
        self.shared
    }

    #[inline]
    pub fn get(&self, t: ThreadId) -> u64 {
        self.list.get(t)
    }

    /// Publishes a read-only view and marks this list shared.
    pub fn shallow_copy(&mut self) -> SharedList {
        self.shared = true;
        SharedList(Rc::clone(&self.list))
    }

    /// Replaces the list by an exclusive structural copy.
    pub fn deep_copy(&mut self) {
        self.list = Rc::new((*self.list).clone());
        self.shared = false;
    }

    /// Deep-copies if shared; returns whether a copy was made.
    pub fn make_exclusive(&mut self) -> bool {
        if self.shared {
            self.deep_copy();
            true
        } else {
            false
        }
    }

    fn exclusive(&mut self) -> Result<&mut OrderedList, OlistError> {
        if self.shared {
            return Err(OlistError::SharedMutation);
        }
        Ok(Rc::get_mut(&mut self.list).expect("unshared list has a single owner"))
    }

    pub fn set(&mut self, t: ThreadId, v: u64) -> Result<(), OlistError> {
        self.exclusive()?.set(t, v);
        Ok(())
    }

    pub fn increment(&mut self, t: ThreadId, k: u64) -> Result<(), OlistError> {
        self.exclusive()?.increment(t, k);
        Ok(())
    }
}

impl fmt::Debug for OwnedList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&*self.list, f)
    }
}
