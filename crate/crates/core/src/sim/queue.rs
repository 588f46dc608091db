//! Time-ordered event queue with deterministic tie-breaking.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::time::SimTime;

struct Entry<T> {
    due: SimTime,
    seq: u64,
    payload: T,
}

impl<T> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        (self.due, self.seq) == (other.due, other.seq)
    }
}

impl<T> Eq for Entry<T> {}

impl<T> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Entry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.due, self.seq).cmp(&(other.due, other.seq))
    }
}

/// Pops in `(due time, insertion sequence)` order. The clock follows the
/// popped events and never runs backwards.
pub struct EventQueue<T> {
    heap: BinaryHeap<Reverse<Entry<T>>>,
    next_seq: u64,
    now: SimTime,
}

impl<T> Default for EventQueue<T> {
    fn default() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: SimTime::ZERO,
        }
    }
}

impl<T> EventQueue<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Schedule `payload` at `due`.
    ///
    /// # Panics
    /// If `due` is earlier than the current clock.
    pub fn push(&mut self, due: SimTime, payload: T) {
        assert!(
            due >= self.now,
            "event scheduled in the past: {due} < {}",
            self.now
        );
        self.heap.push(Reverse(Entry {
            due,
            seq: self.next_seq,
            payload,
        }));
        self.next_seq += 1;
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse(e)| e.due)
    }

    pub fn pop(&mut self) -> Option<(SimTime, T)> {
        let Reverse(e) = self.heap.pop()?;
        self.now = e.due;
        Some((e.due, e.payload))
    }

    /// Move the clock forward without an event.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pops_by_time_then_sequence() {
        let mut q = EventQueue::new();
        q.push(SimTime::from_micros(5), "b");
        q.push(SimTime::from_micros(1), "a");
        q.push(SimTime::from_micros(5), "c");
        q.push(SimTime::from_micros(3), "x");
        let order: Vec<_> = std::iter::from_fn(|| q.pop().map(|(_, p)| p)).collect();
        assert_eq!(order, ["a", "x", "b", "c"]);
        assert_eq!(q.now(), SimTime::from_micros(5));
    }

    #[test]
    #[should_panic(expected = "in the past")]
    fn refuses_past_events() {
        let mut q = EventQueue::new();
        q.push(SimTime::from_micros(10), ());
        q.pop();
        q.push(SimTime::from_micros(9), ());
    }
}
