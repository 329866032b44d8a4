use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use super::SimError;

/// Simulated time in whole microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    /// Rounds to the nearest microsecond; negative and non-finite inputs map to zero.
    pub fn from_ms(ms: f64) -> SimTime {
        if ms.is_finite() && ms > 0.0 {
            SimTime((ms * 1000.0).round() as u64)
        } else {
            SimTime::ZERO
        }
    }

    pub fn as_us(self) -> u64 {
        self.0
    }

    pub fn as_ms(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl std::ops::Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}ms", self.as_ms())
    }
}

struct Entry<E> {
    at: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // Reversed so the max-heap pops the earliest entry first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// Time-ordered queue; equal times pop in insertion order.
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    now: SimTime,
    next_seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        EventQueue { heap: BinaryHeap::new(), now: SimTime::ZERO, next_seq: 0 }
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Returns the insertion sequence number.
    pub fn schedule(&mut self, at: SimTime, event: E) -> Result<u64, SimError> {
        if at < self.now {
            return Err(SimError::PastEvent { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { at, seq, event });
        Ok(seq)
    }

    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> u64 {
        let at = self.now + delay;
        self.schedule(at, event).expect("a non-negative delay is never in the past")
    }

    /// Pop the earliest event and advance the clock to it.
    pub fn pop(&mut self) -> Option<(SimTime, u64, E)> {
        let e = self.heap.pop()?;
        self.now = e.at;
        Some((e.at, e.seq, e.event))
    }

    /// Process events up to and including `limit` (or until the queue is
    /// empty when `limit` is `None`). Returns the processed events in order.
    pub fn run_until(&mut self, limit: Option<SimTime>, mut handle: impl FnMut(&mut Self, SimTime, E)) -> usize {
        let mut n = 0;
        while let Some(next) = self.heap.peek() {
            if limit.is_some_and(|l| next.at > l) {
                break;
            }
            let (at, _, event) = self.pop().expect("peeked");
            handle(self, at, event);
            n += 1;
        }
        if let Some(l) = limit {
            self.now = self.now.max(l);
        }
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_times_pop_fifo() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(5), 'a').unwrap();
        q.schedule(SimTime(5), 'b').unwrap();
        q.schedule(SimTime(1), 'c').unwrap();
        let order: Vec<char> = std::iter::from_fn(|| q.pop().map(|(_, _, e)| e)).collect();
        assert_eq!(order, vec!['c', 'a', 'b']);
    }

    #[test]
    fn past_events_are_rejected() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(10), ()).unwrap();
        q.pop();
        assert_eq!(q.schedule(SimTime(9), ()), Err(SimError::PastEvent { at: SimTime(9), now: SimTime(10) }));
        assert!(q.schedule(SimTime(10), ()).is_ok());
    }

    #[test]
    fn empty_queue_returns_at_current_clock() {
        let mut q: EventQueue<()> = EventQueue::new();
        assert_eq!(q.run_until(None, |_, _, _| {}), 0);
        assert_eq!(q.now(), SimTime::ZERO);
    }

    #[test]
    fn zero_delay_lands_after_queued_same_time_events() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(0), 1).unwrap();
        q.schedule(SimTime(0), 2).unwrap();
        let mut seen = Vec::new();
        q.run_until(None, |q, _, e| {
            seen.push(e);
            if e == 1 {
                q.schedule_in(SimTime::ZERO, 3);
            }
        });
        assert_eq!(seen, vec![1, 2, 3]);
    }
}
