use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::model::SimTime;

struct Entry<E> {
    time: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Pending events ordered by `(time, scheduling sequence)`.
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    now: SimTime,
    next_seq: u64,
    dispatched: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            now: 0.0,
            next_seq: 0,
            dispatched: 0,
        }
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

    /// Total events popped so far.
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Schedules `event` at `time`; times in the past are clamped to now.
    pub fn schedule(&mut self, time: SimTime, event: E) {
        let time = if time < self.now { self.now } else { time };
        self.heap.push(Entry {
            time,
            seq: self.next_seq,
            event,
        });
        self.next_seq += 1;
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.time)
    }

    /// Pops the next event and advances the clock to it.
    pub fn step(&mut self) -> Option<(SimTime, E)> {
        let e = self.heap.pop()?;
        self.now = e.time;
        self.dispatched += 1;
        Some((e.time, e.event))
    }

    /// Pops the next event if it is due no later than `limit`.
    pub fn step_until(&mut self, limit: SimTime) -> Option<(SimTime, E)> {
        if self.peek_time()? <= limit {
            self.step()
        } else {
            None
        }
    }

    /// Dispatches every event due by `limit` through `handler`, then moves the
    /// clock to `limit`. Returns the number of events dispatched.
    pub fn run_until<F>(&mut self, limit: SimTime, mut handler: F) -> usize
    where
        F: FnMut(&mut EventQueue<E>, SimTime, E),
    {
        let mut n = 0;
        while let Some((t, ev)) = self.step_until(limit) {
            handler(self, t, ev);
            n += 1;
        }
        if limit > self.now {
            self.now = limit;
        }
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_run_advances_clock() {
        let mut q: EventQueue<()> = EventQueue::new();
        assert_eq!(q.run_until(50.0, |_, _, _| {}), 0);
        assert_eq!(q.now(), 50.0);
    }

    #[test]
    fn equal_times_are_fifo() {
        let mut q = EventQueue::new();
        q.schedule(5.0, "a");
        q.schedule(1.0, "first");
        q.schedule(5.0, "b");
        q.schedule(5.0, "c");
        let mut seen = Vec::new();
        q.run_until(10.0, |_, _, e| seen.push(e));
        assert_eq!(seen, vec!["first", "a", "b", "c"]);
    }

    #[test]
    fn handlers_can_schedule() {
        let mut q = EventQueue::new();
        q.schedule(0.0, 0u32);
        let mut trace = Vec::new();
        q.run_until(100.0, |q, t, n| {
            trace.push((t, n));
            if n < 3 {
                q.schedule(t + 10.0, n + 1);
            }
        });
        assert_eq!(trace, vec![(0.0, 0), (10.0, 1), (20.0, 2), (30.0, 3)]);
        assert_eq!(q.dispatched(), 4);
    }

    #[test]
    fn time_is_monotone() {
        let mut q = EventQueue::new();
        q.schedule(10.0, ());
        q.step();
        q.schedule(3.0, ());
        let (t, _) = q.step().unwrap();
        assert_eq!(t, 10.0);
    }
}
