//! Deterministic discrete-event core: clock, queue, dispatch order.
//!
//! Events are totally ordered by `(time, seq)` where `seq` is the issue
//! order. Equal-time events therefore dispatch in insertion order, which
//! keeps replays bit-identical for a fixed seed and config.

use crate::time::SimTime;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Identifies a node in the simulation. Dense indices into the node table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Payload kinds understood by the simulation world.
pub trait EventPayload {
    /// Short label used in the event-trace log.
    fn label(&self) -> &'static str;
}

#[derive(Debug, Clone)]
pub struct Event<K> {
    pub time: SimTime,
    pub seq: u64,
    pub target: NodeId,
    pub kind: K,
}

struct HeapEntry<K> {
    event: Event<K>,
}

impl<K> PartialEq for HeapEntry<K> {
    fn eq(&self, other: &Self) -> bool {
        self.event.time == other.event.time && self.event.seq == other.event.seq
    }
}
impl<K> Eq for HeapEntry<K> {}

impl<K> Ord for HeapEntry<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for earliest-first dispatch.
        (other.event.time, other.event.seq).cmp(&(self.event.time, self.event.seq))
    }
}
impl<K> PartialOrd for HeapEntry<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Event queue plus simulation clock.
pub struct Engine<K> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<HeapEntry<K>>,
    dispatched: u64,
}

impl<K> Default for Engine<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K> Engine<K> {
    pub fn new() -> Self {
        Engine { now: SimTime::ZERO, next_seq: 0, queue: BinaryHeap::new(), dispatched: 0 }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Number of events dispatched so far.
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Enqueue an event. Scheduling in the past is a configuration bug and
    /// aborts the run.
    pub fn schedule(&mut self, time: SimTime, target: NodeId, kind: K) -> u64 {
        assert!(
            time >= self.now,
            "event scheduled in the past: t={} now={}",
            time,
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(HeapEntry { event: Event { time, seq, target, kind } });
        seq
    }

    /// Pop the next event with `time <= t_end`, advancing the clock to the
    /// event time. When the queue runs dry (or only holds later events) the
    /// clock advances to `t_end` and `None` is returned.
    pub fn next_until(&mut self, t_end: SimTime) -> Option<Event<K>> {
        match self.queue.peek() {
            Some(entry) if entry.event.time <= t_end => {
                let ev = self.queue.pop().unwrap().event;
                debug_assert!(ev.time >= self.now, "clock would move backwards");
                self.now = ev.time;
                self.dispatched += 1;
                Some(ev)
            }
            _ => {
                if t_end > self.now {
                    self.now = t_end;
                }
                None
            }
        }
    }
}

impl<K: EventPayload> Engine<K> {
    /// Format one trace line for a dispatched event: `<ticks>,<seq>,<node>,<kind>`.
    pub fn trace_line(ev: &Event<K>) -> String {
        format!("{},{},{},{}", ev.time.as_nanos(), ev.seq, ev.target.0, ev.kind.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::SimDuration;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[derive(Debug, Clone, PartialEq)]
    struct Tag(u32);
    impl EventPayload for Tag {
        fn label(&self) -> &'static str {
            "tag"
        }
    }

    fn drain(engine: &mut Engine<Tag>, t_end: SimTime) -> Vec<Event<Tag>> {
        let mut out = Vec::new();
        while let Some(ev) = engine.next_until(t_end) {
            out.push(ev);
        }
        out
    }

    #[test]
    fn schedule_at_now_fires_before_later_events() {
        let mut e = Engine::new();
        e.schedule(SimTime(10), NodeId(0), Tag(1));
        e.schedule(SimTime(0), NodeId(0), Tag(2));
        let evs = drain(&mut e, SimTime(100));
        assert_eq!(evs[0].kind, Tag(2));
        assert_eq!(evs[1].kind, Tag(1));
    }

    #[test]
    fn equal_time_dispatches_in_insertion_order() {
        let mut e = Engine::new();
        let s5 = e.schedule(SimTime(7), NodeId(0), Tag(5));
        let s7 = e.schedule(SimTime(7), NodeId(0), Tag(7));
        assert!(s5 < s7);
        let evs = drain(&mut e, SimTime(100));
        assert_eq!(evs.iter().map(|e| e.kind.0).collect::<Vec<_>>(), vec![5, 7]);
    }

    #[test]
    fn random_events_dispatch_in_nondecreasing_time() {
        // Oracle: sort a copy of the inserted set and compare.
        let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
        let mut e = Engine::new();
        let mut inserted: Vec<u64> = Vec::with_capacity(1_000_000);
        for _ in 0..1_000_000 {
            let t: u64 = rng.gen_range(0..1_000_000_000);
            inserted.push(t);
            e.schedule(SimTime(t), NodeId(0), Tag(0));
        }
        let dispatched: Vec<u64> =
            drain(&mut e, SimTime(u64::MAX)).iter().map(|ev| ev.time.as_nanos()).collect();
        let mut oracle = inserted.clone();
        oracle.sort_unstable();
        assert_eq!(dispatched, oracle);
    }

    #[test]
    fn run_until_empty_queue_advances_clock() {
        let mut e: Engine<Tag> = Engine::new();
        let evs = drain(&mut e, SimTime::ZERO + SimDuration::secs(1));
        assert!(evs.is_empty());
        assert_eq!(e.now(), SimTime(1_000_000_000));
    }

    #[test]
    fn run_until_dispatches_only_events_in_range() {
        let mut e = Engine::new();
        for us in [1u64, 2, 3] {
            e.schedule(SimTime(us * 1_000), NodeId(0), Tag(us as u32));
        }
        let evs = drain(&mut e, SimTime(2_000));
        assert_eq!(evs.len(), 2);
        assert_eq!(e.now(), SimTime(2_000));
        assert_eq!(e.pending(), 1);
    }

    #[test]
    #[should_panic(expected = "scheduled in the past")]
    fn scheduling_in_the_past_is_fatal() {
        let mut e = Engine::new();
        e.schedule(SimTime(5_000), NodeId(0), Tag(0));
        while e.next_until(SimTime(10_000)).is_some() {}
        e.schedule(SimTime(5_000), NodeId(0), Tag(1));
    }
}
