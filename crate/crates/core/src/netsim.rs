//! Deterministic discrete-event core: integer-nanosecond clock, a stable
//! FIFO-tie-break event queue, per-subsystem forked RNG streams, and the
//! classical channel model.
//!
//! The whole simulation is a pure function of (config, seed): identical
//! inputs produce bit-identical traces.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Simulated time in integer nanoseconds. Integer time avoids floating-point
/// drift over long event streams.
pub type Ns = u64;

pub const US: Ns = 1_000;
pub const MS: Ns = 1_000_000;
pub const SEC: Ns = 1_000_000_000;

/// Monotonic simulated clock, advanced only by the event loop.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimClock {
    now: Ns,
}

impl SimClock {
    pub fn now(&self) -> Ns {
        self.now
    }

    pub(crate) fn advance_to(&mut self, t: Ns) {
        debug_assert!(t >= self.now, "clock must not run backwards");
        self.now = t;
    }
}

#[derive(Debug)]
struct Entry<E> {
    at: Ns,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}
impl<E> Eq for Entry<E> {}
impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.at.cmp(&other.at).then(self.seq.cmp(&other.seq))
    }
}

/// Pending events ordered by (time, insertion sequence). Two events at the
/// same timestamp execute in insertion order.
#[derive(Debug)]
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<Entry<E>>>,
    next_seq: u64,
    clamped: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        EventQueue { heap: BinaryHeap::new(), next_seq: 0, clamped: 0 }
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Schedules `event` at absolute time `at`. Scheduling in the past is a
    /// logic error: debug builds panic, release builds clamp to `now` and
    /// count the violation.
    pub fn schedule(&mut self, now: Ns, at: Ns, event: E) {
        debug_assert!(at >= now, "scheduling in the past: at={at} now={now}");
        let at = if at < now {
            self.clamped += 1;
            if self.clamped == 1 {
                eprintln!("warning: event scheduled in the past clamped to now={now}");
            }
            now
        } else {
            at
        };
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry { at, seq, event }));
    }

    pub fn pop(&mut self) -> Option<(Ns, E)> {
        self.heap.pop().map(|Reverse(e)| (e.at, e.event))
    }

    pub fn peek_time(&self) -> Option<Ns> {
        self.heap.peek().map(|Reverse(e)| e.at)
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn clamped_count(&self) -> u64 {
        self.clamped
    }
}

/// Named RNG streams, one per subsystem. Forking per subsystem means adding
/// draws in one stream never perturbs the others.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    PhysClient,
    PhysServer,
    Heralding,
    Channel,
    ReadoutClient,
    ReadoutServer,
    ChargeClient,
    ChargeServer,
    Noise,
    App,
}

impl Stream {
    const ALL: [Stream; 10] = [
        Stream::PhysClient,
        Stream::PhysServer,
        Stream::Heralding,
        Stream::Channel,
        Stream::ReadoutClient,
        Stream::ReadoutServer,
        Stream::ChargeClient,
        Stream::ChargeServer,
        Stream::Noise,
        Stream::App,
    ];

    fn id(self) -> u8 {
        Stream::ALL.iter().position(|s| *s == self).expect("stream is listed") as u8
    }
}

/// The simulation's bank of forked RNG streams, all derived from one root
/// seed.
pub struct RngBank {
    streams: Vec<ChaCha12Rng>,
}

impl std::fmt::Debug for RngBank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RngBank({} streams)", self.streams.len())
    }
}

impl RngBank {
    pub fn new(root_seed: u64) -> Self {
        let streams = Stream::ALL
            .iter()
            .map(|s| derived_rng(root_seed, s.id()))
            .collect();
        RngBank { streams }
    }

    pub fn stream(&mut self, s: Stream) -> &mut ChaCha12Rng {
        &mut self.streams[s.id() as usize]
    }

    /// Uniform draw in [0, 1) from the named stream.
    pub fn unit(&mut self, s: Stream) -> f64 {
        self.stream(s).gen::<f64>()
    }
}

/// A ChaCha stream keyed by (root seed, label). Labels are baked into the
/// seed bytes so streams are independent by construction.
pub fn derived_rng(root_seed: u64, label: u8) -> ChaCha12Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&root_seed.to_le_bytes());
    seed[8] = label;
    seed[9..17].copy_from_slice(b"qlinkrng");
    ChaCha12Rng::from_seed(seed)
}

/// Draws a geometric "number of tries until first success" for success
/// probability `p`, capped at `cap`. One uniform draw per try keeps the
/// stream usage proportional to simulated work.
pub fn tries_until_success<R: RngCore>(rng: &mut R, p: f64, cap: u64) -> Option<u64> {
    if p <= 0.0 {
        for _ in 0..cap {
            let _ = rng.gen::<f64>();
        }
        return None;
    }
    for k in 1..=cap {
        if rng.gen::<f64>() < p {
            return Some(k);
        }
    }
    None
}

/// Reliable-by-default point-to-point channel: constant one-way latency with
/// FIFO ordering, plus an optional loss probability.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ClassicalChannel {
    /// One-way latency in nanoseconds.
    pub latency_ns: Ns,
    /// Probability that a message is silently dropped.
    pub loss: f64,
}

impl Default for ClassicalChannel {
    fn default() -> Self {
        // LAN-scale link between the two network controllers
        ClassicalChannel { latency_ns: 100 * US, loss: 0.0 }
    }
}

impl ClassicalChannel {
    /// Returns the delivery time for a message sent now, or `None` if the
    /// message is lost. Constant latency preserves FIFO per direction.
    pub fn transit<R: RngCore>(&self, now: Ns, rng: &mut R) -> Option<Ns> {
        if self.loss > 0.0 && rng.gen::<f64>() < self.loss {
            return None;
        }
        Some(now + self.latency_ns)
    }
}
