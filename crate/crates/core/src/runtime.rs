//! In-process message-passing substrate.
//!
//! Each rank is a worker thread. Point-to-point messages are matched exactly
//! on `(src, dst, tag)`; at most one message per triple may be in flight.
//! Sends are eager (buffered at post time) so a send handle is complete as
//! soon as it exists. The global sum folds contributions in ascending rank
//! order, which makes it bitwise reproducible regardless of scheduling.
//!
//! Any thread of a rank may post sends and receives concurrently.

use std::collections::{HashMap, HashSet};
use std::ops::{Add, Sub};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};

/// Message tag. Unique among in-flight messages of a `(src, dst)` pair.
pub type Tag = u64;

#[derive(Debug, Clone)]
pub struct RuntimeOptions {
    /// When set, every send and receive first yields or sleeps for a
    /// pseudo-random amount derived from this seed, shaking up thread
    /// interleavings.
    pub jitter_seed: Option<u64>,
    /// How long a receive or collective may block before the run is failed.
    pub timeout: Duration,
}

impl Default for RuntimeOptions {
    fn default() -> Self {
        RuntimeOptions { jitter_seed: None, timeout: Duration::from_secs(120) }
    }
}

/// Per-rank activity counters. All updates are atomic.
#[derive(Debug, Default)]
pub struct RankCounters {
    pub messages_sent: AtomicU64,
    pub bytes_sent: AtomicU64,
    pub messages_received: AtomicU64,
    pub collectives: AtomicU64,
    pub write_ops: AtomicU64,
    /// Thread-team activations inside the iteration loop.
    pub activations: AtomicU64,
    /// Thread-team activations outside the iteration loop (initialisation, output).
    pub setup_activations: AtomicU64,
}

impl RankCounters {
    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            messages_sent: self.messages_sent.load(Ordering::SeqCst),
            bytes_sent: self.bytes_sent.load(Ordering::SeqCst),
            messages_received: self.messages_received.load(Ordering::SeqCst),
            collectives: self.collectives.load(Ordering::SeqCst),
            write_ops: self.write_ops.load(Ordering::SeqCst),
            activations: self.activations.load(Ordering::SeqCst),
            setup_activations: self.setup_activations.load(Ordering::SeqCst),
        }
    }
}

/// Plain-value copy of [`RankCounters`].
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct CounterSnapshot {
    pub messages_sent: u64,
    pub bytes_sent: u64,
    pub messages_received: u64,
    pub collectives: u64,
    pub write_ops: u64,
    pub activations: u64,
    pub setup_activations: u64,
}

impl Add for CounterSnapshot {
    type Output = CounterSnapshot;

    fn add(self, o: Self) -> Self {
        CounterSnapshot {
            messages_sent: self.messages_sent + o.messages_sent,
            bytes_sent: self.bytes_sent + o.bytes_sent,
            messages_received: self.messages_received + o.messages_received,
            collectives: self.collectives + o.collectives,
            write_ops: self.write_ops + o.write_ops,
            activations: self.activations + o.activations,
            setup_activations: self.setup_activations + o.setup_activations,
        }
    }
}

impl Sub for CounterSnapshot {
    type Output = CounterSnapshot;

    fn sub(self, o: Self) -> Self {
        CounterSnapshot {
            messages_sent: self.messages_sent - o.messages_sent,
            bytes_sent: self.bytes_sent - o.bytes_sent,
            messages_received: self.messages_received - o.messages_received,
            collectives: self.collectives - o.collectives,
            write_ops: self.write_ops - o.write_ops,
            activations: self.activations - o.activations,
            setup_activations: self.setup_activations - o.setup_activations,
        }
    }
}

impl std::iter::Sum for CounterSnapshot {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(CounterSnapshot::default(), Add::add)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CollectiveKind {
    Sum,
    Barrier,
}

struct CollectiveSlot {
    kind: CollectiveKind,
    contributions: Vec<Option<Vec<f64>>>,
    result: Option<std::result::Result<Vec<f64>, String>>,
    taken: usize,
}

struct World {
    nranks: usize,
    options: RuntimeOptions,
    mail: Mutex<HashMap<(usize, usize, Tag), Vec<f64>>>,
    mail_cv: Condvar,
    collectives: Mutex<HashMap<u64, CollectiveSlot>>,
    collectives_cv: Condvar,
    aborted: AtomicBool,
    jitter_calls: AtomicU64,
}

impl World {
    fn abort(&self) {
        self.aborted.store(true, Ordering::SeqCst);
        // Take each lock so no waiter can miss the flag between its check and its wait.
        drop(self.mail.lock());
        self.mail_cv.notify_all();
        drop(self.collectives.lock());
        self.collectives_cv.notify_all();
    }

    fn jitter(&self) {
        let Some(seed) = self.options.jitter_seed else {
            return;
        };
        let call = self.jitter_calls.fetch_add(1, Ordering::Relaxed);
        let mut rng = SmallRng::seed_from_u64(seed ^ call.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        match rng.gen_range(0..8) {
            0 => std::thread::sleep(Duration::from_micros(rng.gen_range(1..40))),
            1..=4 => {
                for _ in 0..rng.gen_range(1..6) {
                    std::thread::yield_now();
                }
            }
            _ => {}
        }
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    // A poisoned lock only means another rank panicked; the data is still consistent.
    m.lock().unwrap_or_else(|p| p.into_inner())
}

/// A posted but not yet completed operation.
#[derive(Debug)]
#[must_use = "pending operations must be waited on"]
pub enum Pending {
    /// Sends are buffered at post time and are already complete.
    Send,
    Recv {
        src: usize,
        tag: Tag,
    },
}

/// A rank's view of the world, shared by all threads of that rank.
pub struct RankContext<'w> {
    rank: usize,
    world: &'w World,
    pub counters: RankCounters,
    collective_seq: AtomicU64,
    posted_recvs: Mutex<HashSet<(usize, Tag)>>,
}

impl<'w> RankContext<'w> {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn nranks(&self) -> usize {
        self.world.nranks
    }

    /// Tears down the whole run; every blocked operation on every rank returns [`Error::Aborted`].
    pub fn abort(&self) {
        self.world.abort();
    }

    fn check_peer(&self, peer: usize, what: &str) -> Result<()> {
        if peer >= self.world.nranks {
            return Err(Error::Protocol(format!("{what} peer {peer} out of range ({} ranks)", self.world.nranks)));
        }
        if peer == self.rank {
            return Err(Error::Protocol(format!("rank {} cannot {what} itself", self.rank)));
        }
        Ok(())
    }

    pub fn post_send(&self, dst: usize, tag: Tag, payload: Vec<f64>) -> Result<Pending> {
        self.check_peer(dst, "send to")?;
        if payload.is_empty() {
            return Err(Error::Protocol("empty payload".into()));
        }
        self.world.jitter();
        let bytes = 8 * payload.len() as u64;
        {
            let mut mail = lock(&self.world.mail);
            let key = (self.rank, dst, tag);
            if mail.contains_key(&key) {
                return Err(Error::Protocol(format!(
                    "duplicate in-flight message src={} dst={dst} tag={tag}",
                    self.rank
                )));
            }
            mail.insert(key, payload);
        }
        self.world.mail_cv.notify_all();
        self.counters.messages_sent.fetch_add(1, Ordering::SeqCst);
        self.counters.bytes_sent.fetch_add(bytes, Ordering::SeqCst);
        Ok(Pending::Send)
    }

    pub fn post_recv(&self, src: usize, tag: Tag) -> Result<Pending> {
        self.check_peer(src, "receive from")?;
        self.world.jitter();
        if !lock(&self.posted_recvs).insert((src, tag)) {
            return Err(Error::Protocol(format!("duplicate posted receive src={src} dst={} tag={tag}", self.rank)));
        }
        Ok(Pending::Recv { src, tag })
    }

    /// Completes one operation. Receives yield their payload.
    pub fn wait(&self, pending: Pending) -> Result<Option<Vec<f64>>> {
        let Pending::Recv { src, tag } = pending else {
            return Ok(None);
        };
        self.world.jitter();
        let key = (src, self.rank, tag);
        let deadline = Instant::now() + self.world.options.timeout;
        let mut mail = lock(&self.world.mail);
        loop {
            if let Some(payload) = mail.remove(&key) {
                drop(mail);
                lock(&self.posted_recvs).remove(&(src, tag));
                self.counters.messages_received.fetch_add(1, Ordering::SeqCst);
                return Ok(Some(payload));
            }
            if self.world.aborted.load(Ordering::SeqCst) {
                return Err(Error::Aborted);
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(Error::Protocol(format!("timed out receiving src={src} dst={} tag={tag}", self.rank)));
            }
            mail = self.world.mail_cv.wait_timeout(mail, deadline - now).unwrap_or_else(|p| p.into_inner()).0;
        }
    }

    pub fn wait_all(&self, pending: Vec<Pending>) -> Result<Vec<Option<Vec<f64>>>> {
        pending.into_iter().map(|p| self.wait(p)).collect()
    }

    /// Elementwise global sum, folded in ascending rank order.
    pub fn allreduce_sum(&self, buffer: &mut [f64]) -> Result<()> {
        let out = self.collective(CollectiveKind::Sum, buffer.to_vec())?;
        buffer.copy_from_slice(&out);
        self.counters.collectives.fetch_add(1, Ordering::SeqCst);
        Ok(())
    }

    /// Blocks until every rank has arrived. Not counted as a collective call.
    pub fn barrier(&self) -> Result<()> {
        self.collective(CollectiveKind::Barrier, Vec::new()).map(|_| ())
    }

    fn collective(&self, kind: CollectiveKind, contribution: Vec<f64>) -> Result<Vec<f64>> {
        let nranks = self.world.nranks;
        let seq = self.collective_seq.fetch_add(1, Ordering::SeqCst);
        let deadline = Instant::now() + self.world.options.timeout;
        let mut slots = lock(&self.world.collectives);
        let slot = slots.entry(seq).or_insert_with(|| CollectiveSlot {
            kind,
            contributions: vec![None; nranks],
            result: None,
            taken: 0,
        });
        if slot.kind != kind {
            slot.result =
                Some(Err(format!("collective #{seq}: rank {} called {kind:?}, others {:?}", self.rank, slot.kind)));
        }
        slot.contributions[self.rank] = Some(contribution);
        if slot.result.is_none() && slot.contributions.iter().all(Option::is_some) {
            slot.result = Some(fold_in_rank_order(&slot.contributions));
        }
        self.world.collectives_cv.notify_all();

        loop {
            let slot = slots.get_mut(&seq).expect("slot lives until every rank took it");
            if slot.result.is_some() && slot.contributions.iter().all(Option::is_some) {
                let result = slot.result.clone().expect("checked");
                slot.taken += 1;
                if slot.taken == nranks {
                    slots.remove(&seq);
                }
                return result.map_err(Error::Collective);
            }
            if self.world.aborted.load(Ordering::SeqCst) {
                return Err(Error::Aborted);
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(Error::Collective(format!("rank {} timed out in collective #{seq}", self.rank)));
            }
            slots = self.world.collectives_cv.wait_timeout(slots, deadline - now).unwrap_or_else(|p| p.into_inner()).0;
        }
    }
}

fn fold_in_rank_order(contributions: &[Option<Vec<f64>>]) -> std::result::Result<Vec<f64>, String> {
    let first = contributions[0].as_ref().expect("complete");
    let mut acc = first.clone();
    for (rank, c) in contributions.iter().enumerate().skip(1) {
        let c = c.as_ref().expect("complete");
        if c.len() != acc.len() {
            return Err(format!("length mismatch: rank 0 has {}, rank {rank} has {}", acc.len(), c.len()));
        }
        for (a, v) in acc.iter_mut().zip(c) {
            *a += v;
        }
    }
    Ok(acc)
}

/// Results of a completed run.
#[derive(Debug)]
pub struct RunOutput<T> {
    pub results: Vec<T>,
    pub counters: Vec<CounterSnapshot>,
}

impl<T> RunOutput<T> {
    pub fn total(&self) -> CounterSnapshot {
        self.counters.iter().copied().sum()
    }
}

/// Runs `program` once per rank, concurrently, and waits for all of them.
///
/// If any rank fails the run is aborted and the error of the lowest failing
/// rank (ignoring ranks that merely observed the abort) is returned.
pub fn spawn_ranks<T, F>(nranks: usize, options: RuntimeOptions, program: F) -> Result<RunOutput<T>>
where
    T: Send,
    F: Fn(&RankContext<'_>) -> Result<T> + Sync,
{
    if nranks == 0 {
        return Err(Error::Usage("nranks must be at least 1".into()));
    }
    let world = World {
        nranks,
        options,
        mail: Mutex::new(HashMap::new()),
        mail_cv: Condvar::new(),
        collectives: Mutex::new(HashMap::new()),
        collectives_cv: Condvar::new(),
        aborted: AtomicBool::new(false),
        jitter_calls: AtomicU64::new(0),
    };

    let outcomes: Vec<(Result<T>, CounterSnapshot)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..nranks)
            .map(|rank| {
                let world = &world;
                let program = &program;
                std::thread::Builder::new()
                    .name(format!("rank-{rank}"))
                    .spawn_scoped(scope, move || {
                        let ctx = RankContext {
                            rank,
                            world,
                            counters: RankCounters::default(),
                            collective_seq: AtomicU64::new(0),
                            posted_recvs: Mutex::new(HashSet::new()),
                        };
                        let result = catch_unwind(AssertUnwindSafe(|| program(&ctx))).unwrap_or_else(|panic| {
                            let msg = panic
                                .downcast_ref::<String>()
                                .cloned()
                                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                                .unwrap_or_else(|| "unknown panic".into());
                            Err(Error::Protocol(format!("rank panicked: {msg}")))
                        });
                        if result.is_err() {
                            world.abort();
                        }
                        (result, ctx.counters.snapshot())
                    })
                    .expect("spawn rank thread")
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("rank thread panics are caught")).collect()
    });

    let mut results = Vec::with_capacity(nranks);
    let mut counters = Vec::with_capacity(nranks);
    let mut first_abort = None;
    let mut first_failure = None;
    for (rank, (result, snapshot)) in outcomes.into_iter().enumerate() {
        counters.push(snapshot);
        match result {
            Ok(v) => results.push(v),
            Err(Error::Aborted) => {
                first_abort.get_or_insert(rank);
            }
            Err(e) => {
                if first_failure.is_none() {
                    first_failure = Some(Error::Rank { rank, source: Box::new(e) });
                }
            }
        }
    }
    if let Some(e) = first_failure {
        return Err(e);
    }
    if let Some(rank) = first_abort {
        return Err(Error::Rank { rank, source: Box::new(Error::Aborted) });
    }

    let undelivered = lock(&world.mail).len();
    if undelivered > 0 {
        return Err(Error::Protocol(format!("{undelivered} messages were never received")));
    }
    Ok(RunOutput { results, counters })
}
