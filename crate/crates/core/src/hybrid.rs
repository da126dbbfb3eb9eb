//! Thread tier inside a rank.
//!
//! A [`Team`] of `T` threads executes *loop nests*. Each RK stage of the
//! solver consists of exactly three thread-parallel nests:
//!
//! 1. residual evaluation,
//! 2. the stage update,
//! 3. halo pack / exchange / unpack.
//!
//! In [`ActivationMode::PerLoop`] the team is started once per nest (12
//! activations per iteration); in [`ActivationMode::Hoisted`] it is started
//! once per iteration and the nests are separated by team barriers. Every
//! per-point update reads only the previous stage, so results do not depend
//! on the thread count, the work axis, or the activation mode.

use std::marker::PhantomData;
use std::ops::Range;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Barrier;

use crate::error::{Error, Result};
use crate::hbcore::HarmonicField;

/// Which index the team splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Harmonic planes `n`.
    Harmonics,
    /// Interior rows `j` of every block.
    GridPoints,
    /// The rank's list of blocks.
    Blocks,
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "harmonics" => Ok(Axis::Harmonics),
            "gridpoints" => Ok(Axis::GridPoints),
            "blocks" => Ok(Axis::Blocks),
            _ => Err(format!("unknown axis '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationMode {
    PerLoop,
    Hoisted,
}

impl FromStr for ActivationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-loop" => Ok(ActivationMode::PerLoop),
            "hoisted" => Ok(ActivationMode::Hoisted),
            _ => Err(format!("unknown activation mode '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TeamConfig {
    pub threads: usize,
    pub axis: Axis,
    pub activation: ActivationMode,
}

impl Default for TeamConfig {
    fn default() -> Self {
        TeamConfig { threads: 1, axis: Axis::Harmonics, activation: ActivationMode::Hoisted }
    }
}

/// Splits `0..extent` into `parts` contiguous ranges whose sizes differ by at
/// most one, larger ranges first. Ranges may be empty when `parts > extent`.
pub fn partition_work(extent: usize, parts: usize) -> Vec<Range<usize>> {
    assert!(parts >= 1, "at least one part");
    let base = extent / parts;
    let extra = extent % parts;
    let mut start = 0;
    (0..parts)
        .map(|t| {
            let len = base + usize::from(t < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Synchronisation shared by the threads of one activation.
pub struct TeamSync {
    barrier: Barrier,
    failed: AtomicBool,
    threads: usize,
}

impl TeamSync {
    pub fn threads(&self) -> usize {
        self.threads
    }

    pub fn barrier(&self) {
        self.barrier.wait();
    }

    /// Marks the activation as failed. Threads keep reaching every barrier;
    /// they skip work once they observe the flag.
    pub fn fail(&self) {
        self.failed.store(true, Ordering::SeqCst);
    }

    pub fn failed(&self) -> bool {
        self.failed.load(Ordering::SeqCst)
    }
}

/// One thread-parallel loop nest: called once per thread with the thread id.
///
/// A nest that uses internal barriers must reach all of them on every
/// thread, even after an error.
pub type Nest<'a> = dyn Fn(usize, &TeamSync) -> Result<()> + Sync + 'a;

/// A team of worker threads belonging to one rank.
#[derive(Debug)]
pub struct Team {
    threads: usize,
    activations: AtomicU64,
}

impl Team {
    pub fn new(threads: usize) -> Self {
        assert!(threads >= 1, "a team has at least one thread");
        Team { threads, activations: AtomicU64::new(0) }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// Total activations so far.
    pub fn activations(&self) -> u64 {
        self.activations.load(Ordering::SeqCst)
    }

    /// Starts the team once and runs `body` on every thread; thread 0 is the
    /// calling thread. Results come back in thread-id order.
    pub fn activate<R, F>(&self, body: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize, &TeamSync) -> R + Sync,
    {
        self.activations.fetch_add(1, Ordering::SeqCst);
        let sync =
            TeamSync { barrier: Barrier::new(self.threads), failed: AtomicBool::new(false), threads: self.threads };
        if self.threads == 1 {
            return vec![body(0, &sync)];
        }
        std::thread::scope(|s| {
            let body = &body;
            let sync = &sync;
            let others: Vec<_> = (1..self.threads).map(|tid| s.spawn(move || body(tid, sync))).collect();
            let mut out = Vec::with_capacity(self.threads);
            out.push(body(0, sync));
            out.extend(others.into_iter().map(|h| h.join().expect("team thread panicked")));
            out
        })
    }

    /// Runs a sequence of nests under the given activation mode.
    pub fn run_nests(&self, mode: ActivationMode, nests: &[&Nest<'_>]) -> Result<()> {
        match mode {
            ActivationMode::PerLoop => {
                for nest in nests {
                    self.run_hoisted(std::slice::from_ref(nest))?;
                }
                Ok(())
            }
            ActivationMode::Hoisted => self.run_hoisted(nests),
        }
    }

    fn run_hoisted(&self, nests: &[&Nest<'_>]) -> Result<()> {
        let errors = self.activate(|tid, sync| {
            let mut first = None;
            for nest in nests {
                if !sync.failed() {
                    if let Err(e) = nest(tid, sync) {
                        sync.fail();
                        first.get_or_insert(e);
                    }
                }
                sync.barrier();
            }
            first
        });
        match errors.into_iter().flatten().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// A rectangular piece of one block handled by one thread: interior rows
/// `j` (1-based) and planes `n`, all `i` and all pde variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkUnit {
    /// Index into the rank's block list.
    pub local: usize,
    pub j: Range<usize>,
    pub n: Range<usize>,
}

impl WorkUnit {
    fn is_empty(&self) -> bool {
        self.j.is_empty() || self.n.is_empty()
    }

    /// Storage rows covered, including the halo rows next to the first and last interior row.
    pub fn storage_rows(&self, nj: usize) -> Range<usize> {
        let start = if self.j.start == 1 { 0 } else { self.j.start };
        let end = if self.j.end == nj + 1 { nj + 2 } else { self.j.end };
        start..end
    }
}

/// Per-thread work units for the rank's blocks along `axis`.
pub fn compute_map(axis: Axis, threads: usize, field: &HarmonicField) -> Vec<Vec<WorkUnit>> {
    let nplanes = field.blocks.first().map_or(1, |b| b.nplanes);
    let mut map: Vec<Vec<WorkUnit>> = vec![Vec::new(); threads];
    match axis {
        Axis::Harmonics => {
            for (t, nr) in partition_work(nplanes, threads).into_iter().enumerate() {
                for (local, b) in field.blocks.iter().enumerate() {
                    map[t].push(WorkUnit { local, j: 1..b.nj + 1, n: nr.clone() });
                }
            }
        }
        Axis::GridPoints => {
            for (local, b) in field.blocks.iter().enumerate() {
                for (t, jr) in partition_work(b.nj, threads).into_iter().enumerate() {
                    map[t].push(WorkUnit { local, j: jr.start + 1..jr.end + 1, n: 0..nplanes });
                }
            }
        }
        Axis::Blocks => {
            for (t, br) in partition_work(field.blocks.len(), threads).into_iter().enumerate() {
                for local in br {
                    let b = &field.blocks[local];
                    map[t].push(WorkUnit { local, j: 1..b.nj + 1, n: 0..nplanes });
                }
            }
        }
    }
    for units in &mut map {
        units.retain(|u| !u.is_empty());
    }
    map
}

/// Which thread initialises and which thread computes each piece of the field.
#[derive(Debug, Clone, PartialEq)]
pub struct InitPlan {
    compute: Vec<Vec<WorkUnit>>,
    init: Vec<Vec<WorkUnit>>,
}

impl InitPlan {
    /// Initialisation follows the compute partition exactly.
    pub fn new(cfg: &TeamConfig, field: &HarmonicField) -> Self {
        let compute = compute_map(cfg.axis, cfg.threads, field);
        InitPlan { init: compute.clone(), compute }
    }

    /// Explicit maps, for testing plan validation.
    pub fn from_maps(compute: Vec<Vec<WorkUnit>>, init: Vec<Vec<WorkUnit>>) -> Self {
        InitPlan { compute, init }
    }

    pub fn compute(&self) -> &[Vec<WorkUnit>] {
        &self.compute
    }

    pub fn threads(&self) -> usize {
        self.compute.len()
    }

    /// Checks that init ownership equals compute ownership and that the
    /// compute map covers every interior point of `field` exactly once.
    pub fn validate(&self, field: &HarmonicField) -> Result<()> {
        if self.init != self.compute {
            return Err(Error::Plan("initialisation map differs from compute map".into()));
        }
        for (local, b) in field.blocks.iter().enumerate() {
            let mut hits = vec![0u8; b.nj * b.nplanes];
            for unit in self.compute.iter().flatten().filter(|u| u.local == local) {
                if unit.j.start < 1 || unit.j.end > b.nj + 1 || unit.n.end > b.nplanes {
                    return Err(Error::Plan(format!("work unit {unit:?} outside block {}", b.block)));
                }
                for n in unit.n.clone() {
                    for j in unit.j.clone() {
                        hits[n * b.nj + (j - 1)] += 1;
                    }
                }
            }
            if hits.iter().any(|&h| h != 1) {
                return Err(Error::Plan(format!("compute map does not partition block {}", b.block)));
            }
        }
        Ok(())
    }
}

/// Writes every value of `field` from the thread that will later compute
/// it: interior cells get `value(block, i, j, p, n)`, halo cells get zero.
pub fn first_touch_init<F>(field: &mut HarmonicField, plan: &InitPlan, team: &Team, value: F) -> Result<()>
where
    F: Fn(usize, usize, usize, usize, usize) -> f64 + Sync,
{
    plan.validate(field)?;
    if plan.threads() != team.threads() {
        return Err(Error::Plan(format!("plan is for {} threads, team has {}", plan.threads(), team.threads())));
    }
    let geometry: Vec<(usize, usize, usize, usize, usize)> =
        field.blocks.iter().map(|b| (b.block, b.ni, b.nj, b.npde, b.nplanes)).collect();
    let views: Vec<SharedSlice<'_>> = field.blocks.iter_mut().map(|b| SharedSlice::new(b.data_mut())).collect();
    team.activate(|tid, _| {
        for unit in &plan.compute[tid] {
            let (block, ni, nj, npde, _) = geometry[unit.local];
            let view = views[unit.local];
            for n in unit.n.clone() {
                for p in 0..npde {
                    for j in unit.storage_rows(nj) {
                        let row = ((n * npde + p) * (nj + 2) + j) * (ni + 2);
                        // SAFETY: the validated plan gives each (j, n) row to one thread.
                        let out = unsafe { view.slice_mut(row..row + ni + 2) };
                        for (i, v) in out.iter_mut().enumerate() {
                            let interior = (1..=ni).contains(&i) && (1..=nj).contains(&j);
                            *v = if interior { value(block, i, j, p, n) } else { 0.0 };
                        }
                    }
                }
            }
        }
    });
    Ok(())
}

/// A mutable slice shared across team threads that touch disjoint indices.
#[derive(Clone, Copy)]
pub(crate) struct SharedSlice<'a> {
    ptr: *mut f64,
    len: usize,
    _borrow: PhantomData<&'a mut [f64]>,
}

// SAFETY: access goes through unsafe methods whose callers guarantee that
// concurrent accesses never overlap with a write.
unsafe impl Send for SharedSlice<'_> {}
unsafe impl Sync for SharedSlice<'_> {}

impl<'a> SharedSlice<'a> {
    pub(crate) fn new(slice: &'a mut [f64]) -> Self {
        SharedSlice { ptr: slice.as_mut_ptr(), len: slice.len(), _borrow: PhantomData }
    }

    /// # Safety
    /// No other thread may write index `k` concurrently.
    #[inline]
    pub(crate) unsafe fn get(&self, k: usize) -> f64 {
        debug_assert!(k < self.len);
        *self.ptr.add(k)
    }

    /// # Safety
    /// No other thread may access index `k` concurrently.
    #[inline]
    pub(crate) unsafe fn set(&self, k: usize, v: f64) {
        debug_assert!(k < self.len);
        *self.ptr.add(k) = v;
    }

    /// # Safety
    /// No other thread may write any index in `r` while the slice is alive.
    #[inline]
    pub(crate) unsafe fn slice(&self, r: Range<usize>) -> &'a [f64] {
        assert!(r.start <= r.end && r.end <= self.len);
        std::slice::from_raw_parts(self.ptr.add(r.start), r.end - r.start)
    }

    /// # Safety
    /// No other thread may access any index in `r` while the slice is alive.
    #[inline]
    #[allow(clippy::mut_from_ref)]
    pub(crate) unsafe fn slice_mut(&self, r: Range<usize>) -> &'a mut [f64] {
        assert!(r.start <= r.end && r.end <= self.len);
        std::slice::from_raw_parts_mut(self.ptr.add(r.start), r.end - r.start)
    }
}
