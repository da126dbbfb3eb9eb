//! Halo (cut) exchange.
//!
//! Every cut has two directions. Direction 0 carries side b's interior into
//! side a's halo, direction 1 carries side a's interior into side b's halo.
//! Each element of a cut carries `datasize = npde * (2 * nharms + 1)` values,
//! plane-major (`n` outer, `p` inner).
//!
//! Cuts whose two blocks live on the same rank are serviced by direct copies.
//! Remote cuts use one of two message strategies:
//!
//! * [`ExchangeMode::PerElement`]: every element goes out as two messages,
//!   the first and second half of its payload.
//! * [`ExchangeMode::AggregatedCut`]: the whole direction is packed into one
//!   buffer using the displacement table and sent as a single message.
//!
//! Tags follow
//! `tag = ((cut * 2 + direction) * slots + slot) * PHASES + phase`
//! with `slots = 2 * max_cut_len`, `slot = 2 * element + part` for per-element
//! messages and `slot = 0` for aggregated ones, and `phase` the exchange
//! sequence number modulo [`PHASES`]. A rank cannot start exchange `k + 2`
//! before its peer has finished exchange `k + 1`, so two phases keep every
//! in-flight tag unique.

use std::str::FromStr;

use crate::error::Result;
use crate::hbcore::{FieldView, HarmonicField};
use crate::hybrid::{partition_work, SharedSlice, Team, TeamSync};
use crate::mesh::{CutRole, Partition, Topology};
use crate::runtime::{Pending, RankContext, Tag};

pub const PHASES: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExchangeMode {
    PerElement,
    AggregatedCut,
}

impl FromStr for ExchangeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-element" => Ok(ExchangeMode::PerElement),
            "aggregated" => Ok(ExchangeMode::AggregatedCut),
            _ => Err(format!("unknown exchange mode '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThreadMode {
    /// Thread 0 issues every message.
    Serial,
    /// Each thread issues the messages of its share of the elements.
    TaggedThreads,
}

impl FromStr for ThreadMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "serial" => Ok(ThreadMode::Serial),
            "tagged" => Ok(ThreadMode::TaggedThreads),
            _ => Err(format!("unknown exchange thread mode '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExchangeStrategy {
    pub mode: ExchangeMode,
    pub thread_mode: ThreadMode,
}

impl Default for ExchangeStrategy {
    fn default() -> Self {
        ExchangeStrategy { mode: ExchangeMode::AggregatedCut, thread_mode: ThreadMode::Serial }
    }
}

/// One direction of one cut: interior cells of the source block are copied
/// to halo cells of the destination block, element by element.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionPlan {
    pub cut: usize,
    pub direction: usize,
    pub src_block: usize,
    pub dst_block: usize,
    pub src_rank: usize,
    pub dst_rank: usize,
    pub src_cells: Vec<(usize, usize)>,
    pub dst_cells: Vec<(usize, usize)>,
}

impl DirectionPlan {
    pub fn len(&self) -> usize {
        self.src_cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src_cells.is_empty()
    }

    pub fn is_remote(&self) -> bool {
        self.src_rank != self.dst_rank
    }
}

/// Global exchange plan; identical on every rank.
#[derive(Debug, Clone, PartialEq)]
pub struct CutPlan {
    pub npde: usize,
    pub nplanes: usize,
    /// Values per element, `npde * (2 * nharms + 1)`.
    pub datasize: usize,
    slots: u64,
    /// Indexed `2 * cut + direction`.
    pub directions: Vec<DirectionPlan>,
}

impl CutPlan {
    pub fn new(topo: &Topology, partition: &Partition, nharms: usize, npde: usize) -> Self {
        let nplanes = 2 * nharms + 1;
        let mut directions = Vec::with_capacity(2 * topo.cuts.len());
        for cut in &topo.cuts {
            let (a, b) = (topo.block(cut.side_a.block), topo.block(cut.side_b.block));
            let mut a_interior = Vec::with_capacity(cut.len());
            let mut a_halo = Vec::with_capacity(cut.len());
            let mut b_interior = Vec::with_capacity(cut.len());
            let mut b_halo = Vec::with_capacity(cut.len());
            for e in 0..cut.len() {
                let (pa, pb) = cut.element_positions(e);
                a_interior.push(cut.side_a.face.interior_cell(pa, a.ni, a.nj));
                a_halo.push(cut.side_a.face.halo_cell(pa, a.ni, a.nj));
                b_interior.push(cut.side_b.face.interior_cell(pb, b.ni, b.nj));
                b_halo.push(cut.side_b.face.halo_cell(pb, b.ni, b.nj));
            }
            let (ra, rb) = (partition.rank_of(a.id), partition.rank_of(b.id));
            directions.push(DirectionPlan {
                cut: cut.id,
                direction: 0,
                src_block: b.id,
                dst_block: a.id,
                src_rank: rb,
                dst_rank: ra,
                src_cells: b_interior,
                dst_cells: a_halo,
            });
            directions.push(DirectionPlan {
                cut: cut.id,
                direction: 1,
                src_block: a.id,
                dst_block: b.id,
                src_rank: ra,
                dst_rank: rb,
                src_cells: a_interior,
                dst_cells: b_halo,
            });
        }
        CutPlan { npde, nplanes, datasize: npde * nplanes, slots: 2 * topo.max_cut_len().max(1) as u64, directions }
    }

    /// Offset of element `e` in an aggregated buffer.
    pub fn displacement(&self, e: usize) -> usize {
        e * self.datasize
    }

    pub fn buffer_len(&self, d: &DirectionPlan) -> usize {
        d.len() * self.datasize
    }

    pub fn is_local(&self, cut: usize) -> bool {
        !self.directions[2 * cut].is_remote()
    }

    /// Role of `rank` in the canonical direction (side b to side a) of `cut`.
    pub fn role(&self, cut: usize, rank: usize) -> CutRole {
        let d = &self.directions[2 * cut];
        match (d.dst_rank == rank, d.src_rank == rank) {
            (true, true) => CutRole::BothLocal,
            (true, false) => CutRole::RecvSide,
            (false, true) => CutRole::SendSide,
            (false, false) => CutRole::Uninvolved,
        }
    }

    pub fn tag(&self, cut: usize, direction: usize, slot: u64, phase: u64) -> Tag {
        debug_assert!(slot < self.slots && phase < PHASES);
        ((cut as u64 * 2 + direction as u64) * self.slots + slot) * PHASES + phase
    }

    pub fn element_tag(&self, d: &DirectionPlan, e: usize, part: usize, phase: u64) -> Tag {
        self.tag(d.cut, d.direction, 2 * e as u64 + part as u64, phase)
    }

    pub fn aggregated_tag(&self, d: &DirectionPlan, phase: u64) -> Tag {
        self.tag(d.cut, d.direction, 0, phase)
    }

    /// Split point of an element payload into its two per-element messages.
    pub fn first_part_len(&self) -> usize {
        self.datasize.div_ceil(2)
    }
}

/// Messages and payload bytes of one exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MessageCount {
    pub messages_per_direction: u64,
    pub bytes_per_direction: u64,
}

impl MessageCount {
    /// Both directions of every remote cut.
    pub fn total_messages(&self) -> u64 {
        2 * self.messages_per_direction
    }

    pub fn total_bytes(&self) -> u64 {
        2 * self.bytes_per_direction
    }
}

/// Closed-form message count of one exchange under `mode`.
pub fn predicted_message_count(plan: &CutPlan, mode: ExchangeMode) -> MessageCount {
    let mut count = MessageCount::default();
    for d in plan.directions.iter().filter(|d| d.direction == 0 && d.is_remote()) {
        count.messages_per_direction += match mode {
            ExchangeMode::PerElement => 2 * d.len() as u64,
            ExchangeMode::AggregatedCut => 1,
        };
        count.bytes_per_direction += (d.len() * plan.datasize * 8) as u64;
    }
    count
}

/// Messages and bytes one rank sends per exchange.
pub fn rank_send_count(plan: &CutPlan, mode: ExchangeMode, rank: usize) -> (u64, u64) {
    plan.directions.iter().filter(|d| d.is_remote() && d.src_rank == rank).fold((0, 0), |(m, b), d| {
        let msgs = match mode {
            ExchangeMode::PerElement => 2 * d.len() as u64,
            ExchangeMode::AggregatedCut => 1,
        };
        (m + msgs, b + (d.len() * plan.datasize * 8) as u64)
    })
}

/// One rank's side of the exchange: the directions it touches and the
/// aggregated send and receive arrays.
#[derive(Debug)]
pub struct Exchanger {
    rank: usize,
    plan: CutPlan,
    local: Vec<usize>,
    sends: Vec<usize>,
    recvs: Vec<usize>,
    /// Flattened `(direction index, element)` lists that threads split.
    local_elems: Vec<(usize, usize)>,
    send_elems: Vec<(usize, usize)>,
    recv_elems: Vec<(usize, usize)>,
    /// Buffer offset per direction index (only meaningful for sends / recvs).
    offsets: Vec<usize>,
    send_buf: Vec<f64>,
    recv_buf: Vec<f64>,
    exchanges: u64,
}

impl Exchanger {
    pub fn new(plan: &CutPlan, rank: usize) -> Self {
        let mut local = Vec::new();
        let mut sends = Vec::new();
        let mut recvs = Vec::new();
        for (k, d) in plan.directions.iter().enumerate() {
            if !d.is_remote() {
                if d.src_rank == rank {
                    local.push(k);
                }
            } else if d.src_rank == rank {
                sends.push(k);
            } else if d.dst_rank == rank {
                recvs.push(k);
            }
        }
        let flatten = |dirs: &[usize]| -> Vec<(usize, usize)> {
            dirs.iter().flat_map(|&k| (0..plan.directions[k].len()).map(move |e| (k, e))).collect()
        };
        let mut offsets = vec![0; plan.directions.len()];
        let mut layout = |dirs: &[usize]| {
            let mut total = 0;
            for &k in dirs {
                offsets[k] = total;
                total += plan.buffer_len(&plan.directions[k]);
            }
            total
        };
        let send_len = layout(&sends);
        let recv_len = layout(&recvs);
        Exchanger {
            rank,
            local_elems: flatten(&local),
            send_elems: flatten(&sends),
            recv_elems: flatten(&recvs),
            local,
            sends,
            recvs,
            offsets,
            send_buf: vec![0.0; send_len],
            recv_buf: vec![0.0; recv_len],
            plan: plan.clone(),
            exchanges: 0,
        }
    }

    pub fn plan(&self) -> &CutPlan {
        &self.plan
    }

    pub fn local_directions(&self) -> usize {
        self.local.len()
    }

    /// Reserves `count` consecutive exchange sequence numbers.
    pub fn reserve(&mut self, count: u64) -> u64 {
        let first = self.exchanges;
        self.exchanges += count;
        first
    }

    /// Shared access to the exchange buffers for one team activation.
    pub(crate) fn round(&mut self) -> ExchangeRound<'_> {
        ExchangeRound {
            rank: self.rank,
            plan: &self.plan,
            sends: &self.sends,
            recvs: &self.recvs,
            local_elems: &self.local_elems,
            send_elems: &self.send_elems,
            recv_elems: &self.recv_elems,
            offsets: &self.offsets,
            send_buf: SharedSlice::new(&mut self.send_buf),
            recv_buf: SharedSlice::new(&mut self.recv_buf),
        }
    }

    /// Fills every halo cell covered by a cut with its peer's interior value,
    /// as one activation of `team`.
    pub fn exchange_halos(
        &mut self,
        field: &mut HarmonicField,
        strategy: ExchangeStrategy,
        ctx: &RankContext<'_>,
        team: &Team,
    ) -> Result<()> {
        let seq = self.reserve(1);
        let view = FieldView::new(field);
        let round = self.round();
        let results = team.activate(|tid, sync| round.exchange(tid, sync, &view, strategy, ctx, seq));
        results.into_iter().collect()
    }
}

pub(crate) struct ExchangeRound<'a> {
    rank: usize,
    plan: &'a CutPlan,
    sends: &'a [usize],
    recvs: &'a [usize],
    local_elems: &'a [(usize, usize)],
    send_elems: &'a [(usize, usize)],
    recv_elems: &'a [(usize, usize)],
    offsets: &'a [usize],
    send_buf: SharedSlice<'a>,
    recv_buf: SharedSlice<'a>,
}

impl ExchangeRound<'_> {
    /// The halo-exchange loop nest. Every thread of the team calls this with
    /// its id; it reaches the same two barriers on every thread.
    pub(crate) fn exchange(
        &self,
        tid: usize,
        sync: &TeamSync,
        view: &FieldView<'_>,
        strategy: ExchangeStrategy,
        ctx: &RankContext<'_>,
        seq: u64,
    ) -> Result<()> {
        debug_assert_eq!(ctx.rank(), self.rank);
        let threads = sync.threads();
        let ds = self.plan.datasize;
        let nslab = self.plan.npde * self.plan.nplanes;

        // Local copies and packing.
        if !sync.failed() {
            for &(k, e) in &self.local_elems[partition_work(self.local_elems.len(), threads)[tid].clone()] {
                let d = &self.plan.directions[k];
                let (src, dst) = (view.by_block(d.src_block), view.by_block(d.dst_block));
                let ((si, sj), (hi, hj)) = (d.src_cells[e], d.dst_cells[e]);
                for s in 0..nslab {
                    // SAFETY: reads interior cells, writes halo cells; each halo cell belongs to one element.
                    unsafe { dst.data.set(dst.idx(hi, hj, s), src.data.get(src.idx(si, sj, s))) };
                }
            }
            for &(k, e) in &self.send_elems[partition_work(self.send_elems.len(), threads)[tid].clone()] {
                let d = &self.plan.directions[k];
                let src = view.by_block(d.src_block);
                let (si, sj) = d.src_cells[e];
                let base = self.offsets[k] + self.plan.displacement(e);
                // SAFETY: each thread packs a disjoint element range of the send array.
                let out = unsafe { self.send_buf.slice_mut(base..base + ds) };
                for (s, v) in out.iter_mut().enumerate() {
                    *v = unsafe { src.data.get(src.idx(si, sj, s)) };
                }
            }
        }
        sync.barrier();

        let mut result = Ok(());
        if !sync.failed() {
            result = self.communicate(tid, threads, strategy, ctx, seq % PHASES);
            if result.is_err() {
                sync.fail();
                ctx.abort();
            }
        }
        sync.barrier();

        // Unpacking.
        if !sync.failed() {
            for &(k, e) in &self.recv_elems[partition_work(self.recv_elems.len(), threads)[tid].clone()] {
                let d = &self.plan.directions[k];
                let dst = view.by_block(d.dst_block);
                let (hi, hj) = d.dst_cells[e];
                let base = self.offsets[k] + self.plan.displacement(e);
                // SAFETY: the receive array is read-only in this phase.
                let src = unsafe { self.recv_buf.slice(base..base + ds) };
                for (s, v) in src.iter().enumerate() {
                    unsafe { dst.data.set(dst.idx(hi, hj, s), *v) };
                }
            }
        }
        result
    }

    fn communicate(
        &self,
        tid: usize,
        threads: usize,
        strategy: ExchangeStrategy,
        ctx: &RankContext<'_>,
        phase: u64,
    ) -> Result<()> {
        let (share, parts) = match strategy.thread_mode {
            ThreadMode::Serial if tid == 0 => (0, 1),
            ThreadMode::Serial => return Ok(()),
            ThreadMode::TaggedThreads => (tid, threads),
        };
        match strategy.mode {
            ExchangeMode::PerElement => {
                let half = self.plan.first_part_len();
                let ds = self.plan.datasize;
                let mut pending = Vec::new();
                for &(k, e) in &self.send_elems[partition_work(self.send_elems.len(), parts)[share].clone()] {
                    let d = &self.plan.directions[k];
                    let base = self.offsets[k] + self.plan.displacement(e);
                    for (part, range) in [(0, base..base + half), (1, base + half..base + ds)] {
                        // SAFETY: the send array is read-only in this phase.
                        let payload = unsafe { self.send_buf.slice(range) }.to_vec();
                        pending.push(ctx.post_send(d.dst_rank, self.plan.element_tag(d, e, part, phase), payload)?);
                    }
                }
                let mut targets = Vec::new();
                for &(k, e) in &self.recv_elems[partition_work(self.recv_elems.len(), parts)[share].clone()] {
                    let d = &self.plan.directions[k];
                    let base = self.offsets[k] + self.plan.displacement(e);
                    for (part, range) in [(0, base..base + half), (1, base + half..base + ds)] {
                        pending.push(ctx.post_recv(d.src_rank, self.plan.element_tag(d, e, part, phase))?);
                        targets.push(Some(range));
                    }
                }
                self.complete(ctx, pending, targets)
            }
            ExchangeMode::AggregatedCut => {
                let mut pending = Vec::new();
                for &k in &self.sends[partition_work(self.sends.len(), parts)[share].clone()] {
                    let d = &self.plan.directions[k];
                    let base = self.offsets[k];
                    // SAFETY: the send array is read-only in this phase.
                    let payload = unsafe { self.send_buf.slice(base..base + self.plan.buffer_len(d)) }.to_vec();
                    pending.push(ctx.post_send(d.dst_rank, self.plan.aggregated_tag(d, phase), payload)?);
                }
                let mut targets = Vec::new();
                for &k in &self.recvs[partition_work(self.recvs.len(), parts)[share].clone()] {
                    let d = &self.plan.directions[k];
                    let base = self.offsets[k];
                    pending.push(ctx.post_recv(d.src_rank, self.plan.aggregated_tag(d, phase))?);
                    targets.push(Some(base..base + self.plan.buffer_len(d)));
                }
                self.complete(ctx, pending, targets)
            }
        }
    }

    /// Waits for sends (no target) and receives, copying each received
    /// payload to its place in the receive array.
    fn complete(
        &self,
        ctx: &RankContext<'_>,
        pending: Vec<Pending>,
        targets: Vec<Option<std::ops::Range<usize>>>,
    ) -> Result<()> {
        let mut targets = targets.into_iter();
        for p in pending {
            if let Some(payload) = ctx.wait(p)? {
                let range = targets.next().flatten().expect("one target per receive");
                if payload.len() != range.len() {
                    return Err(crate::error::Error::Protocol(format!(
                        "expected {} values, received {}",
                        range.len(),
                        payload.len()
                    )));
                }
                // SAFETY: receive ranges of different threads are disjoint.
                unsafe { self.recv_buf.slice_mut(range) }.copy_from_slice(&payload);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hbcore::BlockField;
    use crate::mesh::{partition_blocks, BlockSpec, CutSide, CutSpec, Face, NamedCase, Orientation};
    use crate::runtime::{spawn_ranks, CounterSnapshot, RuntimeOptions};
    use proptest::prelude::*;

    fn two_blocks(len: usize, orientation: Orientation) -> Topology {
        let block = |id| BlockSpec { id, ni: 2, nj: len, origin: (id as f64, 0.0), h: 0.1, body_faces: vec![] };
        let cut = CutSpec {
            id: 0,
            side_a: CutSide { block: 0, face: Face::East, first: 1, last: len },
            side_b: CutSide { block: 1, face: Face::West, first: 1, last: len },
            orientation,
        };
        Topology::new(vec![block(0), block(1)], vec![cut], 0).unwrap()
    }

    fn value(b: usize, i: usize, j: usize, k: usize) -> f64 {
        (((b * 7919 + i * 104_729 + j * 31) * 13 + k) % 1_000_003) as f64 * 0.001 + 0.5
    }

    /// Fills interiors with distinct values, exchanges once per rank and
    /// returns every block plus the counters.
    fn exchange_once(
        topo: &Topology,
        nranks: usize,
        nharms: usize,
        strategy: ExchangeStrategy,
        threads: usize,
        jitter: Option<u64>,
    ) -> (Vec<BlockField>, CounterSnapshot, CutPlan) {
        let part = partition_blocks(topo, nranks).unwrap();
        let plan = CutPlan::new(topo, &part, nharms, 4);
        let options = RuntimeOptions { jitter_seed: jitter, ..RuntimeOptions::default() };
        let out = spawn_ranks(nranks, options, |ctx| {
            let specs: Vec<_> = part.blocks_of(ctx.rank()).into_iter().map(|b| topo.block(b)).collect();
            let mut field = HarmonicField::zeroed(&specs, 4, 2 * nharms + 1);
            for b in &mut field.blocks {
                for k in 0..4 * b.nplanes {
                    for j in 1..=b.nj {
                        for i in 1..=b.ni {
                            b.set(i, j, k % 4, k / 4, value(b.block, i, j, k));
                        }
                    }
                }
            }
            let mut ex = Exchanger::new(&plan, ctx.rank());
            ex.exchange_halos(&mut field, strategy, ctx, &Team::new(threads))?;
            Ok(field.blocks)
        })
        .unwrap();
        let total = out.total();
        let mut blocks: Vec<BlockField> = out.results.into_iter().flatten().collect();
        blocks.sort_by_key(|b| b.block);
        (blocks, total, plan)
    }

    fn check_halos(blocks: &[BlockField], plan: &CutPlan) {
        for d in &plan.directions {
            for (&(si, sj), &(hi, hj)) in d.src_cells.iter().zip(&d.dst_cells) {
                for k in 0..4 * plan.nplanes {
                    let (p, n) = (k % 4, k / 4);
                    let want = blocks[d.src_block].get(si, sj, p, n);
                    assert_eq!(blocks[d.dst_block].get(hi, hj, p, n).to_bits(), want.to_bits());
                }
            }
        }
    }

    const ALL: [ExchangeStrategy; 4] = [
        ExchangeStrategy { mode: ExchangeMode::PerElement, thread_mode: ThreadMode::Serial },
        ExchangeStrategy { mode: ExchangeMode::PerElement, thread_mode: ThreadMode::TaggedThreads },
        ExchangeStrategy { mode: ExchangeMode::AggregatedCut, thread_mode: ThreadMode::Serial },
        ExchangeStrategy { mode: ExchangeMode::AggregatedCut, thread_mode: ThreadMode::TaggedThreads },
    ];

    #[test]
    fn datasize_and_buffer_length() {
        let topo = two_blocks(4, Orientation::Forward);
        let part = partition_blocks(&topo, 2).unwrap();
        let plan = CutPlan::new(&topo, &part, 1, 4);
        assert_eq!(plan.datasize, 12);
        assert_eq!(plan.buffer_len(&plan.directions[0]), 48);
        assert_eq!(plan.displacement(3), 36);
        assert_eq!(CutPlan::new(&topo, &part, 0, 4).datasize, 4);
    }

    #[test]
    fn reversed_cut_pairs_ends() {
        let topo = two_blocks(5, Orientation::Reversed);
        let part = partition_blocks(&topo, 1).unwrap();
        let plan = CutPlan::new(&topo, &part, 0, 4);
        // direction 1 copies block 0's east column into block 1's west halo.
        let d = &plan.directions[1];
        assert_eq!(d.src_cells[0], (2, 1));
        assert_eq!(d.dst_cells[0], (0, 5));
        assert_eq!(d.src_cells[4], (2, 5));
        assert_eq!(d.dst_cells[4], (0, 1));
        let (blocks, _, plan) = exchange_once(&topo, 2, 1, ExchangeStrategy::default(), 1, None);
        check_halos(&blocks, &plan);
    }

    #[test]
    fn local_cut_sends_nothing() {
        let topo = NamedCase::TcTiny.topology().unwrap();
        for strategy in ALL {
            let (blocks, counters, plan) = exchange_once(&topo, 1, 1, strategy, 2, None);
            assert!(plan.is_local(0));
            assert_eq!(plan.role(0, 0), CutRole::BothLocal);
            assert_eq!(counters.messages_sent, 0);
            check_halos(&blocks, &plan);
        }
    }

    #[test]
    fn predicted_counts_for_one_remote_cut() {
        let topo = NamedCase::TcTiny.topology().unwrap();
        let part = partition_blocks(&topo, 2).unwrap();
        let plan = CutPlan::new(&topo, &part, 1, 4);
        let per = predicted_message_count(&plan, ExchangeMode::PerElement);
        assert_eq!((per.messages_per_direction, per.bytes_per_direction), (8, 384));
        let agg = predicted_message_count(&plan, ExchangeMode::AggregatedCut);
        assert_eq!((agg.messages_per_direction, agg.bytes_per_direction), (1, 384));
        let local = CutPlan::new(&topo, &partition_blocks(&topo, 1).unwrap(), 1, 4);
        assert_eq!(predicted_message_count(&local, ExchangeMode::PerElement), MessageCount::default());
        assert_eq!(plan.role(0, 0), CutRole::RecvSide);
        assert_eq!(plan.role(0, 1), CutRole::SendSide);
    }

    #[test]
    fn measured_counts_match_prediction() {
        let topo = NamedCase::Tc2Mini.topology().unwrap();
        for nranks in [2, 5, 16] {
            for strategy in ALL {
                let (blocks, counters, plan) = exchange_once(&topo, nranks, 1, strategy, 3, None);
                let want = predicted_message_count(&plan, strategy.mode);
                assert_eq!(counters.messages_sent, want.total_messages());
                assert_eq!(counters.bytes_sent, want.total_bytes());
                assert_eq!(counters.messages_received, counters.messages_sent);
                let per_rank: u64 = (0..nranks).map(|r| rank_send_count(&plan, strategy.mode, r).0).sum();
                assert_eq!(per_rank, want.total_messages());
                check_halos(&blocks, &plan);
            }
        }
    }

    #[test]
    fn strategies_give_identical_fields_under_jitter() {
        let topo = NamedCase::Tc2Mini.topology().unwrap();
        let (golden, _, _) = exchange_once(&topo, 4, 2, ALL[0], 1, None);
        for (k, strategy) in ALL.into_iter().enumerate() {
            for threads in [1, 4] {
                let (blocks, _, _) =
                    exchange_once(&topo, 4, 2, strategy, threads, Some(k as u64 * 31 + threads as u64));
                assert_eq!(blocks, golden, "{strategy:?} x {threads}");
            }
        }
    }

    #[test]
    fn consecutive_exchanges_reuse_tags_safely() {
        let topo = NamedCase::TcTiny.topology().unwrap();
        let part = partition_blocks(&topo, 2).unwrap();
        let plan = CutPlan::new(&topo, &part, 1, 4);
        let strategy = ExchangeStrategy { mode: ExchangeMode::PerElement, thread_mode: ThreadMode::TaggedThreads };
        let options = RuntimeOptions { jitter_seed: Some(5), ..RuntimeOptions::default() };
        spawn_ranks(2, options, |ctx| {
            let specs: Vec<_> = part.blocks_of(ctx.rank()).into_iter().map(|b| topo.block(b)).collect();
            let mut field = HarmonicField::zeroed(&specs, 4, 3);
            let mut ex = Exchanger::new(&plan, ctx.rank());
            let team = Team::new(2);
            for _ in 0..25 {
                ex.exchange_halos(&mut field, strategy, ctx, &team)?;
            }
            Ok(())
        })
        .unwrap();
    }

    proptest! {
        #[test]
        fn tags_are_unique(a in (0usize..6, 0usize..2, 0u64..8, 0u64..2), b in (0usize..6, 0usize..2, 0u64..8, 0u64..2)) {
            let topo = two_blocks(4, Orientation::Forward);
            let plan = CutPlan::new(&topo, &partition_blocks(&topo, 1).unwrap(), 0, 4);
            prop_assume!(a != b);
            prop_assert_ne!(plan.tag(a.0, a.1, a.2, a.3), plan.tag(b.0, b.1, b.2, b.3));
        }
    }
}
