use super::{CutSpec, Topology};
use crate::error::{Error, Result};

/// Assignment of every block to exactly one rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    rank_of_block: Vec<usize>,
    nranks: usize,
}

impl Partition {
    /// Builds a partition from an explicit map. Every rank id must be below `nranks`.
    pub fn from_map(rank_of_block: Vec<usize>, nranks: usize) -> Result<Self> {
        if nranks == 0 {
            return Err(Error::Usage("nranks must be at least 1".into()));
        }
        if let Some(bad) = rank_of_block.iter().find(|&&r| r >= nranks) {
            return Err(Error::Topology(format!("rank {bad} out of range for {nranks} ranks")));
        }
        Ok(Partition { rank_of_block, nranks })
    }

    pub fn nranks(&self) -> usize {
        self.nranks
    }

    pub fn rank_of(&self, block: usize) -> usize {
        self.rank_of_block[block]
    }

    pub fn rank_of_block(&self) -> &[usize] {
        &self.rank_of_block
    }

    /// Blocks owned by `rank`, ascending by id.
    pub fn blocks_of(&self, rank: usize) -> Vec<usize> {
        self.rank_of_block.iter().enumerate().filter_map(|(b, &r)| (r == rank).then_some(b)).collect()
    }

    /// Cell load per rank.
    pub fn loads(&self, topo: &Topology) -> Vec<usize> {
        let mut loads = vec![0; self.nranks];
        for b in &topo.blocks {
            loads[self.rank_of_block[b.id]] += b.cells();
        }
        loads
    }
}

/// Greedy longest-processing-time assignment by cell count.
///
/// Blocks are visited in descending cell count (ties: ascending id) and each
/// goes to the least loaded rank (ties: lowest rank id).
pub fn partition_blocks(topo: &Topology, nranks: usize) -> Result<Partition> {
    let nblocks = topo.nblocks();
    if nranks == 0 {
        return Err(Error::Usage("nranks must be at least 1".into()));
    }
    if nranks > nblocks {
        return Err(Error::Capacity { nranks, nblocks });
    }
    let mut order: Vec<usize> = (0..nblocks).collect();
    order.sort_by(|&a, &b| topo.blocks[b].cells().cmp(&topo.blocks[a].cells()).then(a.cmp(&b)));
    let mut loads = vec![0usize; nranks];
    let mut rank_of_block = vec![0usize; nblocks];
    for b in order {
        let (rank, _) = loads.iter().enumerate().min_by_key(|&(r, &load)| (load, r)).expect("nranks >= 1");
        rank_of_block[b] = rank;
        loads[rank] += topo.blocks[b].cells();
    }
    Ok(Partition { rank_of_block, nranks })
}

/// How a rank takes part in the canonical (b to a) direction of a cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutRole {
    BothLocal,
    /// Owns side a only: receives b's interior into a's halo.
    RecvSide,
    /// Owns side b only.
    SendSide,
    Uninvolved,
}

pub fn cut_role(partition: &Partition, cut: &CutSpec, rank: usize) -> CutRole {
    let owns_a = partition.rank_of(cut.side_a.block) == rank;
    let owns_b = partition.rank_of(cut.side_b.block) == rank;
    match (owns_a, owns_b) {
        (true, true) => CutRole::BothLocal,
        (true, false) => CutRole::RecvSide,
        (false, true) => CutRole::SendSide,
        (false, false) => CutRole::Uninvolved,
    }
}
