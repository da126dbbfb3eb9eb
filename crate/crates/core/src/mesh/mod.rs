//! Multi-block structured grid: blocks, cuts between block faces, bodies,
//! and the block-to-rank partition.
//!
//! Cell indices follow the storage convention of the solver: interior cells
//! are `1..=ni` by `1..=nj`, index `0` and `ni + 1` / `nj + 1` form the
//! one-cell halo ring. Face positions are 1-based along the face.

mod cases;
mod config;
mod partition;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

pub use cases::{grid_case, pair_case, ring_case, CaseShape, NamedCase};
pub use config::{BlockSection, CaseConfig, CaseParams, CutSection};
pub use partition::{cut_role, partition_blocks, CutRole, Partition};

use crate::error::{Error, Result};

/// One side of a block.
///
/// North/south faces run along `i`, east/west faces run along `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Face {
    North,
    South,
    East,
    West,
}

impl Face {
    pub const ALL: [Face; 4] = [Face::North, Face::South, Face::East, Face::West];

    /// Number of boundary cells along this face of an `ni` x `nj` block.
    pub fn extent(self, ni: usize, nj: usize) -> usize {
        match self {
            Face::North | Face::South => ni,
            Face::East | Face::West => nj,
        }
    }

    /// Interior cell adjacent to the face at 1-based position `pos`.
    pub fn interior_cell(self, pos: usize, ni: usize, nj: usize) -> (usize, usize) {
        match self {
            Face::North => (pos, nj),
            Face::South => (pos, 1),
            Face::East => (ni, pos),
            Face::West => (1, pos),
        }
    }

    /// Halo cell just outside the face at 1-based position `pos`.
    pub fn halo_cell(self, pos: usize, ni: usize, nj: usize) -> (usize, usize) {
        match self {
            Face::North => (pos, nj + 1),
            Face::South => (pos, 0),
            Face::East => (ni + 1, pos),
            Face::West => (0, pos),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Face::North => "north",
            Face::South => "south",
            Face::East => "east",
            Face::West => "west",
        }
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Face {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "north" => Ok(Face::North),
            "south" => Ok(Face::South),
            "east" => Ok(Face::East),
            "west" => Ok(Face::West),
            other => Err(format!("unknown face '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub id: usize,
    pub ni: usize,
    pub nj: usize,
    pub origin: (f64, f64),
    pub h: f64,
    /// Faces that lie on a body surface, with the body id.
    pub body_faces: Vec<(Face, usize)>,
}

impl BlockSpec {
    pub fn cells(&self) -> usize {
        self.ni * self.nj
    }

    /// Physical coordinates of the centre of cell `(i, j)` (1-based interior indices).
    pub fn cell_centre(&self, i: usize, j: usize) -> (f64, f64) {
        (self.origin.0 + (i as f64 - 0.5) * self.h, self.origin.1 + (j as f64 - 0.5) * self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Forward,
    Reversed,
}

/// A contiguous stretch of one block face, positions `first..=last` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutSide {
    pub block: usize,
    pub face: Face,
    pub first: usize,
    pub last: usize,
}

impl CutSide {
    pub fn len(&self) -> usize {
        self.last + 1 - self.first
    }

    pub fn is_empty(&self) -> bool {
        self.last < self.first
    }
}

/// Pairing of two face stretches whose halos mirror each other's interior.
#[derive(Debug, Clone, PartialEq)]
pub struct CutSpec {
    pub id: usize,
    pub side_a: CutSide,
    pub side_b: CutSide,
    pub orientation: Orientation,
}

impl CutSpec {
    pub fn len(&self) -> usize {
        self.side_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.side_a.is_empty()
    }

    /// Face positions `(pos_a, pos_b)` of element `e` (0-based along the cut).
    pub fn element_positions(&self, e: usize) -> (usize, usize) {
        let pos_a = self.side_a.first + e;
        let pos_b = match self.orientation {
            Orientation::Forward => self.side_b.first + e,
            Orientation::Reversed => self.side_b.last - e,
        };
        (pos_a, pos_b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub blocks: Vec<BlockSpec>,
    pub cuts: Vec<CutSpec>,
    pub nbody: usize,
}

impl Topology {
    /// Validates every structural invariant and returns the topology.
    pub fn new(blocks: Vec<BlockSpec>, cuts: Vec<CutSpec>, nbody: usize) -> Result<Self> {
        let topo = Topology { blocks, cuts, nbody };
        topo.validate()?;
        Ok(topo)
    }

    pub fn nblocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_cells(&self) -> usize {
        self.blocks.iter().map(BlockSpec::cells).sum()
    }

    pub fn block(&self, id: usize) -> &BlockSpec {
        &self.blocks[id]
    }

    pub fn max_cut_len(&self) -> usize {
        self.cuts.iter().map(CutSpec::len).max().unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::Topology("no blocks".into()));
        }
        for (idx, b) in self.blocks.iter().enumerate() {
            if b.id != idx {
                return Err(Error::Topology(format!(
                    "block ids must be 0..{} in order, found {} at position {idx}",
                    self.blocks.len(),
                    b.id
                )));
            }
            if b.ni < 2 || b.nj < 2 {
                return Err(Error::Topology(format!("block {} is {}x{}, needs at least 2x2", b.id, b.ni, b.nj)));
            }
            if !(b.h.is_finite() && b.h > 0.0) {
                return Err(Error::Topology(format!("block {} has spacing {}", b.id, b.h)));
            }
            for &(face, body) in &b.body_faces {
                if body >= self.nbody {
                    return Err(Error::Topology(format!(
                        "block {} face {face} references body {body}, nbody = {}",
                        b.id, self.nbody
                    )));
                }
            }
        }

        let mut used: HashSet<(usize, Face, usize)> = HashSet::new();
        for (idx, cut) in self.cuts.iter().enumerate() {
            if cut.id != idx {
                return Err(Error::Topology(format!(
                    "cut ids must be 0..{} in order, found {} at position {idx}",
                    self.cuts.len(),
                    cut.id
                )));
            }
            for side in [&cut.side_a, &cut.side_b] {
                let Some(block) = self.blocks.get(side.block) else {
                    return Err(Error::Topology(format!("cut {} references missing block {}", cut.id, side.block)));
                };
                let extent = side.face.extent(block.ni, block.nj);
                if side.first < 1 || side.first > side.last || side.last > extent {
                    return Err(Error::Topology(format!(
                        "cut {} range {}..{} outside block {} {} face (1..{extent})",
                        cut.id, side.first, side.last, side.block, side.face
                    )));
                }
            }
            if cut.side_a.len() != cut.side_b.len() {
                return Err(Error::Topology(format!(
                    "cut {} sides have lengths {} and {}",
                    cut.id,
                    cut.side_a.len(),
                    cut.side_b.len()
                )));
            }
            for side in [&cut.side_a, &cut.side_b] {
                for pos in side.first..=side.last {
                    if !used.insert((side.block, side.face, pos)) {
                        return Err(Error::Topology(format!(
                            "cut {} reuses block {} {} element {pos}",
                            cut.id, side.block, side.face
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Builds and validates the topology described by a parsed case file.
pub fn build_topology(config: &CaseConfig) -> Result<Topology> {
    let blocks = config
        .blocks
        .iter()
        .map(|b| BlockSpec { id: b.id, ni: b.ni, nj: b.nj, origin: b.origin, h: b.h, body_faces: b.bodies.clone() })
        .collect();
    let cuts = config
        .cuts
        .iter()
        .map(|c| CutSpec { id: c.id, side_a: c.a, side_b: c.b, orientation: c.orientation })
        .collect();
    Topology::new(blocks, cuts, config.params.nbody)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BLOCKS: &str = "\
[case]
nharms = 1

[block 0]
ni = 4
nj = 4
h = 0.25

[block 1]
ni = 4
nj = 4
origin = 1.0, 0.0
h = 0.25

[cut 0]
a = 0 east 1..4
b = 1 west 1..4
";

    #[test]
    fn smallest_two_block_case() {
        let cfg = CaseConfig::parse(TWO_BLOCKS).unwrap();
        let topo = build_topology(&cfg).unwrap();
        assert_eq!(topo.total_cells(), 32);
        assert_eq!(topo.cuts.len(), 1);
        assert_eq!(topo.cuts[0].len(), 4);
    }

    #[test]
    fn dangling_block_reference_names_the_cut() {
        let mut text = String::from("[case]\n");
        for b in 0..4 {
            text.push_str(&format!("[block {b}]\nni = 2\nnj = 2\nh = 1.0\n"));
        }
        text.push_str("[cut 0]\na = 0 east 1..2\nb = 99 west 1..2\n");
        let cfg = CaseConfig::parse(&text).unwrap();
        let err = build_topology(&cfg).unwrap_err();
        assert!(matches!(err, Error::Topology(ref m) if m.contains("cut 0") && m.contains("99")));
    }

    #[test]
    fn overlapping_cuts_rejected() {
        let text = format!("{TWO_BLOCKS}[cut 1]\na = 0 east 2..3\nb = 1 south 1..2\n");
        let cfg = CaseConfig::parse(&text).unwrap();
        assert!(matches!(build_topology(&cfg), Err(Error::Topology(_))));
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let text = TWO_BLOCKS.replace("b = 1 west 1..4", "b = 1 west 1..3");
        let cfg = CaseConfig::parse(&text).unwrap();
        assert!(matches!(build_topology(&cfg), Err(Error::Topology(_))));
    }

    #[test]
    fn range_past_face_extent_rejected() {
        let text = TWO_BLOCKS.replace("a = 0 east 1..4", "a = 0 east 2..5");
        let cfg = CaseConfig::parse(&text).unwrap();
        assert!(matches!(build_topology(&cfg), Err(Error::Topology(_))));
    }

    #[test]
    fn reversed_cut_maps_range_backwards() {
        let cut = CutSpec {
            id: 0,
            side_a: CutSide { block: 0, face: Face::East, first: 1, last: 4 },
            side_b: CutSide { block: 1, face: Face::West, first: 1, last: 4 },
            orientation: Orientation::Reversed,
        };
        let pairs: Vec<_> = (0..4).map(|e| cut.element_positions(e)).collect();
        assert_eq!(pairs, vec![(1, 4), (2, 3), (3, 2), (4, 1)]);
    }

    #[test]
    fn face_cells() {
        assert_eq!(Face::East.interior_cell(3, 4, 5), (4, 3));
        assert_eq!(Face::East.halo_cell(3, 4, 5), (5, 3));
        assert_eq!(Face::North.interior_cell(2, 4, 5), (2, 5));
        assert_eq!(Face::South.halo_cell(2, 4, 5), (2, 0));
        assert_eq!(Face::West.extent(4, 5), 5);
    }

    #[test]
    fn tc1_mini_cell_count() {
        // 32 blocks of 32x32, summed by walking the generated config.
        let text = NamedCase::Tc1Mini.config_text();
        let cfg = CaseConfig::parse(&text).unwrap();
        let walked: usize = cfg.blocks.iter().map(|b| b.ni * b.nj).sum();
        assert_eq!(walked, 32_768);
        assert_eq!(build_topology(&cfg).unwrap().total_cells(), walked);
    }
}
