//! Generators for the built-in test cases.
//!
//! The mini cases keep the shape of the production runs (many equal blocks,
//! two bodies or one, odd plane counts) at a size that runs on a laptop:
//!
//! | case       | blocks | block cells | total cells | nharms | planes |
//! |------------|--------|-------------|-------------|--------|--------|
//! | `tc-tiny`  | 2      | 4x4         | 32          | 1      | 3      |
//! | `tc1-mini` | 32     | 32x32       | 32,768      | 7      | 15     |
//! | `tc2-mini` | 64     | 32x32       | 65,536      | 4      | 9      |
//! | `tc1`      | 512    | 32x16       | 262,144     | 15     | 31     |
//! | `tc2`      | 2048   | 64x32       | 4,194,304   | 8      | 17     |

use std::str::FromStr;

use super::{build_topology, BlockSection, CaseConfig, CaseParams, CutSection, CutSide, Face, Orientation, Topology};
use crate::error::Result;

/// Per-block shape and solver parameters shared by the generated cases.
#[derive(Debug, Clone)]
pub struct CaseShape {
    pub ni: usize,
    pub nj: usize,
    pub nharms: usize,
    pub nbody: usize,
    pub iterations: usize,
    pub dtau: f64,
}

impl CaseShape {
    fn params(&self) -> CaseParams {
        CaseParams {
            nharms: self.nharms,
            npde: 4,
            iterations: self.iterations,
            dtau: self.dtau,
            omega: 1.0,
            nbody: self.nbody,
        }
    }

    fn h(&self) -> f64 {
        1.0 / self.ni as f64
    }
}

/// `nblocks` blocks in a periodic row: block `b` east is cut to block `b + 1` west,
/// wrapping around. Body `k` sits on the south face of block `k * nblocks / nbody`.
pub fn ring_case(nblocks: usize, shape: &CaseShape) -> CaseConfig {
    let h = shape.h();
    let width = shape.ni as f64 * h;
    let blocks = (0..nblocks)
        .map(|b| BlockSection {
            id: b,
            ni: shape.ni,
            nj: shape.nj,
            origin: (b as f64 * width, 0.0),
            h,
            bodies: body_list(b, nblocks, shape.nbody),
        })
        .collect();
    let cuts = (0..nblocks)
        .map(|b| CutSection {
            id: b,
            a: CutSide { block: b, face: Face::East, first: 1, last: shape.nj },
            b: CutSide { block: (b + 1) % nblocks, face: Face::West, first: 1, last: shape.nj },
            orientation: Orientation::Forward,
        })
        .collect();
    CaseConfig { params: shape.params(), blocks, cuts }
}

/// Two blocks joined by one east-west cut of length `nj`.
pub fn pair_case(shape: &CaseShape) -> CaseConfig {
    let mut cfg = ring_case(2, shape);
    cfg.cuts.truncate(1);
    cfg
}

/// `nbx` x `nby` blocks with cuts between all neighbours. With `nbx >= 3` the
/// south faces of the two bottom corner blocks are joined by a reversed
/// wake cut, as in a C-type mesh around an aerofoil.
pub fn grid_case(nbx: usize, nby: usize, shape: &CaseShape) -> CaseConfig {
    let h = shape.h();
    let (w, ht) = (shape.ni as f64 * h, shape.nj as f64 * h);
    let id = |bx: usize, by: usize| by * nbx + bx;
    let nblocks = nbx * nby;
    let mut blocks = Vec::with_capacity(nblocks);
    for by in 0..nby {
        for bx in 0..nbx {
            let b = id(bx, by);
            // Bodies along the bottom row, away from the wake corners.
            let bodies = if by == 0 && nbx >= 3 {
                (0..shape.nbody)
                    .filter(|k| 1 + k * (nbx - 2) / shape.nbody.max(1) == bx)
                    .map(|k| (Face::South, k))
                    .collect()
            } else if by == 0 && nbx < 3 {
                body_list(bx, nbx, shape.nbody)
            } else {
                vec![]
            };
            blocks.push(BlockSection {
                id: b,
                ni: shape.ni,
                nj: shape.nj,
                origin: (bx as f64 * w, by as f64 * ht),
                h,
                bodies,
            });
        }
    }
    let mut cuts = Vec::new();
    let mut push = |a: CutSide, b: CutSide, orientation| {
        let id = cuts.len();
        cuts.push(CutSection { id, a, b, orientation });
    };
    for by in 0..nby {
        for bx in 0..nbx {
            if bx + 1 < nbx {
                push(
                    CutSide { block: id(bx, by), face: Face::East, first: 1, last: shape.nj },
                    CutSide { block: id(bx + 1, by), face: Face::West, first: 1, last: shape.nj },
                    Orientation::Forward,
                );
            }
            if by + 1 < nby {
                push(
                    CutSide { block: id(bx, by), face: Face::North, first: 1, last: shape.ni },
                    CutSide { block: id(bx, by + 1), face: Face::South, first: 1, last: shape.ni },
                    Orientation::Forward,
                );
            }
        }
    }
    if nbx >= 3 {
        push(
            CutSide { block: id(0, 0), face: Face::South, first: 1, last: shape.ni },
            CutSide { block: id(nbx - 1, 0), face: Face::South, first: 1, last: shape.ni },
            Orientation::Reversed,
        );
    }
    CaseConfig { params: shape.params(), blocks, cuts }
}

fn body_list(block: usize, nblocks: usize, nbody: usize) -> Vec<(Face, usize)> {
    (0..nbody).filter(|k| k * nblocks / nbody == block).map(|k| (Face::South, k)).collect()
}

/// The built-in cases. See the module table for their sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedCase {
    TcTiny,
    Tc1Mini,
    Tc2Mini,
    Tc1,
    Tc2,
}

impl NamedCase {
    pub const ALL: [NamedCase; 5] =
        [NamedCase::TcTiny, NamedCase::Tc1Mini, NamedCase::Tc2Mini, NamedCase::Tc1, NamedCase::Tc2];

    pub fn name(self) -> &'static str {
        match self {
            NamedCase::TcTiny => "tc-tiny",
            NamedCase::Tc1Mini => "tc1-mini",
            NamedCase::Tc2Mini => "tc2-mini",
            NamedCase::Tc1 => "tc1",
            NamedCase::Tc2 => "tc2",
        }
    }

    pub fn config(self) -> CaseConfig {
        match self {
            NamedCase::TcTiny => {
                pair_case(&CaseShape { ni: 4, nj: 4, nharms: 1, nbody: 1, iterations: 10, dtau: 0.01 })
            }
            NamedCase::Tc1Mini => {
                ring_case(32, &CaseShape { ni: 32, nj: 32, nharms: 7, nbody: 2, iterations: 100, dtau: 0.002 })
            }
            NamedCase::Tc2Mini => {
                grid_case(8, 8, &CaseShape { ni: 32, nj: 32, nharms: 4, nbody: 1, iterations: 100, dtau: 0.002 })
            }
            NamedCase::Tc1 => {
                ring_case(512, &CaseShape { ni: 32, nj: 16, nharms: 15, nbody: 2, iterations: 100, dtau: 0.002 })
            }
            NamedCase::Tc2 => {
                grid_case(64, 32, &CaseShape { ni: 64, nj: 32, nharms: 8, nbody: 1, iterations: 100, dtau: 0.001 })
            }
        }
    }

    pub fn config_text(self) -> String {
        format!("# {} case\n{}", self.name(), self.config().to_text())
    }

    pub fn topology(self) -> Result<Topology> {
        build_topology(&self.config())
    }
}

impl FromStr for NamedCase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NamedCase::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown case '{s}'"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_match_table() {
        let expect = [
            (NamedCase::TcTiny, 2, 32, 1),
            (NamedCase::Tc1Mini, 32, 32_768, 7),
            (NamedCase::Tc2Mini, 64, 65_536, 4),
            (NamedCase::Tc1, 512, 262_144, 15),
            (NamedCase::Tc2, 2048, 4_194_304, 8),
        ];
        for (case, nblocks, cells, nharms) in expect {
            let cfg = case.config();
            let topo = build_topology(&cfg).unwrap();
            assert_eq!(topo.nblocks(), nblocks, "{}", case.name());
            assert_eq!(topo.total_cells(), cells, "{}", case.name());
            assert_eq!(cfg.params.nharms, nharms, "{}", case.name());
        }
    }

    #[test]
    fn every_body_has_exactly_one_face() {
        for case in NamedCase::ALL {
            let topo = case.topology().unwrap();
            for body in 0..topo.nbody {
                let faces = topo.blocks.iter().flat_map(|b| b.body_faces.iter()).filter(|(_, id)| *id == body).count();
                assert_eq!(faces, 1, "{} body {body}", case.name());
            }
        }
    }

    #[test]
    fn tc2_mini_has_a_reversed_cut() {
        let topo = NamedCase::Tc2Mini.topology().unwrap();
        assert!(topo.cuts.iter().any(|c| c.orientation == Orientation::Reversed));
    }

    #[test]
    fn shipped_case_files_match_generators() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("cases");
        for case in NamedCase::ALL {
            let path = dir.join(format!("{}.case", case.name()));
            let on_disk = CaseConfig::from_file(&path).unwrap();
            assert_eq!(on_disk, case.config(), "{}", path.display());
        }
    }
}
