//! Global reduction of force coefficients.
//!
//! The baseline issues one global sum per (plane, body) slot. The buffered
//! packing collects every slot into one array, plane-outer and body-inner
//! with `cl, cd, cm` per slot, and issues a single global sum.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hbcore::ForceCoefficients;
use crate::runtime::RankContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceMode {
    PerBodyPerHarmonic,
    SingleBuffer,
}

impl FromStr for ReduceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-item" => Ok(ReduceMode::PerBodyPerHarmonic),
            "buffered" => Ok(ReduceMode::SingleBuffer),
            _ => Err(format!("unknown reduce mode '{s}'")),
        }
    }
}

/// How many coefficients the baseline reduces per slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functag {
    /// `cl` and `cd`.
    Two,
    /// `cl`, `cd` and `cm`.
    Three,
}

impl FromStr for Functag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "2" => Ok(Functag::Two),
            "3" => Ok(Functag::Three),
            _ => Err(format!("functag must be 2 or 3, got '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForceReduceStrategy {
    pub mode: ReduceMode,
    pub functag: Functag,
}

impl Default for ForceReduceStrategy {
    fn default() -> Self {
        ForceReduceStrategy { mode: ReduceMode::SingleBuffer, functag: Functag::Three }
    }
}

/// Global sums one reduction issues.
pub fn collective_calls(mode: ReduceMode, nplanes: usize, nbody: usize) -> u64 {
    match mode {
        ReduceMode::PerBodyPerHarmonic => (nplanes * nbody) as u64,
        ReduceMode::SingleBuffer => 1,
    }
}

/// Buffered packing, `3 * nbody * nplanes` values. With [`Functag::Two`] the
/// `cm` entries are zero.
pub fn pack(f: &ForceCoefficients, functag: Functag) -> Vec<f64> {
    let mut buf = Vec::with_capacity(3 * f.cl.len());
    for n in 0..f.nplanes() {
        for b in 0..f.nbody() {
            let k = f.slot(n, b);
            buf.push(f.cl[k]);
            buf.push(f.cd[k]);
            buf.push(match functag {
                Functag::Three => f.cm[k],
                Functag::Two => 0.0,
            });
        }
    }
    buf
}

/// Inverse of [`pack`].
pub fn unpack(buf: &[f64], nplanes: usize, nbody: usize) -> ForceCoefficients {
    assert_eq!(buf.len(), 3 * nplanes * nbody, "buffer length");
    let mut f = ForceCoefficients::zeros(nplanes, nbody);
    for (k, c) in buf.chunks_exact(3).enumerate() {
        f.cl[k] = c[0];
        f.cd[k] = c[1];
        f.cm[k] = c[2];
    }
    f
}

/// Sums every rank's partial coefficients. Called by one thread per rank.
pub fn reduce_forces(
    partial: &ForceCoefficients,
    strategy: ForceReduceStrategy,
    ctx: &RankContext<'_>,
) -> Result<ForceCoefficients> {
    let (nplanes, nbody) = (partial.nplanes(), partial.nbody());
    match strategy.mode {
        ReduceMode::SingleBuffer => {
            let mut buf = pack(partial, strategy.functag);
            ctx.allreduce_sum(&mut buf)?;
            Ok(unpack(&buf, nplanes, nbody))
        }
        ReduceMode::PerBodyPerHarmonic => {
            let mut out = ForceCoefficients::zeros(nplanes, nbody);
            for n in 0..nplanes {
                for b in 0..nbody {
                    let k = partial.slot(n, b);
                    match strategy.functag {
                        Functag::Three => {
                            let mut t = [partial.cl[k], partial.cd[k], partial.cm[k]];
                            ctx.allreduce_sum(&mut t)?;
                            (out.cl[k], out.cd[k], out.cm[k]) = (t[0], t[1], t[2]);
                        }
                        Functag::Two => {
                            let mut t = [partial.cl[k], partial.cd[k]];
                            ctx.allreduce_sum(&mut t)?;
                            (out.cl[k], out.cd[k], out.cm[k]) = (t[0], t[1], 0.0);
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Checks that `f` has the extents a reduction expects.
pub fn check_extents(f: &ForceCoefficients, nplanes: usize, nbody: usize) -> Result<()> {
    if f.nplanes() != nplanes || f.nbody() != nbody {
        return Err(Error::Collective(format!(
            "force extents {}x{} differ from expected {nplanes}x{nbody}",
            f.nplanes(),
            f.nbody()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{spawn_ranks, RuntimeOptions};
    use proptest::prelude::*;
    use rand::rngs::SmallRng;
    use rand::{Rng, SeedableRng};

    fn random_partial(seed: u64, nplanes: usize, nbody: usize) -> ForceCoefficients {
        let mut rng = SmallRng::seed_from_u64(seed);
        let mut f = ForceCoefficients::zeros(nplanes, nbody);
        for v in f.cl.iter_mut().chain(f.cd.iter_mut()).chain(f.cm.iter_mut()) {
            *v = rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-8..8));
        }
        f
    }

    fn run(
        nranks: usize,
        strategy: ForceReduceStrategy,
        nplanes: usize,
        nbody: usize,
    ) -> (Vec<ForceCoefficients>, Vec<u64>) {
        let out = spawn_ranks(nranks, RuntimeOptions::default(), |ctx| {
            let partial = random_partial(ctx.rank() as u64 + 11, nplanes, nbody);
            reduce_forces(&partial, strategy, ctx)
        })
        .unwrap();
        let calls = out.counters.iter().map(|c| c.collectives).collect();
        (out.results, calls)
    }

    #[test]
    fn call_counts() {
        // nbody 2, nharms 3: 7 planes.
        let per_item = ForceReduceStrategy { mode: ReduceMode::PerBodyPerHarmonic, functag: Functag::Three };
        let buffered = ForceReduceStrategy { mode: ReduceMode::SingleBuffer, functag: Functag::Three };
        assert_eq!(run(3, per_item, 7, 2).1, vec![14; 3]);
        assert_eq!(run(3, buffered, 7, 2).1, vec![1; 3]);
        assert_eq!(pack(&ForceCoefficients::zeros(7, 2), Functag::Three).len(), 42);
        assert_eq!(collective_calls(ReduceMode::PerBodyPerHarmonic, 7, 2), 14);
    }

    #[test]
    fn one_rank_is_identity() {
        let partial = random_partial(11, 5, 3);
        for mode in [ReduceMode::PerBodyPerHarmonic, ReduceMode::SingleBuffer] {
            let s = ForceReduceStrategy { mode, functag: Functag::Three };
            assert_eq!(run(1, s, 5, 3).0[0].to_bits(), partial.to_bits());
        }
    }

    #[test]
    fn strategies_equal_serial_fold() {
        let (nplanes, nbody, nranks) = (5, 2, 4);
        let mut oracle = random_partial(11, nplanes, nbody);
        for r in 1..nranks {
            let p = random_partial(r as u64 + 11, nplanes, nbody);
            for (a, v) in oracle.cl.iter_mut().zip(&p.cl) {
                *a += v;
            }
            for (a, v) in oracle.cd.iter_mut().zip(&p.cd) {
                *a += v;
            }
            for (a, v) in oracle.cm.iter_mut().zip(&p.cm) {
                *a += v;
            }
        }
        for mode in [ReduceMode::PerBodyPerHarmonic, ReduceMode::SingleBuffer] {
            let s = ForceReduceStrategy { mode, functag: Functag::Three };
            for f in run(nranks, s, nplanes, nbody).0 {
                assert_eq!(f.to_bits(), oracle.to_bits(), "{mode:?}");
            }
        }
    }

    #[test]
    fn two_component_drops_moment_in_both_modes() {
        let a = run(3, ForceReduceStrategy { mode: ReduceMode::PerBodyPerHarmonic, functag: Functag::Two }, 3, 2);
        let b = run(3, ForceReduceStrategy { mode: ReduceMode::SingleBuffer, functag: Functag::Two }, 3, 2);
        assert_eq!(a.0[0].to_bits(), b.0[0].to_bits());
        assert!(a.0[0].cm.iter().all(|&v| v == 0.0));
        assert_eq!(a.1, vec![6; 3]);
    }

    #[test]
    fn extent_mismatch_is_collective_error() {
        let err = spawn_ranks(2, RuntimeOptions::default(), |ctx| {
            let nbody = 1 + ctx.rank();
            reduce_forces(&random_partial(1, 3, nbody), ForceReduceStrategy::default(), ctx)
        })
        .unwrap_err();
        let Error::Rank { source, .. } = err else { panic!("{err}") };
        assert!(matches!(*source, Error::Collective(_)));
        assert!(check_extents(&ForceCoefficients::zeros(3, 1), 3, 2).is_err());
    }

    proptest! {
        #[test]
        fn pack_unpack_round_trip(seed in any::<u64>(), nplanes in 1usize..9, nbody in 1usize..5) {
            let f = random_partial(seed, nplanes, nbody);
            let g = unpack(&pack(&f, Functag::Three), nplanes, nbody);
            prop_assert_eq!(f.to_bits(), g.to_bits());
        }
    }
}
