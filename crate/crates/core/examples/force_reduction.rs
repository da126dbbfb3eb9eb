//! Force coefficients on tc1-mini reduced slot by slot and in one packed
//! buffer: the collective counts differ, the coefficients do not.
//!
//! cargo run --release --example force_reduction

use hbproxy::driver::{run, RunConfig};
use hbproxy::mesh::NamedCase;
use hbproxy::reduce::{ForceReduceStrategy, Functag, ReduceMode};

fn main() -> hbproxy::Result<()> {
    let case = NamedCase::Tc1Mini;
    let (topo, params) = (case.topology()?, case.config().params);
    let iterations = 5;

    let mut results = Vec::new();
    for mode in [ReduceMode::PerBodyPerHarmonic, ReduceMode::SingleBuffer] {
        let mut cfg = RunConfig::new(4, iterations);
        cfg.reduce = ForceReduceStrategy { mode, functag: Functag::Three };
        let r = run(&topo, &params, &cfg)?;
        let calls = r.per_rank[0].iterations.collectives / iterations as u64;
        println!("{mode:?}: {calls} global sums per iteration per rank");
        results.push(r);
    }
    assert_eq!(results[0].forces.to_bits(), results[1].forces.to_bits());

    let f = &results[1].forces;
    println!("{:>6} {:>5} {:>13} {:>13} {:>13}", "plane", "body", "cl", "cd", "cm");
    for n in 0..f.nplanes() {
        for b in 0..f.nbody() {
            let k = f.slot(n, b);
            println!("{n:>6} {b:>5} {:>13.6e} {:>13.6e} {:>13.6e}", f.cl[k], f.cd[k], f.cm[k]);
        }
    }
    Ok(())
}
