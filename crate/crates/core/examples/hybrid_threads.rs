//! Ranks times threads on tc2-mini: every axis and activation mode gives the
//! same field, while the team activation counts follow the loop inventory.
//!
//! cargo run --release --example hybrid_threads

use hbproxy::driver::{run, RunConfig};
use hbproxy::exchange::{ExchangeStrategy, ThreadMode};
use hbproxy::hybrid::{ActivationMode, Axis, TeamConfig};
use hbproxy::mesh::NamedCase;

fn main() -> hbproxy::Result<()> {
    let case = NamedCase::Tc2Mini;
    let (topo, params) = (case.topology()?, case.config().params);
    let iterations = 4;
    let reference = run(&topo, &params, &RunConfig::new(1, iterations))?;

    println!("{:>5} {:>7} {:>10} {:>8} {:>11} {:>9}", "ranks", "threads", "axis", "mode", "activations", "identical");
    for (ranks, threads) in [(1, 4), (4, 2), (8, 4)] {
        for axis in [Axis::Harmonics, Axis::GridPoints, Axis::Blocks] {
            for activation in [ActivationMode::PerLoop, ActivationMode::Hoisted] {
                let mut cfg = RunConfig::new(ranks, iterations);
                cfg.team = TeamConfig { threads, axis, activation };
                cfg.exchange = ExchangeStrategy { thread_mode: ThreadMode::TaggedThreads, ..cfg.exchange };
                let r = run(&topo, &params, &cfg)?;
                let same = r.field_bits() == reference.field_bits();
                println!(
                    "{ranks:>5} {threads:>7} {:>10} {:>8} {:>11} {same:>9}",
                    format!("{axis:?}"),
                    format!("{activation:?}"),
                    r.per_rank[0].iterations.activations
                );
            }
        }
    }
    Ok(())
}
