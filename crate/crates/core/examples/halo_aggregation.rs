//! Per-element versus aggregated halo exchange across one long cut between
//! two ranks: measured message counts, bytes and the modelled cost on each
//! machine profile.
//!
//! cargo run --example halo_aggregation [cut length]

use hbproxy::bench::{predict_comm_time, PROFILES};
use hbproxy::exchange::{predicted_message_count, CutPlan, ExchangeMode, ExchangeStrategy, Exchanger, ThreadMode};
use hbproxy::hbcore::HarmonicField;
use hbproxy::hybrid::Team;
use hbproxy::mesh::{build_topology, pair_case, partition_blocks, CaseShape};
use hbproxy::runtime::{spawn_ranks, RuntimeOptions};

fn main() -> hbproxy::Result<()> {
    let len: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2500);
    let shape = CaseShape { ni: 2, nj: len, nharms: 1, nbody: 1, iterations: 1, dtau: 0.01 };
    let topo = build_topology(&pair_case(&shape))?;
    let part = partition_blocks(&topo, 2)?;
    let plan = CutPlan::new(&topo, &part, shape.nharms, 4);
    println!("cut length {len}, {} values per element", plan.datasize);

    for mode in [ExchangeMode::PerElement, ExchangeMode::AggregatedCut] {
        let strategy = ExchangeStrategy { mode, thread_mode: ThreadMode::Serial };
        let out = spawn_ranks(2, RuntimeOptions::default(), |ctx| {
            let specs: Vec<_> = part.blocks_of(ctx.rank()).into_iter().map(|b| topo.block(b)).collect();
            let mut field = HarmonicField::zeroed(&specs, 4, 2 * shape.nharms + 1);
            Exchanger::new(&plan, ctx.rank()).exchange_halos(&mut field, strategy, ctx, &Team::new(1))
        })?;
        let predicted = predicted_message_count(&plan, mode);
        let sent = out.counters[0];
        println!(
            "{mode:?}: {} messages / {} bytes per direction (predicted {} / {})",
            sent.messages_sent, sent.bytes_sent, predicted.messages_per_direction, predicted.bytes_per_direction
        );
        for profile in PROFILES {
            println!("  {:>5}: {:>9.4} ms", profile.name, predict_comm_time(&plan, mode, &profile) * 1e3);
        }
    }
    Ok(())
}
