//! Scaling runs of tc1-mini turned into an efficiency and energy report for
//! each machine profile.
//!
//! cargo run --release --example energy_report

use hbproxy::bench::{emit_report, write_records, PROFILES};
use hbproxy::driver::{run, RunConfig};
use hbproxy::mesh::NamedCase;

fn main() -> hbproxy::Result<()> {
    let case = NamedCase::Tc1Mini;
    let (topo, params) = (case.topology()?, case.config().params);
    let iterations = 3;

    let mut records = Vec::new();
    for (ranks, threads) in [(1, 1), (2, 1), (4, 1), (1, 4), (2, 2)] {
        let mut cfg = RunConfig::new(ranks, iterations);
        cfg.team.threads = threads;
        let r = run(&topo, &params, &cfg)?;
        records.push(r.record(case.name(), &cfg));
    }

    print!("{}", write_records(&records)?);
    println!();
    let report = emit_report(&records, &PROFILES)?;
    print!("{}", report.table);
    Ok(())
}
