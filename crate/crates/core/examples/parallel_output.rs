//! Restart and flowtec files written by 2 ranks x 2 threads with both write
//! strategies. The files match byte for byte and the restart reads back into
//! the solved field.
//!
//! cargo run --example parallel_output

use std::fs;

use hbproxy::driver::{run, OutputRequest, RunConfig};
use hbproxy::mesh::NamedCase;
use hbproxy::outio::{compute_layout, read_restart, OutputKind, WriteStrategy};

fn main() -> hbproxy::Result<()> {
    let case = NamedCase::TcTiny;
    let (topo, params) = (case.topology()?, case.config().params);
    let root = std::env::temp_dir().join(format!("hbproxy-output-{}", std::process::id()));

    let mut cfg = RunConfig::new(2, 10);
    cfg.team.threads = 2;
    for strategy in [WriteStrategy::PerValue, WriteStrategy::Buffered] {
        let dir = root.join(format!("{strategy:?}").to_lowercase());
        fs::create_dir_all(&dir).expect("create output directory");
        cfg.outputs.push(OutputRequest { dir, strategy });
    }
    let result = run(&topo, &params, &cfg)?;
    println!("{} write calls for both strategies", result.sum(|p| p.output).write_ops);

    for kind in [OutputKind::Restart, OutputKind::Flowtec] {
        let layout = compute_layout(&topo, params.nharms, params.npde, kind);
        for (a, b) in layout.paths(&cfg.outputs[0].dir).iter().zip(layout.paths(&cfg.outputs[1].dir)) {
            let (x, y) = (fs::read(a).expect("read"), fs::read(&b).expect("read"));
            println!("{:<16} {:>6} bytes, identical: {}", a.file_name().unwrap().to_string_lossy(), x.len(), x == y);
        }
    }

    let back = read_restart(&cfg.outputs[1].dir, &topo, params.nharms, params.npde)?;
    let same = back.blocks.iter().zip(&result.blocks).all(|(a, b)| a.interior_bits() == b.interior_bits());
    println!("restart reads back to the solved field: {same}");
    fs::remove_dir_all(&root).ok();
    Ok(())
}
