//! Distributes the tc2-mini grid over a few rank counts and shows the load
//! balance and how many cuts cross rank boundaries.
//!
//! cargo run --example partition [ranks...]

use hbproxy::mesh::{cut_role, partition_blocks, CutRole, NamedCase};

fn main() -> hbproxy::Result<()> {
    let topo = NamedCase::Tc2Mini.topology()?;
    let counts: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let counts = if counts.is_empty() { vec![1, 3, 8, 64] } else { counts };

    println!("tc2-mini: {} blocks, {} cuts", topo.nblocks(), topo.cuts.len());
    for nranks in counts {
        let part = partition_blocks(&topo, nranks)?;
        let loads = part.loads(&topo);
        let remote =
            topo.cuts.iter().filter(|c| (0..nranks).any(|r| cut_role(&part, c, r) == CutRole::RecvSide)).count();
        println!(
            "{nranks:>3} ranks: cells per rank {}..{}, remote cuts {remote}",
            loads.iter().min().unwrap(),
            loads.iter().max().unwrap()
        );
    }

    // One more rank than blocks cannot be placed.
    match partition_blocks(&topo, topo.nblocks() + 1) {
        Err(e) => println!("{e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
