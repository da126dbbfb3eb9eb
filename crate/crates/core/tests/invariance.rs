//! Fields and forces do not depend on how the work is distributed.

use hbproxy::driver::{run, RunConfig, RunResult};
use hbproxy::exchange::{ExchangeMode, ExchangeStrategy, ThreadMode};
use hbproxy::hybrid::{ActivationMode, Axis, TeamConfig};
use hbproxy::mesh::{build_topology, grid_case, CaseParams, CaseShape, Topology};
use hbproxy::reduce::{ForceReduceStrategy, Functag, ReduceMode};
use proptest::prelude::*;

fn small_grid() -> (Topology, CaseParams) {
    let shape = CaseShape { ni: 6, nj: 5, nharms: 3, nbody: 2, iterations: 3, dtau: 0.004 };
    let config = grid_case(4, 3, &shape);
    (build_topology(&config).unwrap(), config.params)
}

fn reference() -> &'static (Topology, CaseParams, RunResult) {
    static REF: std::sync::OnceLock<(Topology, CaseParams, RunResult)> = std::sync::OnceLock::new();
    REF.get_or_init(|| {
        let (topo, params) = small_grid();
        let r = run(&topo, &params, &RunConfig::new(1, params.iterations)).unwrap();
        (topo, params, r)
    })
}

fn axis() -> impl Strategy<Value = Axis> {
    prop_oneof![Just(Axis::Harmonics), Just(Axis::GridPoints), Just(Axis::Blocks)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn any_distribution_matches_serial(
        ranks in 1usize..=12,
        threads in 1usize..=4,
        axis in axis(),
        hoisted in any::<bool>(),
        per_element in any::<bool>(),
        tagged in any::<bool>(),
        per_item in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let (topo, params, golden) = reference();
        let mut cfg = RunConfig::new(ranks, params.iterations);
        let activation = if hoisted { ActivationMode::Hoisted } else { ActivationMode::PerLoop };
        cfg.team = TeamConfig { threads, axis, activation };
        cfg.exchange = ExchangeStrategy {
            mode: if per_element { ExchangeMode::PerElement } else { ExchangeMode::AggregatedCut },
            thread_mode: if tagged { ThreadMode::TaggedThreads } else { ThreadMode::Serial },
        };
        cfg.reduce = ForceReduceStrategy {
            mode: if per_item { ReduceMode::PerBodyPerHarmonic } else { ReduceMode::SingleBuffer },
            functag: Functag::Three,
        };
        cfg.runtime.jitter_seed = Some(seed);
        let r = run(topo, params, &cfg).unwrap();
        prop_assert_eq!(r.field_bits(), golden.field_bits());
        prop_assert_eq!(r.forces.to_bits(), golden.forces.to_bits());

        let it = r.sum(|p| p.iterations);
        let per_rank_loops = if hoisted { 1 } else { 12 };
        prop_assert_eq!(it.activations, (ranks * params.iterations * per_rank_loops) as u64);
        let per_iteration = if per_item { 2 * params.nplanes() } else { 1 };
        prop_assert_eq!(it.collectives, (ranks * params.iterations * per_iteration) as u64);
        prop_assert_eq!(it.messages_sent, it.messages_received);
    }
}

#[test]
fn repeated_runs_are_identical() {
    let (topo, params, golden) = reference();
    let mut cfg = RunConfig::new(5, params.iterations);
    cfg.team.threads = 3;
    let a = run(topo, params, &cfg).unwrap();
    let b = run(topo, params, &cfg).unwrap();
    assert_eq!(a.field_bits(), b.field_bits());
    assert_eq!(a.field_bits(), golden.field_bits());
}

#[test]
fn field_stays_bounded_on_tc1_mini() {
    let case = hbproxy::mesh::NamedCase::Tc1Mini;
    let (topo, params) = (case.topology().unwrap(), case.config().params);
    let r = run(&topo, &params, &RunConfig::new(1, 100)).unwrap();
    let max = r.blocks.iter().map(|b| b.max_abs()).fold(0.0, f64::max);
    assert!(max.is_finite() && max < 10.0, "max |q| = {max}");
}
