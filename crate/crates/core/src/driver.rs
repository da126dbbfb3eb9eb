//! End-to-end runs: partition, initialise, iterate with force reduction,
//! write output, gather.

use std::path::PathBuf;
use std::time::Instant;

use crate::bench::RunRecord;
use crate::error::{Error, Result};
use crate::exchange::{CutPlan, ExchangeStrategy};
use crate::hbcore::{BlockField, ForceCoefficients, RankSolver};
use crate::hybrid::TeamConfig;
use crate::mesh::{partition_blocks, CaseParams, Topology};
use crate::outio::{compute_layout, create_files, write_output, OutputKind, WriteStrategy};
use crate::reduce::{reduce_forces, ForceReduceStrategy};
use crate::runtime::{spawn_ranks, CounterSnapshot, RankContext, RuntimeOptions};

/// Restart and flowtec files written to `dir` after the last iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRequest {
    pub dir: PathBuf,
    pub strategy: WriteStrategy,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub ranks: usize,
    pub team: TeamConfig,
    pub exchange: ExchangeStrategy,
    pub reduce: ForceReduceStrategy,
    pub iterations: usize,
    pub outputs: Vec<OutputRequest>,
    pub runtime: RuntimeOptions,
}

impl RunConfig {
    pub fn new(ranks: usize, iterations: usize) -> Self {
        RunConfig {
            ranks,
            team: TeamConfig::default(),
            exchange: ExchangeStrategy::default(),
            reduce: ForceReduceStrategy::default(),
            iterations,
            outputs: Vec::new(),
            runtime: RuntimeOptions::default(),
        }
    }
}

/// Counters of one rank split by phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhaseCounters {
    /// Initialisation and the first exchange.
    pub setup: CounterSnapshot,
    /// The iteration loop, including force reductions.
    pub iterations: CounterSnapshot,
    /// Output writing.
    pub output: CounterSnapshot,
}

impl PhaseCounters {
    pub fn total(&self) -> CounterSnapshot {
        self.setup + self.iterations + self.output
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Every block, ascending by id.
    pub blocks: Vec<BlockField>,
    /// Global force coefficients after the last iteration.
    pub forces: ForceCoefficients,
    pub per_rank: Vec<PhaseCounters>,
    /// Seconds spent in the iteration loop (slowest rank).
    pub iteration_wall_s: f64,
    pub wall_s: f64,
}

impl RunResult {
    pub fn field_bits(&self) -> Vec<u64> {
        self.blocks.iter().flat_map(|b| b.interior_bits()).collect()
    }

    /// Counters of one phase summed over ranks.
    pub fn sum(&self, phase: impl Fn(&PhaseCounters) -> CounterSnapshot) -> CounterSnapshot {
        self.per_rank.iter().map(phase).sum()
    }

    pub fn record(&self, case: &str, cfg: &RunConfig) -> RunRecord {
        let it = self.sum(|p| p.iterations);
        let out = self.sum(|p| p.output);
        RunRecord {
            case: case.to_string(),
            ranks: cfg.ranks,
            threads: cfg.team.threads,
            iterations: cfg.iterations,
            wall_s: self.iteration_wall_s.max(f64::MIN_POSITIVE),
            msgs: it.messages_sent,
            bytes: it.bytes_sent,
            collectives: it.collectives,
            write_ops: out.write_ops,
            activations: it.activations,
        }
    }
}

struct RankOutcome {
    blocks: Vec<BlockField>,
    forces: ForceCoefficients,
    counters: PhaseCounters,
    loop_s: f64,
}

fn snapshot(ctx: &RankContext<'_>) -> CounterSnapshot {
    ctx.counters.snapshot()
}

pub fn run(topo: &Topology, params: &CaseParams, cfg: &RunConfig) -> Result<RunResult> {
    let start = Instant::now();
    let partition = partition_blocks(topo, cfg.ranks)?;
    let plan = CutPlan::new(topo, &partition, params.nharms, params.npde);
    let layouts = [
        compute_layout(topo, params.nharms, params.npde, OutputKind::Restart),
        compute_layout(topo, params.nharms, params.npde, OutputKind::Flowtec),
    ];
    let nplanes = params.nplanes();

    let out = spawn_ranks(cfg.ranks, cfg.runtime.clone(), |ctx| {
        let mut solver = RankSolver::new(topo, &partition, params, &plan, cfg.team, cfg.exchange, ctx.rank())?;
        solver.initialise(ctx)?;
        let after_setup = snapshot(ctx);

        let loop_start = Instant::now();
        let mut forces = ForceCoefficients::zeros(nplanes, topo.nbody);
        for _ in 0..cfg.iterations {
            solver.iterate(ctx)?;
            forces = reduce_forces(&solver.forces(), cfg.reduce, ctx)?;
        }
        let loop_s = loop_start.elapsed().as_secs_f64();
        let after_loop = snapshot(ctx);

        for request in &cfg.outputs {
            for layout in &layouts {
                if ctx.rank() == 0 {
                    create_files(&request.dir, layout)?;
                }
                ctx.barrier()?;
                let before = solver.team().activations();
                write_output(
                    solver.field(),
                    topo,
                    layout,
                    request.strategy,
                    &request.dir,
                    solver.team(),
                    cfg.team.axis,
                    &ctx.counters.write_ops,
                )?;
                ctx.counters
                    .setup_activations
                    .fetch_add(solver.team().activations() - before, std::sync::atomic::Ordering::SeqCst);
                ctx.barrier()?;
            }
        }
        let after_output = snapshot(ctx);

        Ok(RankOutcome {
            blocks: solver.into_field().blocks,
            forces,
            counters: PhaseCounters {
                setup: after_setup,
                iterations: after_loop - after_setup,
                output: after_output - after_loop,
            },
            loop_s,
        })
    })?;

    let mut blocks = Vec::with_capacity(topo.nblocks());
    let mut per_rank = Vec::with_capacity(cfg.ranks);
    let mut forces = None;
    let mut iteration_wall_s: f64 = 0.0;
    for r in out.results {
        blocks.extend(r.blocks);
        per_rank.push(r.counters);
        iteration_wall_s = iteration_wall_s.max(r.loop_s);
        match &forces {
            None => forces = Some(r.forces),
            Some(f) if f.to_bits() != r.forces.to_bits() => {
                return Err(Error::Collective("ranks disagree on reduced forces".into()));
            }
            Some(_) => {}
        }
    }
    blocks.sort_by_key(|b| b.block);
    Ok(RunResult {
        blocks,
        forces: forces.expect("at least one rank"),
        per_rank,
        iteration_wall_s,
        wall_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exchange::{ExchangeMode, ThreadMode};
    use crate::hybrid::{ActivationMode, Axis};
    use crate::mesh::NamedCase;
    use crate::reduce::{Functag, ReduceMode};

    #[test]
    fn tiny_serial_and_parallel_agree() {
        let case = NamedCase::TcTiny;
        let topo = case.topology().unwrap();
        let params = case.config().params;
        let serial = run(&topo, &params, &RunConfig::new(1, 5)).unwrap();
        let mut cfg = RunConfig::new(2, 5);
        cfg.team = TeamConfig { threads: 2, axis: Axis::GridPoints, activation: ActivationMode::PerLoop };
        cfg.exchange = ExchangeStrategy { mode: ExchangeMode::PerElement, thread_mode: ThreadMode::TaggedThreads };
        cfg.reduce = ForceReduceStrategy { mode: ReduceMode::PerBodyPerHarmonic, functag: Functag::Three };
        let parallel = run(&topo, &params, &cfg).unwrap();
        assert_eq!(serial.field_bits(), parallel.field_bits());
        assert_eq!(serial.forces.to_bits(), parallel.forces.to_bits());
        assert_eq!(parallel.sum(|p| p.iterations).activations, 2 * 5 * 12);
        assert_eq!(parallel.per_rank[0].iterations.collectives, 5 * 3);
    }

    #[test]
    fn capacity_error_surfaces() {
        let case = NamedCase::TcTiny;
        let err = run(&case.topology().unwrap(), &case.config().params, &RunConfig::new(3, 1)).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
    }
}
