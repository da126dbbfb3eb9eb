use std::sync::atomic::Ordering;

use super::field::{FieldView, HarmonicField};
use super::forces::{compute_forces, ForceCoefficients};
use super::residual::{initial_value, residual_row, BlockForcing, Shape};
use super::spectral::SpectralDeriv;
use crate::error::{Error, Result};
use crate::exchange::{CutPlan, ExchangeStrategy, Exchanger};
use crate::hybrid::{first_touch_init, InitPlan, Nest, SharedSlice, Team, TeamConfig, TeamSync, WorkUnit};
use crate::mesh::{BlockSpec, CaseParams, Partition, Topology};
use crate::runtime::RankContext;

/// Stage coefficients of the four-stage pseudo-time scheme.
pub const RK_ALPHA: [f64; 4] = [0.25, 1.0 / 3.0, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RkScheme {
    pub alpha: [f64; 4],
    pub dtau: f64,
}

impl RkScheme {
    /// `dtau = 0` is accepted and makes every iteration the identity.
    pub fn new(dtau: f64) -> Result<Self> {
        if !dtau.is_finite() || dtau < 0.0 {
            return Err(Error::Usage(format!("dtau must be finite and non-negative, got {dtau}")));
        }
        Ok(RkScheme { alpha: RK_ALPHA, dtau })
    }

    /// `alpha[s] * dtau`.
    pub fn stage_factor(&self, s: usize) -> f64 {
        self.alpha[s] * self.dtau
    }
}

/// Solver state of one rank: its blocks, stage storage, thread team and
/// exchange buffers.
///
/// One iteration runs four stages. Each stage is three loop nests over the
/// team's work units: residual, update `q = q0 - alpha dtau R`, and halo
/// exchange.
pub struct RankSolver<'t> {
    topo: &'t Topology,
    specs: Vec<&'t BlockSpec>,
    field: HarmonicField,
    q0: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    forcing: Vec<BlockForcing>,
    spectral: SpectralDeriv,
    scheme: RkScheme,
    team: Team,
    team_cfg: TeamConfig,
    units: Vec<Vec<WorkUnit>>,
    exchanger: Exchanger,
    strategy: ExchangeStrategy,
}

impl<'t> RankSolver<'t> {
    pub fn new(
        topo: &'t Topology,
        partition: &Partition,
        params: &CaseParams,
        plan: &CutPlan,
        team_cfg: TeamConfig,
        strategy: ExchangeStrategy,
        rank: usize,
    ) -> Result<Self> {
        if team_cfg.threads == 0 {
            return Err(Error::Usage("threads per rank must be at least 1".into()));
        }
        let scheme = RkScheme::new(params.dtau)?;
        let nplanes = params.nplanes();
        let specs: Vec<&BlockSpec> = partition.blocks_of(rank).into_iter().map(|b| topo.block(b)).collect();
        let field = HarmonicField::zeroed(&specs, params.npde, nplanes);
        let units = InitPlan::new(&team_cfg, &field).compute().to_vec();
        let len = |s: &BlockSpec| (s.ni + 2) * (s.nj + 2) * params.npde * nplanes;
        Ok(RankSolver {
            topo,
            q0: specs.iter().map(|s| vec![0.0; len(s)]).collect(),
            r: specs.iter().map(|s| vec![0.0; len(s)]).collect(),
            forcing: specs.iter().map(|s| BlockForcing::new(s, params.npde, nplanes)).collect(),
            specs,
            field,
            spectral: SpectralDeriv::new(params.nharms, params.omega),
            scheme,
            team: Team::new(team_cfg.threads),
            team_cfg,
            units,
            exchanger: Exchanger::new(plan, rank),
            strategy,
        })
    }

    pub fn field(&self) -> &HarmonicField {
        &self.field
    }

    pub fn into_field(self) -> HarmonicField {
        self.field
    }

    pub fn team(&self) -> &Team {
        &self.team
    }

    pub fn team_config(&self) -> TeamConfig {
        self.team_cfg
    }

    pub fn forces(&self) -> ForceCoefficients {
        compute_forces(&self.field, self.topo)
    }

    /// First-touch initialisation followed by one halo exchange. Team
    /// activations are counted as setup.
    pub fn initialise(&mut self, ctx: &RankContext<'_>) -> Result<()> {
        let before = self.team.activations();
        let plan = InitPlan::new(&self.team_cfg, &self.field);
        let topo = self.topo;
        first_touch_init(&mut self.field, &plan, &self.team, |b, i, j, p, n| {
            let (x, y) = topo.block(b).cell_centre(i, j);
            initial_value(x, y, p, n)
        })?;
        let result = self.exchanger.exchange_halos(&mut self.field, self.strategy, ctx, &self.team);
        ctx.counters.setup_activations.fetch_add(self.team.activations() - before, Ordering::SeqCst);
        result
    }

    /// One pseudo-time iteration.
    pub fn iterate(&mut self, ctx: &RankContext<'_>) -> Result<()> {
        let before = self.team.activations();
        let base = self.exchanger.reserve(4);
        let npde = self.field.blocks.first().map_or(0, |b| b.npde);
        let shapes: Vec<Shape> =
            self.field.blocks.iter().map(|b| Shape { ni: b.ni, nj: b.nj, npde: b.npde, nplanes: b.nplanes }).collect();
        let hs: Vec<f64> = self.specs.iter().map(|s| s.h).collect();
        let ids: Vec<usize> = self.specs.iter().map(|s| s.id).collect();

        let view = FieldView::new(&mut self.field);
        let q0: Vec<SharedSlice<'_>> = self.q0.iter_mut().map(|v| SharedSlice::new(v)).collect();
        let r: Vec<SharedSlice<'_>> = self.r.iter_mut().map(|v| SharedSlice::new(v)).collect();
        let round = self.exchanger.round();
        let (units, spectral, forcing, scheme, strategy) =
            (&self.units, &self.spectral, &self.forcing, self.scheme, self.strategy);
        let (view, round, q0, r, shapes) = (&view, &round, &q0, &r, &shapes);

        let residual = move |tid: usize, _: &TeamSync| -> Result<()> {
            let mut acc = Vec::new();
            for u in &units[tid] {
                let shape = shapes[u.local];
                acc.resize(shape.ni + 2, 0.0);
                // SAFETY: q is only read while residuals are evaluated.
                let q = unsafe { view.blocks[u.local].data.slice(0..shape.len()) };
                // n innermost so the planes of one (j, p) row stay cached.
                for p in 0..npde {
                    for j in u.j.clone() {
                        for n in u.n.clone() {
                            let s = shape.row_start(j, p, n);
                            // SAFETY: work units give each (j, n) row to one thread.
                            let out = unsafe { r[u.local].slice_mut(s..s + shape.ni + 2) };
                            let f = forcing[u.local].row(j, p, n);
                            residual_row(q, shape, hs[u.local], spectral, f, j, p, n, out, &mut acc);
                        }
                    }
                }
            }
            Ok(())
        };

        let update = |stage: usize| -> Box<Nest<'_>> {
            let c = scheme.stage_factor(stage);
            let ids = &ids;
            Box::new(move |tid, _| {
                for u in &units[tid] {
                    let shape = shapes[u.local];
                    let ni = shape.ni;
                    for n in u.n.clone() {
                        for p in 0..npde {
                            for j in u.j.clone() {
                                let start = shape.row_start(j, p, n) + 1;
                                let row = start..start + ni;
                                // SAFETY: work units give each (j, n) row to one thread.
                                let (q, q0, r) = unsafe {
                                    (
                                        view.blocks[u.local].data.slice_mut(row.clone()),
                                        q0[u.local].slice_mut(row.clone()),
                                        r[u.local].slice(row),
                                    )
                                };
                                if stage == 0 {
                                    q0.copy_from_slice(q);
                                }
                                for ((q, q0), r) in q.iter_mut().zip(q0.iter()).zip(r) {
                                    *q = q0 - c * r;
                                }
                                if let Some(i) = q.iter().position(|v| !v.is_finite()) {
                                    return Err(Error::Divergence {
                                        block: ids[u.local],
                                        i: i + 1,
                                        j,
                                        pde: p,
                                        plane: n,
                                    });
                                }
                            }
                        }
                    }
                }
                Ok(())
            })
        };

        let exchange = |stage: usize| -> Box<Nest<'_>> {
            Box::new(move |tid, sync| round.exchange(tid, sync, view, strategy, ctx, base + stage as u64))
        };

        let updates: Vec<Box<Nest<'_>>> = (0..4).map(update).collect();
        let exchanges: Vec<Box<Nest<'_>>> = (0..4).map(exchange).collect();
        let mut nests: Vec<&Nest<'_>> = Vec::with_capacity(12);
        for s in 0..4 {
            nests.push(&residual);
            nests.push(updates[s].as_ref());
            nests.push(exchanges[s].as_ref());
        }
        let result = self.team.run_nests(self.team_cfg.activation, &nests);
        ctx.counters.activations.fetch_add(self.team.activations() - before, Ordering::SeqCst);
        result
    }
}
