//! Trajectories to measure records, bound checks, entanglement death
//! detection, route comparison, parameter sweeps and random-state audits.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::lindblad::{self, LindbladError, Route, Trajectory};
use crate::measures::{self, MeasureError, MeasureRecord};
use crate::model::{self, ModelError, ModelParams};
use crate::states::{self, StateError};

pub const VIOLATION_THRESHOLD: f64 = 1e-9;
pub const DEATH_THRESHOLD: f64 = 1e-9;
pub const RESIDUAL_TOL: f64 = 1e-10;
pub const LOWER_BOUND_TOL: f64 = 1e-12;
/// Allowed gap between the spectral concurrence and the X-state formula.
pub const X_CROSS_CHECK_TOL: f64 = 1e-8;

pub const DEFAULT_T_END: f64 = 10.0;
pub const DEFAULT_NODES: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lindblad(#[from] LindbladError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("{what} violated at t = {t}: {value:e}")]
    InvariantViolated { what: &'static str, t: f64, value: f64 },
    #[error("concurrence routes disagree at t = {t}: spectral {spectral} vs X-state {closed}")]
    RouteMismatch { t: f64, spectral: f64, closed: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// `nodes` uniform points on [0, t_end]; a single node means t = 0 only.
pub fn time_grid(t_end: f64, nodes: usize) -> Result<Vec<f64>, AnalysisError> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(AnalysisError::InvalidConfig(format!("t_end = {t_end} must be finite and >= 0")));
    }
    match nodes {
        0 => Err(AnalysisError::InvalidConfig("need at least one time node".into())),
        1 => Ok(vec![0.0]),
        _ if t_end == 0.0 => Err(AnalysisError::InvalidConfig("several nodes need t_end > 0".into())),
        _ => {
            let step = t_end / (nodes - 1) as f64;
            let mut grid: Vec<f64> = (0..nodes).map(|k| k as f64 * step).collect();
            grid[nodes - 1] = t_end;
            Ok(grid)
        }
    }
}

/// Evolves the Horodecki state of `params` along one route.
pub fn build_trajectory(params: &ModelParams, times: &[f64], route: Route, dt: f64) -> Result<Trajectory, AnalysisError> {
    params.validate()?;
    let rho0 = model::initial_state(params)?;
    let states = match route {
        Route::Integrator => return Ok(lindblad::integrate_at(&rho0, params, times, dt)?),
        Route::Analytic => times.iter().map(|&t| model::analytic_state(params, t)).collect::<Result<Vec<_>, _>>()?,
        Route::Propagator => {
            if params.gamma != 0.0 {
                return Err(AnalysisError::InvalidConfig("the propagator route only covers gamma = 0".into()));
            }
            times
                .iter()
                .map(|&t| model::unitary_evolve(&rho0, &model::propagator(params, t)?))
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    Ok(Trajectory { times: times.to_vec(), states, route, params: *params })
}

/// One record per node. Fails if a record breaks the conservation identity
/// or the lower bound, or if the X-state closed form disagrees with the
/// spectral concurrence.
pub fn measure_trajectory(traj: &Trajectory) -> Result<Vec<MeasureRecord>, AnalysisError> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, rho)| {
            let rec = MeasureRecord::evaluate(rho, t)?;
            if let Some(closed) = measures::x_state_concurrence(rho) {
                if (closed - rec.concurrence).abs() > X_CROSS_CHECK_TOL {
                    return Err(AnalysisError::RouteMismatch { t, spectral: rec.concurrence, closed });
                }
            }
            check_record(&rec)?;
            Ok(rec)
        })
        .collect()
}

pub fn check_record(rec: &MeasureRecord) -> Result<(), AnalysisError> {
    if rec.residual.abs() > RESIDUAL_TOL {
        return Err(AnalysisError::InvariantViolated { what: "IC^2 + F^2 = purity", t: rec.t, value: rec.residual });
    }
    if rec.lower_gap() > LOWER_BOUND_TOL {
        return Err(AnalysisError::InvariantViolated { what: "C <= IC", t: rec.t, value: rec.lower_gap() });
    }
    Ok(())
}

/// A maximal stretch where IC exceeds √((1 + C²)/2) by more than the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViolationInterval {
    pub t_start: f64,
    pub t_end: f64,
    pub t_peak: f64,
    pub max_excess: f64,
    pub params: ModelParams,
}

/// Runs of nodes with IC − √((1 + C²)/2) > 1e-9. Runs separated by a single
/// non-violating node are merged.
pub fn find_violations(records: &[MeasureRecord], params: &ModelParams) -> Vec<ViolationInterval> {
    let flagged: Vec<usize> =
        records.iter().enumerate().filter(|(_, r)| r.upper_excess() > VIOLATION_THRESHOLD).map(|(i, _)| i).collect();
    let mut out: Vec<(usize, usize)> = Vec::new();
    for i in flagged {
        match out.last_mut() {
            Some((_, end)) if i <= *end + 2 => *end = i,
            _ => out.push((i, i)),
        }
    }
    out.into_iter()
        .map(|(a, b)| {
            let peak = (a..=b)
                .filter(|&k| records[k].upper_excess() > VIOLATION_THRESHOLD)
                .max_by(|&x, &y| records[x].upper_excess().total_cmp(&records[y].upper_excess()))
                .unwrap_or(a);
            ViolationInterval {
                t_start: records[a].t,
                t_end: records[b].t,
                t_peak: records[peak].t,
                max_excess: records[peak].upper_excess(),
                params: *params,
            }
        })
        .collect()
}

/// Maximal runs of nodes with C ≤ 1e-9, as (t_start, t_end).
pub fn death_intervals(records: &[MeasureRecord]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut open: Option<f64> = None;
    let mut last_t = 0.0;
    for r in records {
        let dead = r.concurrence <= DEATH_THRESHOLD;
        match (dead, open) {
            (true, None) => open = Some(r.t),
            (false, Some(start)) => {
                out.push((start, last_t));
                open = None;
            }
            _ => {}
        }
        last_t = r.t;
    }
    if let Some(start) = open {
        out.push((start, last_t));
    }
    out
}

/// Whether the concurrence rises above the death threshold after `t`.
pub fn revives_after(records: &[MeasureRecord], t: f64) -> bool {
    records.iter().any(|r| r.t > t && r.concurrence > DEATH_THRESHOLD)
}

#[derive(Debug, Clone, Serialize)]
pub struct RouteComparison {
    pub params: ModelParams,
    pub t_end: f64,
    pub dt: f64,
    /// max over nodes and elements of |analytic − integrator|
    pub max_deviation: f64,
    pub times: Vec<f64>,
    /// Per node, the 16 elementwise moduli |analytic − integrator| in row-major order.
    pub series: Vec<[f64; 16]>,
}

impl RouteComparison {
    pub fn per_node_max(&self) -> Vec<f64> {
        self.series.iter().map(|row| row.iter().copied().fold(0.0, f64::max)).collect()
    }
}

/// Closed form against the RK4 integrator on the integrator's node grid.
pub fn compare_routes(params: &ModelParams, t_end: f64, dt: f64) -> Result<RouteComparison, AnalysisError> {
    let rho0 = model::initial_state(params)?;
    let traj = lindblad::integrate(&rho0, params, t_end, dt)?;
    let mut series = Vec::with_capacity(traj.len());
    let mut max_deviation: f64 = 0.0;
    for (&t, numeric) in traj.times.iter().zip(&traj.states) {
        let closed = model::analytic_state(params, t)?;
        let mut row = [0.0; 16];
        for (k, (a, b)) in closed.matrix().as_slice().iter().zip(numeric.matrix().as_slice()).enumerate() {
            row[k] = (a - b).norm();
            max_deviation = max_deviation.max(row[k]);
        }
        series.push(row);
    }
    Ok(RouteComparison { params: *params, t_end, dt, max_deviation, times: traj.times, series })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub p_values: Vec<f64>,
    pub chi_values: Vec<f64>,
    pub gamma_values: Vec<f64>,
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    pub t_end: f64,
    pub nodes: usize,
    pub dt: f64,
    pub seed: u64,
    pub routes: Vec<Route>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let base = ModelParams::default();
        Self {
            p_values: vec![0.0, 0.33, 0.66, 1.0],
            chi_values: vec![0.0, 0.5, 1.0],
            gamma_values: vec![0.0],
            jx: base.jx,
            jy: base.jy,
            jz: base.jz,
            t_end: DEFAULT_T_END,
            nodes: DEFAULT_NODES,
            dt: lindblad::DEFAULT_DT,
            seed: 0,
            routes: vec![Route::Analytic],
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |msg: &str| Err(AnalysisError::InvalidConfig(msg.to_string()));
        if self.p_values.is_empty() || self.chi_values.is_empty() || self.gamma_values.is_empty() {
            return bad("parameter grids must be non-empty");
        }
        if self.routes.is_empty() {
            return bad("at least one route is required");
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be positive");
        }
        if self.nodes < 2 {
            return bad("need at least two time nodes");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        for params in self.grid_points() {
            params.validate()?;
        }
        Ok(())
    }

    fn sorted(values: &[f64]) -> Vec<f64> {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// All (γ, χ, p) points in output order.
    pub fn grid_points(&self) -> Vec<ModelParams> {
        let mut out = Vec::new();
        for &gamma in &Self::sorted(&self.gamma_values) {
            for &chi in &Self::sorted(&self.chi_values) {
                for &p in &Self::sorted(&self.p_values) {
                    out.push(ModelParams { jx: self.jx, jy: self.jy, jz: self.jz, chi, gamma, p });
                }
            }
        }
        out
    }
}

/// Parameter grids behind the `figure` outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Figure {
    /// t × p surfaces at χ = 1 for γ = 0 and γ = 0.25.
    Fig2,
    /// 4 p-values × 3 χ-values, γ = 0.
    Fig3,
    /// Same panels with γ = 0.25.
    Fig4,
}

pub const FIG2_P_NODES: usize = 101;
pub const PANEL_P_VALUES: [f64; 4] = [0.0, 0.33, 0.66, 1.0];
pub const PANEL_CHI_VALUES: [f64; 3] = [0.0, 0.5, 1.0];
pub const DAMPED_GAMMA: f64 = 0.25;

impl Figure {
    pub const ALL: [Figure; 3] = [Figure::Fig2, Figure::Fig3, Figure::Fig4];

    pub fn as_str(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        }
    }

    /// Default sweep for this figure; `p_nodes` only affects fig2.
    pub fn sweep_config(self, p_nodes: usize) -> Result<SweepConfig, AnalysisError> {
        let (p_values, chi_values, gamma_values) = match self {
            Figure::Fig2 => {
                if p_nodes < 2 {
                    return Err(AnalysisError::InvalidConfig("fig2 needs at least two p values".into()));
                }
                (time_grid(1.0, p_nodes)?, vec![1.0], vec![0.0, DAMPED_GAMMA])
            }
            Figure::Fig3 => (PANEL_P_VALUES.to_vec(), PANEL_CHI_VALUES.to_vec(), vec![0.0]),
            Figure::Fig4 => (PANEL_P_VALUES.to_vec(), PANEL_CHI_VALUES.to_vec(), vec![DAMPED_GAMMA]),
        };
        Ok(SweepConfig { p_values, chi_values, gamma_values, ..SweepConfig::default() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub params: ModelParams,
    pub route: Route,
    pub record: MeasureRecord,
}

/// Evaluates the full grid. Rows come out ordered by (γ, χ, p, t, route)
/// whatever the worker count.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>, AnalysisError> {
    config.validate()?;
    let times = time_grid(config.t_end, config.nodes)?;
    let mut routes = config.routes.clone();
    routes.sort();
    routes.dedup();
    let points = config.grid_points();
    let jobs: Vec<(ModelParams, Route)> =
        points.iter().flat_map(|p| routes.iter().map(move |r| (*p, *r))).collect();
    let results: Vec<Vec<MeasureRecord>> = jobs
        .par_iter()
        .map(|(params, route)| {
            let traj = build_trajectory(params, &times, *route, config.dt)?;
            measure_trajectory(&traj)
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(results.len() * times.len());
    for (k, params) in points.iter().enumerate() {
        let block = &results[k * routes.len()..(k + 1) * routes.len()];
        for i in 0..times.len() {
            for (route, records) in routes.iter().zip(block) {
                rows.push(SweepRow { params: *params, route: *route, record: records[i] });
            }
        }
    }
    Ok(rows)
}

/// Summary of measures over a batch of random states of one rank.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankAudit {
    pub rank: usize,
    pub samples: usize,
    pub seed: u64,
    /// max |IC² + F² − purity|
    pub max_residual: f64,
    /// max (C − IC)
    pub max_lower_gap: f64,
    /// Samples with IC − √((1 + C²)/2) > 1e-9.
    pub upper_violations: usize,
    pub max_upper_excess: f64,
}

impl RankAudit {
    pub fn universal_invariants_hold(&self) -> bool {
        self.max_residual <= RESIDUAL_TOL && self.max_lower_gap <= LOWER_BOUND_TOL
    }
}

/// Stream index for the random states of a given rank.
fn rank_stream(rank: usize) -> u64 {
    rank as u64
}

/// Measures for `samples` Ginibre states of the given rank. Records carry
/// the sample index in their `t` field.
pub fn random_records(rank: usize, samples: usize, seed: u64) -> Result<Vec<MeasureRecord>, AnalysisError> {
    let mut rng = states::seeded_rng(seed, rank_stream(rank));
    let mut out = Vec::with_capacity(samples);
    for k in 0..samples {
        let rho = states::random_density(rank, &mut rng)?;
        out.push(MeasureRecord::evaluate(&rho, k as f64)?);
    }
    Ok(out)
}

pub fn audit_rank(rank: usize, samples: usize, seed: u64) -> Result<RankAudit, AnalysisError> {
    let records = random_records(rank, samples, seed)?;
    Ok(RankAudit {
        rank,
        samples,
        seed,
        max_residual: records.iter().map(|r| r.residual.abs()).fold(0.0, f64::max),
        max_lower_gap: records.iter().map(|r| r.lower_gap()).fold(f64::NEG_INFINITY, f64::max),
        upper_violations: records.iter().filter(|r| r.upper_excess() > VIOLATION_THRESHOLD).count(),
        max_upper_excess: records.iter().map(|r| r.upper_excess()).fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Pure-state checks: C² + F² = 1, and the reduced-purity concurrence
/// against the spectral one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PureAudit {
    pub samples: usize,
    pub seed: u64,
    /// max |C² + F² − 1|
    pub max_complementarity: f64,
    /// max |C_pure − C_spectral|
    pub max_route_gap: f64,
    /// max |C_pure − IC|
    pub max_ic_gap: f64,
}

pub const PURE_STREAM: u64 = 100;

pub fn audit_pure(samples: usize, seed: u64) -> Result<PureAudit, AnalysisError> {
    let mut rng = states::seeded_rng(seed, PURE_STREAM);
    let mut audit = PureAudit { samples, seed, max_complementarity: 0.0, max_route_gap: 0.0, max_ic_gap: 0.0 };
    for _ in 0..samples {
        let psi = states::random_pure(&mut rng);
        let rho = psi.projector();
        let c_pure = measures::concurrence_pure(&psi)?;
        let c = measures::concurrence(&rho)?;
        let ic = measures::intrinsic_concurrence(&rho)?;
        let f = measures::first_order_coherence(&rho)?.total;
        audit.max_complementarity = audit.max_complementarity.max((c * c + f * f - 1.0).abs());
        audit.max_route_gap = audit.max_route_gap.max((c_pure - c).abs());
        audit.max_ic_gap = audit.max_ic_gap.max((c_pure - ic).abs());
    }
    Ok(audit)
}
