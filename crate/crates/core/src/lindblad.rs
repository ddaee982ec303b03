//! Phase-damping master equation and a fixed-step RK4 integrator.
//!
//! dρ/dt = −i[H, ρ] + (γ/2) Σ_{i=A,B} (2 L_i ρ L_i − L_i ρ − ρ L_i),
//! with L_i = |1⟩⟨1| on qubit i.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::matcore::{self, ComplexMatrix, C64};
use crate::model::{self, ModelError, ModelParams};
use crate::states::{DensityMatrix, StateError};

pub const DEFAULT_DT: f64 = 1e-3;
/// Trace drift beyond this aborts integration.
pub const TRACE_ABORT_TOL: f64 = 1e-8;
/// Anti-Hermitian drift accepted before the (ρ + ρ†)/2 projection at a node.
pub const HERMITIAN_DRIFT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LindbladError {
    #[error("invalid step size dt = {0}")]
    InvalidStep(f64),
    #[error("invalid time grid: {0}")]
    InvalidTimes(String),
    #[error("trace drifted by {drift:e} at t = {t}; step size too large?")]
    TraceDrift { t: f64, drift: f64 },
    #[error("Hermiticity drifted by {defect:e} at t = {t}")]
    HermiticityDrift { t: f64, defect: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    State(#[from] StateError),
}

/// How a trajectory was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Analytic,
    Integrator,
    Propagator,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::Analytic => "analytic",
            Route::Integrator => "integrator",
            Route::Propagator => "propagator",
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Route {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "analytic" => Ok(Route::Analytic),
            "integrator" => Ok(Route::Integrator),
            "propagator" => Ok(Route::Propagator),
            other => Err(format!("unknown route '{other}' (expected analytic, integrator or propagator)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub route: Route,
    pub params: ModelParams,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_trace_drift(&self) -> f64 {
        self.states.iter().map(|s| (s.matrix().trace().re - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over all nodes.
    pub fn min_eigenvalue(&self) -> Result<f64, StateError> {
        let mut min = f64::INFINITY;
        for s in &self.states {
            min = min.min(s.min_eigenvalue()?);
        }
        Ok(min)
    }
}

/// The Liouvillian with H and the projector diagonals precomputed.
#[derive(Debug, Clone)]
pub struct Generator {
    h: ComplexMatrix,
    gamma: f64,
    // Diagonal of |1⟩⟨1| on A and on B, in the |00⟩,|01⟩,|10⟩,|11⟩ basis.
    proj: [[f64; 4]; 2],
}

impl Generator {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            h: model::hamiltonian(params),
            gamma: params.gamma,
            proj: [[0.0, 0.0, 1.0, 1.0], [0.0, 1.0, 0.0, 1.0]],
        }
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let hr = matcore::mul_unchecked(&self.h, rho);
        let rh = matcore::mul_unchecked(rho, &self.h);
        let mut out = ComplexMatrix::zeros(4);
        let minus_i = C64::new(0.0, -1.0);
        for a in 0..4 {
            for b in 0..4 {
                let mut rate = 0.0;
                for l in &self.proj {
                    rate += 2.0 * l[a] * l[b] - l[a] - l[b];
                }
                out[(a, b)] = minus_i * (hr[(a, b)] - rh[(a, b)]) + rho[(a, b)] * (0.5 * self.gamma * rate);
            }
        }
        out
    }

    pub fn rk4_step(&self, rho: &ComplexMatrix, h: f64) -> ComplexMatrix {
        let k1 = self.apply(rho);
        let mut tmp = rho.clone();
        tmp.add_scaled(C64::new(h / 2.0, 0.0), &k1);
        let k2 = self.apply(&tmp);
        let mut tmp = rho.clone();
        tmp.add_scaled(C64::new(h / 2.0, 0.0), &k2);
        let k3 = self.apply(&tmp);
        let mut tmp = rho.clone();
        tmp.add_scaled(C64::new(h, 0.0), &k3);
        let k4 = self.apply(&tmp);
        let mut next = rho.clone();
        next.add_scaled(C64::new(h / 6.0, 0.0), &k1);
        next.add_scaled(C64::new(h / 3.0, 0.0), &k2);
        next.add_scaled(C64::new(h / 3.0, 0.0), &k3);
        next.add_scaled(C64::new(h / 6.0, 0.0), &k4);
        next
    }
}

/// Right-hand side of the master equation applied once.
pub fn master_rhs(rho: &ComplexMatrix, params: &ModelParams) -> ComplexMatrix {
    Generator::new(params).apply(rho)
}

fn check_dt(dt: f64) -> Result<(), LindbladError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(LindbladError::InvalidStep(dt));
    }
    Ok(())
}

/// RK4 with fixed step `dt`; nodes at every k·dt, plus `t_end` when it is
/// not a whole number of steps.
pub fn integrate(rho0: &DensityMatrix, params: &ModelParams, t_end: f64, dt: f64) -> Result<Trajectory, LindbladError> {
    check_dt(dt)?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(LindbladError::InvalidTimes(format!("t_end = {t_end} must be finite and >= 0")));
    }
    let ratio = t_end / dt;
    let whole = ratio.round();
    let n = if (ratio - whole).abs() <= 1e-9 * ratio.max(1.0) { whole as usize } else { ratio.floor() as usize };
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
    if n > 0 && (times[n] - t_end).abs() <= 1e-9 * t_end.max(1.0) {
        times[n] = t_end;
    } else if times[n] < t_end {
        times.push(t_end);
    }
    integrate_at(rho0, params, &times, dt)
}

/// RK4 sampled at the given times. Each interval is split into the fewest
/// equal substeps no longer than `dt`.
pub fn integrate_at(rho0: &DensityMatrix, params: &ModelParams, times: &[f64], dt: f64) -> Result<Trajectory, LindbladError> {
    check_dt(dt)?;
    params.validate()?;
    if times.first() != Some(&0.0) {
        return Err(LindbladError::InvalidTimes("time grid must start at 0".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
        return Err(LindbladError::InvalidTimes("times must be finite and strictly ascending".into()));
    }
    let gen = Generator::new(params);
    let mut states = Vec::with_capacity(times.len());
    let mut rho = rho0.matrix().clone();
    states.push(rho0.clone());
    for w in times.windows(2) {
        let span = w[1] - w[0];
        let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for _ in 0..steps {
            rho = gen.rk4_step(&rho, h);
        }
        let t = w[1];
        if !rho.is_finite() {
            return Err(LindbladError::NonFinite { t });
        }
        let defect = rho.hermiticity_defect();
        if defect > HERMITIAN_DRIFT_TOL {
            return Err(LindbladError::HermiticityDrift { t, defect });
        }
        rho = rho.hermitian_part();
        let drift = (rho.trace().re - 1.0).abs();
        if drift > TRACE_ABORT_TOL {
            return Err(LindbladError::TraceDrift { t, drift });
        }
        states.push(DensityMatrix::new_relaxed(rho.clone())?);
    }
    Ok(Trajectory { times: times.to_vec(), states, route: Route::Integrator, params: *params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{self, horodecki_state, maximally_mixed, purity, random_density, seeded_rng};

    fn reference() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn undamped_rhs_is_commutator() {
        let params = ModelParams { gamma: 0.0, ..reference() };
        let mut rng = seeded_rng(1, 0);
        let rho = random_density(4, &mut rng).unwrap();
        let h = model::hamiltonian(&params);
        let comm = matcore::multiply(&h, rho.matrix()).unwrap().sub(&matcore::multiply(rho.matrix(), &h).unwrap()).unwrap();
        let want = comm.scale(C64::new(0.0, -1.0));
        assert!(master_rhs(rho.matrix(), &params).max_abs_diff(&want) < 1e-15);
    }

    /// Dissipator written with explicit projector matrices, for comparison
    /// with the elementwise form in `Generator`.
    fn dissipator_oracle(rho: &ComplexMatrix, gamma: f64) -> ComplexMatrix {
        let one = ComplexMatrix::from_real_diagonal(&[0.0, 1.0]);
        let id = ComplexMatrix::identity(2);
        let mut out = ComplexMatrix::zeros(4);
        for l in [one.kron(&id), id.kron(&one)] {
            let lrl = matcore::multiply(&matcore::multiply(&l, rho).unwrap(), &l).unwrap();
            let lr = matcore::multiply(&l, rho).unwrap();
            let rl = matcore::multiply(rho, &l).unwrap();
            out.add_scaled(C64::new(gamma, 0.0), &lrl);
            out.add_scaled(C64::new(-gamma / 2.0, 0.0), &lr);
            out.add_scaled(C64::new(-gamma / 2.0, 0.0), &rl);
        }
        out
    }

    #[test]
    fn dissipator_matches_projector_form() {
        let mut rng = seeded_rng(2, 0);
        let params = ModelParams { jx: 0.0, jy: 0.0, jz: 0.0, chi: 0.0, gamma: 0.37, p: 0.5 };
        for _ in 0..20 {
            let rho = random_density(4, &mut rng).unwrap();
            let got = master_rhs(rho.matrix(), &params);
            assert!(got.max_abs_diff(&dissipator_oracle(rho.matrix(), 0.37)) < 1e-15);
        }
    }

    #[test]
    fn maximally_mixed_is_stationary() {
        for gamma in [0.0, 0.25, 3.0] {
            let rhs = master_rhs(maximally_mixed().matrix(), &ModelParams { gamma, ..reference() });
            assert!(rhs.max_abs() < 1e-15);
        }
    }

    #[test]
    fn rhs_is_traceless_and_hermitian() {
        let mut rng = seeded_rng(3, 0);
        for gamma in [0.0, 0.25, 1.0] {
            let params = ModelParams { gamma, ..reference() };
            for rank in 1..=4 {
                let rho = random_density(rank, &mut rng).unwrap();
                let rhs = master_rhs(rho.matrix(), &params);
                assert!(rhs.trace().norm() < 1e-14);
                assert!(rhs.hermiticity_defect() < 1e-14);
            }
        }
    }

    #[test]
    fn coherence_decay_rates_follow_hamming_distance() {
        // With H = 0 the element ρ_ab decays at (γ/2)·(number of differing bits).
        let params = ModelParams { jx: 0.0, jy: 0.0, jz: 0.0, chi: 0.0, gamma: 1.0, p: 0.5 };
        let mut rho = ComplexMatrix::zeros(4);
        for a in 0..4 {
            for b in 0..4 {
                rho[(a, b)] = C64::new(1.0, 0.0);
            }
        }
        let rhs = master_rhs(&rho, &params);
        for a in 0..4usize {
            for b in 0..4usize {
                let hamming = (a ^ b).count_ones() as f64;
                assert!((rhs[(a, b)].re + 0.5 * hamming).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn undamped_integration_matches_propagator() {
        let params = ModelParams { gamma: 0.0, p: 1.0, ..reference() };
        let rho0 = horodecki_state(1.0).unwrap();
        let traj = integrate(&rho0, &params, 10.0, 1e-3).unwrap();
        assert_eq!(traj.len(), 10_001);
        assert_eq!(*traj.times.last().unwrap(), 10.0);
        let mut worst: f64 = 0.0;
        for (t, s) in traj.times.iter().zip(&traj.states).step_by(50) {
            let u = model::propagator(&params, *t).unwrap();
            let exact = model::unitary_evolve(&rho0, &u).unwrap();
            worst = worst.max(exact.matrix().max_abs_diff(s.matrix()));
        }
        assert!(worst <= 1e-8, "max deviation {worst:e}");
    }

    #[test]
    fn damped_integration_preserves_trace_and_positivity() {
        for p in [0.0, 0.33, 0.66, 1.0] {
            let params = ModelParams { gamma: 0.25, p, ..reference() };
            let traj = integrate(&horodecki_state(p).unwrap(), &params, 10.0, 1e-3).unwrap();
            assert!(traj.max_trace_drift() <= 1e-10);
            let min = traj.states.iter().step_by(100).map(|s| s.min_eigenvalue().unwrap()).fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-9);
        }
    }

    #[test]
    fn step_halving_is_fourth_order() {
        let params = ModelParams { gamma: 0.25, p: 0.5, ..reference() };
        let rho0 = horodecki_state(0.5).unwrap();
        let final_state = |dt: f64| integrate(&rho0, &params, 2.0, dt).unwrap().states.last().unwrap().matrix().clone();
        let coarse = final_state(0.04);
        let mid = final_state(0.02);
        let fine = final_state(0.01);
        let e1 = coarse.max_abs_diff(&mid);
        let e2 = mid.max_abs_diff(&fine);
        let ratio = e1 / e2;
        // RK4: halving dt shrinks the error ~16x; accept a factor of 4 either way.
        assert!(ratio > 4.0 && ratio < 64.0, "ratio {ratio}");

        // At the production step the halving change is tiny.
        let a = final_state(1e-3);
        let b = final_state(5e-4);
        assert!(a.max_abs_diff(&b) < 1e-10, "{}", a.max_abs_diff(&b));
    }

    #[test]
    fn dissipator_fixes_computational_basis_states() {
        let params = ModelParams { jx: 0.0, jy: 0.0, jz: 0.0, chi: 0.0, gamma: 0.8, p: 0.5 };
        for k in 0..4 {
            let rho0 = states::basis_state(k);
            let traj = integrate(&rho0, &params, 2.0, 1e-2).unwrap();
            assert!(traj.states.last().unwrap().matrix().max_abs_diff(rho0.matrix()) < 1e-15);
        }
        let diag = DensityMatrix::new(ComplexMatrix::from_real_diagonal(&[0.1, 0.2, 0.3, 0.4])).unwrap();
        assert!(master_rhs(diag.matrix(), &params).max_abs() == 0.0);
    }

    #[test]
    fn pure_dephasing_never_raises_purity() {
        let params = ModelParams { jx: 0.0, jy: 0.0, jz: 0.0, chi: 0.0, gamma: 0.5, p: 0.5 };
        let mut rng = seeded_rng(9, 0);
        for rank in 1..=4 {
            let rho0 = random_density(rank, &mut rng).unwrap();
            let traj = integrate(&rho0, &params, 5.0, 1e-2).unwrap();
            let purities: Vec<f64> = traj.states.iter().map(purity).collect();
            assert!(purities.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        }
    }

    #[test]
    fn node_grid_includes_ragged_end() {
        let params = reference();
        let rho0 = horodecki_state(0.5).unwrap();
        let traj = integrate(&rho0, &params, 0.0105, 1e-3).unwrap();
        assert_eq!(traj.len(), 12);
        assert_eq!(*traj.times.last().unwrap(), 0.0105);
        let traj = integrate(&rho0, &params, 0.0, 1e-3).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.states[0], rho0);
    }

    #[test]
    fn integrate_at_custom_grid() {
        let params = ModelParams { gamma: 0.25, p: 0.66, ..reference() };
        let rho0 = horodecki_state(0.66).unwrap();
        let times: Vec<f64> = (0..11).map(|k| k as f64 * 10.0 / 10.0 / 3.0).collect();
        let a = integrate_at(&rho0, &params, &times, 1e-3).unwrap();
        let b = integrate_at(&rho0, &params, &times, 5e-4).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!(x.matrix().max_abs_diff(y.matrix()) < 1e-10);
        }
        assert!(integrate_at(&rho0, &params, &[0.0, 1.0, 0.5], 1e-3).is_err());
        assert!(integrate_at(&rho0, &params, &[0.5, 1.0], 1e-3).is_err());
    }

    #[test]
    fn bad_inputs_rejected() {
        let rho0 = horodecki_state(0.5).unwrap();
        assert!(matches!(integrate(&rho0, &reference(), 1.0, 0.0), Err(LindbladError::InvalidStep(_))));
        assert!(matches!(integrate(&rho0, &reference(), 1.0, f64::NAN), Err(LindbladError::InvalidStep(_))));
        assert!(integrate(&rho0, &reference(), -1.0, 1e-3).is_err());
    }

    #[test]
    fn oversized_step_is_detected() {
        // A huge step blows the RK4 iteration up; the run must abort rather
        // than emit garbage.
        let params = ModelParams { jz: 50.0, chi: 40.0, gamma: 30.0, ..reference() };
        let rho0 = horodecki_state(0.5).unwrap();
        let err = integrate(&rho0, &params, 50.0, 1.0).unwrap_err();
        assert!(matches!(
            err,
            LindbladError::TraceDrift { .. } | LindbladError::HermiticityDrift { .. } | LindbladError::NonFinite { .. }
        ), "{err:?}");
    }

    #[test]
    fn route_parsing() {
        for r in [Route::Analytic, Route::Integrator, Route::Propagator] {
            assert_eq!(r.as_str().parse::<Route>().unwrap(), r);
        }
        assert!("rk4".parse::<Route>().is_err());
    }
}
