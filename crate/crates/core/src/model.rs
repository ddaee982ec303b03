//! The two-qubit XYZ Heisenberg Hamiltonian with a z-axis
//! Dzyaloshinsky–Moriya term, its exact eigensystem, the unitary propagator,
//! and the closed-form phase-damped evolution of the Horodecki state.
//!
//! Units: ħ = 1, so energies and inverse times share a scale.

use serde::Serialize;
use thiserror::Error;

use crate::matcore::{self, ComplexMatrix, MatError, C64, ZERO};
use crate::states::{self, DensityMatrix, PureState, StateError};

/// Max ‖H v − E v‖ accepted when validating the eigensystem.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParam { name: &'static str, value: f64, reason: &'static str },
    #[error("eigenpair {index} fails H v = E v (residual {residual:e})")]
    EigenResidual { index: usize, residual: f64 },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Matrix(#[from] MatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    /// z-component of the DM vector.
    pub chi: f64,
    /// Phase-damping rate, identical on both qubits.
    pub gamma: f64,
    /// Weight of |Φ⟩ in the initial Horodecki state.
    pub p: f64,
}

impl Default for ModelParams {
    /// Jx = 0.5, Jy = 0.3, Jz = 0.8, χ = 1, γ = 0, p = 1.
    fn default() -> Self {
        Self { jx: 0.5, jy: 0.3, jz: 0.8, chi: 1.0, gamma: 0.0, p: 1.0 }
    }
}

impl ModelParams {
    pub fn new(jx: f64, jy: f64, jz: f64, chi: f64, gamma: f64, p: f64) -> Result<Self, ModelError> {
        let params = Self { jx, jy, jz, chi, gamma, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [("jx", self.jx), ("jy", self.jy), ("jz", self.jz), ("chi", self.chi)] {
            if !value.is_finite() {
                return Err(ModelError::InvalidParam { name, value, reason: "must be finite" });
            }
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(ModelError::InvalidParam { name: "gamma", value: self.gamma, reason: "must be finite and >= 0" });
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(ModelError::InvalidParam { name: "p", value: self.p, reason: "must lie in [0, 1]" });
        }
        Ok(())
    }

    pub fn with_p(self, p: f64) -> Self {
        Self { p, ..self }
    }

    pub fn with_chi(self, chi: f64) -> Self {
        Self { chi, ..self }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        Self { gamma, ..self }
    }

    pub fn derived(&self) -> DerivedConstants {
        DerivedConstants::from_params(self)
    }
}

/// β = √(4χ² + (Jx + Jy)²), u = (Jx + Jy)/β, v = 2χ/β, ξ = u + iv.
///
/// When β = 0 the inner block is degenerate and (u, v) is fixed to (1, 0),
/// which keeps the closed-form solution continuous in that limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub beta: f64,
    pub u: f64,
    pub v: f64,
    pub xi: C64,
}

impl DerivedConstants {
    pub fn from_params(params: &ModelParams) -> Self {
        let s = params.jx + params.jy;
        let beta = (4.0 * params.chi * params.chi + s * s).sqrt();
        let (u, v) = if beta > 0.0 { (s / beta, 2.0 * params.chi / beta) } else { (1.0, 0.0) };
        Self { beta, u, v, xi: C64::new(u, v) }
    }
}

/// H = Jx σxσx + Jy σyσy + Jz σzσz + χ(σxσy − σyσx).
pub fn hamiltonian(params: &ModelParams) -> ComplexMatrix {
    let (x, y, z) = (ComplexMatrix::pauli_x(), ComplexMatrix::pauli_y(), ComplexMatrix::pauli_z());
    let mut h = ComplexMatrix::zeros(4);
    h.add_scaled(C64::new(params.jx, 0.0), &x.kron(&x));
    h.add_scaled(C64::new(params.jy, 0.0), &y.kron(&y));
    h.add_scaled(C64::new(params.jz, 0.0), &z.kron(&z));
    h.add_scaled(C64::new(params.chi, 0.0), &x.kron(&y));
    h.add_scaled(C64::new(-params.chi, 0.0), &y.kron(&x));
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub energies: [f64; 4],
    pub vectors: [PureState; 4],
    /// Set when β = 0; the inner-block basis is then an arbitrary choice.
    pub degenerate: bool,
}

/// Exact eigenpairs, built in closed form and checked against `hamiltonian`.
///
/// Outer block (|00⟩, |11⟩): (|00⟩ ± |11⟩)/√2 with Jz ± (Jx − Jy).
/// Inner block (|01⟩, |10⟩): (|01⟩ ± ξ*|10⟩)/√2 with −Jz ± β.
pub fn eigensystem(params: &ModelParams) -> Result<(EigenSystem, DerivedConstants), ModelError> {
    params.validate()?;
    let d = params.derived();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let h = C64::new(r, 0.0);
    let delta = params.jx - params.jy;
    let energies = [params.jz + delta, -params.jz + d.beta, -params.jz - d.beta, params.jz - delta];
    let xc = d.xi.conj() * r;
    let vectors = [
        PureState::new([h, ZERO, ZERO, h])?,
        PureState::new([ZERO, h, xc, ZERO])?,
        PureState::new([ZERO, h, -xc, ZERO])?,
        PureState::new([h, ZERO, ZERO, -h])?,
    ];
    let ham = hamiltonian(params);
    for (index, (e, v)) in energies.iter().zip(&vectors).enumerate() {
        let amps = v.amplitudes();
        let residual = (0..4)
            .map(|i| {
                let hv: C64 = (0..4).map(|j| ham[(i, j)] * amps[j]).sum();
                (hv - amps[i] * e).norm_sqr()
            })
            .sum::<f64>()
            .sqrt();
        if residual > EIGEN_RESIDUAL_TOL {
            return Err(ModelError::EigenResidual { index, residual });
        }
    }
    Ok((EigenSystem { energies, vectors, degenerate: d.beta == 0.0 }, d))
}

/// U(t) = Σ_c e^{−iE_c t} |ψ_c⟩⟨ψ_c|.
pub fn propagator(params: &ModelParams, t: f64) -> Result<ComplexMatrix, ModelError> {
    if !t.is_finite() {
        return Err(ModelError::InvalidParam { name: "t", value: t, reason: "must be finite" });
    }
    let (sys, _) = eigensystem(params)?;
    let mut u = ComplexMatrix::zeros(4);
    for (e, v) in sys.energies.iter().zip(&sys.vectors) {
        let phase = C64::from_polar(1.0, -e * t);
        u.add_scaled(phase, &ComplexMatrix::outer(v.amplitudes(), v.amplitudes()));
    }
    Ok(u)
}

/// U ρ U†, for the γ = 0 route.
pub fn unitary_evolve(rho: &DensityMatrix, u: &ComplexMatrix) -> Result<DensityMatrix, ModelError> {
    let m = matcore::multiply(&matcore::multiply(u, rho.matrix())?, &u.adjoint())?;
    Ok(DensityMatrix::new_relaxed(m.hermitian_part())?)
}

/// Closed-form X state evolved from the Horodecki state.
///
/// Nonzero elements, with e = exp(−γt/2), δ = Jx − Jy:
///
/// ```text
/// ρ11 = (1−p)/2 · (1 − e cos 2δt)      ρ44 = (1−p)/2 · (1 + e cos 2δt)
/// ρ22 = p/2 + (pv/2) e sin 2βt         ρ33 = p/2 − (pv/2) e sin 2βt
/// ρ14 = −(i/2)(1−p) e sin 2δt
/// ρ23 = (pξ/2) e (u − iv cos 2βt)
/// ```
///
/// At γ = 0 this is the exact solution of the master equation. For γ > 0
/// the e^{−γt/2} envelope is a secular approximation; the integrator gives
/// the exact dephased dynamics.
pub fn analytic_state(params: &ModelParams, t: f64) -> Result<DensityMatrix, ModelError> {
    params.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(ModelError::InvalidParam { name: "t", value: t, reason: "must be finite and >= 0" });
    }
    let DerivedConstants { beta, u, v, xi } = params.derived();
    let p = params.p;
    let q = 1.0 - p;
    let e = (-params.gamma * t / 2.0).exp();
    let outer = 2.0 * (params.jx - params.jy) * t;
    let inner = 2.0 * beta * t;

    let mut m = ComplexMatrix::zeros(4);
    m[(0, 0)] = C64::new(q / 2.0 * (1.0 - e * outer.cos()), 0.0);
    m[(3, 3)] = C64::new(q / 2.0 * (1.0 + e * outer.cos()), 0.0);
    m[(1, 1)] = C64::new(p / 2.0 + p * v / 2.0 * e * inner.sin(), 0.0);
    m[(2, 2)] = C64::new(p / 2.0 - p * v / 2.0 * e * inner.sin(), 0.0);
    let r14 = C64::new(0.0, -q / 2.0 * e * outer.sin());
    m[(0, 3)] = r14;
    m[(3, 0)] = r14.conj();
    let r23 = xi * (p / 2.0 * e) * C64::new(u, -v * inner.cos());
    m[(1, 2)] = r23;
    m[(2, 1)] = r23.conj();
    Ok(DensityMatrix::new_relaxed(m)?)
}

/// Initial state shared by every route.
pub fn initial_state(params: &ModelParams) -> Result<DensityMatrix, ModelError> {
    Ok(states::horodecki_state(params.p)?)
}
