//! Two-qubit states in the computational basis |00⟩, |01⟩, |10⟩, |11⟩
//! (qubit A is the left tensor factor).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::matcore::{self, ComplexMatrix, MatError, C64, ONE, ZERO};

pub const STATE_HERMITIAN_TOL: f64 = 1e-10;
pub const STATE_TRACE_TOL: f64 = 1e-10;
pub const STATE_MIN_EIGENVALUE: f64 = -1e-9;
pub const PURE_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error(transparent)]
    Matrix(#[from] MatError),
    #[error("density matrix must be 2x2 or 4x4, got {0}x{0}")]
    BadDimension(usize),
    #[error("density matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("density matrix trace is {0}, expected 1")]
    BadTrace(f64),
    #[error("density matrix has negative eigenvalue {0:e}")]
    NotPositive(f64),
    #[error("pure state norm is {0}, expected 1")]
    NotNormalized(f64),
    #[error("{name} = {value} is outside {range}")]
    OutOfRange { name: &'static str, value: f64, range: &'static str },
}

/// Which qubit to keep in a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// A validated density matrix (4x4 for the pair, 2x2 for a reduced state).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Full validation: Hermitian, unit trace, positive semidefinite.
    pub fn new(matrix: ComplexMatrix) -> Result<Self, StateError> {
        let rho = Self::new_relaxed(matrix)?;
        let min = rho.min_eigenvalue()?;
        if min < STATE_MIN_EIGENVALUE {
            return Err(StateError::NotPositive(min));
        }
        Ok(rho)
    }

    /// Hermiticity and trace only. Positivity is left to the caller; used for
    /// integrator output where round-off can dip just below zero.
    pub fn new_relaxed(matrix: ComplexMatrix) -> Result<Self, StateError> {
        let d = matrix.dim();
        if d != 2 && d != 4 {
            return Err(StateError::BadDimension(d));
        }
        if !matrix.is_finite() {
            return Err(StateError::Matrix(MatError::NonFinite { row: 0, col: 0 }));
        }
        let defect = matrix.hermiticity_defect();
        if defect > STATE_HERMITIAN_TOL {
            return Err(StateError::NotHermitian(defect));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TRACE_TOL || tr.im.abs() > STATE_TRACE_TOL {
            return Err(StateError::BadTrace(tr.re));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn element(&self, i: usize, j: usize) -> C64 {
        self.matrix[(i, j)]
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>, StateError> {
        Ok(matcore::hermitian_eigen(&self.matrix)?.eigenvalues)
    }

    pub fn min_eigenvalue(&self) -> Result<f64, StateError> {
        Ok(self.eigenvalues()?[0])
    }

    /// Number of eigenvalues above `tol`.
    pub fn numerical_rank(&self, tol: f64) -> Result<usize, StateError> {
        Ok(self.eigenvalues()?.iter().filter(|&&l| l > tol).count())
    }
}

/// A normalized two-qubit pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: [C64; 4],
}

impl PureState {
    pub fn new(amplitudes: [C64; 4]) -> Result<Self, StateError> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>();
        if (norm - 1.0).abs() > PURE_NORM_TOL {
            return Err(StateError::NotNormalized(norm));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales to unit norm. Panics on the zero vector.
    pub fn normalized(amplitudes: [C64; 4]) -> Self {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm > 0.0, "cannot normalize the zero vector");
        Self { amplitudes: amplitudes.map(|a| a / norm) }
    }

    pub fn basis(index: usize) -> Self {
        let mut amplitudes = [ZERO; 4];
        amplitudes[index] = ONE;
        Self { amplitudes }
    }

    /// (|01⟩ + |10⟩)/√2.
    pub fn psi_plus() -> Self {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { amplitudes: [ZERO, h, h, ZERO] }
    }

    pub fn amplitudes(&self) -> &[C64; 4] {
        &self.amplitudes
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix { matrix: ComplexMatrix::outer(&self.amplitudes, &self.amplitudes) }
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }
}

/// |Ψ⁺⟩⟨Ψ⁺|.
pub fn psi_plus_state() -> DensityMatrix {
    PureState::psi_plus().projector()
}

/// I/4.
pub fn maximally_mixed() -> DensityMatrix {
    DensityMatrix { matrix: ComplexMatrix::from_real_diagonal(&[0.25; 4]) }
}

pub fn basis_state(index: usize) -> DensityMatrix {
    PureState::basis(index).projector()
}

pub fn partial_trace(rho: &DensityMatrix, keep: Subsystem) -> Result<DensityMatrix, StateError> {
    if rho.dim() != 4 {
        return Err(StateError::BadDimension(rho.dim()));
    }
    let m = rho.matrix();
    let mut out = ComplexMatrix::zeros(2);
    for x in 0..2 {
        for y in 0..2 {
            out[(x, y)] = (0..2)
                .map(|k| match keep {
                    Subsystem::A => m[(2 * x + k, 2 * y + k)],
                    Subsystem::B => m[(2 * k + x, 2 * k + y)],
                })
                .sum();
        }
    }
    Ok(DensityMatrix { matrix: out })
}

/// The Wootters spin-flipped matrix (σy⊗σy) ρ* (σy⊗σy).
pub fn spin_flip(rho: &DensityMatrix) -> Result<ComplexMatrix, StateError> {
    if rho.dim() != 4 {
        return Err(StateError::BadDimension(rho.dim()));
    }
    Ok(spin_flip_matrix(rho.matrix()))
}

pub(crate) fn spin_flip_matrix(m: &ComplexMatrix) -> ComplexMatrix {
    let yy = sigma_yy();
    let left = matcore::mul_unchecked(&yy, &m.conj());
    matcore::mul_unchecked(&left, &yy)
}

pub(crate) fn sigma_yy() -> ComplexMatrix {
    ComplexMatrix::pauli_y().kron(&ComplexMatrix::pauli_y())
}

/// tr(ρ²).
pub fn purity(rho: &DensityMatrix) -> f64 {
    let t = matcore::trace_product(rho.matrix(), rho.matrix()).expect("square matrix");
    debug_assert!(t.im.abs() <= 1e-12, "purity has imaginary part {}", t.im);
    t.re
}

/// p|Φ⟩⟨Φ| + (1−p)|11⟩⟨11| with |Φ⟩ = (|10⟩ + |01⟩)/√2.
pub fn horodecki_state(p: f64) -> Result<DensityMatrix, StateError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(StateError::OutOfRange { name: "p", value: p, range: "[0, 1]" });
    }
    let mut m = ComplexMatrix::zeros(4);
    let half = C64::new(p / 2.0, 0.0);
    m[(1, 1)] = half;
    m[(2, 2)] = half;
    m[(1, 2)] = half;
    m[(2, 1)] = half;
    m[(3, 3)] = C64::new(1.0 - p, 0.0);
    Ok(DensityMatrix { matrix: m })
}

/// Seeded generator; `stream` splits one seed into independent sequences.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

/// ρ = G G† / tr(G G†) with G a 4×rank complex Ginibre matrix.
pub fn random_density<R: Rng + ?Sized>(rank: usize, rng: &mut R) -> Result<DensityMatrix, StateError> {
    if !(1..=4).contains(&rank) {
        return Err(StateError::OutOfRange { name: "rank", value: rank as f64, range: "1..=4" });
    }
    let g: Vec<[C64; 4]> = (0..rank).map(|_| std::array::from_fn(|_| complex_gaussian(rng))).collect();
    let mut m = ComplexMatrix::zeros(4);
    for col in &g {
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] += col[i] * col[j].conj();
            }
        }
    }
    let tr = m.trace().re;
    let m = m.scale_real(1.0 / tr).hermitian_part();
    Ok(DensityMatrix { matrix: m })
}

/// Four complex Gaussians, normalized (unitarily invariant distribution).
pub fn random_pure<R: Rng + ?Sized>(rng: &mut R) -> PureState {
    PureState::normalized(std::array::from_fn(|_| complex_gaussian(rng)))
}
