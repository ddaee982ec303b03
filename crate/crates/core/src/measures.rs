//! Concurrence, intrinsic concurrence, first-order coherence and the
//! quantities relating them.

use serde::Serialize;
use thiserror::Error;

use crate::matcore::{self, MatError};
use crate::states::{self, DensityMatrix, PureState, StateError, Subsystem};

/// Square-root arguments in `[-SQRT_ARG_TOL, 0)` are round-off.
pub const SQRT_ARG_TOL: f64 = 1e-12;
/// Reported measures within this distance outside [0, 1] are snapped back.
pub const UNIT_CLAMP_TOL: f64 = 1e-12;
/// Largest tolerated imaginary part of a trace that is real in exact arithmetic.
pub const IMAG_TOL: f64 = 1e-12;
/// Entries below this modulus count as zero when testing for X shape.
pub const X_SHAPE_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error(transparent)]
    Matrix(#[from] MatError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("{what}: square-root argument {value:e} is negative beyond round-off")]
    NegativeRoot { what: &'static str, value: f64 },
    #[error("{what}: trace has imaginary part {value:e}")]
    ComplexTrace { what: &'static str, value: f64 },
    #[error("concurrence {0} is outside [0, 1]")]
    ConcurrenceOutOfRange(f64),
}

fn checked_sqrt(x: f64, what: &'static str) -> Result<f64, MeasureError> {
    if x < -SQRT_ARG_TOL || x.is_nan() {
        return Err(MeasureError::NegativeRoot { what, value: x });
    }
    Ok(x.max(0.0).sqrt())
}

fn snap_unit(x: f64) -> f64 {
    if x < 0.0 && x > -UNIT_CLAMP_TOL {
        0.0
    } else if x > 1.0 && x < 1.0 + UNIT_CLAMP_TOL {
        1.0
    } else {
        x
    }
}

/// Eigenvalues of ρρ̃, descending and clamped at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WoottersSpectrum {
    pub lambdas: [f64; 4],
    roots: [f64; 4],
}

impl WoottersSpectrum {
    /// √λ_i, descending. These are computed directly rather than by taking
    /// square roots of `lambdas`, so small values keep absolute accuracy.
    pub fn roots(&self) -> [f64; 4] {
        self.roots
    }

    pub fn sum(&self) -> f64 {
        self.lambdas.iter().sum()
    }
}

/// Spectrum of ρρ̃ via the Hermitian congruence √ρ ρ̃ √ρ.
///
/// With Y = σy⊗σy and S = √ρ, the congruence factors as A A† with
/// A = S Y S*. Its eigenvalues are the squared singular values of A, and
/// the singular values are exactly the √λ_i that enter the concurrence.
pub fn wootters_spectrum(rho: &DensityMatrix) -> Result<WoottersSpectrum, MeasureError> {
    if rho.dim() != 4 {
        return Err(StateError::BadDimension(rho.dim()).into());
    }
    let s = matcore::psd_sqrt(rho.matrix())?;
    let yy = states::sigma_yy();
    let a = matcore::multiply(&matcore::multiply(&s, &yy)?, &s.conj())?;
    let sv = matcore::singular_values(&a)?;
    let roots = [sv[0], sv[1], sv[2], sv[3]];
    Ok(WoottersSpectrum { lambdas: roots.map(|r| r * r), roots })
}

/// max(0, √λ₁ − √λ₂ − √λ₃ − √λ₄).
pub fn concurrence(rho: &DensityMatrix) -> Result<f64, MeasureError> {
    let r = wootters_spectrum(rho)?.roots();
    Ok(snap_unit((r[0] - r[1] - r[2] - r[3]).max(0.0)))
}

/// Closed-form concurrence for X-shaped states (only the anti-diagonal
/// coherences ρ₁₄ and ρ₂₃ nonzero). Returns `None` for other shapes.
pub fn x_state_concurrence(rho: &DensityMatrix) -> Option<f64> {
    if rho.dim() != 4 {
        return None;
    }
    let m = rho.matrix();
    for i in 0..4 {
        for j in 0..4 {
            let on_x = i == j || i + j == 3;
            if !on_x && m[(i, j)].norm() > X_SHAPE_TOL {
                return None;
            }
        }
    }
    let p = |i: usize| m[(i, i)].re.max(0.0);
    let inner = m[(1, 2)].norm() - (p(0) * p(3)).sqrt();
    let outer = m[(0, 3)].norm() - (p(1) * p(2)).sqrt();
    Some(snap_unit(2.0 * inner.max(outer).max(0.0)))
}

/// √(2(1 − tr ρ_A²)) for a pure state. Both reductions are evaluated and
/// must agree; the A side is returned.
pub fn concurrence_pure(psi: &PureState) -> Result<f64, MeasureError> {
    let rho = psi.projector();
    let pa = states::purity(&states::partial_trace(&rho, Subsystem::A)?);
    let pb = states::purity(&states::partial_trace(&rho, Subsystem::B)?);
    let ca = checked_sqrt(2.0 * (1.0 - pa), "pure-state concurrence")?;
    let cb = checked_sqrt(2.0 * (1.0 - pb), "pure-state concurrence")?;
    debug_assert!((ca - cb).abs() < 1e-9, "reductions disagree: {ca} vs {cb}");
    Ok(snap_unit(ca))
}

/// tr(ρρ̃), real.
pub fn flip_overlap(rho: &DensityMatrix) -> Result<f64, MeasureError> {
    let flipped = states::spin_flip(rho)?;
    let t = matcore::trace_product(rho.matrix(), &flipped)?;
    if t.im.abs() > IMAG_TOL {
        return Err(MeasureError::ComplexTrace { what: "tr(rho rho~)", value: t.im });
    }
    Ok(t.re)
}

/// √tr(ρρ̃).
pub fn intrinsic_concurrence(rho: &DensityMatrix) -> Result<f64, MeasureError> {
    Ok(snap_unit(checked_sqrt(flip_overlap(rho)?, "intrinsic concurrence")?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coherence {
    pub total: f64,
    pub a: f64,
    pub b: f64,
}

/// Per-qubit F_i = √(2 tr ρ_i² − 1) and the combined √((F_A² + F_B²)/2).
pub fn first_order_coherence(rho: &DensityMatrix) -> Result<Coherence, MeasureError> {
    let fa2 = 2.0 * states::purity(&states::partial_trace(rho, Subsystem::A)?) - 1.0;
    let fb2 = 2.0 * states::purity(&states::partial_trace(rho, Subsystem::B)?) - 1.0;
    let a = snap_unit(checked_sqrt(fa2, "first-order coherence of A")?);
    let b = snap_unit(checked_sqrt(fb2, "first-order coherence of B")?);
    let total = snap_unit(checked_sqrt((a * a + b * b) / 2.0, "first-order coherence")?);
    Ok(Coherence { total, a, b })
}

/// √((1 + C²)/2).
pub fn ic_upper_bound(c: f64) -> Result<f64, MeasureError> {
    if !(0.0..=1.0).contains(&c) {
        return Err(MeasureError::ConcurrenceOutOfRange(c));
    }
    Ok(((1.0 + c * c) / 2.0).sqrt())
}

/// IC² + F² − tr ρ².
pub fn conservation_residual(rho: &DensityMatrix) -> Result<f64, MeasureError> {
    let ic = intrinsic_concurrence(rho)?;
    let f = first_order_coherence(rho)?.total;
    Ok(ic * ic + f * f - states::purity(rho))
}

/// All measures of one state at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureRecord {
    pub t: f64,
    pub concurrence: f64,
    pub intrinsic_concurrence: f64,
    pub coherence: f64,
    pub coherence_a: f64,
    pub coherence_b: f64,
    pub purity: f64,
    pub upper_bound: f64,
    pub residual: f64,
}

impl MeasureRecord {
    pub fn evaluate(rho: &DensityMatrix, t: f64) -> Result<Self, MeasureError> {
        let c = concurrence(rho)?;
        let ic = intrinsic_concurrence(rho)?;
        let f = first_order_coherence(rho)?;
        let purity = states::purity(rho);
        Ok(Self {
            t,
            concurrence: c,
            intrinsic_concurrence: ic,
            coherence: f.total,
            coherence_a: f.a,
            coherence_b: f.b,
            purity,
            upper_bound: ic_upper_bound(c)?,
            residual: ic * ic + f.total * f.total - purity,
        })
    }

    /// IC − √((1 + C²)/2); positive means the conjectured upper bound fails.
    pub fn upper_excess(&self) -> f64 {
        self.intrinsic_concurrence - self.upper_bound
    }

    /// C − IC; must stay at or below round-off.
    pub fn lower_gap(&self) -> f64 {
        self.concurrence - self.intrinsic_concurrence
    }
}
