//! Stored energy densities on `d × d` matrices.
//!
//! The default density is
//!
//! ```text
//! W(A) = |A|^{d+1}/(d+1) + √2 d^{(d−1)/2} √(1 + (det A − 2)²) − d^{(d+1)/2}/(d+1) − 2 d^{(d−1)/2}
//! ```
//!
//! which is polyconvex, frame invariant, vanishes exactly on SO(d), grows like
//! `|A|^{d+1}` and is finite for every matrix regardless of orientation.
//! The exponential variant `W_o` is kept for comparison only: it is not
//! bounded by `C(1 + |A|^{d+1})`.

use crate::math;
use crate::tensor::{assert_dim, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EnergyError {
    #[error("determinant is not positive")]
    NonpositiveDeterminant,
}

/// Choice of stored energy `W` used inside every shell and volume term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StoredEnergy {
    /// Bounded-growth polyconvex density (default).
    #[default]
    Bounded,
    /// `W_o(A) = |A|^{d+1}/(d+1) + d^{(d−1)/2} e^{1 − det A} − …`.
    Exponential,
}

/// Coercivity exponent `p = d + 1` of both densities.
pub const fn exponent(dim: usize) -> usize {
    dim + 1
}

fn dim_constants(dim: usize) -> (f64, f64) {
    let d = dim as f64;
    // d^{(d−1)/2}, d^{(d+1)/2}
    (math::powf(d, (d - 1.0) * 0.5), math::powf(d, (d + 1.0) * 0.5))
}

impl StoredEnergy {
    pub fn value<const D: usize>(self, a: &Matrix<D>) -> f64 {
        match self {
            StoredEnergy::Bounded => bounded(a),
            StoredEnergy::Exponential => exponential(a),
        }
    }

    pub fn gradient<const D: usize>(self, a: &Matrix<D>) -> Matrix<D> {
        match self {
            StoredEnergy::Bounded => bounded_gradient(a),
            StoredEnergy::Exponential => exponential_gradient(a),
        }
    }

    /// Density of the inverse deformation pulled back to the reference
    /// configuration: `W(A⁻¹) det A = W(cof Aᵀ / det A) det A`.
    pub fn inverse_density<const D: usize>(self, a: &Matrix<D>) -> Result<f64, EnergyError> {
        let det = a.det();
        if det <= 0.0 {
            return Err(EnergyError::NonpositiveDeterminant);
        }
        let inv = a.cofactor().transpose() * (1.0 / det);
        Ok(self.value(&inv) * det)
    }

    /// Gradient of [`StoredEnergy::inverse_density`] with respect to `A`:
    /// `det A · (W(B) Bᵀ − Bᵀ ∇W(B) Bᵀ)` with `B = A⁻¹`.
    pub fn inverse_density_gradient<const D: usize>(self, a: &Matrix<D>) -> Result<Matrix<D>, EnergyError> {
        let det = a.det();
        if det <= 0.0 {
            return Err(EnergyError::NonpositiveDeterminant);
        }
        let b = a.cofactor().transpose() * (1.0 / det);
        let bt = b.transpose();
        let g = self.gradient(&b);
        Ok((bt * self.value(&b) - bt * g * bt) * det)
    }
}

/// The bounded polyconvex density `W`.
pub fn bounded<const D: usize>(a: &Matrix<D>) -> f64 {
    assert_dim::<D>();
    let d = D as f64;
    let (c1, c2) = dim_constants(D);
    let norm = a.norm();
    let t = a.det() - 2.0;
    math::powi(norm, D as i32 + 1) / (d + 1.0) + core::f64::consts::SQRT_2 * c1 * math::sqrt(1.0 + t * t)
        - c2 / (d + 1.0)
        - 2.0 * c1
}

/// `∂W/∂A = |A|^{d−1} A + √2 d^{(d−1)/2} (det A − 2)/√(1 + (det A − 2)²) cof A`.
pub fn bounded_gradient<const D: usize>(a: &Matrix<D>) -> Matrix<D> {
    assert_dim::<D>();
    let (c1, _) = dim_constants(D);
    let norm = a.norm();
    let t = a.det() - 2.0;
    *a * math::powi(norm, D as i32 - 1)
        + a.cofactor() * (core::f64::consts::SQRT_2 * c1 * t / math::sqrt(1.0 + t * t))
}

/// `Ŵ(s, t)` such that `W(A) = Ŵ(|A|^d, det A)`.
pub fn bounded_profile(dim: usize, s: f64, t: f64) -> f64 {
    let d = dim as f64;
    let (c1, c2) = dim_constants(dim);
    math::powf(s, (d + 1.0) / d) / (d + 1.0) + core::f64::consts::SQRT_2 * c1 * math::sqrt(1.0 + (t - 2.0) * (t - 2.0))
        - c2 / (d + 1.0)
        - 2.0 * c1
}

/// The exponential density `W_o`.
pub fn exponential<const D: usize>(a: &Matrix<D>) -> f64 {
    assert_dim::<D>();
    let d = D as f64;
    let (c1, c2) = dim_constants(D);
    math::powi(a.norm(), D as i32 + 1) / (d + 1.0) + c1 * math::exp(1.0 - a.det()) - c2 / (d + 1.0) - c1
}

pub fn exponential_gradient<const D: usize>(a: &Matrix<D>) -> Matrix<D> {
    assert_dim::<D>();
    let (c1, _) = dim_constants(D);
    *a * math::powi(a.norm(), D as i32 - 1) - a.cofactor() * (c1 * math::exp(1.0 - a.det()))
}

/// Volume density of the non-symmetric comparison energy:
/// `|A|³ + |cof A|³ + 3 (det A)^{−2}` for d = 3 and `|A|² + (det A)^{−2}` for d = 2.
pub fn comparison_volume<const D: usize>(a: &Matrix<D>) -> Result<f64, EnergyError> {
    assert_dim::<D>();
    let det = a.det();
    if det <= 0.0 {
        return Err(EnergyError::NonpositiveDeterminant);
    }
    Ok(if D == 2 {
        a.norm_squared() + 1.0 / (det * det)
    } else {
        math::powi(a.norm(), 3) + math::powi(a.cofactor().norm(), 3) + 3.0 / (det * det)
    })
}

pub fn comparison_volume_gradient<const D: usize>(a: &Matrix<D>) -> Result<Matrix<D>, EnergyError> {
    assert_dim::<D>();
    let det = a.det();
    if det <= 0.0 {
        return Err(EnergyError::NonpositiveDeterminant);
    }
    let cof = a.cofactor();
    Ok(if D == 2 {
        *a * 2.0 - cof * (2.0 / (det * det * det))
    } else {
        // |cof A|² = ½((tr C)² − tr C²) with C = AᵀA, so ∂|cof A|²/∂A = 2A(tr C 𝟙 − C).
        let c = a.transpose() * *a;
        let dcof2 = *a * (Matrix::identity() * c.trace() - c) * 2.0;
        *a * (3.0 * a.norm()) + dcof2 * (1.5 * cof.norm()) - cof * (6.0 / (det * det * det))
    })
}
