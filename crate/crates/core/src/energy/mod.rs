//! Narrow-band matching energies and their nodal gradients.

mod assembly;
mod blocks;
mod limit;

pub use assembly::{assemble, assemble_energy, assemble_gradient, Assembly};
pub use blocks::{classifier, d_tt, inverse_classifier, inverse_projected_block};
pub use limit::surface_limit_energy;

use crate::math;
use crate::stored_energy::StoredEnergy;

/// Which energy family is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnergyMode {
    /// Direct and inverse contributions for every term.
    #[default]
    Symmetric,
    /// Band terms of the direct deformation only, volume term `W(Dφ)`.
    Direct,
    /// Direct band terms with the injectivity-enforcing volume density.
    Comparison,
}

/// Compactly supported bump `η` with unit integral on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bump {
    /// `(15/16)(1 − t²)²`.
    #[default]
    Quartic,
    /// `(1 + cos πt)/2`.
    Cosine,
}

impl Bump {
    pub fn value(self, t: f64) -> f64 {
        if t.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            Bump::Quartic => {
                let s = 1.0 - t * t;
                15.0 / 16.0 * s * s
            }
            Bump::Cosine => 0.5 * (1.0 + math::cos(core::f64::consts::PI * t)),
        }
    }

    pub fn derivative(self, t: f64) -> f64 {
        if t.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            Bump::Quartic => -15.0 / 4.0 * t * (1.0 - t * t),
            Bump::Cosine => -0.5 * core::f64::consts::PI * math::sin(core::f64::consts::PI * t),
        }
    }
}

/// `η_σ(s) = η(s/σ)/σ`.
pub fn eta_sigma(s: f64, sigma: f64, bump: Bump) -> f64 {
    bump.value(s / sigma) / sigma
}

/// `dη_σ/ds`.
pub fn eta_sigma_derivative(s: f64, sigma: f64, bump: Bump) -> f64 {
    bump.derivative(s / sigma) / (sigma * sigma)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamError {
    #[error("{0} must be nonnegative")]
    Negative(&'static str),
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("theta must be 0 or 1")]
    Theta,
    #[error("with theta = 1 the matching exponent must exceed d - 1")]
    WeakMatching,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub c_match: f64,
    pub c_mem: f64,
    pub c_bend: f64,
    pub c_vol: f64,
    /// Half-width of the narrow band.
    pub sigma: f64,
    /// Matching exponent: the matching term is weighted by `c_match / σ^q`.
    pub q: f64,
    /// Volume scaling exponent, 0 or 1: the volume term is weighted by
    /// `c_vol σ^θ`.
    pub theta: u32,
    /// Eigenvalue floor of the regularized shape operators.
    pub tau: f64,
    pub mode: EnergyMode,
    pub density: StoredEnergy,
    pub bump: Bump,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            c_match: 1.0,
            c_mem: 1.0,
            c_bend: 1.0,
            c_vol: 1.0,
            sigma: 0.125,
            q: 3.0,
            theta: 1,
            tau: 0.1,
            mode: EnergyMode::Symmetric,
            density: StoredEnergy::Bounded,
            bump: Bump::Quartic,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self, dim: usize) -> Result<(), ParamError> {
        for (name, v) in [("c_match", self.c_match), ("c_mem", self.c_mem), ("c_bend", self.c_bend), ("c_vol", self.c_vol)] {
            if !(v >= 0.0) {
                return Err(ParamError::Negative(name));
            }
        }
        for (name, v) in [("sigma", self.sigma), ("q", self.q), ("tau", self.tau)] {
            if !(v > 0.0) {
                return Err(ParamError::NotPositive(name));
            }
        }
        if self.theta > 1 {
            return Err(ParamError::Theta);
        }
        if self.theta == 1 && self.q <= dim as f64 - 1.0 {
            return Err(ParamError::WeakMatching);
        }
        Ok(())
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_mode(mut self, mode: EnergyMode) -> Self {
        self.mode = mode;
        self
    }

    pub(crate) fn match_weight(&self) -> f64 {
        self.c_match / math::powf(self.sigma, self.q)
    }

    pub(crate) fn vol_weight(&self) -> f64 {
        self.c_vol * math::powi(self.sigma, self.theta as i32)
    }
}

/// Term values of an assembled energy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyTerms {
    pub matching: f64,
    pub membrane: f64,
    pub bending: f64,
    pub volume: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.matching + self.membrane + self.bending + self.volume
    }
}

/// Assembled energy, or the infeasibility marker when some Jacobian
/// determinant is not positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    /// `None` when infeasible.
    pub terms: Option<EnergyTerms>,
    /// Smallest Jacobian determinant over all simplices.
    pub min_det: f64,
}

impl EnergyBreakdown {
    pub fn is_feasible(&self) -> bool {
        self.terms.is_some()
    }

    pub fn total(&self) -> Option<f64> {
        self.terms.map(|t| t.total())
    }
}

#[cfg(test)]
mod tests;
