//! Symmetry residuals, band inclusion and the narrow-band to surface
//! convergence study.

use alloc::vec::Vec;

use crate::energy::{assemble_energy, surface_limit_energy, EnergyMode, EnergyParams};
use crate::geometry::{DiscreteShape, SignedShape};
use crate::grid::{simplex_rule, Deformation};
use crate::math;
use crate::parallel::map_indexed;
use crate::tensor::Vector;

/// Norms of the residual displacement `ψ∘φ − Id`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryReport {
    pub l2_omega: f64,
    pub linf_omega: f64,
    pub avg_m1: f64,
    pub linf_m1: f64,
    pub mode: EnergyMode,
    /// Some `φ(x)` left the unit box and was clamped before evaluating `ψ`.
    pub clamped: bool,
}

fn compose<const D: usize>(psi: &Deformation<D>, y: &Vector<D>) -> (Vector<D>, bool) {
    let clamped = y.map(|v| v.clamp(0.0, 1.0));
    (psi.evaluate(&clamped), clamped != *y)
}

/// Residual of `ψ∘φ` against the identity: L² and maximum over the
/// quadrature points of `φ`'s grid, mean and maximum over the vertices of
/// `shape1`.
pub fn symmetry_report<const D: usize>(
    phi: &Deformation<D>,
    psi: &Deformation<D>,
    shape1: &DiscreteShape<D>,
    mode: EnergyMode,
) -> SymmetryReport {
    let grid = phi.grid();
    let per_simplex = map_indexed(grid.num_simplices(), |t| {
        let vol = grid.simplex_volume(t);
        let mut l2 = 0.0;
        let mut max: f64 = 0.0;
        let mut clamped = false;
        for qp in simplex_rule(D) {
            let x = grid.simplex_point(t, &qp.bary);
            let (back, c) = compose(psi, &phi.evaluate_in(t, &qp.bary));
            let r = (back - x).norm();
            l2 += qp.weight * vol * r * r;
            max = max.max(r);
            clamped |= c;
        }
        (l2, max, clamped)
    });
    let mut l2 = 0.0;
    let mut linf_omega: f64 = 0.0;
    let mut clamped = false;
    for (a, m, c) in per_simplex {
        l2 += a;
        linf_omega = linf_omega.max(m);
        clamped |= c;
    }
    let verts = shape1.vertices();
    let residuals = map_indexed(verts.len(), |i| {
        let (back, c) = compose(psi, &phi.evaluate(&verts[i]));
        ((back - verts[i]).norm(), c)
    });
    let mut sum = 0.0;
    let mut linf_m1: f64 = 0.0;
    for (r, c) in &residuals {
        sum += r;
        linf_m1 = linf_m1.max(*r);
        clamped |= c;
    }
    SymmetryReport {
        l2_omega: math::sqrt(l2),
        linf_omega,
        avg_m1: if residuals.is_empty() { 0.0 } else { sum / residuals.len() as f64 },
        linf_m1,
        mode,
        clamped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandCheck {
    pub pass: bool,
    /// Largest `|d₂(φ(x))|` over quadrature points with `|d₁(x)| ≤ σ`.
    pub max_violation: f64,
}

/// Checks that `φ` maps the `σ`-band of the first shape into the `ε`-band of
/// the second.
pub fn band_inclusion_check<const D: usize>(
    phi: &Deformation<D>,
    s1: &SignedShape<D>,
    s2: &SignedShape<D>,
    sigma: f64,
    epsilon: f64,
) -> BandCheck {
    let grid = phi.grid();
    let worst = map_indexed(grid.num_simplices(), |t| {
        let mut worst: f64 = 0.0;
        for qp in simplex_rule(D) {
            let x = grid.simplex_point(t, &qp.bary);
            if s1.distance_at(&x).abs() <= sigma {
                worst = worst.max(s2.distance_at(&phi.evaluate_in(t, &qp.bary)).abs());
            }
        }
        worst
    });
    let max_violation = worst.into_iter().fold(0.0, f64::max);
    BandCheck { pass: max_violation <= epsilon, max_violation }
}

/// Direct narrow-band energies of a fixed deformation for shrinking band
/// widths, against the surface energy they approach.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaStudy {
    pub sigmas: Vec<f64>,
    pub narrowband_energies: Vec<f64>,
    pub surface_energy: f64,
    pub gaps: Vec<f64>,
}

impl GammaStudy {
    /// Whether every gap is smaller than the previous one.
    pub fn gaps_decreasing(&self) -> bool {
        self.gaps.windows(2).all(|w| w[1] < w[0])
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GammaError {
    #[error("band widths must be positive and strictly decreasing")]
    BadSigmas,
    #[error("the deformation is not feasible")]
    Infeasible,
}

/// Evaluates the direct energy of `phi` at each `σ` in `sigmas` and the
/// surface limit on `shape1`. The mode in `params` is ignored; the volume
/// term is scaled as `c_vol σ^θ`, so the limit keeps it only for `θ = 0`.
pub fn gamma_study<const D: usize>(
    phi: &Deformation<D>,
    s1: &SignedShape<D>,
    s2: &SignedShape<D>,
    shape1: &DiscreteShape<D>,
    params: &EnergyParams,
    sigmas: &[f64],
) -> Result<GammaStudy, GammaError> {
    if sigmas.is_empty() || sigmas.iter().any(|&s| !(s > 0.0)) || sigmas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(GammaError::BadSigmas);
    }
    let direct = params.with_mode(EnergyMode::Direct);
    let surface_energy = surface_limit_energy(phi, shape1, s1, s2, &direct);
    let mut narrowband_energies = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let e = assemble_energy(phi, s1, s2, &direct.with_sigma(sigma)).total().ok_or(GammaError::Infeasible)?;
        narrowband_energies.push(e);
    }
    let gaps = narrowband_energies.iter().map(|e| (e - surface_energy).abs()).collect();
    Ok(GammaStudy { sigmas: sigmas.to_vec(), narrowband_energies, surface_energy, gaps })
}

/// Radial map about `center` that moves radius `r1` to `r2` by a constant
/// shift on `[r1 − width, r1 + width]` and blends linearly back to the
/// identity at the origin and at radius `r1 + width + ramp`.
pub fn radial_blend_map<const D: usize>(
    center: Vector<D>,
    r1: f64,
    r2: f64,
    width: f64,
    ramp: f64,
) -> impl Fn(&Vector<D>) -> Vector<D> {
    let shift = r2 - r1;
    let inner = r1 - width;
    let outer = r1 + width;
    move |x| {
        let v = *x - center;
        let r = v.norm();
        if r == 0.0 {
            return *x;
        }
        let s = if r < inner {
            shift * r / inner
        } else if r <= outer {
            shift
        } else if r < outer + ramp {
            shift * (outer + ramp - r) / ramp
        } else {
            0.0
        };
        center + v * ((r + s) / r)
    }
}
