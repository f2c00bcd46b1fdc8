//! Multiscale descent: H¹-preconditioned Polak–Ribière conjugate gradients
//! with an Armijo line search on each level, prolongating the result to the
//! next finer grid.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::energy::{assemble, Assembly, EnergyBreakdown, EnergyParams, ParamError};
use crate::geometry::{injectivity_radius, SignedShape};
use crate::grid::{AdaptiveGrid, Deformation, GridError};
use crate::math;
use crate::sparse::{pcg, CsrMatrix};
use crate::tensor::Vector;

#[derive(Debug, Clone, PartialEq)]
pub struct DescentConfig {
    pub min_level: u32,
    pub max_level: u32,
    pub max_iters_per_level: usize,
    /// Sufficient decrease constant `β`.
    pub armijo_slope: f64,
    /// Backtracking factor `ρ`.
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Trial points whose smallest Jacobian determinant does not exceed this
    /// are rejected like inverted ones.
    pub min_det_floor: f64,
    /// Weight `α` of the stiffness part of the metric; `None` uses `h_ℓ²`.
    pub h1_weight: Option<f64>,
    /// Stop when the metric gradient norm falls below this fraction of its
    /// first value on the level.
    pub grad_tol: f64,
    /// Absolute floor for the stopping norm.
    pub grad_abs_tol: f64,
    pub cg_restart: usize,
    /// `σ_ℓ = sigma_factor · 2^-ℓ`.
    pub sigma_factor: f64,
    /// Refinement band of the level grids in units of `σ_ℓ`.
    pub band_factor: f64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig {
            min_level: 4,
            max_level: 7,
            max_iters_per_level: 500,
            armijo_slope: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            min_det_floor: 1e-8,
            h1_weight: None,
            grad_tol: 1e-6,
            grad_abs_tol: 1e-9,
            cg_restart: 50,
            sigma_factor: 2.0,
            band_factor: 2.0,
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<(), DescentError> {
        let bad = |what| Err(DescentError::InvalidConfig(what));
        if self.min_level > self.max_level {
            return bad("min_level must not exceed max_level");
        }
        if self.max_iters_per_level == 0 || self.cg_restart == 0 || self.max_backtracks == 0 {
            return bad("iteration limits must be positive");
        }
        if !(self.armijo_slope > 0.0 && self.armijo_slope < 0.5) {
            return bad("armijo_slope must lie in (0, 0.5)");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        if !(self.min_det_floor >= 0.0 && self.min_det_floor < 1.0) {
            return bad("min_det_floor must lie in [0, 1)");
        }
        if self.h1_weight.is_some_and(|a| !(a >= 0.0)) {
            return bad("h1_weight must be nonnegative");
        }
        if !(self.grad_tol > 0.0 && self.grad_abs_tol >= 0.0) {
            return bad("gradient tolerances must be positive");
        }
        if !(self.sigma_factor > 0.0 && self.band_factor > 0.0) {
            return bad("sigma_factor and band_factor must be positive");
        }
        Ok(())
    }

    pub fn sigma(&self, level: u32) -> f64 {
        self.sigma_factor * math::powi(0.5, level as i32)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DescentError {
    #[error("invalid descent configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("metric solve stalled after {iterations} iterations (relative residual {residual:e})")]
    SolverStall { iterations: usize, residual: f64 },
    #[error("no acceptable step after the maximum number of backtracks")]
    LineSearchFailed,
    #[error("deformation has a nonpositive Jacobian determinant")]
    Infeasible,
}

/// The weighted H¹ metric `M + αK` on the free degrees of freedom.
#[derive(Debug, Clone)]
pub struct H1Metric {
    matrix: CsrMatrix,
}

impl H1Metric {
    pub fn new<const D: usize>(grid: &AdaptiveGrid<D>, alpha: f64) -> Self {
        let (mass, stiffness) = grid.fe_matrices();
        H1Metric { matrix: mass.add_scaled(alpha, &stiffness) }
    }

    /// Riesz representative `u` of the dual vector `g`, componentwise.
    pub fn apply<const D: usize>(&self, g: &[Vector<D>]) -> Result<Vec<Vector<D>>, DescentError> {
        let n = g.len();
        assert_eq!(n, self.matrix.rows());
        let mut out = vec![Vector::zero(); n];
        let mut rhs = vec![0.0; n];
        let mut x = vec![0.0; n];
        for k in 0..D {
            for (r, v) in rhs.iter_mut().zip(g) {
                *r = v[k];
            }
            x.iter_mut().for_each(|v| *v = 0.0);
            let res = pcg(&self.matrix, &rhs, &mut x, 1e-8, 10 * n.max(1));
            if !res.converged {
                return Err(DescentError::SolverStall { iterations: res.iterations, residual: res.relative_residual });
            }
            for (o, v) in out.iter_mut().zip(&x) {
                o[k] = *v;
            }
        }
        Ok(out)
    }
}

/// Solves `(M + αK) u = g` on the free degrees of freedom of `grid`.
pub fn h1_precondition<const D: usize>(
    g: &[Vector<D>],
    grid: &AdaptiveGrid<D>,
    alpha: f64,
) -> Result<Vec<Vector<D>>, DescentError> {
    H1Metric::new(grid, alpha).apply(g)
}

fn dot<const D: usize>(a: &[Vector<D>], b: &[Vector<D>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

/// Accepted Armijo step with the assembled energy and gradient there.
#[derive(Debug, Clone)]
pub struct LineSearch<const D: usize> {
    pub step: f64,
    pub phi: Deformation<D>,
    pub assembly: Assembly<D>,
    pub backtracks: usize,
}

/// Backtracks from `t0` until `E(φ + t·dir) ≤ E(φ) + β t slope`, where
/// `slope = ⟨∇E, dir⟩ < 0`. Trial points with `min det ≤ min_det_floor`
/// count as failures, and so does a step too short to move any node.
#[allow(clippy::too_many_arguments)]
pub fn armijo_search<const D: usize>(
    phi: &Deformation<D>,
    direction: &[Vector<D>],
    e0: &EnergyBreakdown,
    slope: f64,
    t0: f64,
    s1: &SignedShape<D>,
    s2: &SignedShape<D>,
    params: &EnergyParams,
    config: &DescentConfig,
) -> Result<LineSearch<D>, DescentError> {
    let base = e0.total().ok_or(DescentError::Infeasible)?;
    if slope == 0.0 || direction.iter().all(|v| v.max_abs() == 0.0) {
        let assembly = assemble(phi, s1, s2, params, true);
        return Ok(LineSearch { step: 0.0, phi: phi.clone(), assembly, backtracks: 0 });
    }
    let reach = direction.iter().map(|v| v.max_abs()).fold(0.0, f64::max);
    let mut t = t0;
    for k in 0..=config.max_backtracks {
        if t * reach <= f64::EPSILON {
            break;
        }
        let trial = phi.displaced(t, direction);
        if !(trial.min_det() > config.min_det_floor) {
            t *= config.backtrack;
            continue;
        }
        let assembly = assemble(&trial, s1, s2, params, true);
        if let Some(e) = assembly.energy.total() {
            if e <= base + config.armijo_slope * t * slope {
                return Ok(LineSearch { step: t, phi: trial, assembly, backtracks: k });
            }
        }
        t *= config.backtrack;
    }
    Err(DescentError::LineSearchFailed)
}

/// Why descent on a level ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub level: u32,
    /// Accepted steps on this level before this entry.
    pub iteration: usize,
    pub energy: EnergyBreakdown,
    /// Metric norm `sqrt(⟨g, u⟩)` of the gradient.
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub level: u32,
    pub sigma: f64,
    pub num_dofs: usize,
    pub iterations: usize,
    pub initial: EnergyBreakdown,
    pub final_energy: EnergyBreakdown,
    pub stop: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DescentWarning {
    /// `σ_ℓ` is not below the injectivity radius estimate of the shapes.
    SigmaAboveInjectivityRadius { level: u32, sigma: f64, radius: f64 },
}

/// Result of a multiscale run.
#[derive(Debug, Clone)]
pub struct DescentState<const D: usize> {
    pub level: u32,
    pub phi: Deformation<D>,
    pub energy_history: Vec<HistoryEntry>,
    pub iterations: usize,
    pub last_step_size: f64,
    pub levels: Vec<LevelSummary>,
    pub warnings: Vec<DescentWarning>,
    /// Set when some level ended because the line search failed.
    pub line_search_failed: bool,
}

impl<const D: usize> DescentState<D> {
    pub fn final_energy(&self) -> Option<&EnergyBreakdown> {
        self.levels.last().map(|l| &l.final_energy)
    }
}

/// Descends on the fixed grid of `phi` with band width `params.sigma`.
pub fn descend_level<const D: usize>(
    phi: Deformation<D>,
    s1: &SignedShape<D>,
    s2: &SignedShape<D>,
    params: &EnergyParams,
    config: &DescentConfig,
    level: u32,
    observer: &mut dyn FnMut(&HistoryEntry),
) -> Result<(Deformation<D>, Vec<HistoryEntry>, LevelSummary), DescentError> {
    let grid = phi.grid().clone();
    let h = math::powi(0.5, grid.max_level() as i32);
    let metric = H1Metric::new(&grid, config.h1_weight.unwrap_or(h * h));

    let mut phi = phi;
    let mut current = assemble(&phi, s1, s2, params, true);
    if !current.energy.is_feasible() {
        return Err(DescentError::Infeasible);
    }
    let initial = current.energy;
    let mut g = current.gradient.take().unwrap_or_default();
    let mut u = metric.apply(&g)?;
    let mut gnorm = math::sqrt(dot(&g, &u).max(0.0));
    let tol = (config.grad_tol * gnorm).max(config.grad_abs_tol);
    let mut direction: Vec<Vector<D>> = u.iter().map(|v| -*v).collect();
    let mut t0 = 1.0;
    let mut history = Vec::new();
    let mut iteration = 0;
    let mut since_restart = 0;

    let entry = HistoryEntry { level, iteration: 0, energy: current.energy, grad_norm: gnorm, step: 0.0 };
    observer(&entry);
    history.push(entry);

    let stop = loop {
        if gnorm <= tol {
            break StopReason::Converged;
        }
        if iteration >= config.max_iters_per_level {
            break StopReason::MaxIterations;
        }
        let mut slope = dot(&g, &direction);
        if !(slope < 0.0) {
            direction = u.iter().map(|v| -*v).collect();
            slope = -gnorm * gnorm;
            since_restart = 0;
        }
        let search = match armijo_search(&phi, &direction, &current.energy, slope, t0, s1, s2, params, config) {
            Ok(s) => s,
            Err(DescentError::LineSearchFailed) if since_restart > 0 => {
                // retry once along the preconditioned gradient
                direction = u.iter().map(|v| -*v).collect();
                since_restart = 0;
                continue;
            }
            Err(DescentError::LineSearchFailed) => break StopReason::LineSearchFailed,
            Err(e) => return Err(e),
        };
        iteration += 1;
        t0 = (search.step / config.backtrack).min(1.0 / config.backtrack);
        phi = search.phi;
        current = search.assembly;
        let g_new = current.gradient.take().unwrap_or_default();
        let u_new = metric.apply(&g_new)?;
        let gu_old = dot(&g, &u);
        let mut beta = 0.0;
        since_restart += 1;
        if since_restart < config.cg_restart && gu_old > 0.0 {
            let diff: f64 = g_new.iter().zip(u_new.iter().zip(&u)).map(|(gn, (un, uo))| gn.dot(&(*un - *uo))).sum();
            beta = (diff / gu_old).max(0.0);
        } else {
            since_restart = 0;
        }
        if beta == 0.0 {
            since_restart = 0;
        }
        direction = u_new.iter().zip(&direction).map(|(un, d)| *d * beta - *un).collect();
        g = g_new;
        u = u_new;
        gnorm = math::sqrt(dot(&g, &u).max(0.0));
        let entry = HistoryEntry { level, iteration, energy: current.energy, grad_norm: gnorm, step: search.step };
        observer(&entry);
        history.push(entry);
    };

    let summary = LevelSummary {
        level,
        sigma: params.sigma,
        num_dofs: grid.num_dofs(),
        iterations: iteration,
        initial,
        final_energy: current.energy,
        stop,
    };
    Ok((phi, history, summary))
}

/// Runs the multiscale descent from the identity.
pub fn run_multiscale<const D: usize>(
    s1: &SignedShape<D>,
    s2: &SignedShape<D>,
    params: &EnergyParams,
    config: &DescentConfig,
) -> Result<DescentState<D>, DescentError> {
    run_multiscale_with(s1, s2, params, config, None, &mut |_| {})
}

/// Runs the multiscale descent, starting from `initial` (interpolated onto
/// the first level grid) when given, and reporting every accepted iterate to
/// `observer`.
///
/// Level `ℓ` uses `σ_ℓ = sigma_factor · 2^-ℓ` on a grid refined to level `ℓ`
/// within `band_factor · σ_ℓ` of either shape.
pub fn run_multiscale_with<const D: usize>(
    s1: &SignedShape<D>,
    s2: &SignedShape<D>,
    params: &EnergyParams,
    config: &DescentConfig,
    initial: Option<&Deformation<D>>,
    observer: &mut dyn FnMut(&HistoryEntry),
) -> Result<DescentState<D>, DescentError> {
    config.validate()?;
    params.validate(D)?;
    let radius = injectivity_radius(s1, s2);
    let mut warnings = Vec::new();
    let mut history = Vec::new();
    let mut levels = Vec::new();
    let mut phi: Option<Deformation<D>> = initial.cloned();
    let mut line_search_failed = false;
    let mut last_step_size = 0.0;

    for level in config.min_level..=config.max_level {
        let sigma = config.sigma(level);
        if sigma >= radius {
            warnings.push(DescentWarning::SigmaAboveInjectivityRadius { level, sigma, radius });
        }
        let grid = Arc::new(AdaptiveGrid::build(config.min_level, level, s1, s2, config.band_factor * sigma)?);
        let start = match phi.take() {
            None => Deformation::identity(grid),
            Some(prev) => match prev.prolong(grid.clone()) {
                Ok(p) => p,
                Err(_) => Deformation::interpolate(grid, |x| prev.evaluate(x)),
            },
        };
        let level_params = params.with_sigma(sigma);
        let (next, mut level_history, summary) =
            descend_level(start, s1, s2, &level_params, config, level, observer)?;
        if summary.stop == StopReason::LineSearchFailed {
            line_search_failed = true;
        }
        if let Some(step) = level_history.iter().rev().map(|e| e.step).find(|&s| s > 0.0) {
            last_step_size = step;
        }
        history.append(&mut level_history);
        levels.push(summary);
        phi = Some(next);
    }

    let phi = phi.expect("at least one level");
    Ok(DescentState {
        level: config.max_level,
        phi,
        iterations: levels.iter().map(|l| l.iterations).sum(),
        energy_history: history,
        last_step_size,
        levels,
        warnings,
        line_search_failed,
    })
}
