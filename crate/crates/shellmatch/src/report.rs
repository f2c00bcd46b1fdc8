//! Serializable views of descent states and diagnostics.

use serde::Serialize;
use shellmatch_core::diagnostics::{BandCheck, GammaStudy, SymmetryReport};
use shellmatch_core::energy::{EnergyBreakdown, EnergyMode};
use shellmatch_core::optimizer::{DescentState, DescentWarning, HistoryEntry, LevelSummary, StopReason};

#[derive(Debug, Clone, Serialize)]
pub struct Energy {
    pub feasible: bool,
    pub total: Option<f64>,
    pub matching: Option<f64>,
    pub membrane: Option<f64>,
    pub bending: Option<f64>,
    pub volume: Option<f64>,
    pub min_det: f64,
}

impl From<&EnergyBreakdown> for Energy {
    fn from(e: &EnergyBreakdown) -> Self {
        Energy {
            feasible: e.is_feasible(),
            total: e.total(),
            matching: e.terms.map(|t| t.matching),
            membrane: e.terms.map(|t| t.membrane),
            bending: e.terms.map(|t| t.bending),
            volume: e.terms.map(|t| t.volume),
            min_det: e.min_det,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Step {
    pub level: u32,
    pub iteration: usize,
    pub energy: Energy,
    pub grad_norm: f64,
    pub step: f64,
}

impl From<&HistoryEntry> for Step {
    fn from(h: &HistoryEntry) -> Self {
        Step { level: h.level, iteration: h.iteration, energy: (&h.energy).into(), grad_norm: h.grad_norm, step: h.step }
    }
}

fn stop_name(s: StopReason) -> &'static str {
    match s {
        StopReason::Converged => "converged",
        StopReason::MaxIterations => "max_iterations",
        StopReason::LineSearchFailed => "line_search_failed",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Level {
    pub level: u32,
    pub sigma: f64,
    pub num_dofs: usize,
    pub iterations: usize,
    pub initial: Energy,
    pub final_energy: Energy,
    pub stop: &'static str,
}

impl From<&LevelSummary> for Level {
    fn from(l: &LevelSummary) -> Self {
        Level {
            level: l.level,
            sigma: l.sigma,
            num_dofs: l.num_dofs,
            iterations: l.iterations,
            initial: (&l.initial).into(),
            final_energy: (&l.final_energy).into(),
            stop: stop_name(l.stop),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Warning {
    pub kind: &'static str,
    pub level: u32,
    pub sigma: f64,
    pub radius: f64,
}

impl From<&DescentWarning> for Warning {
    fn from(w: &DescentWarning) -> Self {
        match *w {
            DescentWarning::SigmaAboveInjectivityRadius { level, sigma, radius } => {
                Warning { kind: "sigma_above_injectivity_radius", level, sigma, radius }
            }
        }
    }
}

/// JSON sidecar of a checkpoint.
#[derive(Debug, Clone, Serialize)]
pub struct Sidecar {
    pub format: &'static str,
    pub config: String,
    pub level: u32,
    pub iterations: usize,
    pub last_step_size: f64,
    pub line_search_failed: bool,
    pub warnings: Vec<Warning>,
    pub levels: Vec<Level>,
    pub history: Vec<Step>,
}

impl Sidecar {
    pub fn new<const D: usize>(state: &DescentState<D>, config_echo: String) -> Self {
        Sidecar {
            format: "SHLM1",
            config: config_echo,
            level: state.level,
            iterations: state.iterations,
            last_step_size: state.last_step_size,
            line_search_failed: state.line_search_failed,
            warnings: state.warnings.iter().map(Into::into).collect(),
            levels: state.levels.iter().map(Into::into).collect(),
            history: state.energy_history.iter().map(Into::into).collect(),
        }
    }
}

pub fn mode_label(mode: EnergyMode) -> &'static str {
    match mode {
        EnergyMode::Symmetric => "sym",
        EnergyMode::Direct => "dir",
        EnergyMode::Comparison => "cmp",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Symmetry {
    pub l2_omega: f64,
    pub linf_omega: f64,
    pub avg_m1: f64,
    pub linf_m1: f64,
    pub mode_label: &'static str,
    pub clamped: bool,
}

impl From<&SymmetryReport> for Symmetry {
    fn from(r: &SymmetryReport) -> Self {
        Symmetry {
            l2_omega: r.l2_omega,
            linf_omega: r.linf_omega,
            avg_m1: r.avg_m1,
            linf_m1: r.linf_m1,
            mode_label: mode_label(r.mode),
            clamped: r.clamped,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Band {
    pub sigma: f64,
    pub epsilon: f64,
    pub pass: bool,
    pub max_violation: f64,
}

impl Band {
    pub fn new(check: &BandCheck, sigma: f64, epsilon: f64) -> Self {
        Band { sigma, epsilon, pass: check.pass, max_violation: check.max_violation }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Gamma {
    pub sigmas: Vec<f64>,
    pub narrowband_energies: Vec<f64>,
    pub surface_energy: f64,
    pub gaps: Vec<f64>,
    pub gaps_decreasing: bool,
}

impl From<&GammaStudy> for Gamma {
    fn from(g: &GammaStudy) -> Self {
        Gamma {
            sigmas: g.sigmas.clone(),
            narrowband_energies: g.narrowband_energies.clone(),
            surface_energy: g.surface_energy,
            gaps: g.gaps.clone(),
            gaps_decreasing: g.gaps_decreasing(),
        }
    }
}

/// `sigma,narrowband,surface,gap` rows.
pub fn gamma_csv(g: &GammaStudy) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sigma", "narrowband", "surface", "gap"]).expect("in-memory write");
    for i in 0..g.sigmas.len() {
        w.write_record([g.sigmas[i], g.narrowband_energies[i], g.surface_energy, g.gaps[i]].map(|x| format!("{x:?}")))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf8")
}

/// One row per accepted iterate.
pub fn history_csv(history: &[HistoryEntry]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["level", "iteration", "total", "matching", "membrane", "bending", "volume", "min_det", "grad_norm", "step"])
        .expect("in-memory write");
    for h in history {
        let t = h.energy.terms.unwrap_or_default();
        let row = [
            h.level.to_string(),
            h.iteration.to_string(),
            format!("{:?}", t.total()),
            format!("{:?}", t.matching),
            format!("{:?}", t.membrane),
            format!("{:?}", t.bending),
            format!("{:?}", t.volume),
            format!("{:?}", h.energy.min_det),
            format!("{:?}", h.grad_norm),
            format!("{:?}", h.step),
        ];
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf8")
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}
