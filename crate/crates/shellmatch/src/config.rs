//! Run configuration: a TOML document with a few top-level keys and the
//! `[energy]`, `[descent]`, `[band_check]` and `[gamma]` sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shellmatch_core::energy::{Bump, EnergyMode};
use shellmatch_core::optimizer::DescentConfig;
use shellmatch_core::stored_energy::StoredEnergy;
use shellmatch_core::EnergyParams;

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Job {
    Match,
    MatchSwapped,
    Symmetry,
    GammaStudy,
    BandCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub shape1: PathBuf,
    pub shape2: PathBuf,
    pub output: PathBuf,
    #[serde(default = "default_jobs")]
    pub jobs: Vec<Job>,
    /// Cells per axis of the distance-field lattice; defaults to
    /// `2^(max_level + 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sdf_cells: Option<usize>,
    #[serde(default)]
    pub energy: EnergySection,
    #[serde(default)]
    pub descent: DescentSection,
    #[serde(default)]
    pub band_check: BandCheckSection,
    #[serde(default)]
    pub gamma: GammaSection,
}

fn default_jobs() -> Vec<Job> {
    vec![Job::Match]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Symmetric,
    Direct,
    Comparison,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityName {
    Bounded,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpName {
    Quartic,
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergySection {
    pub c_match: f64,
    pub c_mem: f64,
    pub c_bend: f64,
    pub c_vol: f64,
    pub q: f64,
    pub theta: u32,
    pub tau: f64,
    pub mode: ModeName,
    pub density: DensityName,
    pub bump: BumpName,
}

impl Default for EnergySection {
    fn default() -> Self {
        let p = EnergyParams::default();
        EnergySection {
            c_match: p.c_match,
            c_mem: p.c_mem,
            c_bend: p.c_bend,
            c_vol: p.c_vol,
            q: p.q,
            theta: p.theta,
            tau: p.tau,
            mode: ModeName::Symmetric,
            density: DensityName::Bounded,
            bump: BumpName::Quartic,
        }
    }
}

impl EnergySection {
    /// Core parameters; `sigma` is set per level by the descent.
    pub fn params(&self) -> EnergyParams {
        EnergyParams {
            c_match: self.c_match,
            c_mem: self.c_mem,
            c_bend: self.c_bend,
            c_vol: self.c_vol,
            q: self.q,
            theta: self.theta,
            tau: self.tau,
            mode: match self.mode {
                ModeName::Symmetric => EnergyMode::Symmetric,
                ModeName::Direct => EnergyMode::Direct,
                ModeName::Comparison => EnergyMode::Comparison,
            },
            density: match self.density {
                DensityName::Bounded => StoredEnergy::Bounded,
                DensityName::Exponential => StoredEnergy::Exponential,
            },
            bump: match self.bump {
                BumpName::Quartic => Bump::Quartic,
                BumpName::Cosine => Bump::Cosine,
            },
            ..EnergyParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DescentSection {
    pub min_level: u32,
    pub max_level: u32,
    pub max_iters_per_level: usize,
    pub armijo_slope: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub min_det_floor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h1_weight: Option<f64>,
    pub grad_tol: f64,
    pub grad_abs_tol: f64,
    pub cg_restart: usize,
    pub sigma_factor: f64,
    pub band_factor: f64,
}

impl Default for DescentSection {
    fn default() -> Self {
        let c = DescentConfig::default();
        DescentSection {
            min_level: c.min_level,
            max_level: c.max_level,
            max_iters_per_level: c.max_iters_per_level,
            armijo_slope: c.armijo_slope,
            backtrack: c.backtrack,
            max_backtracks: c.max_backtracks,
            min_det_floor: c.min_det_floor,
            h1_weight: c.h1_weight,
            grad_tol: c.grad_tol,
            grad_abs_tol: c.grad_abs_tol,
            cg_restart: c.cg_restart,
            sigma_factor: c.sigma_factor,
            band_factor: c.band_factor,
        }
    }
}

impl DescentSection {
    pub fn config(&self) -> DescentConfig {
        DescentConfig {
            min_level: self.min_level,
            max_level: self.max_level,
            max_iters_per_level: self.max_iters_per_level,
            armijo_slope: self.armijo_slope,
            backtrack: self.backtrack,
            max_backtracks: self.max_backtracks,
            min_det_floor: self.min_det_floor,
            h1_weight: self.h1_weight,
            grad_tol: self.grad_tol,
            grad_abs_tol: self.grad_abs_tol,
            cg_restart: self.cg_restart,
            sigma_factor: self.sigma_factor,
            band_factor: self.band_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandCheckSection {
    /// `ε = epsilon_factor · σ` at the finest level.
    pub epsilon_factor: f64,
}

impl Default for BandCheckSection {
    fn default() -> Self {
        BandCheckSection { epsilon_factor: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMap {
    /// Radial blend about `center` taking radius `r1` to `r2`.
    Radial,
    Identity,
    /// The result of the `match` job.
    Match,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaSection {
    pub sigmas: Vec<f64>,
    pub map: GammaMap,
    pub center: Vec<f64>,
    pub r1: f64,
    pub r2: f64,
    pub width: f64,
    pub ramp: f64,
    /// Grid used for `radial` and `identity` maps.
    pub grid_min_level: u32,
    pub grid_max_level: u32,
    pub grid_band: f64,
}

impl Default for GammaSection {
    fn default() -> Self {
        GammaSection {
            sigmas: vec![0.08, 0.04, 0.02, 0.01],
            map: GammaMap::Radial,
            center: vec![0.5, 0.5],
            r1: 0.2,
            r2: 0.25,
            width: 0.08,
            ramp: 0.15,
            grid_min_level: 4,
            grid_max_level: 10,
            grid_band: 0.01,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(path.to_path_buf(), e))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.shape1, &mut config.shape2, &mut config.output] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    /// TOML text that parses back to an equal config.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !matches!(self.dimension, 2 | 3) {
            return Err(Error::Config(format!("dimension must be 2 or 3, got {}", self.dimension)));
        }
        if self.jobs.is_empty() {
            return Err(Error::Config("no jobs requested".into()));
        }
        if self.sdf_cells.is_some_and(|n| n < 8) {
            return Err(Error::Config("sdf_cells must be at least 8".into()));
        }
        self.energy.params().validate(self.dimension).map_err(|e| Error::Config(e.to_string()))?;
        self.descent.config().validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.band_check.epsilon_factor > 0.0) {
            return Err(Error::Config("band_check.epsilon_factor must be positive".into()));
        }
        if self.gamma.center.len() != self.dimension {
            return Err(Error::Config("gamma.center must have one entry per dimension".into()));
        }
        Ok(())
    }

    /// Requested jobs plus the runs they depend on, in execution order.
    pub fn planned_jobs(&self) -> Vec<Job> {
        let wants = |j| self.jobs.contains(&j);
        let needs_match = wants(Job::Match)
            || wants(Job::Symmetry)
            || wants(Job::BandCheck)
            || (wants(Job::GammaStudy) && self.gamma.map == GammaMap::Match);
        let order = [
            (Job::Match, needs_match),
            (Job::MatchSwapped, wants(Job::MatchSwapped) || wants(Job::Symmetry)),
            (Job::Symmetry, wants(Job::Symmetry)),
            (Job::BandCheck, wants(Job::BandCheck)),
            (Job::GammaStudy, wants(Job::GammaStudy)),
        ];
        order.into_iter().filter(|(_, on)| *on).map(|(j, _)| j).collect()
    }

    pub fn lattice_cells(&self) -> usize {
        self.sdf_cells.unwrap_or(1 << (self.descent.max_level + 1))
    }
}
