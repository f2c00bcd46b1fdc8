//! Ingest, distance fields, descent and diagnostics for one run config.

use std::path::PathBuf;
use std::sync::Arc;

use serde::Serialize;
use shellmatch_core::diagnostics::{band_inclusion_check, gamma_study, radial_blend_map, symmetry_report};
use shellmatch_core::geometry::{fast_march_sdf, Lattice};
use shellmatch_core::optimizer::{run_multiscale_with, DescentState};
use shellmatch_core::{AdaptiveGrid, Deformation, DiscreteShape, SignedShape, Vector};

use crate::config::{GammaMap, Job, RunConfig};
use crate::io::{self, write_atomic};
use crate::report::{self, to_json};
use crate::{checkpoint, Error};

/// What a finished run produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub line_search_failed: bool,
    pub symmetry: Option<report::Symmetry>,
    pub band_check: Option<report::Band>,
    pub gamma: Option<report::Gamma>,
}

impl Outcome {
    /// 0 on success, 2 when some level stopped on a failed line search.
    pub fn exit_code(&self) -> i32 {
        if self.line_search_failed {
            2
        } else {
            0
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    shellmatch_version: &'a str,
    core_version: &'a str,
    threads: usize,
    jobs: Vec<Job>,
    status: &'a str,
    outputs: Vec<String>,
    config: String,
}

/// Runs every job of `config`, writing artifacts under `config.output`.
/// All inputs are read and validated before anything is written.
pub fn run(config: &RunConfig) -> Result<Outcome, Error> {
    run_jobs(config, &config.planned_jobs())
}

/// Runs only the Γ-study of `config`.
pub fn run_gamma(config: &RunConfig) -> Result<Outcome, Error> {
    let mut jobs = vec![Job::GammaStudy];
    if config.gamma.map == GammaMap::Match {
        jobs.insert(0, Job::Match);
    }
    run_jobs(config, &jobs)
}

fn run_jobs(config: &RunConfig, jobs: &[Job]) -> Result<Outcome, Error> {
    config.validate()?;
    let mut outcome = match config.dimension {
        2 => Run::<2>::prepare(config)?.execute(jobs)?,
        3 => Run::<3>::prepare(config)?.execute(jobs)?,
        d => return Err(Error::Config(format!("unsupported dimension {d}"))),
    };
    let manifest_path = config.output.join("manifest.json");
    outcome.outputs.push(manifest_path.clone());
    let manifest = Manifest {
        shellmatch_version: env!("CARGO_PKG_VERSION"),
        core_version: shellmatch_core::VERSION,
        threads: rayon::current_num_threads(),
        jobs: jobs.to_vec(),
        status: if outcome.line_search_failed { "line_search_failed" } else { "ok" },
        outputs: outcome.outputs.iter().map(|p| p.display().to_string()).collect(),
        config: config.echo(),
    };
    write_atomic(&manifest_path, to_json(&manifest).as_bytes())?;
    Ok(outcome)
}

struct Run<'a, const D: usize> {
    config: &'a RunConfig,
    shape1: DiscreteShape<D>,
    shape2: DiscreteShape<D>,
    sdf1: SignedShape<D>,
    sdf2: SignedShape<D>,
    outcome: Outcome,
}

impl<'a, const D: usize> Run<'a, D> {
    fn prepare(config: &'a RunConfig) -> Result<Self, Error> {
        let shape1 = io::read_shape::<D>(&config.shape1)?;
        let shape2 = io::read_shape::<D>(&config.shape2)?;
        let cells = config.lattice_cells();
        let sdf1 = fast_march_sdf(&shape1, Lattice::new(cells));
        let sdf2 = fast_march_sdf(&shape2, Lattice::new(cells));
        Ok(Run { config, shape1, shape2, sdf1, sdf2, outcome: Outcome::default() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.output.join(name)
    }

    fn write(&mut self, name: &str, text: &str) -> Result<(), Error> {
        let path = self.path(name);
        write_atomic(&path, text.as_bytes())?;
        self.outcome.outputs.push(path);
        Ok(())
    }

    fn execute(mut self, jobs: &[Job]) -> Result<Outcome, Error> {
        let mut forward = None;
        let mut backward = None;
        for &job in jobs {
            match job {
                Job::Match => forward = Some(self.descend(false)?),
                Job::MatchSwapped => backward = Some(self.descend(true)?),
                Job::Symmetry => {
                    let (Some(f), Some(b)) = (&forward, &backward) else {
                        return Err(Error::Config("symmetry needs both match runs".into()));
                    };
                    let r = symmetry_report(&f.phi, &b.phi, &self.shape1, self.config.energy.params().mode);
                    let r = report::Symmetry::from(&r);
                    self.write("symmetry.json", &to_json(&r))?;
                    self.outcome.symmetry = Some(r);
                }
                Job::BandCheck => {
                    let f = forward.as_ref().ok_or_else(|| Error::Config("band_check needs the match run".into()))?;
                    let sigma = self.config.descent.config().sigma(self.config.descent.max_level);
                    let epsilon = self.config.band_check.epsilon_factor * sigma;
                    let check = band_inclusion_check(&f.phi, &self.sdf1, &self.sdf2, sigma, epsilon);
                    let r = report::Band::new(&check, sigma, epsilon);
                    self.write("band_check.json", &to_json(&r))?;
                    self.outcome.band_check = Some(r);
                }
                Job::GammaStudy => {
                    let phi = self.gamma_map(forward.as_ref())?;
                    let params = shellmatch_core::EnergyParams { theta: 0, ..self.config.energy.params() };
                    let study = gamma_study(&phi, &self.sdf1, &self.sdf2, &self.shape1, &params, &self.config.gamma.sigmas)
                        .map_err(|e| Error::Config(format!("gamma study: {e}")))?;
                    let r = report::Gamma::from(&study);
                    self.write("gamma_study.json", &to_json(&r))?;
                    self.write("gamma_study.csv", &report::gamma_csv(&study))?;
                    self.outcome.gamma = Some(r);
                }
            }
        }
        Ok(self.outcome)
    }

    fn descend(&mut self, swapped: bool) -> Result<DescentState<D>, Error> {
        let (s1, s2) = if swapped { (&self.sdf2, &self.sdf1) } else { (&self.sdf1, &self.sdf2) };
        let params = self.config.energy.params();
        let descent = self.config.descent.config();
        let state = run_multiscale_with(s1, s2, &params, &descent, None, &mut |_| {})?;
        self.outcome.line_search_failed |= state.line_search_failed;

        let tag = if swapped { "match_swapped" } else { "match" };
        let source = if swapped { self.shape2.clone() } else { self.shape1.clone() };
        let ckpt = self.path(&format!("{tag}.shlm"));
        checkpoint::save(&ckpt, &state.phi, state.level)?;
        self.outcome.outputs.push(ckpt);
        let sidecar = report::Sidecar::new(&state, self.config.echo());
        self.write(&format!("{tag}.shlm.json"), &to_json(&sidecar))?;
        self.write(&format!("{tag}_history.csv"), &report::history_csv(&state.energy_history))?;
        let identity = Deformation::identity(state.phi.grid().clone());
        self.write(&format!("{tag}_grid_initial.vtk"), &io::grid_vtk(&identity, "initial grid"))?;
        self.write(&format!("{tag}_grid_deformed.vtk"), &io::grid_vtk(&state.phi, "deformed grid"))?;
        self.write(&format!("{tag}_shape_initial.vtk"), &io::shape_vtk(&source, "initial shape"))?;
        let written = io::export_deformed(&source, &state.phi, &self.path(&format!("{tag}_shape_deformed")))?;
        self.outcome.outputs.extend(written);
        Ok(state)
    }

    fn gamma_map(&self, forward: Option<&DescentState<D>>) -> Result<Deformation<D>, Error> {
        let g = &self.config.gamma;
        if g.map == GammaMap::Match {
            return forward.map(|s| s.phi.clone()).ok_or_else(|| Error::Config("gamma map `match` needs the match run".into()));
        }
        let grid = AdaptiveGrid::build(g.grid_min_level, g.grid_max_level, &self.sdf1, &self.sdf1, g.grid_band)
            .map_err(|e| Error::Config(format!("gamma grid: {e}")))?;
        let grid = Arc::new(grid);
        Ok(match g.map {
            GammaMap::Identity => Deformation::identity(grid),
            _ => {
                let center = Vector(core::array::from_fn(|k| g.center[k]));
                Deformation::interpolate(grid, radial_blend_map(center, g.r1, g.r2, g.width, g.ramp))
            }
        })
    }
}

/// Caps the global worker pool at `SHELLMATCH_THREADS` when it is set.
pub fn configure_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var("SHELLMATCH_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("SHELLMATCH_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

