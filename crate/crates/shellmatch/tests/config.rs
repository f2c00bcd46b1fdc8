use std::path::Path;

use shellmatch::config::{GammaMap, Job};
use shellmatch::RunConfig;
use shellmatch_core::EnergyMode;

const JUMP: &str = r#"
dimension = 2
shape1 = "jump_a.csv"
shape2 = "jump_b.csv"
output = "out/jump"
jobs = ["symmetry"]

[energy]
c_match = 0.512
c_vol = 0.8
c_mem = 1.0
c_bend = 1.0
q = 3.0
theta = 1

[descent]
min_level = 4
max_level = 9
"#;

const STARFISH: &str = r#"
dimension = 2
shape1 = "starfish_a.csv"
shape2 = "starfish_b.csv"
output = "out/starfish"

[energy]
c_match = 4.096
c_bend = 0.2
q = 4.0

[descent]
min_level = 4
max_level = 8
"#;

#[test]
fn jump_style_config_echoes_identically() {
    let c = RunConfig::parse(JUMP).unwrap();
    let p = c.energy.params();
    assert_eq!((p.c_match, p.c_vol, p.c_mem, p.c_bend, p.q, p.theta), (0.512, 0.8, 1.0, 1.0, 3.0, 1));
    assert_eq!((c.descent.min_level, c.descent.max_level), (4, 9));
    let echo = c.echo();
    let again = RunConfig::parse(&echo).unwrap();
    assert_eq!(again, c);
    assert_eq!(again.echo(), echo);
}

#[test]
fn starfish_style_config_echoes_identically() {
    let c = RunConfig::parse(STARFISH).unwrap();
    let p = c.energy.params();
    assert_eq!((p.c_match, p.c_bend, p.q), (4.096, 0.2, 4.0));
    assert_eq!((c.descent.min_level, c.descent.max_level), (4, 8));
    assert_eq!(c.jobs, vec![Job::Match]);
    assert_eq!(p.mode, EnergyMode::Symmetric);
    let again = RunConfig::parse(&c.echo()).unwrap();
    assert_eq!(again, c);
}

#[test]
fn unknown_keys_and_bad_values_are_rejected() {
    assert!(RunConfig::parse(&format!("{JUMP}\nbogus = 1\n")).is_err());
    assert!(RunConfig::parse(&JUMP.replace("c_match = 0.512", "c_match = 0.512\nc_mtach = 1.0")).is_err());
    assert!(RunConfig::parse(&JUMP.replace("dimension = 2", "dimension = 4")).is_err());
    assert!(RunConfig::parse(&JUMP.replace("min_level = 4", "min_level = 12")).is_err());
    assert!(RunConfig::parse(&JUMP.replace("q = 3.0", "q = 1.0")).is_err());
    assert!(RunConfig::parse(&JUMP.replace(r#"jobs = ["symmetry"]"#, "jobs = []")).is_err());
    assert!(RunConfig::parse(&JUMP.replace(r#"jobs = ["symmetry"]"#, r#"jobs = ["smoothing"]"#)).is_err());
    let three_d = JUMP.replace("dimension = 2", "dimension = 3");
    assert!(RunConfig::parse(&three_d).is_err(), "gamma center keeps two entries");
    assert!(RunConfig::parse(&format!("{three_d}\n[gamma]\ncenter = [0.5, 0.5, 0.5]\n")).is_ok());
}

#[test]
fn planned_jobs_pull_in_dependencies() {
    let c = RunConfig::parse(JUMP).unwrap();
    assert_eq!(c.planned_jobs(), vec![Job::Match, Job::MatchSwapped, Job::Symmetry]);
    let mut g = RunConfig::parse(STARFISH).unwrap();
    g.jobs = vec![Job::GammaStudy];
    assert_eq!(g.planned_jobs(), vec![Job::GammaStudy]);
    g.gamma.map = GammaMap::Match;
    assert_eq!(g.planned_jobs(), vec![Job::Match, Job::GammaStudy]);
    g.jobs = vec![Job::BandCheck, Job::MatchSwapped];
    assert_eq!(g.planned_jobs(), vec![Job::Match, Job::MatchSwapped, Job::BandCheck]);
}

#[test]
fn lattice_follows_finest_level_unless_set() {
    let mut c = RunConfig::parse(STARFISH).unwrap();
    assert_eq!(c.lattice_cells(), 512);
    c.sdf_cells = Some(300);
    assert_eq!(c.lattice_cells(), 300);
}

#[test]
fn load_resolves_paths_against_the_config_directory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, JUMP).unwrap();
    let c = RunConfig::load(&path).unwrap();
    assert_eq!(c.shape1, dir.path().join("jump_a.csv"));
    assert_eq!(c.output, dir.path().join("out/jump"));
    assert!(RunConfig::load(Path::new("/nonexistent/run.toml")).is_err());
}
