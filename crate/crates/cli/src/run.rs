//! Experiment orchestration: each experiment produces in-memory CSV
//! artifacts that are written out together with a metadata sidecar.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Arc;

use monosde::greeks::{bel_gradient, fd_gradient, BelConfig, Payoff};
use monosde::malliavin::{malliavin_field_from, malliavin_matrix};
use monosde::shiftlab::{cameron_martin_check, doleans_dade_mean, gateaux_ladder, Functional};
use monosde::solver::simulate_indexed;
use monosde::variational::{jacobian_from, linearize, QuadraticVariation};
use monosde::{
    sample_noise, zoo_lookup, CameronMartinPath, DivergencePolicy, Engine, Error, ModelSpec, StatePath,
};

use crate::config::{
    emit_config, ConfigError, Experiment, ExperimentConfig, FunctionalChoice, PayoffChoice,
};
use crate::verify::{self, Outcome};

/// One output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    /// Acceptance outcomes, for the verify experiment.
    pub outcomes: Vec<Outcome>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("divergence: {0}")]
    Diverged(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("{failed} acceptance criterion/criteria failed")]
    VerifyFailed { failed: usize, output: RunOutput },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Invalid(_) => 1,
            RunError::Diverged(_) | RunError::Io(_) => 2,
            RunError::VerifyFailed { .. } => 3,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        if e.is_path_failure() {
            RunError::Diverged(e.to_string())
        } else {
            RunError::Invalid(e.to_string())
        }
    }
}

/// Fixed 17-significant-digit rendering used in every CSV.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn spec_of(cfg: &ExperimentConfig) -> Result<ModelSpec, RunError> {
    Ok(zoo_lookup(&cfg.model.name, &cfg.model.params)?)
}

fn check_diverged(cfg: &ExperimentConfig, diverged: usize, n: usize) -> Result<(), RunError> {
    if diverged as f64 > cfg.max_diverged_fraction * n as f64 {
        return Err(RunError::Diverged(format!(
            "{diverged} of {n} paths diverged, above max_diverged_fraction = {}",
            cfg.max_diverged_fraction
        )));
    }
    Ok(())
}

/// Per-path results with failed paths dropped under `exclude`.
fn collect_paths<T>(cfg: &ExperimentConfig, results: Vec<monosde::Result<T>>) -> Result<Vec<(usize, T)>, RunError> {
    let n = results.len();
    let mut kept = Vec::with_capacity(n);
    let mut diverged = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => kept.push((i, v)),
            Err(e) if e.is_path_failure() && cfg.divergence == DivergencePolicy::Exclude => diverged += 1,
            Err(e) => return Err(e.into()),
        }
    }
    check_diverged(cfg, diverged, n)?;
    Ok(kept)
}

fn csv(name: &str, text: String) -> Artifact {
    Artifact {
        name: name.to_string(),
        bytes: text.into_bytes(),
    }
}

/// Runs one experiment on `engine`.
pub fn run(cfg: &ExperimentConfig, engine: &Engine) -> Result<RunOutput, RunError> {
    let artifacts = match cfg.experiment {
        Experiment::Simulate => run_simulate(cfg, engine)?,
        Experiment::Jacobian => run_jacobian(cfg, engine)?,
        Experiment::Malliavin => run_malliavin(cfg, engine)?,
        Experiment::Ladder => run_ladder(cfg, engine)?,
        Experiment::CameronMartin => run_cameron_martin(cfg, engine)?,
        Experiment::Greeks => run_greeks(cfg, engine)?,
        Experiment::Verify => {
            let outcomes = verify::run_criteria(&cfg.verify.criteria, cfg.seed, engine);
            let mut text = String::from("criterion,name,passed,detail\n");
            for o in &outcomes {
                writeln!(text, "{},{},{},\"{}\"", o.id, o.name, o.passed, o.detail.replace('"', "'")).unwrap();
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            let output = RunOutput {
                artifacts: vec![csv("verify.csv", text)],
                outcomes,
            };
            if failed > 0 {
                return Err(RunError::VerifyFailed { failed, output });
            }
            return Ok(output);
        }
    };
    Ok(RunOutput {
        artifacts,
        outcomes: Vec::new(),
    })
}

fn run_simulate(cfg: &ExperimentConfig, engine: &Engine) -> Result<Vec<Artifact>, RunError> {
    let spec = spec_of(cfg)?;
    let grid = cfg.time_grid();
    let results = engine.map(cfg.n_paths, |i| simulate_indexed(&spec, &grid, &cfg.scheme, cfg.seed, i as u64));
    let paths = collect_paths(cfg, results)?;
    let d = spec.state_dim();
    let mut text = String::from("path,t");
    for a in 0..d {
        write!(text, ",x_{a}").unwrap();
    }
    text.push('\n');
    for (p, path) in &paths {
        for n in 0..grid.len() {
            write!(text, "{p},{}", fmt_f64(grid.time(n))).unwrap();
            for v in path.value(n) {
                write!(text, ",{}", fmt_f64(*v)).unwrap();
            }
            text.push('\n');
        }
    }
    let summary = format!("n_paths,accepted,diverged\n{},{},{}\n", cfg.n_paths, paths.len(), cfg.n_paths - paths.len());
    Ok(vec![csv("simulate.csv", text), csv("simulate_summary.csv", summary)])
}

fn run_jacobian(cfg: &ExperimentConfig, engine: &Engine) -> Result<Vec<Artifact>, RunError> {
    let spec = spec_of(cfg)?;
    let grid = cfg.time_grid();
    let results = engine.map(cfg.n_paths, |i| {
        let w = sample_noise(&grid, spec.noise_dim(), cfg.seed, i as u64)?;
        let theta = spec.initial.sample(cfg.seed, i as u64);
        let lin = linearize(&spec, &grid, &w, &theta, &cfg.scheme)?;
        jacobian_from(&lin, QuadraticVariation::Realized)
    });
    let bundles = collect_paths(cfg, results)?;
    let d = spec.state_dim();
    let mut flow = String::from("path,t,row,col,j,k\n");
    let mut wron = String::from("path,t,wronskian,det_j,inverse_defect\n");
    for (p, b) in &bundles {
        for n in 0..grid.len() {
            let t = fmt_f64(grid.time(n));
            for (e, (j, k)) in b.j(n).iter().zip(b.k(n)).enumerate() {
                writeln!(flow, "{p},{t},{},{},{},{}", e / d, e % d, fmt_f64(*j), fmt_f64(*k)).unwrap();
            }
            writeln!(
                wron,
                "{p},{t},{},{},{}",
                fmt_f64(b.wronskian(n)),
                fmt_f64(b.determinant(n)),
                fmt_f64(b.inverse_defect(n))
            )
            .unwrap();
        }
    }
    Ok(vec![csv("jacobian.csv", flow), csv("wronskian.csv", wron)])
}

fn run_malliavin(cfg: &ExperimentConfig, engine: &Engine) -> Result<Vec<Artifact>, RunError> {
    let spec = spec_of(cfg)?;
    let grid = cfg.time_grid();
    let stride = cfg.malliavin.s_stride;
    let results = engine.map(cfg.n_paths, |i| {
        let w = sample_noise(&grid, spec.noise_dim(), cfg.seed, i as u64)?;
        let theta = spec.initial.sample(cfg.seed, i as u64);
        let lin = linearize(&spec, &grid, &w, &theta, &cfg.scheme)?;
        let field = malliavin_field_from(spec.field.as_ref(), &lin, &w, stride)?;
        let q = malliavin_matrix(&field, grid.steps())?;
        Ok((field, q))
    });
    let fields = collect_paths(cfg, results)?;
    let (d, m) = (spec.state_dim(), spec.noise_dim());
    let mut text = String::from("path,s,t,row,col,value\n");
    let mut qtext = String::from("path,t,row,col,q,min_eigenvalue\n");
    for (p, (field, q)) in &fields {
        for (row, &s) in field.s_indices().iter().enumerate() {
            let ts = fmt_f64(grid.time(s));
            for t in s..grid.len() {
                let tt = fmt_f64(grid.time(t));
                let entry = field.entry(row, t).expect("t >= s");
                for (k, v) in entry.iter().enumerate() {
                    writeln!(text, "{p},{ts},{tt},{},{},{}", k / m, k % m, fmt_f64(*v)).unwrap();
                }
            }
        }
        for (k, v) in q.q.iter().enumerate() {
            writeln!(
                qtext,
                "{p},{},{},{},{},{}",
                fmt_f64(q.t),
                k / d,
                k % d,
                fmt_f64(*v),
                fmt_f64(q.min_eigenvalue)
            )
            .unwrap();
        }
    }
    Ok(vec![csv("malliavin.csv", text), csv("malliavin_matrix.csv", qtext)])
}

fn run_ladder(cfg: &ExperimentConfig, engine: &Engine) -> Result<Vec<Artifact>, RunError> {
    let spec = spec_of(cfg)?;
    let grid = cfg.time_grid();
    let h = CameronMartinPath::constant(grid, &[cfg.ladder.h])?;
    let ladder = gateaux_ladder(
        &spec,
        &grid,
        &cfg.scheme,
        &h,
        &cfg.ladder.epsilons,
        &cfg.ladder.deltas,
        cfg.n_paths,
        cfg.seed,
        engine,
        cfg.divergence,
    )?;
    check_diverged(cfg, ladder.diverged, cfg.n_paths)?;
    let mut text =
        String::from("epsilon,delta,mean_error,mean_error_stderr,exceedance,exceedance_stderr,n_paths,diverged\n");
    for r in &ladder.rungs {
        for (k, delta) in ladder.deltas.iter().enumerate() {
            writeln!(
                text,
                "{},{},{},{},{},{},{},{}",
                fmt_f64(r.epsilon),
                fmt_f64(*delta),
                fmt_f64(r.mean_error.value()),
                fmt_f64(r.mean_error.error()),
                fmt_f64(r.exceedance[k]),
                fmt_f64(r.exceedance_stderr[k]),
                ladder.n_paths,
                ladder.diverged
            )
            .unwrap();
        }
    }
    Ok(vec![csv("ladder.csv", text)])
}

/// The path functional selected in the configuration.
pub fn functional(choice: FunctionalChoice) -> Box<Functional> {
    match choice {
        FunctionalChoice::One => Box::new(|_: &StatePath| 1.0),
        FunctionalChoice::Terminal => Box::new(|p: &StatePath| p.terminal()[0]),
        FunctionalChoice::SupClipped { clip } => Box::new(move |p: &StatePath| p.sup_norm().min(clip)),
    }
}

/// The payoff selected in the configuration.
pub fn payoff(choice: PayoffChoice) -> Arc<Payoff> {
    match choice {
        PayoffChoice::Identity => Arc::new(|x: &[f64]| x[0]),
        PayoffChoice::Tanh => Arc::new(|x: &[f64]| x[0].tanh()),
        PayoffChoice::Digital { strike } => Arc::new(move |x: &[f64]| f64::from(u8::from(x[0] > strike))),
        PayoffChoice::Constant { value } => Arc::new(move |_: &[f64]| value),
    }
}

fn run_cameron_martin(cfg: &ExperimentConfig, engine: &Engine) -> Result<Vec<Artifact>, RunError> {
    let spec = spec_of(cfg)?;
    let grid = cfg.time_grid();
    let h = CameronMartinPath::constant(grid, &vec![cfg.cameron_martin.h; spec.noise_dim()])?;
    let f = functional(cfg.cameron_martin.functional);
    let report = cameron_martin_check(
        &spec,
        &grid,
        &cfg.scheme,
        &h,
        f.as_ref(),
        cfg.n_paths,
        cfg.seed,
        engine,
        cfg.divergence,
    )?;
    check_diverged(cfg, report.diverged, cfg.n_paths)?;
    let dd = doleans_dade_mean(&grid, &h, cfg.n_paths, cfg.seed, engine)?;
    let text = format!(
        "lhs,lhs_stderr,rhs,rhs_stderr,z_score,doleans_dade,doleans_dade_stderr,n_paths,diverged\n{},{},{},{},{},{},{},{},{}\n",
        fmt_f64(report.lhs.value()),
        fmt_f64(report.lhs.error()),
        fmt_f64(report.rhs.value()),
        fmt_f64(report.rhs.error()),
        fmt_f64(report.z_score),
        fmt_f64(dd.value()),
        fmt_f64(dd.error()),
        cfg.n_paths,
        report.diverged
    );
    Ok(vec![csv("cameron_martin.csv", text)])
}

fn run_greeks(cfg: &ExperimentConfig, engine: &Engine) -> Result<Vec<Artifact>, RunError> {
    let spec = spec_of(cfg)?;
    let grid = cfg.time_grid();
    let t_index = grid.node_index(cfg.greeks.time.unwrap_or(grid.horizon()))?;
    let pay = payoff(cfg.greeks.payoff);
    let bel_cfg = BelConfig {
        weight: cfg.greeks.weight.clone(),
        payoff: pay.clone(),
        t_index,
    };
    let bel = bel_gradient(&spec, &grid, &cfg.scheme, &bel_cfg, cfg.n_paths, cfg.seed, engine, cfg.divergence)?;
    check_diverged(cfg, cfg.n_paths - bel.n_paths, cfg.n_paths)?;
    let fd = fd_gradient(
        &spec,
        &grid,
        &cfg.scheme,
        pay.as_ref(),
        t_index,
        cfg.greeks.fd_eps,
        cfg.n_paths,
        cfg.seed,
        engine,
        cfg.divergence,
    )?;
    check_diverged(cfg, cfg.n_paths - fd.n_paths, cfg.n_paths)?;
    let mut text = String::from("method,component,estimate,stderr,n_paths\n");
    for (method, est) in [("bel", &bel), ("fd", &fd)] {
        for k in 0..est.mean.len() {
            writeln!(
                text,
                "{method},{k},{},{},{}",
                fmt_f64(est.mean[k]),
                fmt_f64(est.stderr[k]),
                est.n_paths
            )
            .unwrap();
        }
    }
    Ok(vec![csv("greeks.csv", text)])
}

/// The sidecar: the full configuration plus library version and seed.
pub fn sidecar(cfg: &ExperimentConfig) -> String {
    format!(
        "{}\n[metadata]\nlibrary = \"monosde\"\nversion = \"{}\"\nseed = {}\n",
        emit_config(cfg),
        env!("CARGO_PKG_VERSION"),
        cfg.seed
    )
}

/// Writes the artifacts and one `<experiment>.meta.toml` sidecar into `dir`.
pub fn write_artifacts(dir: &Path, cfg: &ExperimentConfig, output: &RunOutput) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for a in &output.artifacts {
        fs::write(dir.join(&a.name), &a.bytes)?;
    }
    fs::write(dir.join(format!("{}.meta.toml", cfg.experiment.name())), sidecar(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn config(body: &str) -> ExperimentConfig {
        parse_config(&format!("schema_version = 1\n{body}")).unwrap()
    }

    #[test]
    fn simulate_gbm_is_byte_identical() {
        let cfg = config(
            "experiment = \"simulate\"\nseed = 42\nn_paths = 1\n[model]\nname = \"gbm\"\n[grid]\nT = 1.0\nN = 1024\n",
        );
        let a = run(&cfg, &Engine::sequential()).unwrap();
        let b = run(&cfg, &Engine::parallel(4)).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a.artifacts[0].bytes.clone()).unwrap();
        assert_eq!(text.lines().count(), 1 + 1025);
        assert!(text.starts_with("path,t,x_0\n0,0.0000000000000000e0,1.0000000000000000e0\n"));
    }

    #[test]
    fn ladder_emits_one_row_per_pair() {
        let cfg = config(
            "experiment = \"ladder\"\nn_paths = 20\n[model]\nname = \"ou\"\n[grid]\nT = 1.0\nN = 64\n\
             [scheme]\nkind = \"tamed_euler\"\n[ladder]\nepsilons = [0.5, 0.25, 0.125]\ndeltas = [0.1, 0.01]\n",
        );
        let out = run(&cfg, &Engine::sequential()).unwrap();
        let text = String::from_utf8(out.artifacts[0].bytes.clone()).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 2);
    }

    #[test]
    fn euler_blowup_exits_with_divergence() {
        let cfg = config(
            "experiment = \"simulate\"\nn_paths = 200\n[model]\nname = \"ginzburg_landau\"\n\
             params = { sigma = 3.0, x0 = 10.0 }\n[grid]\nT = 1.0\nN = 64\n",
        );
        let err = run(&cfg, &Engine::sequential()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let mut tolerant = cfg.clone();
        tolerant.divergence = DivergencePolicy::Exclude;
        tolerant.max_diverged_fraction = 0.5;
        assert!(run(&tolerant, &Engine::sequential()).is_ok());
        tolerant.max_diverged_fraction = 0.0;
        assert_eq!(run(&tolerant, &Engine::sequential()).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn bel_on_random_coefficients_is_a_config_error() {
        let cfg = config(
            "experiment = \"greeks\"\nn_paths = 10\n[model]\nname = \"random_sigma_example\"\n[grid]\nT = 1.0\nN = 16\n",
        );
        assert_eq!(run(&cfg, &Engine::sequential()).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn sidecar_reproduces_the_config() {
        let cfg = config("experiment = \"malliavin\"\nseed = 3\n[model]\nname = \"ou\"\n[grid]\nT = 1.0\nN = 32\n");
        let back = parse_config(&sidecar(&cfg)).unwrap();
        assert_eq!(back, cfg);
        let a = run(&cfg, &Engine::sequential()).unwrap();
        let b = run(&back, &Engine::parallel(3)).unwrap();
        assert_eq!(a, b);
    }
}
