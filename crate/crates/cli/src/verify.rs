//! The acceptance suite. Each criterion runs at desk scale and reports one
//! pass/fail outcome with the measured quantities.

use std::collections::BTreeMap;
use std::sync::Arc;

use monosde::greeks::{bel_gradient, fd_gradient, BelConfig, BelWeight};
use monosde::malliavin::{malliavin_field_from, malliavin_row};
use monosde::models::closed_form_malliavin_row;
use monosde::shiftlab::{cameron_martin_check, doleans_dade_mean, gateaux_ladder};
use monosde::solver::{estimate_sup_moment, stability_ratio};
use monosde::variational::{gateaux_direction, jacobian_from, linearize, QuadraticVariation};
use monosde::{
    reduce_paths, sample_noise, zoo_lookup, CameronMartinPath, DivergencePolicy, Engine, McEstimate,
    ModelSpec, Result, SchemeChoice, TimeGrid,
};

use crate::config::{parse_config, Experiment};
use crate::run::run;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub const CRITERIA: [(u32, &str); 11] = [
    (1, "ou_malliavin_oracle"),
    (2, "gbm_exact_identities"),
    (3, "inverse_and_wronskian"),
    (4, "representation_formula"),
    (5, "random_sigma_oracle"),
    (6, "cameron_martin_identity"),
    (7, "gateaux_ladder"),
    (8, "bel_vs_oracle"),
    (9, "taming_necessity"),
    (10, "stability_ratio"),
    (11, "determinism"),
];

/// Runs the listed criteria, or all of them when `ids` is empty.
pub fn run_criteria(ids: &[u32], seed: u64, engine: &Engine) -> Vec<Outcome> {
    CRITERIA
        .iter()
        .filter(|(id, _)| ids.is_empty() || ids.contains(id))
        .map(|&(id, name)| {
            let result = match id {
                1 => ou_malliavin_oracle(seed, engine),
                2 => gbm_exact_identities(seed),
                3 => inverse_and_wronskian(seed, engine),
                4 => representation_formula(seed, engine),
                5 => random_sigma_oracle(seed, engine),
                6 => cameron_martin_identity(seed, engine),
                7 => gateaux(seed, engine),
                8 => bel_vs_oracle(seed, engine),
                9 => taming_necessity(seed, engine),
                10 => stability(seed, engine),
                _ => determinism(seed),
            };
            let (passed, detail) = match result {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            Outcome { id, name, passed, detail }
        })
        .collect()
}

/// Runs one criterion by number.
pub fn run_criterion(id: u32, seed: u64, engine: &Engine) -> Outcome {
    run_criteria(&[id], seed, engine).remove(0)
}

fn model(name: &str, kv: &[(&str, f64)]) -> Result<ModelSpec> {
    let params: BTreeMap<String, f64> = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    zoo_lookup(name, &params)
}

/// Least-squares slope of `-log2(err)` against `log2(N)`.
pub fn observed_order(steps: &[usize], errors: &[f64]) -> f64 {
    let x: Vec<f64> = steps.iter().map(|&n| (n as f64).log2()).collect();
    let y: Vec<f64> = errors.iter().map(|e| -e.log2()).collect();
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn combined(a: &McEstimate, b: &McEstimate) -> f64 {
    (a.error().powi(2) + b.error().powi(2)).sqrt()
}

type Check = Result<(bool, String)>;

fn ou_malliavin_oracle(seed: u64, engine: &Engine) -> Check {
    let (kappa, sigma) = (1.0, 0.5);
    let spec = model("ou", &[("kappa", kappa), ("sigma", sigma)])?;
    let steps = [1usize << 10, 1 << 11, 1 << 12];
    let paths = 8;
    let mut errors = Vec::new();
    let mut within = true;
    for &n in &steps {
        let grid = TimeGrid::new(1.0, n)?;
        let tol = 5.0 * kappa * kappa * grid.horizon() * grid.dt();
        let worst = engine.map(paths, |p| -> Result<f64> {
            let w = sample_noise(&grid, 1, seed, p as u64)?;
            let lin = linearize(&spec, &grid, &w, &[1.0], &SchemeChoice::euler())?;
            let field = malliavin_field_from(spec.field.as_ref(), &lin, &w, n / 64)?;
            let mut worst = 0.0f64;
            for &s in field.s_indices() {
                for t in s..=n {
                    let exact = sigma * (-kappa * (grid.time(t) - grid.time(s))).exp();
                    worst = worst.max((field.get(s, t).expect("lattice")[0] - exact).abs());
                }
            }
            Ok(worst)
        });
        let worst = worst.into_iter().collect::<Result<Vec<_>>>()?;
        within &= worst.iter().all(|&e| e <= tol);
        errors.push(worst.iter().cloned().fold(0.0, f64::max));
    }
    let order = observed_order(&steps, &errors);
    Ok((
        within && order >= 0.9,
        format!(
            "max errors {:.3e} {:.3e} {:.3e} vs 5k^2Tdt; observed order {order:.3}",
            errors[0], errors[1], errors[2]
        ),
    ))
}

fn gbm_exact_identities(seed: u64) -> Check {
    let (x0, sigma) = (1.3, 0.2);
    let spec = model("gbm", &[("mu", 0.05), ("sigma", sigma), ("x0", x0)])?;
    let grid = TimeGrid::new(1.0, 1 << 10)?;
    let scheme = SchemeChoice::euler();
    let h = 0.7;
    let (mut ej, mut ed, mut ef) = (0.0f64, 0.0f64, 0.0f64);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    for p in 0..10 {
        let w = sample_noise(&grid, 1, seed, p)?;
        let lin = linearize(&spec, &grid, &w, &[x0], &scheme)?;
        let bundle = jacobian_from(&lin, QuadraticVariation::Realized)?;
        let field = malliavin_field_from(spec.field.as_ref(), &lin, &w, 16)?;
        let dir = gateaux_direction(&spec, &grid, &w, &[x0], &scheme, &[h])?;
        let x = lin.base();
        for t in 0..grid.len() {
            let xt = x.value(t)[0];
            ej = ej.max(rel(bundle.j(t)[0], xt / x0));
            ef = ef.max(rel(dir.value(t)[0], bundle.j(t)[0] * h));
        }
        for &s in field.s_indices() {
            for t in s..grid.len() {
                ed = ed.max(rel(field.get(s, t).expect("lattice")[0], sigma * x.value(t)[0]));
            }
        }
    }
    Ok((
        ej <= 1e-12 && ed <= 1e-12 && ef <= 1e-12,
        format!("relative errors J {ej:.2e} DX {ed:.2e} F {ef:.2e}"),
    ))
}

/// Mean over paths of `max defect / dt` for the inverse, Wronskian and
/// representation defects, and the count of non-positive Wronskians.
fn defect_constants(seed: u64, engine: &Engine, n: usize) -> Result<([f64; 3], usize)> {
    let spec = model("ginzburg_landau", &[("eta", 1.0), ("sigma", 1.0)])?;
    let grid = TimeGrid::new(1.0, n)?;
    let dt = grid.dt();
    let red = reduce_paths(engine, 100, 4, DivergencePolicy::Exclude, |p| {
        let w = sample_noise(&grid, 1, seed, p)?;
        let lin = linearize(&spec, &grid, &w, &[1.0], &SchemeChoice::tamed())?;
        let bundle = match jacobian_from(&lin, QuadraticVariation::Realized) {
            Ok(b) => b,
            Err(monosde::Error::DegenerateWronskian { .. }) => return Ok(vec![0.0, 0.0, 0.0, 1.0]),
            Err(e) => return Err(e),
        };
        let field = malliavin_field_from(spec.field.as_ref(), &lin, &w, n / 64)?;
        let positive = (0..grid.len()).all(|i| bundle.wronskian(i) > 0.0);
        Ok(vec![
            bundle.max_inverse_defect() / dt,
            bundle.max_wronskian_defect() / dt,
            field.representation_defect(&bundle) / dt,
            f64::from(u8::from(!positive)),
        ])
    })?;
    let est = red.moments.finish()?;
    let bad = (est.mean[3] * est.n_paths as f64).round() as usize;
    Ok(([est.mean[0], est.mean[1], est.mean[2]], bad))
}

fn stable_within_two(c: &[f64]) -> bool {
    let max = c.iter().cloned().fold(f64::MIN, f64::max);
    let min = c.iter().cloned().fold(f64::MAX, f64::min);
    min > 0.0 && max <= 2.0 * min
}

fn inverse_and_wronskian(seed: u64, engine: &Engine) -> Check {
    let (mut ck, mut cw, mut bad) = (Vec::new(), Vec::new(), 0);
    for n in [1 << 10, 1 << 11, 1 << 12] {
        let (c, b) = defect_constants(seed, engine, n)?;
        ck.push(c[0]);
        cw.push(c[1]);
        bad += b;
    }
    Ok((
        stable_within_two(&ck) && stable_within_two(&cw) && bad == 0,
        format!(
            "C_K {:.3} {:.3} {:.3}; C_W {:.3} {:.3} {:.3}; non-positive Wronskians {bad}",
            ck[0], ck[1], ck[2], cw[0], cw[1], cw[2]
        ),
    ))
}

fn representation_formula(seed: u64, engine: &Engine) -> Check {
    let mut cr = Vec::new();
    for n in [1 << 10, 1 << 11, 1 << 12] {
        cr.push(defect_constants(seed, engine, n)?.0[2]);
    }
    Ok((
        stable_within_two(&cr),
        format!("C_R {:.3} {:.3} {:.3}", cr[0], cr[1], cr[2]),
    ))
}

fn random_sigma_oracle(seed: u64, engine: &Engine) -> Check {
    let spec = model("random_sigma_example", &[])?;
    let steps = [1usize << 6, 1 << 7, 1 << 8, 1 << 9, 1 << 10];
    let paths = 1000;
    let mut errors = Vec::new();
    for &n in &steps {
        let grid = TimeGrid::new(1.0, n)?;
        let red = reduce_paths(engine, paths, 1, DivergencePolicy::Fail, |p| {
            let w = sample_noise(&grid, 1, seed, p)?;
            let lin = linearize(&spec, &grid, &w, &[1.0], &SchemeChoice::euler())?;
            let field = malliavin_field_from(spec.field.as_ref(), &lin, &w, n / 16)?;
            let mut worst = 0.0f64;
            for &s in field.s_indices() {
                let exact = closed_form_malliavin_row(&spec, &w, s)?;
                for t in s..=n {
                    worst = worst.max((field.get(s, t).expect("lattice")[0] - exact[t - s]).abs());
                }
            }
            Ok(vec![worst])
        })?;
        errors.push(red.moments.finish()?.value());
    }
    let order = observed_order(&steps, &errors);

    // Jump across the step of g at s = 1/2, seen at t = T.
    let n = steps[steps.len() - 1];
    let grid = TimeGrid::new(1.0, n)?;
    let sp = n / 2;
    let red = reduce_paths(engine, paths, 2, DivergencePolicy::Fail, |p| {
        let w = sample_noise(&grid, 1, seed, p)?;
        let lin = linearize(&spec, &grid, &w, &[1.0], &SchemeChoice::euler())?;
        let after = malliavin_row(spec.field.as_ref(), &lin, &w, sp)?;
        let before = malliavin_row(spec.field.as_ref(), &lin, &w, sp - 1)?;
        let numeric = after.at(n - sp)[0] - before.at(n - sp + 1)[0];
        let a = closed_form_malliavin_row(&spec, &w, sp)?;
        let b = closed_form_malliavin_row(&spec, &w, sp - 1)?;
        let oracle = a[n - sp] - b[n - sp + 1];
        Ok(vec![(numeric - oracle).abs(), oracle.abs()])
    })?;
    let jump = red.moments.finish()?;
    let jump_rel = jump.mean[0] / jump.mean[1];
    Ok((
        (0.35..=0.65).contains(&order) && jump_rel <= 0.1,
        format!(
            "mean sup errors {}; observed order {order:.3}; jump relative L1 error {jump_rel:.4}",
            errors.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>().join(" ")
        ),
    ))
}

fn cameron_martin_identity(seed: u64, engine: &Engine) -> Check {
    let spec = model("ou", &[("kappa", 1.0), ("sigma", 0.5)])?;
    let grid = TimeGrid::new(1.0, 1 << 10)?;
    let h = CameronMartinPath::constant(grid, &[0.5])?;
    let clipped = |p: &monosde::StatePath| p.sup_norm().min(10.0);
    let n = 10_000;
    let report = cameron_martin_check(
        &spec,
        &grid,
        &SchemeChoice::euler(),
        &h,
        &clipped,
        n,
        seed,
        engine,
        DivergencePolicy::Fail,
    )?;
    let dd = doleans_dade_mean(&grid, &h, n, seed, engine)?;
    let dd_z = (dd.value() - 1.0).abs() / dd.error();
    Ok((
        report.z_score <= 3.0 && dd_z <= 3.0,
        format!(
            "lhs {:.5} rhs {:.5} z {:.3}; E[dd] {:.5} +- {:.5} (z {dd_z:.3})",
            report.lhs.value(),
            report.rhs.value(),
            report.z_score,
            dd.value(),
            dd.error()
        ),
    ))
}

fn gateaux(seed: u64, engine: &Engine) -> Check {
    let grid = TimeGrid::new(1.0, 1 << 10)?;
    let epsilons: Vec<f64> = (1..=7).map(|k| 0.5f64.powi(k)).collect();
    let cases = [
        ("ou", model("ou", &[("kappa", 1.0), ("sigma", 0.5)])?, 32.0),
        ("ginzburg_landau", model("ginzburg_landau", &[("eta", 1.0), ("sigma", 1.0)])?, 1.0),
    ];
    let mut passed = true;
    let mut detail = Vec::new();
    for (name, spec, hdot) in &cases {
        let h = CameronMartinPath::constant(grid, &[*hdot])?;
        let ladder = gateaux_ladder(
            spec,
            &grid,
            &SchemeChoice::tamed(),
            &h,
            &epsilons,
            &[1e-2],
            2000,
            seed,
            engine,
            DivergencePolicy::Fail,
        )?;
        let monotone = ladder.is_non_increasing(2.0);
        let drops = ladder.exceedance_drops(0);
        let (first, last) = (&ladder.rungs[0], &ladder.rungs[ladder.rungs.len() - 1]);
        passed &= monotone && drops;
        detail.push(format!(
            "{name} (hdot {hdot}): E[delta] {:.3e} -> {:.3e} non-increasing {monotone}; P[delta > 1e-2] {:.4} -> {:.4}",
            first.mean_error.value(),
            last.mean_error.value(),
            first.exceedance[0],
            last.exceedance[0]
        ));
    }
    Ok((passed, detail.join("; ")))
}

fn bel_vs_oracle(seed: u64, engine: &Engine) -> Check {
    let (mu, sigma) = (0.05, 0.2);
    let gbm = model("gbm", &[("mu", mu), ("sigma", sigma), ("x0", 1.0)])?;
    let grid = TimeGrid::new(1.0, 1 << 8)?;
    let n = grid.steps();
    let policy = DivergencePolicy::Fail;
    let identity = BelConfig {
        weight: BelWeight::Constant,
        payoff: Arc::new(|x: &[f64]| x[0]),
        t_index: n,
    };
    let euler = SchemeChoice::euler();
    let delta = bel_gradient(&gbm, &grid, &euler, &identity, 100_000, seed, engine, policy)?;
    let target = mu.exp();
    let z_gbm = (delta.value() - target).abs() / delta.error();

    let gl = model("ginzburg_landau", &[("eta", 1.0), ("sigma", 1.0), ("x0", 1.0)])?;
    let tamed = SchemeChoice::tamed();
    let paths = 100_000;
    let tanh = BelConfig {
        weight: BelWeight::Constant,
        payoff: Arc::new(|x: &[f64]| x[0].tanh()),
        t_index: n,
    };
    let bel = bel_gradient(&gl, &grid, &tamed, &tanh, paths, seed, engine, policy)?;
    let fd = fd_gradient(&gl, &grid, &tamed, tanh.payoff.as_ref(), n, 1e-3, paths, seed, engine, policy)?;
    let z_fd = (bel.value() - fd.value()).abs() / combined(&bel, &fd);
    let linear = BelConfig {
        weight: BelWeight::Linear,
        ..tanh.clone()
    };
    let bel_lin = bel_gradient(&gl, &grid, &tamed, &linear, paths, seed, engine, policy)?;
    let gap = (bel.value() - bel_lin.value()).abs();
    let ci = 1.96 * combined(&bel, &bel_lin);
    Ok((
        z_gbm <= 3.0 && z_fd <= 3.0 && gap <= ci,
        format!(
            "gbm delta {:.5} +- {:.5} vs e^muT {target:.5} (z {z_gbm:.3}); gl bel {:.5} fd {:.5} (z {z_fd:.3}); weights constant vs linear gap {gap:.2e} <= {ci:.2e}",
            delta.value(),
            delta.error(),
            bel.value(),
            fd.value()
        ),
    ))
}

fn taming_necessity(seed: u64, engine: &Engine) -> Check {
    let spec = model("ginzburg_landau", &[("eta", 1.0), ("sigma", 3.0), ("x0", 10.0)])?;
    let grid = TimeGrid::new(1.0, 1 << 6)?;
    let paths = 1000;
    let count = |scheme: SchemeChoice| -> Result<usize> {
        let r = estimate_sup_moment(&spec, &grid, &scheme, 1.0, paths, seed, engine, DivergencePolicy::Exclude)?;
        Ok(r.diverged)
    };
    let (euler, tamed, implicit) = (
        count(SchemeChoice::euler())?,
        count(SchemeChoice::tamed())?,
        count(SchemeChoice::implicit())?,
    );
    Ok((
        euler * 100 >= paths && tamed == 0 && implicit == 0,
        format!("diverged of {paths}: euler {euler} tamed {tamed} split-step {implicit}"),
    ))
}

fn stability(seed: u64, engine: &Engine) -> Check {
    let grid = TimeGrid::new(1.0, 1 << 10)?;
    let gaps = [1e-1, 1e-2, 1e-3];
    let policy = DivergencePolicy::Fail;
    let ratios = |spec: &ModelSpec, scheme: SchemeChoice| -> Result<Vec<McEstimate>> {
        gaps.iter()
            .map(|g| {
                stability_ratio(spec, &grid, &scheme, &[1.0], &[1.0 + g], 2.0, 1000, seed, engine, policy)
                    .map(|r| r.estimate)
            })
            .collect()
    };
    let gbm = ratios(&model("gbm", &[])?, SchemeChoice::euler())?;
    let v: Vec<f64> = gbm.iter().map(|e| e.value()).collect();
    let max = v.iter().cloned().fold(f64::MIN, f64::max);
    let min = v.iter().cloned().fold(f64::MAX, f64::min);
    let spread = max / min - 1.0;
    let gl = ratios(&model("ginzburg_landau", &[])?, SchemeChoice::tamed())?;
    let growing = gl.windows(2).all(|p| p[1].value() - p[0].value() > 2.0 * combined(&p[0], &p[1]));
    let finite = gl.iter().all(|e| e.value().is_finite());
    Ok((
        spread <= 0.01 && !growing && finite,
        format!(
            "gbm ratios {:.6} {:.6} {:.6} (spread {spread:.2e}); gl ratios {:.5} {:.5} {:.5}",
            v[0],
            v[1],
            v[2],
            gl[0].value(),
            gl[1].value(),
            gl[2].value()
        ),
    ))
}

/// Small configurations covering every experiment.
pub fn determinism_configs(seed: u64) -> Vec<String> {
    let head = |e: Experiment, n_paths: usize| {
        format!("schema_version = 1\nexperiment = \"{}\"\nseed = {seed}\nn_paths = {n_paths}\n", e.name())
    };
    vec![
        head(Experiment::Simulate, 8) + "[model]\nname = \"gbm\"\n[grid]\nT = 1.0\nN = 1024\n",
        head(Experiment::Jacobian, 4)
            + "[model]\nname = \"ginzburg_landau\"\n[grid]\nT = 1.0\nN = 256\n[scheme]\nkind = \"tamed_euler\"\n",
        head(Experiment::Malliavin, 4)
            + "[model]\nname = \"random_sigma_example\"\n[grid]\nT = 1.0\nN = 128\n[malliavin]\ns_stride = 8\n",
        head(Experiment::Ladder, 3000)
            + "[model]\nname = \"ou\"\n[grid]\nT = 1.0\nN = 128\n[scheme]\nkind = \"tamed_euler\"\n",
        head(Experiment::CameronMartin, 3000)
            + "[model]\nname = \"ou\"\n[grid]\nT = 1.0\nN = 128\n[cameron_martin]\nfunctional = \"sup_clipped\"\n",
        head(Experiment::Greeks, 3000)
            + "[model]\nname = \"ginzburg_landau\"\n[grid]\nT = 1.0\nN = 128\n[scheme]\nkind = \"split_step_implicit\"\n\
               [greeks]\npayoff = \"tanh\"\n",
        head(Experiment::Verify, 1) + "[verify]\ncriteria = [2]\n",
    ]
}

fn determinism(seed: u64) -> Check {
    let mut checked = Vec::new();
    let mut passed = true;
    for text in determinism_configs(seed) {
        let cfg = parse_config(&text).map_err(|e| monosde::Error::InvalidParameter {
            name: "determinism config".into(),
            reason: e.to_string(),
        })?;
        let outputs: Vec<_> = [1, 4].iter().map(|&w| run(&cfg, &Engine::parallel(w))).collect();
        let same = match (&outputs[0], &outputs[1]) {
            (Ok(a), Ok(b)) => a.artifacts == b.artifacts,
            _ => false,
        };
        passed &= same;
        checked.push(format!("{} {}", cfg.experiment.name(), if same { "identical" } else { "DIFFERENT" }));
    }
    Ok((passed, format!("workers 1 vs 4: {}", checked.join(" "))))
}
