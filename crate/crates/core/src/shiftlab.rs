//! Cameron–Martin shifts of the driving noise: the Doléans–Dade density,
//! the shift identity `E[F(ω + h)] = E[F(ω) ℰ(ḣ)(T)]`, difference-quotient
//! ladders for stochastic Gâteaux differentiability and a Grönwall-type
//! convergence-in-probability experiment.

use rand_distr::{Cauchy, Distribution};

use crate::engine::{reduce_paths, DivergencePolicy, Engine};
use crate::error::{Error, Result};
use crate::estimate::McEstimate;
use crate::grid::TimeGrid;
use crate::malliavin::directional_derivative_from;
use crate::models::ModelSpec;
use crate::noise::{auxiliary_rng, sample_noise, shift_noise, CameronMartinPath, NoisePath};
use crate::path::StatePath;
use crate::solver::{simulate, SchemeChoice};
use crate::variational::linearize;

/// Real functional of a state path.
pub type Functional = dyn Fn(&StatePath) -> f64 + Send + Sync;

/// `exp(Σ_{i<t} ḣ_i·ΔW_i - ½ Σ_{i<t} |ḣ_i|² dt)`.
pub fn doleans_dade(w: &NoisePath, h: &CameronMartinPath, t_index: usize) -> Result<f64> {
    if w.grid() != h.grid() || w.dim() != h.dim() {
        return Err(Error::invalid("h", "direction and noise live on different grids or dimensions"));
    }
    if t_index > w.grid().steps() {
        return Err(Error::invalid("t_index", "beyond the grid"));
    }
    let dt = w.grid().dt();
    let mut exponent = 0.0;
    for i in 0..t_index {
        let hd = h.density(i);
        let dw = w.increment(i);
        for k in 0..hd.len() {
            exponent += hd[k] * dw[k] - 0.5 * hd[k] * hd[k] * dt;
        }
    }
    Ok(exponent.exp())
}

/// Monte Carlo mean of `ℰ(ḣ)(T)`.
pub fn doleans_dade_mean(
    grid: &TimeGrid,
    h: &CameronMartinPath,
    n_paths: usize,
    seed: u64,
    engine: &Engine,
) -> Result<McEstimate> {
    let red = reduce_paths(engine, n_paths, 1, DivergencePolicy::Fail, |i| {
        let w = sample_noise(grid, h.dim(), seed, i)?;
        Ok(vec![doleans_dade(&w, h, grid.steps())?])
    })?;
    red.moments.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameronMartinReport {
    /// `E[F(X(ω + h))]`.
    pub lhs: McEstimate,
    /// `E[F(X(ω)) ℰ(ḣ)(T)]`.
    pub rhs: McEstimate,
    pub z_score: f64,
    pub diverged: usize,
}

/// Both sides of the Cameron–Martin identity on common noise.
#[allow(clippy::too_many_arguments)]
pub fn cameron_martin_check(
    spec: &ModelSpec,
    grid: &TimeGrid,
    scheme: &SchemeChoice,
    h: &CameronMartinPath,
    functional: &Functional,
    n_paths: usize,
    seed: u64,
    engine: &Engine,
    policy: DivergencePolicy,
) -> Result<CameronMartinReport> {
    if h.dim() != spec.noise_dim() {
        return Err(Error::DimensionMismatch {
            context: "Cameron-Martin direction",
            expected: spec.noise_dim(),
            found: h.dim(),
        });
    }
    let red = reduce_paths(engine, n_paths, 2, policy, |i| {
        let w = sample_noise(grid, spec.noise_dim(), seed, i)?;
        let theta = spec.initial.sample(seed, i);
        let shifted = simulate(spec, grid, &shift_noise(&w, h, 1.0)?, &theta, scheme)?;
        let plain = simulate(spec, grid, &w, &theta, scheme)?;
        let density = doleans_dade(&w, h, grid.steps())?;
        Ok(vec![functional(&shifted), functional(&plain) * density])
    })?;
    let both = red.moments.finish()?;
    let split = |k: usize| McEstimate {
        mean: vec![both.mean[k]],
        stderr: vec![both.stderr[k]],
        n_paths: both.n_paths,
    };
    let (lhs, rhs) = (split(0), split(1));
    let z_score = lhs.z_score(&rhs);
    Ok(CameronMartinReport {
        lhs,
        rhs,
        z_score,
        diverged: red.diverged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderRung {
    pub epsilon: f64,
    /// `E[Δ_ε]` with `Δ_ε = sup_i |(X^ε_i - X_i)/ε - D^h X_i|`.
    pub mean_error: McEstimate,
    /// `P̂[Δ_ε > δ]` per configured `δ`.
    pub exceedance: Vec<f64>,
    pub exceedance_stderr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuotientLadder {
    pub epsilons: Vec<f64>,
    pub deltas: Vec<f64>,
    pub rungs: Vec<LadderRung>,
    pub n_paths: usize,
    pub diverged: usize,
}

impl QuotientLadder {
    /// `E[Δ_ε]` never rises by more than `slack` combined standard errors
    /// between consecutive rungs.
    pub fn is_non_increasing(&self, slack: f64) -> bool {
        self.rungs.windows(2).all(|p| {
            let (a, b) = (&p[0].mean_error, &p[1].mean_error);
            let se = (a.error().powi(2) + b.error().powi(2)).sqrt();
            b.value() <= a.value() + slack * se
        })
    }

    /// Exceedance at the smallest `ε` strictly below that at the largest.
    pub fn exceedance_drops(&self, delta_index: usize) -> bool {
        let first = self.rungs.first().map(|r| r.exceedance[delta_index]);
        let last = self.rungs.last().map(|r| r.exceedance[delta_index]);
        matches!((first, last), (Some(a), Some(b)) if b < a)
    }

    /// `(epsilon, mean_error, stderr, delta, exceedance_prob, diverged_count)`
    /// per `(ε, δ)` pair.
    pub fn rows(&self) -> Vec<(f64, f64, f64, f64, f64, usize)> {
        let mut out = Vec::with_capacity(self.rungs.len() * self.deltas.len());
        for r in &self.rungs {
            for (k, &delta) in self.deltas.iter().enumerate() {
                out.push((
                    r.epsilon,
                    r.mean_error.value(),
                    r.mean_error.error(),
                    delta,
                    r.exceedance[k],
                    self.diverged,
                ));
            }
        }
        out
    }
}

fn check_ladder(epsilons: &[f64], deltas: &[f64]) -> Result<()> {
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::invalid("epsilons", "need positive finite values"));
    }
    if epsilons.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::invalid("epsilons", "must be strictly decreasing"));
    }
    if deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::invalid("deltas", "need positive finite values"));
    }
    Ok(())
}

/// Difference quotients `(X(ω + εh) - X(ω))/ε` against `D^h X` down an
/// `ε`-ladder, every rung on the same noise paths.
#[allow(clippy::too_many_arguments)]
pub fn gateaux_ladder(
    spec: &ModelSpec,
    grid: &TimeGrid,
    scheme: &SchemeChoice,
    h: &CameronMartinPath,
    epsilons: &[f64],
    deltas: &[f64],
    n_paths: usize,
    seed: u64,
    engine: &Engine,
    policy: DivergencePolicy,
) -> Result<QuotientLadder> {
    check_ladder(epsilons, deltas)?;
    if h.is_zero() {
        return Err(Error::invalid("h", "the direction must be nonzero"));
    }
    let (ne, nd) = (epsilons.len(), deltas.len());
    let red = reduce_paths(engine, n_paths, ne * (1 + nd), policy, |i| {
        let w = sample_noise(grid, spec.noise_dim(), seed, i)?;
        let theta = spec.initial.sample(seed, i);
        let lin = linearize(spec, grid, &w, &theta, scheme)?;
        let dh = directional_derivative_from(spec.field.as_ref(), &lin, &w, h)?;
        let base = lin.base();
        let mut sample = vec![0.0; ne * (1 + nd)];
        for (e, &eps) in epsilons.iter().enumerate() {
            let shifted = simulate(spec, grid, &shift_noise(&w, h, eps)?, &theta, scheme)?;
            let mut worst = 0.0f64;
            for n in 0..grid.len() {
                let err: f64 = (0..base.dim())
                    .map(|a| {
                        let q = (shifted.value(n)[a] - base.value(n)[a]) / eps - dh.value(n)[a];
                        q * q
                    })
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(err);
            }
            sample[e] = worst;
            for (k, &delta) in deltas.iter().enumerate() {
                sample[ne + e * nd + k] = f64::from(u8::from(worst > delta));
            }
        }
        Ok(sample)
    })?;
    let est = red.moments.finish()?;
    let rungs = epsilons
        .iter()
        .enumerate()
        .map(|(e, &eps)| LadderRung {
            epsilon: eps,
            mean_error: McEstimate {
                mean: vec![est.mean[e]],
                stderr: vec![est.stderr[e]],
                n_paths: est.n_paths,
            },
            exceedance: est.mean[ne + e * nd..ne + (e + 1) * nd].to_vec(),
            exceedance_stderr: est.stderr[ne + e * nd..ne + (e + 1) * nd].to_vec(),
        })
        .collect();
    Ok(QuotientLadder {
        epsilons: epsilons.to_vec(),
        deltas: deltas.to_vec(),
        rungs,
        n_paths: est.n_paths,
        diverged: red.diverged,
    })
}

/// One level `n` of the forced test system.
#[derive(Debug, Clone, PartialEq)]
pub struct GronwallRung {
    pub level: usize,
    /// `P̂[‖A_n‖∞ > δ]`.
    pub forcing_exceedance: Vec<f64>,
    /// `P̂[‖U_n‖∞ > δ]`.
    pub response_exceedance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallLadder {
    pub deltas: Vec<f64>,
    pub rungs: Vec<GronwallRung>,
}

impl GronwallLadder {
    /// Response exceedance at the last level strictly below the first for
    /// every `δ` where the first is positive, and never increasing.
    pub fn response_vanishes(&self) -> bool {
        (0..self.deltas.len()).all(|k| {
            let p: Vec<f64> = self.rungs.iter().map(|r| r.response_exceedance[k]).collect();
            p.windows(2).all(|w| w[1] <= w[0]) && (p[0] == 0.0 || p[p.len() - 1] < p[0])
        })
    }
}

const GRONWALL_STREAM: u64 = 2;

/// `dU_n = dA_n + (U_n - U_n³) dt + U_n dW` with `U_n(0) = 0` and the
/// heavy-tailed forcing `A_n(t) = Z t / n`, `Z` standard Cauchy. `A_n → 0`
/// in probability without any moments, and so must `U_n`.
pub fn gronwall_ladder(
    grid: &TimeGrid,
    levels: &[usize],
    deltas: &[f64],
    n_paths: usize,
    seed: u64,
    engine: &Engine,
) -> Result<GronwallLadder> {
    if levels.is_empty() || levels.windows(2).any(|p| p[1] <= p[0]) || levels[0] == 0 {
        return Err(Error::invalid("levels", "need positive, strictly increasing levels"));
    }
    check_ladder(&[1.0], deltas)?;
    let (nl, nd) = (levels.len(), deltas.len());
    let dt = grid.dt();
    let red = reduce_paths(engine, n_paths, 2 * nl * nd, DivergencePolicy::Fail, |i| {
        let w = sample_noise(grid, 1, seed, i)?;
        let z: f64 = Cauchy::new(0.0, 1.0)
            .expect("unit Cauchy")
            .sample(&mut auxiliary_rng(seed, i, GRONWALL_STREAM));
        let mut sample = vec![0.0; 2 * nl * nd];
        for (l, &n) in levels.iter().enumerate() {
            let slope = z / n as f64;
            let mut u = 0.0f64;
            let mut sup = 0.0f64;
            for step in 0..grid.steps() {
                let f = u - u * u * u;
                u += slope * dt + f * dt / (1.0 + dt * f.abs()) + u * w.increment(step)[0];
                if !u.is_finite() {
                    return Err(Error::Divergence {
                        step: step + 1,
                        time: grid.time(step + 1),
                    });
                }
                sup = sup.max(u.abs());
            }
            let forcing = slope.abs() * grid.horizon();
            for (k, &delta) in deltas.iter().enumerate() {
                sample[(l * nd + k) * 2] = f64::from(u8::from(forcing > delta));
                sample[(l * nd + k) * 2 + 1] = f64::from(u8::from(sup > delta));
            }
        }
        Ok(sample)
    })?;
    let mean = red.moments.mean().to_vec();
    let rungs = levels
        .iter()
        .enumerate()
        .map(|(l, &n)| GronwallRung {
            level: n,
            forcing_exceedance: (0..nd).map(|k| mean[(l * nd + k) * 2]).collect(),
            response_exceedance: (0..nd).map(|k| mean[(l * nd + k) * 2 + 1]).collect(),
        })
        .collect();
    Ok(GronwallLadder {
        deltas: deltas.to_vec(),
        rungs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::zoo_lookup;
    use std::collections::BTreeMap;

    fn model(name: &str, kv: &[(&str, f64)]) -> ModelSpec {
        let params: BTreeMap<String, f64> = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        zoo_lookup(name, &params).unwrap()
    }

    #[test]
    fn zero_direction_has_unit_density() {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let w = sample_noise(&grid, 2, 1, 0).unwrap();
        let h = CameronMartinPath::zero(grid, 2).unwrap();
        assert_eq!(doleans_dade(&w, &h, 32).unwrap(), 1.0);
    }

    #[test]
    fn constant_direction_closed_form() {
        let grid = TimeGrid::new(2.0, 64).unwrap();
        let w = sample_noise(&grid, 1, 1, 4).unwrap();
        let h = CameronMartinPath::constant(grid, &[0.7]).unwrap();
        let got = doleans_dade(&w, &h, 64).unwrap().ln();
        let want = 0.7 * w.brownian(64)[0] - 0.5 * 0.49 * 2.0;
        assert!((got - want).abs() < 1e-13);
    }

    #[test]
    fn constant_functional_balances() {
        let spec = model("ou", &[]);
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let h = CameronMartinPath::constant(grid, &[0.5]).unwrap();
        let one: &Functional = &|_| 1.0;
        let r = cameron_martin_check(
            &spec,
            &grid,
            &SchemeChoice::euler(),
            &h,
            one,
            2000,
            3,
            &Engine::sequential(),
            DivergencePolicy::Fail,
        )
        .unwrap();
        assert_eq!(r.lhs.value(), 1.0);
        assert!(r.z_score < 3.0);
    }

    #[test]
    fn ladder_preconditions() {
        let spec = model("ou", &[]);
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let e = Engine::sequential();
        let s = SchemeChoice::euler();
        let zero = CameronMartinPath::zero(grid, 1).unwrap();
        let h = CameronMartinPath::constant(grid, &[1.0]).unwrap();
        let p = DivergencePolicy::Fail;
        assert!(gateaux_ladder(&spec, &grid, &s, &zero, &[0.5], &[0.1], 4, 0, &e, p).is_err());
        assert!(gateaux_ladder(&spec, &grid, &s, &h, &[0.25, 0.5], &[0.1], 4, 0, &e, p).is_err());
        assert!(gateaux_ladder(&spec, &grid, &s, &h, &[0.5], &[0.0], 4, 0, &e, p).is_err());
    }

    #[test]
    fn ladder_rows_cover_every_pair() {
        let spec = model("gbm", &[]);
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let h = CameronMartinPath::constant(grid, &[1.0]).unwrap();
        let l = gateaux_ladder(
            &spec,
            &grid,
            &SchemeChoice::euler(),
            &h,
            &[0.5, 0.25, 0.125],
            &[1e-1, 1e-2],
            64,
            0,
            &Engine::sequential(),
            DivergencePolicy::Fail,
        )
        .unwrap();
        assert_eq!(l.rows().len(), 6);
        assert!(l.is_non_increasing(0.0));
        // GBM Euler is multilinear in the increments: the quotient error is
        // exactly first order in ε.
        let r = l.rungs[0].mean_error.value() / l.rungs[1].mean_error.value();
        assert!((r - 2.0).abs() < 0.1, "{r}");
    }

    #[test]
    fn gronwall_exceedance_vanishes() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let l = gronwall_ladder(&grid, &[1, 10, 100, 1000], &[0.1, 0.01], 2000, 5, &Engine::sequential()).unwrap();
        assert!(l.response_vanishes(), "{l:?}");
        for r in &l.rungs {
            assert!(r.response_exceedance.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}
