//! Time stepping for `dX = b dt + σ dW` and the moment / stability
//! estimators built on it.

use crate::engine::{reduce_paths, DivergencePolicy, Engine};
use crate::error::{Error, Result};
use crate::estimate::McEstimate;
use crate::grid::TimeGrid;
use crate::linalg;
use crate::models::{CoefficientField, ModelSpec};
use crate::noise::{sample_noise, History, NoisePath};
use crate::path::StatePath;

/// `|X| > DIVERGENCE_THRESHOLD` in any component stops the path.
pub const DIVERGENCE_THRESHOLD: f64 = 1e150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    EulerMaruyama,
    TamedEuler,
    SplitStepImplicit,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::EulerMaruyama => "euler_maruyama",
            SchemeKind::TamedEuler => "tamed_euler",
            SchemeKind::SplitStepImplicit => "split_step_implicit",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            SchemeKind::EulerMaruyama,
            SchemeKind::TamedEuler,
            SchemeKind::SplitStepImplicit,
        ]
        .into_iter()
        .find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeChoice {
    pub kind: SchemeKind,
    /// Accepted scaled residual `|Y - X - b(Y) dt| / (1 + |Y|)`.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl SchemeChoice {
    pub const DEFAULT_NEWTON_TOL: f64 = 1e-12;
    pub const DEFAULT_NEWTON_MAX_ITER: usize = 50;

    pub fn new(kind: SchemeKind) -> Self {
        Self {
            kind,
            newton_tol: Self::DEFAULT_NEWTON_TOL,
            newton_max_iter: Self::DEFAULT_NEWTON_MAX_ITER,
        }
    }

    pub fn euler() -> Self {
        Self::new(SchemeKind::EulerMaruyama)
    }

    pub fn tamed() -> Self {
        Self::new(SchemeKind::TamedEuler)
    }

    pub fn implicit() -> Self {
        Self::new(SchemeKind::SplitStepImplicit)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0 && self.newton_tol.is_finite()) {
            return Err(Error::invalid("newton_tol", "must be > 0"));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::invalid("newton_max_iter", "must be >= 1"));
        }
        Ok(())
    }
}

/// Per-path diagnostics collected while stepping.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolverStats {
    /// Largest accepted Newton residual (implicit scheme).
    pub max_newton_residual: f64,
    pub newton_iterations: usize,
    /// Largest norm of the tamed drift increment.
    pub max_tamed_increment: f64,
}

/// What one step saw, handed to observers that linearize along the path.
pub(crate) struct StepView<'a> {
    pub i: usize,
    pub t: f64,
    pub hist: &'a History<'a>,
    /// `X_i`.
    pub x: &'a [f64],
    /// `b(t_i, X_i)`.
    pub b: &'a [f64],
    /// `σ(t_i, X_i)`.
    pub sigma: &'a [f64],
    /// Implicit root `Y`; empty for explicit schemes.
    pub y: &'a [f64],
}

fn check_inputs(spec: &ModelSpec, grid: &TimeGrid, w: &NoisePath, theta: &[f64]) -> Result<()> {
    let (d, m) = (spec.state_dim(), spec.noise_dim());
    if theta.len() != d {
        return Err(Error::DimensionMismatch {
            context: "initial condition",
            expected: d,
            found: theta.len(),
        });
    }
    if w.dim() != m {
        return Err(Error::DimensionMismatch {
            context: "noise dimension",
            expected: m,
            found: w.dim(),
        });
    }
    if w.grid() != grid {
        return Err(Error::invalid("noise", "noise path lives on a different grid"));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("theta", "initial condition must be finite"));
    }
    Ok(())
}

fn diverged(x: &[f64]) -> bool {
    x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_THRESHOLD)
}

struct Newton<'a> {
    field: &'a dyn CoefficientField,
    d: usize,
    dt: f64,
    tol: f64,
    max_iter: usize,
}

impl Newton<'_> {
    fn residual(&self, t: f64, hist: &History<'_>, x: &[f64], y: &[f64], b: &mut [f64], r: &mut [f64]) -> f64 {
        self.field.drift(t, hist, y, b);
        for a in 0..self.d {
            r[a] = y[a] - x[a] - self.dt * b[a];
        }
        linalg::norm(r)
    }

    /// Solves `Y = X + b(t, Y) dt`, returning the accepted scaled residual
    /// and the iteration count.
    fn solve(&self, step: usize, t: f64, hist: &History<'_>, x: &[f64], y: &mut [f64]) -> Result<(f64, usize)> {
        let d = self.d;
        let mut b = vec![0.0; d];
        let mut r = vec![0.0; d];
        let mut r_trial = vec![0.0; d];
        let mut y_trial = vec![0.0; d];
        let mut jac = vec![0.0; d * d];
        y.copy_from_slice(x);
        let mut rnorm = self.residual(t, hist, x, y, &mut b, &mut r);
        let mut iter = 0;
        loop {
            let scaled = rnorm / (1.0 + linalg::norm(y));
            if scaled <= self.tol {
                return Ok((scaled, iter));
            }
            if iter == self.max_iter || !scaled.is_finite() {
                return Err(Error::NewtonFailure {
                    step,
                    residual: scaled,
                    iterations: iter,
                });
            }
            iter += 1;
            self.field.grad_drift(t, hist, y, &mut jac);
            for (k, v) in jac.iter_mut().enumerate() {
                *v = if k % (d + 1) == 0 { 1.0 } else { 0.0 } - self.dt * *v;
            }
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let delta = linalg::solve(&jac, &neg, d, 1).ok_or(Error::NewtonFailure {
                step,
                residual: scaled,
                iterations: iter,
            })?;
            let mut lambda = 1.0;
            loop {
                for a in 0..d {
                    y_trial[a] = y[a] + lambda * delta[a];
                }
                let trial = self.residual(t, hist, x, &y_trial, &mut b, &mut r_trial);
                if trial < rnorm || lambda < 1e-12 {
                    y.copy_from_slice(&y_trial);
                    r.copy_from_slice(&r_trial);
                    rnorm = trial;
                    break;
                }
                lambda *= 0.5;
            }
        }
    }
}

/// Steps the scheme along `w`, calling `observe` once per step before the
/// update is applied.
pub(crate) fn integrate<F>(
    spec: &ModelSpec,
    grid: &TimeGrid,
    w: &NoisePath,
    theta: &[f64],
    scheme: &SchemeChoice,
    mut observe: F,
) -> Result<(StatePath, SolverStats)>
where
    F: FnMut(&StepView<'_>) -> Result<()>,
{
    scheme.validate()?;
    check_inputs(spec, grid, w, theta)?;
    let field = spec.field.as_ref();
    let (d, m) = (spec.state_dim(), spec.noise_dim());
    let dt = grid.dt();
    if scheme.kind == SchemeKind::SplitStepImplicit && dt * field.monotone_const() >= 1.0 {
        return Err(Error::InvalidStepSize {
            dt,
            monotone_const: field.monotone_const(),
        });
    }
    let newton = Newton {
        field,
        d,
        dt,
        tol: scheme.newton_tol,
        max_iter: scheme.newton_max_iter,
    };
    let n = grid.steps();
    let mut values = Vec::with_capacity((n + 1) * d);
    values.extend_from_slice(theta);
    let mut stats = SolverStats::default();
    let mut b = vec![0.0; d];
    let mut sigma = vec![0.0; d * m];
    let mut y = vec![0.0; d];
    let mut next = vec![0.0; d];
    for i in 0..n {
        let t = grid.time(i);
        let hist = w.history(i);
        let x = &values[i * d..(i + 1) * d];
        field.drift(t, &hist, x, &mut b);
        field.diffusion(t, &hist, x, &mut sigma);
        match scheme.kind {
            SchemeKind::EulerMaruyama => {
                for a in 0..d {
                    next[a] = x[a] + b[a] * dt;
                }
            }
            SchemeKind::TamedEuler => {
                let scale = dt / (1.0 + dt * linalg::norm(&b));
                for a in 0..d {
                    next[a] = x[a] + b[a] * scale;
                }
                let incr = scale * linalg::norm(&b);
                debug_assert!(incr <= 1.0 || !incr.is_finite());
                stats.max_tamed_increment = stats.max_tamed_increment.max(incr);
            }
            SchemeKind::SplitStepImplicit => {
                let (res, iters) = newton.solve(i + 1, grid.time(i + 1), &w.history(i + 1), x, &mut y)?;
                stats.max_newton_residual = stats.max_newton_residual.max(res);
                stats.newton_iterations += iters;
                next.copy_from_slice(&y);
            }
        }
        observe(&StepView {
            i,
            t,
            hist: &hist,
            x,
            b: &b,
            sigma: &sigma,
            y: if scheme.kind == SchemeKind::SplitStepImplicit { &y } else { &[] },
        })?;
        let dw = w.increment(i);
        for a in 0..d {
            for k in 0..m {
                next[a] += sigma[a * m + k] * dw[k];
            }
        }
        if diverged(&next) {
            return Err(Error::Divergence {
                step: i + 1,
                time: grid.time(i + 1),
            });
        }
        values.extend_from_slice(&next);
    }
    Ok((StatePath::new(*grid, d, values)?, stats))
}

/// Simulates one path from `theta` on the noise `w`.
pub fn simulate(
    spec: &ModelSpec,
    grid: &TimeGrid,
    w: &NoisePath,
    theta: &[f64],
    scheme: &SchemeChoice,
) -> Result<StatePath> {
    integrate(spec, grid, w, theta, scheme, |_| Ok(())).map(|(p, _)| p)
}

/// [`simulate`] plus the per-path solver diagnostics.
pub fn simulate_with_stats(
    spec: &ModelSpec,
    grid: &TimeGrid,
    w: &NoisePath,
    theta: &[f64],
    scheme: &SchemeChoice,
) -> Result<(StatePath, SolverStats)> {
    integrate(spec, grid, w, theta, scheme, |_| Ok(()))
}

/// Simulates path `path_index` of a Monte Carlo run: noise and initial
/// condition drawn from their own streams.
pub fn simulate_indexed(
    spec: &ModelSpec,
    grid: &TimeGrid,
    scheme: &SchemeChoice,
    seed: u64,
    path_index: u64,
) -> Result<StatePath> {
    let w = sample_noise(grid, spec.noise_dim(), seed, path_index)?;
    let theta = spec.initial.sample(seed, path_index);
    simulate(spec, grid, &w, &theta, scheme)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupMomentReport {
    pub estimate: McEstimate,
    pub diverged: usize,
}

/// Monte Carlo estimate of `E[‖X‖∞^p]`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_sup_moment(
    spec: &ModelSpec,
    grid: &TimeGrid,
    scheme: &SchemeChoice,
    p: f64,
    n_paths: usize,
    seed: u64,
    engine: &Engine,
    policy: DivergencePolicy,
) -> Result<SupMomentReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid("p", "moment order must be >= 1"));
    }
    let red = reduce_paths(engine, n_paths, 1, policy, |i| {
        let path = simulate_indexed(spec, grid, scheme, seed, i)?;
        Ok(vec![path.sup_norm().powf(p)])
    })?;
    Ok(SupMomentReport {
        estimate: red.moments.finish()?,
        diverged: red.diverged,
    })
}

/// Sup-moment estimates over an increasing path-count ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct SupMomentLadder {
    pub rungs: Vec<(usize, SupMomentReport)>,
    /// Set when the estimate keeps drifting upward or its normalized
    /// dispersion `stderr·√n` keeps growing down the ladder: the signature
    /// of a moment that does not exist.
    pub nonconvergent: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn sup_moment_ladder(
    spec: &ModelSpec,
    grid: &TimeGrid,
    scheme: &SchemeChoice,
    p: f64,
    path_counts: &[usize],
    seed: u64,
    engine: &Engine,
    policy: DivergencePolicy,
) -> Result<SupMomentLadder> {
    if path_counts.len() < 2 || path_counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("path_counts", "need at least two strictly increasing counts"));
    }
    let rungs = path_counts
        .iter()
        .map(|&n| estimate_sup_moment(spec, grid, scheme, p, n, seed, engine, policy).map(|r| (n, r)))
        .collect::<Result<Vec<_>>>()?;
    let spread = |(n, r): &(usize, SupMomentReport)| r.estimate.error() * (*n as f64).sqrt();
    let (first, last) = (&rungs[0], &rungs[rungs.len() - 1]);
    let dispersion_grows = spread(last) > 2.0 * spread(first);
    let se = (first.1.estimate.error().powi(2) + last.1.estimate.error().powi(2)).sqrt();
    let drifts = last.1.estimate.value() - first.1.estimate.value() > 3.0 * se;
    Ok(SupMomentLadder {
        rungs,
        nonconvergent: dispersion_grows || drifts,
    })
}

/// Monte Carlo estimate of `E[‖X_ξ - X_θ‖∞^p] / |ξ - θ|^p` with both
/// solutions on the same noise.
#[allow(clippy::too_many_arguments)]
pub fn stability_ratio(
    spec: &ModelSpec,
    grid: &TimeGrid,
    scheme: &SchemeChoice,
    theta: &[f64],
    xi: &[f64],
    p: f64,
    n_paths: usize,
    seed: u64,
    engine: &Engine,
    policy: DivergencePolicy,
) -> Result<SupMomentReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid("p", "moment order must be >= 1"));
    }
    if theta.len() != xi.len() {
        return Err(Error::DimensionMismatch {
            context: "stability ratio initial conditions",
            expected: theta.len(),
            found: xi.len(),
        });
    }
    let gap = theta.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if gap == 0.0 {
        return Err(Error::invalid("xi", "must differ from theta"));
    }
    let red = reduce_paths(engine, n_paths, 1, policy, |i| {
        let w = sample_noise(grid, spec.noise_dim(), seed, i)?;
        let a = simulate(spec, grid, &w, theta, scheme)?;
        let b = simulate(spec, grid, &w, xi, scheme)?;
        Ok(vec![(a.sup_distance(&b) / gap).powf(p)])
    })?;
    Ok(SupMomentReport {
        estimate: red.moments.finish()?,
        diverged: red.diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::zoo_lookup;
    use crate::noise::sample_noise;
    use std::collections::BTreeMap;

    fn model(name: &str, kv: &[(&str, f64)]) -> ModelSpec {
        let params: BTreeMap<String, f64> = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        zoo_lookup(name, &params).unwrap()
    }

    const SCHEMES: [SchemeKind; 3] = [
        SchemeKind::EulerMaruyama,
        SchemeKind::TamedEuler,
        SchemeKind::SplitStepImplicit,
    ];

    #[test]
    fn zero_coefficients_give_constant_path() {
        let spec = model("gbm", &[("mu", 0.0), ("sigma", 0.0)]);
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let w = sample_noise(&grid, 1, 3, 0).unwrap();
        for kind in SCHEMES {
            let path = simulate(&spec, &grid, &w, &[3.0], &SchemeChoice::new(kind)).unwrap();
            assert!(path.values().iter().all(|&v| v == 3.0), "{kind:?}");
        }
    }

    #[test]
    fn simulation_is_reproducible() {
        let spec = model("ginzburg_landau", &[]);
        let grid = TimeGrid::new(1.0, 128).unwrap();
        let w = sample_noise(&grid, 1, 11, 5).unwrap();
        for kind in SCHEMES {
            let s = SchemeChoice::new(kind);
            let a = simulate(&spec, &grid, &w, &[1.5], &s).unwrap();
            let b = simulate(&spec, &grid, &w, &[1.5], &s).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn euler_step_by_hand() {
        let spec = model("ou", &[("kappa", 2.0), ("sigma", 0.5)]);
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let w = sample_noise(&grid, 1, 1, 0).unwrap();
        let path = simulate(&spec, &grid, &w, &[1.0], &SchemeChoice::euler()).unwrap();
        let mut x = 1.0;
        for i in 0..4 {
            x = x - 2.0 * x * 0.25 + 0.5 * w.increment(i)[0];
            assert_eq!(path.value(i + 1)[0], x);
        }
    }

    #[test]
    fn tamed_increment_is_bounded() {
        let spec = model("quintic", &[]);
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let w = sample_noise(&grid, 1, 2, 0).unwrap();
        let (_, stats) = simulate_with_stats(&spec, &grid, &w, &[40.0], &SchemeChoice::tamed()).unwrap();
        assert!(stats.max_tamed_increment > 0.99 && stats.max_tamed_increment < 1.0);
    }

    #[test]
    fn implicit_root_and_residual() {
        let spec = model("ginzburg_landau", &[("sigma", 0.0)]);
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let w = sample_noise(&grid, 1, 2, 0).unwrap();
        let s = SchemeChoice::implicit();
        let (path, stats) = simulate_with_stats(&spec, &grid, &w, &[10.0], &s).unwrap();
        assert!(stats.max_newton_residual <= s.newton_tol);
        let dt = grid.dt();
        for i in 0..64 {
            let (x, y) = (path.value(i)[0], path.value(i + 1)[0]);
            let r = y - x - dt * (y - y * y * y);
            assert!(r.abs() / (1.0 + y.abs()) <= 1e-12);
        }
    }

    #[test]
    fn implicit_rejects_large_steps() {
        let spec = model("gbm", &[("mu", 2.0)]);
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let w = sample_noise(&grid, 1, 2, 0).unwrap();
        let err = simulate(&spec, &grid, &w, &[1.0], &SchemeChoice::implicit()).unwrap_err();
        assert!(matches!(err, Error::InvalidStepSize { .. }));
    }

    #[test]
    fn newton_failure_is_reported() {
        let spec = model("ginzburg_landau", &[]);
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let w = sample_noise(&grid, 1, 2, 0).unwrap();
        let s = SchemeChoice {
            newton_max_iter: 1,
            ..SchemeChoice::implicit()
        };
        let err = simulate(&spec, &grid, &w, &[50.0], &s).unwrap_err();
        assert!(matches!(err, Error::NewtonFailure { step: 1, .. }));
    }

    #[test]
    fn explicit_euler_blows_up_on_quintic() {
        let spec = model("quintic", &[("sigma", 0.0)]);
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let w = sample_noise(&grid, 1, 2, 0).unwrap();
        let err = simulate(&spec, &grid, &w, &[10.0], &SchemeChoice::euler()).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
        assert!(simulate(&spec, &grid, &w, &[10.0], &SchemeChoice::tamed()).is_ok());
    }

    #[test]
    fn bad_scheme_parameters() {
        let s = SchemeChoice {
            newton_tol: 0.0,
            ..SchemeChoice::implicit()
        };
        assert!(s.validate().is_err());
        let s = SchemeChoice {
            newton_max_iter: 0,
            ..SchemeChoice::implicit()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn deterministic_sup_moment() {
        let spec = model("gbm", &[("mu", 0.0), ("sigma", 0.0), ("x0", 2.0)]);
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let r = estimate_sup_moment(
            &spec,
            &grid,
            &SchemeChoice::euler(),
            3.0,
            10,
            1,
            &Engine::sequential(),
            DivergencePolicy::Fail,
        )
        .unwrap();
        assert_eq!(r.estimate.value(), 8.0);
        assert_eq!(r.estimate.error(), 0.0);
    }

    #[test]
    fn deterministic_decay_ratio() {
        let spec = model("ou", &[("kappa", 1.0), ("sigma", 0.0)]);
        let grid = TimeGrid::new(1.0, 1024).unwrap();
        let s = SchemeChoice::euler();
        let r = stability_ratio(&spec, &grid, &s, &[1.0], &[1.5], 2.0, 4, 0, &Engine::sequential(), DivergencePolicy::Fail)
            .unwrap();
        // sup over the path of |x_θ - x_ξ| is attained at t = 0 for decay.
        assert!((r.estimate.value() - 1.0).abs() < 1e-12);
        let spec = model("gbm", &[("mu", -1.0), ("sigma", 0.0)]);
        let r = stability_ratio(&spec, &grid, &s, &[1.0], &[1.5], 2.0, 4, 0, &Engine::sequential(), DivergencePolicy::Fail)
            .unwrap();
        assert!((r.estimate.value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_initial_conditions_rejected() {
        let spec = model("ou", &[]);
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let r = stability_ratio(
            &spec,
            &grid,
            &SchemeChoice::euler(),
            &[1.0],
            &[1.0],
            2.0,
            4,
            0,
            &Engine::sequential(),
            DivergencePolicy::Fail,
        );
        assert!(r.is_err());
    }
}
