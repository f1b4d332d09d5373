//! Initial-condition sensitivities `∇ₓ E[Φ(X_x(t))]`: the
//! Bismut–Elworthy–Li weight estimator and a common-random-numbers central
//! difference.

use std::fmt;
use std::sync::Arc;

use crate::engine::{reduce_paths, DivergencePolicy, Engine};
use crate::error::{Error, Result};
use crate::estimate::McEstimate;
use crate::grid::TimeGrid;
use crate::linalg;
use crate::models::ModelSpec;
use crate::noise::{sample_noise, NoisePath};
use crate::solver::{simulate, SchemeChoice};
use crate::variational::{linearize, Linearization};

/// Above this condition number `σ` counts as singular.
pub const MAX_CONDITION: f64 = 1e12;

pub type Payoff = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// `a ∈ Γ_t`, a weight on `[0, t]` integrating to one.
#[derive(Debug, Clone, PartialEq)]
pub enum BelWeight {
    /// `a ≡ 1/t`.
    Constant,
    /// `a(s) = 2s/t²`.
    Linear,
    /// Raw values at the left points `t_0..t_{k-1}`, renormalized.
    Custom(Vec<f64>),
}

impl BelWeight {
    pub fn name(&self) -> &'static str {
        match self {
            BelWeight::Constant => "constant",
            BelWeight::Linear => "linear",
            BelWeight::Custom(_) => "custom",
        }
    }

    /// Left-point values `a_i`, `i < t_index`, scaled so `Σ a_i dt = 1`.
    pub fn discretize(&self, grid: &TimeGrid, t_index: usize) -> Result<Vec<f64>> {
        if t_index == 0 || t_index > grid.steps() {
            return Err(Error::invalid("t_index", "need 0 < t <= T on the grid"));
        }
        let t = grid.time(t_index);
        let raw: Vec<f64> = match self {
            BelWeight::Constant => vec![1.0 / t; t_index],
            BelWeight::Linear => (0..t_index).map(|i| 2.0 * grid.time(i) / (t * t)).collect(),
            BelWeight::Custom(v) => {
                if v.len() != t_index {
                    return Err(Error::invalid("weight", format!("expected {t_index} values, got {}", v.len())));
                }
                v.clone()
            }
        };
        let total: f64 = raw.iter().sum::<f64>() * grid.dt();
        if !(total.is_finite() && total != 0.0) {
            return Err(Error::invalid("weight", "integral over [0, t] must be finite and nonzero"));
        }
        Ok(raw.into_iter().map(|a| a / total).collect())
    }
}

#[derive(Clone)]
pub struct BelConfig {
    pub weight: BelWeight,
    pub payoff: Arc<Payoff>,
    pub t_index: usize,
}

impl fmt::Debug for BelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BelConfig")
            .field("weight", &self.weight)
            .field("t_index", &self.t_index)
            .finish_non_exhaustive()
    }
}

/// Per-step `rows×m` integrand for a left-point Itô sum.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedIntegrand {
    pub rows: usize,
    pub m: usize,
    /// `steps × rows × m`, row-major per step.
    pub values: Vec<f64>,
    /// The caller's declaration that step `i` only uses information up to
    /// `t_i`.
    pub adapted: bool,
}

/// `Σ_{i<t} f_i ΔW_i`: the Skorokhod integral of an adapted integrand.
pub fn skorokhod_adapted(integrand: &AdaptedIntegrand, w: &NoisePath, t_index: usize) -> Result<Vec<f64>> {
    if !integrand.adapted {
        return Err(Error::NonAdapted);
    }
    let (r, m) = (integrand.rows, integrand.m);
    if m != w.dim() {
        return Err(Error::DimensionMismatch {
            context: "integrand noise dimension",
            expected: w.dim(),
            found: m,
        });
    }
    if t_index > w.grid().steps() || integrand.values.len() < t_index * r * m {
        return Err(Error::invalid("t_index", "integrand shorter than the integration range"));
    }
    let mut out = vec![0.0; r];
    for i in 0..t_index {
        linalg::matmul_acc(&integrand.values[i * r * m..(i + 1) * r * m], w.increment(i), r, m, 1, 1.0, &mut out);
    }
    Ok(out)
}

fn check_bel_model(spec: &ModelSpec) -> Result<()> {
    if !spec.field.is_deterministic() || spec.field.has_malliavin_coefficients() {
        return Err(Error::invalid(
            "model",
            format!("`{}` has random coefficients; the weight needs an adapted integrand", spec.name),
        ));
    }
    if spec.state_dim() != spec.noise_dim() {
        return Err(Error::invalid("model", "the diffusion matrix must be square"));
    }
    if spec.initial.is_random() {
        return Err(Error::invalid("initial", "sensitivities need a fixed initial condition"));
    }
    Ok(())
}

/// `w* = Σ_{i<t} a_i [σ(t_i, X_i)⁻¹ J_i]ᵀ ΔW_i` along a linearized path.
pub fn bel_weight(lin: &Linearization, w: &NoisePath, weights: &[f64], t_index: usize) -> Result<Vec<f64>> {
    let d = lin.d;
    let mut j = linalg::identity(d);
    let mut next = vec![0.0; d * d];
    let mut integrand = Vec::with_capacity(t_index * d * d);
    for (i, &a) in weights.iter().enumerate().take(t_index) {
        let sigma = lin.diffusion(i);
        let cond = linalg::condition_number(sigma, d);
        if cond.is_nan() || cond > MAX_CONDITION {
            return Err(Error::SingularDiffusion { step: i, condition: cond });
        }
        let sj = linalg::solve(sigma, &j, d, d).ok_or(Error::SingularDiffusion {
            step: i,
            condition: f64::INFINITY,
        })?;
        integrand.extend(linalg::transpose(&sj, d, d).into_iter().map(|v| a * v));
        lin.advance(i, &j, d, &mut next);
        j.copy_from_slice(&next);
    }
    skorokhod_adapted(
        &AdaptedIntegrand {
            rows: d,
            m: d,
            values: integrand,
            adapted: true,
        },
        w,
        t_index,
    )
}

/// Bismut–Elworthy–Li estimate of `∇ₓ E[Φ(X_x(t))]`.
#[allow(clippy::too_many_arguments)]
pub fn bel_gradient(
    spec: &ModelSpec,
    grid: &TimeGrid,
    scheme: &SchemeChoice,
    cfg: &BelConfig,
    n_paths: usize,
    seed: u64,
    engine: &Engine,
    policy: DivergencePolicy,
) -> Result<McEstimate> {
    check_bel_model(spec)?;
    let weights = cfg.weight.discretize(grid, cfg.t_index)?;
    let theta = spec.initial.nominal();
    let red = reduce_paths(engine, n_paths, spec.state_dim(), policy, |i| {
        let w = sample_noise(grid, spec.noise_dim(), seed, i)?;
        let lin = linearize(spec, grid, &w, &theta, scheme)?;
        let weight = bel_weight(&lin, &w, &weights, cfg.t_index)?;
        let phi = (cfg.payoff)(lin.base().value(cfg.t_index));
        Ok(weight.into_iter().map(|v| phi * v).collect())
    })?;
    red.moments.finish()
}

/// Central difference `(Φ(X_{x+εe_k}(t)) - Φ(X_{x-εe_k}(t)))/2ε`, differenced
/// per path on shared noise and then averaged.
#[allow(clippy::too_many_arguments)]
pub fn fd_gradient(
    spec: &ModelSpec,
    grid: &TimeGrid,
    scheme: &SchemeChoice,
    payoff: &Payoff,
    t_index: usize,
    eps: f64,
    n_paths: usize,
    seed: u64,
    engine: &Engine,
    policy: DivergencePolicy,
) -> Result<McEstimate> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid("eps", "must be > 0"));
    }
    if t_index > grid.steps() {
        return Err(Error::invalid("t_index", "beyond the grid"));
    }
    if spec.initial.is_random() {
        return Err(Error::invalid("initial", "sensitivities need a fixed initial condition"));
    }
    let theta = spec.initial.nominal();
    let d = spec.state_dim();
    let red = reduce_paths(engine, n_paths, d, policy, |i| {
        let w = sample_noise(grid, spec.noise_dim(), seed, i)?;
        let mut out = vec![0.0; d];
        for (k, o) in out.iter_mut().enumerate() {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[k] += eps;
            down[k] -= eps;
            let a = simulate(spec, grid, &w, &up, scheme)?;
            let b = simulate(spec, grid, &w, &down, scheme)?;
            *o = (payoff(a.value(t_index)) - payoff(b.value(t_index))) / (2.0 * eps);
        }
        Ok(out)
    })?;
    red.moments.finish()
}
