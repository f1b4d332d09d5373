use crate::error::{Error, Result};
use crate::noise::NoisePath;

use super::zoo::StepFunction;
use super::ModelSpec;

/// Models with known solutions, used as oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedFormKind {
    /// `X = x exp((μ - σ²/2)t + σW)`, `J = X/x`, `D_sX(t) = σX(t)`.
    Gbm { mu: f64, sigma: f64 },
    /// `X = e^{-κt}x + σ∫e^{-κ(t-r)}dW`, `J = e^{-κt}`, `D_sX(t) = σe^{-κ(t-s)}`.
    OrnsteinUhlenbeck { kappa: f64, sigma: f64 },
    /// `dX = (X + ∫₀ᵗ g dW) dW` with variation-of-constants solution
    /// `X = Φ(t)[x + ∫Φ⁻¹G dW - ∫Φ⁻¹G dr]`, `Φ(t) = exp(W(t) - t/2)`.
    RandomSigma { g: StepFunction },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    State,
    Jacobian,
    Malliavin,
}

fn scalar_setup<'a>(spec: &'a ModelSpec, w: &NoisePath) -> Result<(&'a ClosedFormKind, f64)> {
    let cf = spec
        .closed_form
        .as_ref()
        .ok_or_else(|| Error::NoClosedForm(spec.name.clone()))?;
    if w.dim() != 1 {
        return Err(Error::DimensionMismatch {
            context: "closed form noise",
            expected: 1,
            found: w.dim(),
        });
    }
    Ok((cf, spec.initial.nominal()[0]))
}

/// Left-point `G_i = Σ_{k<i} g(t_k) ΔW_k` for every node.
fn step_integral(g: &StepFunction, w: &NoisePath) -> Vec<f64> {
    let grid = w.grid();
    let mut out = vec![0.0; grid.steps() + 1];
    for k in 0..grid.steps() {
        out[k + 1] = out[k] + g.eval(grid.time(k)) * w.increment(k)[0];
    }
    out
}

/// Closed-form `X(t_i)` on every node, integrals discretized left-point.
pub fn closed_form_state_path(spec: &ModelSpec, w: &NoisePath) -> Result<Vec<f64>> {
    let (cf, x) = scalar_setup(spec, w)?;
    let grid = w.grid();
    let n = grid.steps();
    let dt = grid.dt();
    let out = match *cf {
        ClosedFormKind::Gbm { mu, sigma } => (0..=n)
            .map(|i| x * ((mu - 0.5 * sigma * sigma) * grid.time(i) + sigma * w.brownian(i)[0]).exp())
            .collect(),
        ClosedFormKind::OrnsteinUhlenbeck { kappa, sigma } => {
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(n + 1);
            out.push(x);
            for i in 0..n {
                acc += (kappa * grid.time(i)).exp() * w.increment(i)[0];
                let t = grid.time(i + 1);
                out.push((-kappa * t).exp() * (x + sigma * acc));
            }
            out
        }
        ClosedFormKind::RandomSigma { g } => {
            let gi = step_integral(&g, w);
            let phi = |i: usize| (w.brownian(i)[0] - 0.5 * grid.time(i)).exp();
            let mut inner = x;
            let mut out = Vec::with_capacity(n + 1);
            out.push(x);
            for (k, g) in gi.iter().enumerate().take(n) {
                inner += g / phi(k) * (w.increment(k)[0] - dt);
                out.push(phi(k + 1) * inner);
            }
            out
        }
    };
    Ok(out)
}

/// Closed-form `D_{s_j}X(t_i)` for `i = j..=N` (entry 0 is `t = s`).
pub fn closed_form_malliavin_row(spec: &ModelSpec, w: &NoisePath, s_index: usize) -> Result<Vec<f64>> {
    let (cf, _) = scalar_setup(spec, w)?;
    let grid = w.grid();
    let n = grid.steps();
    if s_index > n {
        return Err(Error::invalid("s", "beyond the grid"));
    }
    let s = grid.time(s_index);
    let out = match *cf {
        ClosedFormKind::Gbm { sigma, .. } => {
            let xs = closed_form_state_path(spec, w)?;
            (s_index..=n).map(|i| sigma * xs[i]).collect()
        }
        ClosedFormKind::OrnsteinUhlenbeck { kappa, sigma } => (s_index..=n)
            .map(|i| sigma * (-kappa * (grid.time(i) - s)).exp())
            .collect(),
        ClosedFormKind::RandomSigma { g } => {
            let xs = closed_form_state_path(spec, w)?;
            let gi = step_integral(&g, w);
            let ws = w.brownian(s_index)[0];
            let js = |i: usize| (w.brownian(i)[0] - ws - 0.5 * (grid.time(i) - s)).exp();
            let base = xs[s_index] + gi[s_index];
            let gs = g.eval(s);
            let mut integral = 0.0;
            let mut out = Vec::with_capacity(n + 1 - s_index);
            out.push(base);
            for k in s_index..n {
                integral += (w.increment(k)[0] - grid.dt()) / js(k);
                out.push(js(k + 1) * (base + gs * integral));
            }
            out
        }
    };
    Ok(out)
}

/// Oracle value at grid times `s <= t` (`s` is ignored for state and Jacobian).
pub fn eval_closed_form(spec: &ModelSpec, kind: OracleKind, w: &NoisePath, s: f64, t: f64) -> Result<Vec<f64>> {
    let (cf, x) = scalar_setup(spec, w)?;
    let grid = w.grid();
    let ti = grid.node_index(t)?;
    match kind {
        OracleKind::State => Ok(vec![closed_form_state_path(spec, w)?[ti]]),
        OracleKind::Jacobian => {
            let value = match *cf {
                ClosedFormKind::Gbm { mu, sigma } => {
                    ((mu - 0.5 * sigma * sigma) * t + sigma * w.brownian(ti)[0]).exp()
                }
                ClosedFormKind::OrnsteinUhlenbeck { kappa, .. } => (-kappa * t).exp(),
                ClosedFormKind::RandomSigma { .. } => (w.brownian(ti)[0] - 0.5 * t).exp(),
            };
            let _ = x;
            Ok(vec![value])
        }
        OracleKind::Malliavin => {
            let si = grid.node_index(s)?;
            if si > ti {
                return Ok(vec![0.0]);
            }
            Ok(vec![closed_form_malliavin_row(spec, w, si)?[ti - si]])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::models::zoo_lookup;
    use crate::noise::sample_noise;
    use std::collections::BTreeMap;

    fn spec(name: &str, kv: &[(&str, f64)]) -> ModelSpec {
        let p: BTreeMap<String, f64> = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        zoo_lookup(name, &p).unwrap()
    }

    #[test]
    fn ou_malliavin_is_noise_free() {
        let s = spec("ou", &[("kappa", 1.0), ("sigma", 0.5)]);
        let g = TimeGrid::new(1.0, 8).unwrap();
        let w1 = sample_noise(&g, 1, 1, 0).unwrap();
        let w2 = sample_noise(&g, 1, 2, 0).unwrap();
        let a = eval_closed_form(&s, OracleKind::Malliavin, &w1, 0.25, 0.75).unwrap();
        let b = eval_closed_form(&s, OracleKind::Malliavin, &w2, 0.25, 0.75).unwrap();
        assert_eq!(a, b);
        assert!((a[0] - 0.5 * (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(eval_closed_form(&s, OracleKind::Malliavin, &w1, 0.75, 0.25).unwrap(), vec![0.0]);
    }

    #[test]
    fn random_sigma_with_zero_g_is_gbm() {
        let rs = spec("random_sigma_example", &[("g_before", 0.0), ("g_after", 0.0)]);
        let gbm = spec("gbm", &[("mu", 0.0), ("sigma", 1.0)]);
        let g = TimeGrid::new(1.0, 32).unwrap();
        let w = sample_noise(&g, 1, 4, 0).unwrap();
        let a = closed_form_state_path(&rs, &w).unwrap();
        let b = closed_form_state_path(&gbm, &w).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13 * y.abs());
        }
        let ra = closed_form_malliavin_row(&rs, &w, 5).unwrap();
        let rb = closed_form_malliavin_row(&gbm, &w, 5).unwrap();
        for (x, y) in ra.iter().zip(&rb) {
            assert!((x - y).abs() < 1e-13 * y.abs());
        }
    }

    #[test]
    fn no_closed_form_is_an_error() {
        let s = spec("ginzburg_landau", &[]);
        let g = TimeGrid::new(1.0, 4).unwrap();
        let w = sample_noise(&g, 1, 1, 0).unwrap();
        assert!(matches!(
            eval_closed_form(&s, OracleKind::State, &w, 0.0, 1.0),
            Err(Error::NoClosedForm(_))
        ));
    }

    #[test]
    fn malliavin_diagonal_is_sigma_of_state() {
        // D_sX(s) = σ(s, X(s)) for the random-σ example: X(s) + G(s).
        let s = spec("random_sigma_example", &[]);
        let g = TimeGrid::new(1.0, 16).unwrap();
        let w = sample_noise(&g, 1, 4, 0).unwrap();
        let xs = closed_form_state_path(&s, &w).unwrap();
        let row = closed_form_malliavin_row(&s, &w, 10).unwrap();
        let mut sig = [0.0];
        s.field.diffusion(g.time(10), &w.history(10), &[xs[10]], &mut sig);
        assert!((row[0] - sig[0]).abs() < 1e-14);
    }
}
