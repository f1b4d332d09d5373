use std::fmt::Debug;

use crate::noise::History;

/// Drift, diffusion and their derivatives for one SDE
/// `dX = b(t, ω, X) dt + σ(t, ω, X) dW`.
///
/// Layouts are row-major: `σ` is `d×m`, `∇ₓb` is `d×d`, and `∇ₓσ` is
/// `d×m×d` with `∂σ_{a,k}/∂x_l` at `(a*m + k)*d + l`. The Malliavin
/// derivatives of the coefficients are `U(s,t)` (`d×m`) and `V(s,t)`
/// (`d×m×m`, `D^c_s σ_{a,k}` at `(a*m + k)*m + c`).
///
/// Callbacks must be pure: the engines evaluate them concurrently.
pub trait CoefficientField: Send + Sync + Debug {
    fn state_dim(&self) -> usize;
    fn noise_dim(&self) -> usize;

    fn drift(&self, t: f64, hist: &History<'_>, x: &[f64], out: &mut [f64]);
    fn diffusion(&self, t: f64, hist: &History<'_>, x: &[f64], out: &mut [f64]);
    fn grad_drift(&self, t: f64, hist: &History<'_>, x: &[f64], out: &mut [f64]);
    fn grad_diffusion(&self, t: f64, hist: &History<'_>, x: &[f64], out: &mut [f64]);

    fn has_gradients(&self) -> bool {
        true
    }

    /// Whether `mall_drift` / `mall_diffusion` can be nonzero.
    fn has_malliavin_coefficients(&self) -> bool {
        false
    }

    /// `U(s, t)`; only called for `s <= t`.
    fn mall_drift(&self, _s: f64, _t: f64, _hist: &History<'_>, out: &mut [f64]) {
        out.fill(0.0);
    }

    /// `V(s, t)`; only called for `s <= t`.
    fn mall_diffusion(&self, _s: f64, _t: f64, _hist: &History<'_>, out: &mut [f64]) {
        out.fill(0.0);
    }

    /// No dependence on the noise history.
    fn is_deterministic(&self) -> bool {
        true
    }

    /// One-sided Lipschitz constant of the drift.
    fn monotone_const(&self) -> f64;

    /// Lipschitz constant of the diffusion.
    fn lip_diffusion(&self) -> f64;
}

/// `U(s,t)` with the structural zero for `s > t`.
pub fn eval_mall_drift(
    field: &dyn CoefficientField,
    s: f64,
    t: f64,
    hist: &History<'_>,
    out: &mut [f64],
) {
    if s > t {
        out.fill(0.0);
    } else {
        field.mall_drift(s, t, hist, out);
    }
}

/// `V(s,t)` with the structural zero for `s > t`.
pub fn eval_mall_diffusion(
    field: &dyn CoefficientField,
    s: f64,
    t: f64,
    hist: &History<'_>,
    out: &mut [f64],
) {
    if s > t {
        out.fill(0.0);
    } else {
        field.mall_diffusion(s, t, hist, out);
    }
}
