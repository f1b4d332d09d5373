//! Concrete one-dimensional models.

use crate::noise::History;

use super::field::CoefficientField;

/// `dX = μX dt + σX dW`.
#[derive(Debug, Clone, Copy)]
pub struct Gbm {
    pub mu: f64,
    pub sigma: f64,
}

impl CoefficientField for Gbm {
    fn state_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift(&self, _t: f64, _h: &History<'_>, x: &[f64], out: &mut [f64]) {
        out[0] = self.mu * x[0];
    }
    fn diffusion(&self, _t: f64, _h: &History<'_>, x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma * x[0];
    }
    fn grad_drift(&self, _t: f64, _h: &History<'_>, _x: &[f64], out: &mut [f64]) {
        out[0] = self.mu;
    }
    fn grad_diffusion(&self, _t: f64, _h: &History<'_>, _x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma;
    }
    fn monotone_const(&self) -> f64 {
        self.mu.max(0.0)
    }
    fn lip_diffusion(&self) -> f64 {
        self.sigma.abs()
    }
}

/// `dX = -κX dt + σ dW`.
#[derive(Debug, Clone, Copy)]
pub struct OrnsteinUhlenbeck {
    pub kappa: f64,
    pub sigma: f64,
}

impl CoefficientField for OrnsteinUhlenbeck {
    fn state_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift(&self, _t: f64, _h: &History<'_>, x: &[f64], out: &mut [f64]) {
        out[0] = -self.kappa * x[0];
    }
    fn diffusion(&self, _t: f64, _h: &History<'_>, _x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma;
    }
    fn grad_drift(&self, _t: f64, _h: &History<'_>, _x: &[f64], out: &mut [f64]) {
        out[0] = -self.kappa;
    }
    fn grad_diffusion(&self, _t: f64, _h: &History<'_>, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn monotone_const(&self) -> f64 {
        (-self.kappa).max(0.0)
    }
    fn lip_diffusion(&self) -> f64 {
        0.0
    }
}

/// Stochastic Ginzburg–Landau: `dX = (ηX - X³) dt + σX dW`.
#[derive(Debug, Clone, Copy)]
pub struct GinzburgLandau {
    pub eta: f64,
    pub sigma: f64,
}

impl CoefficientField for GinzburgLandau {
    fn state_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift(&self, _t: f64, _h: &History<'_>, x: &[f64], out: &mut [f64]) {
        out[0] = self.eta * x[0] - x[0].powi(3);
    }
    fn diffusion(&self, _t: f64, _h: &History<'_>, x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma * x[0];
    }
    fn grad_drift(&self, _t: f64, _h: &History<'_>, x: &[f64], out: &mut [f64]) {
        out[0] = self.eta - 3.0 * x[0] * x[0];
    }
    fn grad_diffusion(&self, _t: f64, _h: &History<'_>, _x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma;
    }
    fn monotone_const(&self) -> f64 {
        self.eta.max(0.0)
    }
    fn lip_diffusion(&self) -> f64 {
        self.sigma.abs()
    }
}

/// Stochastic Verhulst: `dX = (λX - X²) dt + σX dW`, monotone on `x >= 0`.
#[derive(Debug, Clone, Copy)]
pub struct Verhulst {
    pub lambda: f64,
    pub sigma: f64,
}

impl CoefficientField for Verhulst {
    fn state_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift(&self, _t: f64, _h: &History<'_>, x: &[f64], out: &mut [f64]) {
        out[0] = self.lambda * x[0] - x[0] * x[0];
    }
    fn diffusion(&self, _t: f64, _h: &History<'_>, x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma * x[0];
    }
    fn grad_drift(&self, _t: f64, _h: &History<'_>, x: &[f64], out: &mut [f64]) {
        out[0] = self.lambda - 2.0 * x[0];
    }
    fn grad_diffusion(&self, _t: f64, _h: &History<'_>, _x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma;
    }
    fn monotone_const(&self) -> f64 {
        self.lambda.max(0.0)
    }
    fn lip_diffusion(&self) -> f64 {
        self.sigma.abs()
    }
}

/// `dX = (X - X⁵) dt + σ dW`.
#[derive(Debug, Clone, Copy)]
pub struct Quintic {
    pub sigma: f64,
}

impl CoefficientField for Quintic {
    fn state_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift(&self, _t: f64, _h: &History<'_>, x: &[f64], out: &mut [f64]) {
        out[0] = x[0] - x[0].powi(5);
    }
    fn diffusion(&self, _t: f64, _h: &History<'_>, _x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma;
    }
    fn grad_drift(&self, _t: f64, _h: &History<'_>, x: &[f64], out: &mut [f64]) {
        out[0] = 1.0 - 5.0 * x[0].powi(4);
    }
    fn grad_diffusion(&self, _t: f64, _h: &History<'_>, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn monotone_const(&self) -> f64 {
        1.0
    }
    fn lip_diffusion(&self) -> f64 {
        0.0
    }
}

const WEIERSTRASS_A: f64 = 0.5;
const WEIERSTRASS_B: f64 = 13.0;
const WEIERSTRASS_TERMS: i32 = 10;

/// Truncated Weierstrass function on `[-1, 1]`, shifted by the tail value at
/// `±1` so that it equals `-2` there, and `-2` outside.
pub fn weierstrass_like(w: f64) -> f64 {
    if w.abs() > 1.0 {
        return -2.0;
    }
    let a_k = WEIERSTRASS_A.powi(WEIERSTRASS_TERMS);
    let tail = a_k / (1.0 - WEIERSTRASS_A);
    let mut sum = 0.0;
    let mut amp = 1.0;
    let mut freq = std::f64::consts::PI;
    for _ in 0..WEIERSTRASS_TERMS {
        sum += amp * (freq * w).cos();
        amp *= WEIERSTRASS_A;
        freq *= WEIERSTRASS_B;
    }
    sum - tail
}

fn bump(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        (-1.0 / u).exp()
    }
}

fn bump_prime(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        bump(u) / (u * u)
    }
}

/// C^∞ cutoff: 0 for `|x| <= 1`, 1 for `|x| >= 2`. Returns `(φ, φ')`.
pub fn smooth_cutoff(x: f64) -> (f64, f64) {
    let u = x.abs() - 1.0;
    if u <= 0.0 {
        return (0.0, 0.0);
    }
    if u >= 1.0 {
        return (1.0, 0.0);
    }
    let (e0, e1) = (bump(u), bump(1.0 - u));
    let denom = e0 + e1;
    let ds = (bump_prime(u) * e1 + e0 * bump_prime(1.0 - u)) / (denom * denom);
    (e0 / denom, ds * x.signum())
}

/// Wright–Fisher-type model: `b = -x`, `σ = (x²-1)²` on `[-1, 1]` and
/// `φ(x) f(W(t))` outside, with `f` continuous and nowhere differentiable.
///
/// Started in `[-1, 1]` the solution stays there, where `σ` does not depend
/// on the noise, so `U = V = 0` along the solution.
#[derive(Debug, Clone, Copy, Default)]
pub struct WrightFisherLike;

impl CoefficientField for WrightFisherLike {
    fn state_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift(&self, _t: f64, _h: &History<'_>, x: &[f64], out: &mut [f64]) {
        out[0] = -x[0];
    }
    fn diffusion(&self, _t: f64, h: &History<'_>, x: &[f64], out: &mut [f64]) {
        let x = x[0];
        out[0] = if x.abs() <= 1.0 {
            (x * x - 1.0).powi(2)
        } else {
            smooth_cutoff(x).0 * weierstrass_like(h.current_brownian()[0])
        };
    }
    fn grad_drift(&self, _t: f64, _h: &History<'_>, _x: &[f64], out: &mut [f64]) {
        out[0] = -1.0;
    }
    fn grad_diffusion(&self, _t: f64, h: &History<'_>, x: &[f64], out: &mut [f64]) {
        let x = x[0];
        out[0] = if x.abs() <= 1.0 {
            4.0 * x * (x * x - 1.0)
        } else {
            smooth_cutoff(x).1 * weierstrass_like(h.current_brownian()[0])
        };
    }
    fn is_deterministic(&self) -> bool {
        false
    }
    fn monotone_const(&self) -> f64 {
        0.0
    }
    fn lip_diffusion(&self) -> f64 {
        4.0
    }
}

/// Deterministic step function `g(s) = before` for `s < at`, `after` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepFunction {
    pub at: f64,
    pub before: f64,
    pub after: f64,
}

impl StepFunction {
    fn tol(&self) -> f64 {
        1e-12 * self.at.abs().max(1.0)
    }

    pub fn is_after(&self, s: f64) -> bool {
        s >= self.at - self.tol()
    }

    pub fn eval(&self, s: f64) -> f64 {
        if self.is_after(s) {
            self.after
        } else {
            self.before
        }
    }

    /// First grid index `k` with `g(t_k) = after`, capped at `steps + 1`.
    pub fn first_index_after(&self, dt: f64, steps: usize) -> usize {
        let guess = ((self.at / dt).ceil().max(0.0) as usize).min(steps + 1);
        let mut k = guess.saturating_sub(1);
        while k <= steps && !self.is_after(k as f64 * dt) {
            k += 1;
        }
        k
    }
}

/// `dX = (X + ∫₀ᵗ g dW) dW`, `b = 0`: a random diffusion coefficient with
/// `V(s, t) = g(s)` for `s <= t`.
#[derive(Debug, Clone, Copy)]
pub struct RandomSigmaExample {
    pub g: StepFunction,
}

impl RandomSigmaExample {
    /// Left-point `Σ_{k<i} g(t_k) ΔW_k` up to the history's current node.
    pub fn stochastic_integral(&self, h: &History<'_>) -> f64 {
        let i = h.step();
        let k_star = self.g.first_index_after(h.grid().dt(), h.grid().steps());
        if i <= k_star {
            self.g.before * h.brownian(i)[0]
        } else {
            self.g.before * h.brownian(k_star)[0]
                + self.g.after * (h.brownian(i)[0] - h.brownian(k_star)[0])
        }
    }
}

impl CoefficientField for RandomSigmaExample {
    fn state_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift(&self, _t: f64, _h: &History<'_>, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn diffusion(&self, _t: f64, h: &History<'_>, x: &[f64], out: &mut [f64]) {
        out[0] = x[0] + self.stochastic_integral(h);
    }
    fn grad_drift(&self, _t: f64, _h: &History<'_>, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn grad_diffusion(&self, _t: f64, _h: &History<'_>, _x: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }
    fn has_malliavin_coefficients(&self) -> bool {
        true
    }
    fn mall_diffusion(&self, s: f64, t: f64, _h: &History<'_>, out: &mut [f64]) {
        out[0] = if s <= t { self.g.eval(s) } else { 0.0 };
    }
    fn is_deterministic(&self) -> bool {
        false
    }
    fn monotone_const(&self) -> f64 {
        0.0
    }
    fn lip_diffusion(&self) -> f64 {
        1.0
    }
}
