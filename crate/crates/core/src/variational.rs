//! First variation along a simulated path: the Jacobian flow `J`, its
//! inverse process `K`, the stochastic Wronskian, Gâteaux directions and
//! general linear SDEs.
//!
//! The variational recursions are the exact derivatives of the discrete
//! step map, so they inherit the taming / implicitness of the base scheme.
//! The Itô corrections in `K` and in the Wronskian use the realized
//! covariation `ΔW ΔWᵀ` of the increments by default, which makes
//! `K J - I` and `det J - D` first order in `dt` pathwise.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg;
use crate::models::{CoefficientField, ModelSpec, ProbeDomain};
use crate::noise::{History, NoisePath};
use crate::path::{MatrixPath, StatePath};
use crate::solver::{integrate, simulate, SchemeChoice, SchemeKind};

/// How the `⟨∇σ, ·⟩ dt` corrections are discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadraticVariation {
    /// `Σ_{k,l} ∇σ^k ∇σ^l ΔW^k ΔW^l`.
    #[default]
    Realized,
    /// `Σ_k ∇σ^k ∇σ^k dt`.
    Expected,
}

/// Step-by-step linearization of the scheme along one path.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub(crate) d: usize,
    pub(crate) m: usize,
    pub(crate) base: StatePath,
    /// `E_i = F_i + S_i`: derivative of the full step map.
    pub(crate) step: MatrixPath,
    /// `I - G_i`, the first-order inverse of the drift factor.
    pub(crate) drift_inverse: MatrixPath,
    /// `S_i = Σ_k ∇σ^k ΔW_i^k`.
    pub(crate) noise: MatrixPath,
    /// `Σ_k ∇σ^k ∇σ^k dt`.
    pub(crate) expected_qv: MatrixPath,
    /// `∇σ(t_i, X_i)`, `d×m×d` per step.
    pub(crate) grad_diffusion: MatrixPath,
    pub(crate) trace_grad_drift: Vec<f64>,
    /// `σ(t_i, X_i)` at every node including the last.
    pub(crate) diffusion: MatrixPath,
}

impl Linearization {
    pub fn base(&self) -> &StatePath {
        &self.base
    }

    pub fn grid(&self) -> &TimeGrid {
        self.base.grid()
    }

    pub fn diffusion(&self, i: usize) -> &[f64] {
        self.diffusion.at(i)
    }

    /// Derivative of the step map `X_i -> X_{i+1}`.
    pub fn step_matrix(&self, i: usize) -> &[f64] {
        self.step.at(i)
    }

    pub fn noise_matrix(&self, i: usize) -> &[f64] {
        self.noise.at(i)
    }

    /// `Σ_{k,l} ∇σ^k ∇σ^l ΔW^k ΔW^l` or `Σ_k ∇σ^k ∇σ^k dt`.
    pub(crate) fn covariation(&self, i: usize, qv: QuadraticVariation) -> Vec<f64> {
        match qv {
            QuadraticVariation::Realized => {
                let s = self.noise.at(i);
                let mut out = vec![0.0; self.d * self.d];
                linalg::matmul(s, s, self.d, self.d, self.d, &mut out);
                out
            }
            QuadraticVariation::Expected => self.expected_qv.at(i).to_vec(),
        }
    }

    /// `Y -> E_i Y` for a `d×cols` block.
    pub(crate) fn advance(&self, i: usize, y: &[f64], cols: usize, out: &mut [f64]) {
        linalg::matmul(self.step.at(i), y, self.d, self.d, cols, out);
    }
}

fn require_gradients(spec: &ModelSpec) -> Result<()> {
    if spec.field.has_gradients() {
        Ok(())
    } else {
        Err(Error::MissingGradients(spec.name.clone()))
    }
}

/// Simulates the base path and records the linearized step maps.
pub fn linearize(
    spec: &ModelSpec,
    grid: &TimeGrid,
    w: &NoisePath,
    theta: &[f64],
    scheme: &SchemeChoice,
) -> Result<Linearization> {
    require_gradients(spec)?;
    let field = spec.field.as_ref();
    let (d, m) = (spec.state_dim(), spec.noise_dim());
    let n = grid.steps();
    let dt = grid.dt();
    let mut step = MatrixPath::with_capacity(d, d, n);
    let mut drift_inverse = MatrixPath::with_capacity(d, d, n);
    let mut noise = MatrixPath::with_capacity(d, d, n);
    let mut expected_qv = MatrixPath::with_capacity(d, d, n);
    let mut grad_diffusion = MatrixPath::with_capacity(d * m, d, n);
    let mut trace_grad_drift = Vec::with_capacity(n);
    let mut diffusion = MatrixPath::with_capacity(d, m, n + 1);
    let eye = linalg::identity(d);
    let mut gb = vec![0.0; d * d];
    let mut gs = vec![0.0; d * m * d];
    let mut g = vec![0.0; d * d];
    let mut f = vec![0.0; d * d];
    let mut inv = vec![0.0; d * d];
    let mut s = vec![0.0; d * d];
    let mut c = vec![0.0; d * d];
    let (base, _) = integrate(spec, grid, w, theta, scheme, |v| {
        field.grad_drift(v.t, v.hist, v.x, &mut gb);
        field.grad_diffusion(v.t, v.hist, v.x, &mut gs);
        match scheme.kind {
            SchemeKind::EulerMaruyama => {
                for (gi, bi) in g.iter_mut().zip(&gb) {
                    *gi = dt * bi;
                }
            }
            SchemeKind::TamedEuler => {
                // Derivative of x -> b(x) dt / (1 + dt|b(x)|).
                let nb = linalg::norm(v.b);
                let den = 1.0 + dt * nb;
                let mut p = eye.clone();
                if nb > 0.0 {
                    for a in 0..d {
                        for l in 0..d {
                            p[a * d + l] -= dt * v.b[a] * v.b[l] / (nb * den);
                        }
                    }
                }
                linalg::matmul(&p, &gb, d, d, d, &mut g);
                for gi in g.iter_mut() {
                    *gi *= dt / den;
                }
            }
            SchemeKind::SplitStepImplicit => {
                let mut gy = vec![0.0; d * d];
                field.grad_drift(grid.time(v.i + 1), &w.history(v.i + 1), v.y, &mut gy);
                for (gi, bi) in g.iter_mut().zip(&gy) {
                    *gi = dt * bi;
                }
            }
        }
        for k in 0..d * d {
            inv[k] = eye[k] - g[k];
        }
        if scheme.kind == SchemeKind::SplitStepImplicit {
            f = linalg::inverse(&inv, d).ok_or(Error::NewtonFailure {
                step: v.i + 1,
                residual: f64::NAN,
                iterations: 0,
            })?;
        } else {
            for k in 0..d * d {
                f[k] = eye[k] + g[k];
            }
        }
        let dw = w.increment(v.i);
        s.fill(0.0);
        c.fill(0.0);
        for a in 0..d {
            for l in 0..d {
                let mut acc = 0.0;
                for (k, dwk) in dw.iter().enumerate() {
                    acc += gs[(a * m + k) * d + l] * dwk;
                }
                s[a * d + l] = acc;
            }
        }
        for k in 0..m {
            for a in 0..d {
                for l in 0..d {
                    let mut acc = 0.0;
                    for r in 0..d {
                        acc += gs[(a * m + k) * d + r] * gs[(r * m + k) * d + l];
                    }
                    c[a * d + l] += acc * dt;
                }
            }
        }
        let e: Vec<f64> = f.iter().zip(&s).map(|(x, y)| x + y).collect();
        step.push(&e);
        drift_inverse.push(&inv);
        noise.push(&s);
        expected_qv.push(&c);
        grad_diffusion.push(&gs);
        trace_grad_drift.push((0..d).map(|a| gb[a * d + a]).sum());
        diffusion.push(v.sigma);
        Ok(())
    })?;
    let mut sigma = vec![0.0; d * m];
    field.diffusion(grid.horizon(), &w.history(n), base.terminal(), &mut sigma);
    diffusion.push(&sigma);
    Ok(Linearization {
        d,
        m,
        base,
        step,
        drift_inverse,
        noise,
        expected_qv,
        grad_diffusion,
        trace_grad_drift,
        diffusion,
    })
}

/// `J`, `K` and the Wronskian along one path.
#[derive(Debug, Clone)]
pub struct JacobianBundle {
    grid: TimeGrid,
    d: usize,
    j: MatrixPath,
    k: MatrixPath,
    wronskian: Vec<f64>,
    base: StatePath,
}

impl JacobianBundle {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn base(&self) -> &StatePath {
        &self.base
    }

    pub fn j(&self, i: usize) -> &[f64] {
        self.j.at(i)
    }

    pub fn k(&self, i: usize) -> &[f64] {
        self.k.at(i)
    }

    pub fn wronskian(&self, i: usize) -> f64 {
        self.wronskian[i]
    }

    pub fn determinant(&self, i: usize) -> f64 {
        linalg::determinant(self.j(i), self.d)
    }

    /// `‖K_i J_i - I‖_F`.
    pub fn inverse_defect(&self, i: usize) -> f64 {
        let d = self.d;
        let mut p = vec![0.0; d * d];
        linalg::matmul(self.k(i), self.j(i), d, d, d, &mut p);
        for a in 0..d {
            p[a * d + a] -= 1.0;
        }
        linalg::frobenius(&p)
    }

    pub fn max_inverse_defect(&self) -> f64 {
        (0..self.grid.len()).map(|i| self.inverse_defect(i)).fold(0.0, f64::max)
    }

    /// `max_i |det J_i - D_i| / D_i`.
    pub fn max_wronskian_defect(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| (self.determinant(i) - self.wronskian[i]).abs() / self.wronskian[i])
            .fold(0.0, f64::max)
    }

    /// `J_s(t) = J(t) K(s)`.
    pub fn flow(&self, s_index: usize, t_index: usize) -> Vec<f64> {
        let d = self.d;
        let mut out = vec![0.0; d * d];
        linalg::matmul(self.j(t_index), self.k(s_index), d, d, d, &mut out);
        out
    }
}

/// Jacobian flow, inverse process and Wronskian on the noise `w`.
pub fn jacobian(
    spec: &ModelSpec,
    grid: &TimeGrid,
    w: &NoisePath,
    theta: &[f64],
    scheme: &SchemeChoice,
) -> Result<JacobianBundle> {
    jacobian_with(spec, grid, w, theta, scheme, QuadraticVariation::Realized)
}

pub fn jacobian_with(
    spec: &ModelSpec,
    grid: &TimeGrid,
    w: &NoisePath,
    theta: &[f64],
    scheme: &SchemeChoice,
    qv: QuadraticVariation,
) -> Result<JacobianBundle> {
    let lin = linearize(spec, grid, w, theta, scheme)?;
    jacobian_from(&lin, qv)
}

pub fn jacobian_from(lin: &Linearization, qv: QuadraticVariation) -> Result<JacobianBundle> {
    let d = lin.d;
    let grid = *lin.grid();
    let n = grid.steps();
    let dt = grid.dt();
    let mut j = MatrixPath::with_capacity(d, d, n + 1);
    let mut k = MatrixPath::with_capacity(d, d, n + 1);
    let mut wronskian = Vec::with_capacity(n + 1);
    let eye = linalg::identity(d);
    j.push(&eye);
    k.push(&eye);
    wronskian.push(1.0);
    let mut log_d = 0.0;
    let mut jn = vec![0.0; d * d];
    let mut kn = vec![0.0; d * d];
    let mut factor = vec![0.0; d * d];
    for i in 0..n {
        lin.advance(i, j.at(i), d, &mut jn);
        let q = lin.covariation(i, qv);
        let s = lin.noise.at(i);
        let inv = lin.drift_inverse.at(i);
        for a in 0..d * d {
            factor[a] = inv[a] - s[a] + q[a];
        }
        linalg::matmul(k.at(i), &factor, d, d, d, &mut kn);
        let trace = |m: &[f64]| (0..d).map(|a| m[a * d + a]).sum::<f64>();
        log_d += lin.trace_grad_drift[i] * dt - 0.5 * trace(&q) + trace(s);
        let dv = log_d.exp();
        if jn.iter().chain(&kn).any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                step: i + 1,
                time: grid.time(i + 1),
            });
        }
        if !(dv > 0.0 && dv.is_finite()) {
            return Err(Error::DegenerateWronskian { step: i + 1, value: dv });
        }
        j.push(&jn);
        k.push(&kn);
        wronskian.push(dv);
    }
    Ok(JacobianBundle {
        grid,
        d,
        j,
        k,
        wronskian,
        base: lin.base.clone(),
    })
}

/// The first variation `F(t)[h]` in the initial-condition direction `h`.
pub fn gateaux_direction(
    spec: &ModelSpec,
    grid: &TimeGrid,
    w: &NoisePath,
    theta: &[f64],
    scheme: &SchemeChoice,
    h: &[f64],
) -> Result<StatePath> {
    let lin = linearize(spec, grid, w, theta, scheme)?;
    if h.len() != lin.d {
        return Err(Error::DimensionMismatch {
            context: "direction",
            expected: lin.d,
            found: h.len(),
        });
    }
    let mut values = Vec::with_capacity(grid.len() * lin.d);
    values.extend_from_slice(h);
    let mut next = vec![0.0; lin.d];
    for i in 0..grid.steps() {
        lin.advance(i, &values[i * lin.d..], 1, &mut next);
        values.extend_from_slice(&next);
    }
    StatePath::new(*grid, lin.d, values)
}

/// Central finite differences `(X_{θ+εe_k} - X_{θ-εe_k}) / 2ε` on shared
/// noise, one `d×d` matrix per node (column `k` is direction `e_k`).
pub fn finite_difference_jacobian(
    spec: &ModelSpec,
    grid: &TimeGrid,
    w: &NoisePath,
    theta: &[f64],
    scheme: &SchemeChoice,
    eps: f64,
) -> Result<MatrixPath> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid("eps", "must be > 0"));
    }
    let d = theta.len();
    let mut columns = Vec::with_capacity(d);
    for k in 0..d {
        let mut up = theta.to_vec();
        let mut down = theta.to_vec();
        up[k] += eps;
        down[k] -= eps;
        let a = simulate(spec, grid, w, &up, scheme)?;
        let b = simulate(spec, grid, w, &down, scheme)?;
        columns.push((a, b));
    }
    let mut out = MatrixPath::with_capacity(d, d, grid.len());
    let mut m = vec![0.0; d * d];
    for i in 0..grid.len() {
        for (k, (a, b)) in columns.iter().enumerate() {
            for r in 0..d {
                m[r * d + k] = (a.value(i)[r] - b.value(i)[r]) / (2.0 * eps);
            }
        }
        out.push(&m);
    }
    Ok(out)
}

type MatrixFn = Box<dyn Fn(f64, &History<'_>, &mut [f64]) + Send + Sync>;

/// Coefficients of `dX = (B X + b) dt + Σ_k (Σ^k X + σ^k) dW^k`.
///
/// Layouts follow [`CoefficientField`]: `Σ` is `d×m×d` with `Σ^k_{a,l}` at
/// `(a*m + k)*d + l`, `σ` is `d×m`.
pub struct LinearSdeCoeffs {
    pub d: usize,
    pub m: usize,
    pub matrix: MatrixFn,
    pub noise_matrices: MatrixFn,
    pub forcing_drift: MatrixFn,
    pub forcing_diffusion: MatrixFn,
    /// `L` with `xᵀ B x <= L |x|²`.
    pub quadratic_bound: f64,
    pub deterministic: bool,
}

impl fmt::Debug for LinearSdeCoeffs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearSdeCoeffs")
            .field("d", &self.d)
            .field("m", &self.m)
            .field("quadratic_bound", &self.quadratic_bound)
            .finish_non_exhaustive()
    }
}

impl LinearSdeCoeffs {
    /// Time-independent coefficients.
    pub fn constant(
        d: usize,
        m: usize,
        matrix: Vec<f64>,
        noise_matrices: Vec<f64>,
        forcing_drift: Vec<f64>,
        forcing_diffusion: Vec<f64>,
    ) -> Result<Self> {
        for (name, v, n) in [
            ("B", &matrix, d * d),
            ("Σ", &noise_matrices, d * m * d),
            ("b", &forcing_drift, d),
            ("σ", &forcing_diffusion, d * m),
        ] {
            if v.len() != n {
                return Err(Error::invalid(name, format!("expected {n} entries, got {}", v.len())));
            }
        }
        let bound = linalg::symmetric_max_eigenvalue(&matrix, d);
        let konst = |v: Vec<f64>| -> MatrixFn { Box::new(move |_, _, out: &mut [f64]| out.copy_from_slice(&v)) };
        Ok(Self {
            d,
            m,
            matrix: konst(matrix),
            noise_matrices: konst(noise_matrices),
            forcing_drift: konst(forcing_drift),
            forcing_diffusion: konst(forcing_diffusion),
            quadratic_bound: bound,
            deterministic: true,
        })
    }
}

#[derive(Debug)]
struct LinearField(Arc<LinearSdeCoeffs>);

impl CoefficientField for LinearField {
    fn state_dim(&self) -> usize {
        self.0.d
    }

    fn noise_dim(&self) -> usize {
        self.0.m
    }

    fn drift(&self, t: f64, hist: &History<'_>, x: &[f64], out: &mut [f64]) {
        let d = self.0.d;
        let mut b = vec![0.0; d * d];
        (self.0.matrix)(t, hist, &mut b);
        (self.0.forcing_drift)(t, hist, out);
        linalg::matmul_acc(&b, x, d, d, 1, 1.0, out);
    }

    fn diffusion(&self, t: f64, hist: &History<'_>, x: &[f64], out: &mut [f64]) {
        let (d, m) = (self.0.d, self.0.m);
        let mut s = vec![0.0; d * m * d];
        (self.0.noise_matrices)(t, hist, &mut s);
        (self.0.forcing_diffusion)(t, hist, out);
        linalg::matmul_acc(&s, x, d * m, d, 1, 1.0, out);
    }

    fn grad_drift(&self, t: f64, hist: &History<'_>, _x: &[f64], out: &mut [f64]) {
        (self.0.matrix)(t, hist, out);
    }

    fn grad_diffusion(&self, t: f64, hist: &History<'_>, _x: &[f64], out: &mut [f64]) {
        (self.0.noise_matrices)(t, hist, out);
    }

    fn is_deterministic(&self) -> bool {
        self.0.deterministic
    }

    fn monotone_const(&self) -> f64 {
        self.0.quadratic_bound
    }

    fn lip_diffusion(&self) -> f64 {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolution {
    pub numeric: StatePath,
    /// Fundamental-solution formula, only for `d = 1`.
    pub explicit: Option<StatePath>,
}

/// Solves a general linear SDE with the chosen scheme; for `d = 1` also
/// evaluates `X = Ψ [θ + ∫ Ψ⁻¹ (b - ⟨Σ, σ⟩) ds + ∫ Ψ⁻¹ σ dW]` with
/// `Ψ = exp(∫ (B - |Σ|²/2) ds + ∫ Σ dW)` on left-point sums.
pub fn linear_sde_solve(
    coeffs: Arc<LinearSdeCoeffs>,
    grid: &TimeGrid,
    w: &NoisePath,
    theta: &[f64],
    scheme: &SchemeChoice,
) -> Result<LinearSolution> {
    let (d, m) = (coeffs.d, coeffs.m);
    let spec = ModelSpec::custom(
        "linear",
        Arc::new(LinearField(coeffs.clone())),
        theta.to_vec(),
        ProbeDomain::cube(d, -5.0, 5.0),
    );
    let numeric = simulate(&spec, grid, w, theta, scheme)?;
    let explicit = if d == 1 {
        let dt = grid.dt();
        let mut values = Vec::with_capacity(grid.len());
        let (mut log_psi, mut acc) = (0.0f64, theta[0]);
        values.push(theta[0]);
        let (mut b, mut s, mut fb, mut fs) = (vec![0.0; 1], vec![0.0; m], vec![0.0; 1], vec![0.0; m]);
        for i in 0..grid.steps() {
            let t = grid.time(i);
            let hist = w.history(i);
            (coeffs.matrix)(t, &hist, &mut b);
            (coeffs.noise_matrices)(t, &hist, &mut s);
            (coeffs.forcing_drift)(t, &hist, &mut fb);
            (coeffs.forcing_diffusion)(t, &hist, &mut fs);
            let dw = w.increment(i);
            let inv_psi = (-log_psi).exp();
            let cross: f64 = s.iter().zip(&fs).map(|(a, c)| a * c).sum();
            acc += inv_psi * (fb[0] - cross) * dt;
            acc += inv_psi * fs.iter().zip(dw).map(|(a, c)| a * c).sum::<f64>();
            log_psi += (b[0] - 0.5 * s.iter().map(|v| v * v).sum::<f64>()) * dt;
            log_psi += s.iter().zip(dw).map(|(a, c)| a * c).sum::<f64>();
            values.push(log_psi.exp() * acc);
        }
        Some(StatePath::new(*grid, 1, values)?)
    } else {
        None
    };
    Ok(LinearSolution { numeric, explicit })
}
