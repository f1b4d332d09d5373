//! The Malliavin derivative field `D_s X(t)` on an `s`-lattice, its
//! representation through the Jacobian flow, directional derivatives
//! `D^h X` and the Malliavin covariance matrix.

use std::io::{self, Write};

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg;
use crate::models::{eval_mall_diffusion, eval_mall_drift, CoefficientField, ModelSpec};
use crate::noise::{CameronMartinPath, NoisePath};
use crate::path::{MatrixPath, StatePath};
use crate::solver::SchemeChoice;
use crate::variational::{linearize, JacobianBundle, Linearization, QuadraticVariation};

/// `D_s X(t)` for `s` on a strided sub-lattice and every `t >= s`.
#[derive(Debug, Clone)]
pub struct MalliavinField {
    grid: TimeGrid,
    d: usize,
    m: usize,
    stride: usize,
    s_indices: Vec<usize>,
    /// Row `q` holds `M[q][i]` for `i = s_indices[q]..=N`.
    rows: Vec<MatrixPath>,
    base: StatePath,
}

impl MalliavinField {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d, self.m)
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn s_indices(&self) -> &[usize] {
        &self.s_indices
    }

    pub fn base(&self) -> &StatePath {
        &self.base
    }

    pub fn row_of(&self, s_index: usize) -> Option<usize> {
        (s_index.is_multiple_of(self.stride) && s_index <= self.grid.steps()).then_some(s_index / self.stride)
    }

    /// `M[row][t_index]`, `None` when `s > t`.
    pub fn entry(&self, row: usize, t_index: usize) -> Option<&[f64]> {
        let s = self.s_indices[row];
        (t_index >= s).then(|| self.rows[row].at(t_index - s))
    }

    /// `D_s X(t)` for a lattice `s`; the zero matrix when `s > t`.
    pub fn get(&self, s_index: usize, t_index: usize) -> Option<Vec<f64>> {
        let row = self.row_of(s_index)?;
        Some(match self.entry(row, t_index) {
            Some(m) => m.to_vec(),
            None => vec![0.0; self.d * self.m],
        })
    }

    /// `Σ_{s_q < t} D_{s_q} X(t) ḣ(s_q) Δs`, the left-point quadrature of
    /// `∫ D_s X(t) ḣ(s) ds`.
    pub fn quadrature(&self, h: &CameronMartinPath, t_index: usize) -> Vec<f64> {
        let (d, m) = (self.d, self.m);
        let ds = self.stride as f64 * self.grid.dt();
        let mut out = vec![0.0; d];
        for (q, &s) in self.s_indices.iter().enumerate() {
            if s >= t_index {
                break;
            }
            let entry = self.rows[q].at(t_index - s);
            linalg::matmul_acc(entry, h.density(s), d, m, 1, ds, &mut out);
        }
        out
    }

    /// `max ‖D_s X(t) - J(t) K(s) σ(s, X(s))‖_F` over the lattice. Only
    /// meaningful for coefficients without `U`, `V`, where `A(s,t) = σ(s)`.
    pub fn representation_defect(&self, bundle: &JacobianBundle) -> f64 {
        let (d, m) = (self.d, self.m);
        let mut worst = 0.0f64;
        let mut rhs = vec![0.0; d * m];
        for (q, &s) in self.s_indices.iter().enumerate() {
            let sigma = self.rows[q].at(0);
            for t in s..self.grid.len() {
                let flow = bundle.flow(s, t);
                linalg::matmul(&flow, sigma, d, d, m, &mut rhs);
                let diff: Vec<f64> = self.rows[q].at(t - s).iter().zip(&rhs).map(|(a, b)| a - b).collect();
                worst = worst.max(linalg::frobenius(&diff));
            }
        }
        worst
    }

    /// CSV with columns `s,t,row,col,value`, one line per matrix entry.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "s,t,row,col,value")?;
        for (q, &s) in self.s_indices.iter().enumerate() {
            let ts = self.grid.time(s);
            for t in s..self.grid.len() {
                let tt = self.grid.time(t);
                for (k, v) in self.rows[q].at(t - s).iter().enumerate() {
                    writeln!(out, "{ts:.16e},{tt:.16e},{},{},{v:.16e}", k / self.m, k % self.m)?;
                }
            }
        }
        Ok(())
    }
}

fn check_stride(stride: usize) -> Result<()> {
    if stride == 0 {
        Err(Error::invalid("s_stride", "must be >= 1"))
    } else {
        Ok(())
    }
}

/// `Ṽ = Σ_k V^{(·,k)} ΔW^k`, a `d×m` matrix, from a `d×m×m` tensor.
fn contract_v(v: &[f64], dw: &[f64], d: usize, m: usize, out: &mut [f64]) {
    for a in 0..d {
        for c in 0..m {
            out[a * m + c] = (0..m).map(|k| v[(a * m + k) * m + c] * dw[k]).sum();
        }
    }
}

/// Simulates the base path and the Malliavin field rows `s_j = j·stride`.
pub fn malliavin_field(
    spec: &ModelSpec,
    grid: &TimeGrid,
    w: &NoisePath,
    theta: &[f64],
    scheme: &SchemeChoice,
    s_stride: usize,
) -> Result<MalliavinField> {
    check_stride(s_stride)?;
    let lin = linearize(spec, grid, w, theta, scheme)?;
    malliavin_field_from(spec.field.as_ref(), &lin, w, s_stride)
}

pub fn malliavin_field_from(
    field: &dyn CoefficientField,
    lin: &Linearization,
    w: &NoisePath,
    s_stride: usize,
) -> Result<MalliavinField> {
    check_stride(s_stride)?;
    let grid = *lin.grid();
    let s_indices: Vec<usize> = (0..=grid.steps()).step_by(s_stride).collect();
    let rows = s_indices
        .iter()
        .map(|&j| malliavin_row(field, lin, w, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(MalliavinField {
        grid,
        d: lin.d,
        m: lin.m,
        stride: s_stride,
        s_indices,
        rows,
        base: lin.base.clone(),
    })
}

/// The single row `t ↦ D_{s_j} X(t)` for `t_j <= t <= T`, entry `i` at `t_{j+i}`.
pub fn malliavin_row(
    field: &dyn CoefficientField,
    lin: &Linearization,
    w: &NoisePath,
    s_index: usize,
) -> Result<MatrixPath> {
    let grid = *lin.grid();
    let (d, m) = (lin.d, lin.m);
    let n = grid.steps();
    if s_index > n {
        return Err(Error::invalid("s", "beyond the grid"));
    }
    let dt = grid.dt();
    let forced = field.has_malliavin_coefficients();
    let mut u = vec![0.0; d * m];
    let mut v = vec![0.0; d * m * m];
    let mut vt = vec![0.0; d * m];
    let mut next = vec![0.0; d * m];
    let sj = grid.time(s_index);
    let mut row = MatrixPath::with_capacity(d, m, n + 1 - s_index);
    row.push(lin.diffusion(s_index));
    for i in s_index..n {
        lin.advance(i, row.at(i - s_index), m, &mut next);
        if forced {
            let (t, hist) = (grid.time(i), w.history(i));
            eval_mall_drift(field, sj, t, &hist, &mut u);
            eval_mall_diffusion(field, sj, t, &hist, &mut v);
            contract_v(&v, w.increment(i), d, m, &mut vt);
            for k in 0..d * m {
                next[k] += u[k] * dt + vt[k];
            }
        }
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence {
                step: i + 1,
                time: grid.time(i + 1),
            });
        }
        row.push(&next);
    }
    Ok(row)
}

/// `D_s X(t) = J_s(t) A(s,t)` split into its two factors.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationParts {
    /// `J(t) K(s)`, `d×d`.
    pub flow: Vec<f64>,
    /// `A(s,t)`, `d×m`.
    pub a: Vec<f64>,
}

impl RepresentationParts {
    pub fn product(&self, d: usize, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; d * m];
        linalg::matmul(&self.flow, &self.a, d, d, m, &mut out);
        out
    }
}

/// `J_s(t)` and `A(s,t) = σ(s) + Σ_{s<=r<t} K(r) J(s) [U dt + Ṽ - ⟨∇σ, Ṽ⟩]`
/// with the covariation term discretized as chosen.
pub fn representation_parts(
    field: &dyn CoefficientField,
    lin: &Linearization,
    bundle: &JacobianBundle,
    w: &NoisePath,
    s_index: usize,
    t_index: usize,
    qv: QuadraticVariation,
) -> Result<RepresentationParts> {
    let grid = *lin.grid();
    if s_index > t_index || t_index > grid.steps() {
        return Err(Error::invalid("s_index", "need s <= t <= T on the grid"));
    }
    let (d, m) = (lin.d, lin.m);
    let flow = bundle.flow(s_index, t_index);
    let mut a = lin.diffusion(s_index).to_vec();
    if field.has_malliavin_coefficients() {
        let dt = grid.dt();
        let s = grid.time(s_index);
        let mut u = vec![0.0; d * m];
        let mut v = vec![0.0; d * m * m];
        let mut vt = vec![0.0; d * m];
        let mut kj = vec![0.0; d * d];
        let mut inc = vec![0.0; d * m];
        for r in s_index..t_index {
            let (t, hist) = (grid.time(r), w.history(r));
            eval_mall_drift(field, s, t, &hist, &mut u);
            eval_mall_diffusion(field, s, t, &hist, &mut v);
            contract_v(&v, w.increment(r), d, m, &mut vt);
            for k in 0..d * m {
                inc[k] = u[k] * dt + vt[k];
            }
            match qv {
                QuadraticVariation::Realized => {
                    linalg::matmul_acc(lin.noise_matrix(r), &vt, d, d, m, -1.0, &mut inc);
                }
                QuadraticVariation::Expected => {
                    let gs = lin.grad_diffusion.at(r);
                    for k in 0..m {
                        for aa in 0..d {
                            for c in 0..m {
                                let mut acc = 0.0;
                                for l in 0..d {
                                    acc += gs[(aa * m + k) * d + l] * v[(l * m + k) * m + c];
                                }
                                inc[aa * m + c] -= acc * dt;
                            }
                        }
                    }
                }
            }
            linalg::matmul(bundle.k(r), bundle.j(s_index), d, d, d, &mut kj);
            linalg::matmul_acc(&kj, &inc, d, d, m, 1.0, &mut a);
        }
    }
    Ok(RepresentationParts { flow, a })
}

/// `D^h X = ∫ D_s X ḣ(s) ds` computed as one linear SDE on the base path.
pub fn directional_derivative(
    spec: &ModelSpec,
    grid: &TimeGrid,
    w: &NoisePath,
    theta: &[f64],
    scheme: &SchemeChoice,
    h: &CameronMartinPath,
) -> Result<StatePath> {
    let lin = linearize(spec, grid, w, theta, scheme)?;
    directional_derivative_from(spec.field.as_ref(), &lin, w, h)
}

pub fn directional_derivative_from(
    field: &dyn CoefficientField,
    lin: &Linearization,
    w: &NoisePath,
    h: &CameronMartinPath,
) -> Result<StatePath> {
    let grid = *lin.grid();
    let (d, m) = (lin.d, lin.m);
    if h.dim() != m || h.grid() != &grid {
        return Err(Error::DimensionMismatch {
            context: "Cameron-Martin direction",
            expected: m,
            found: h.dim(),
        });
    }
    let n = grid.steps();
    let dt = grid.dt();
    let forced = field.has_malliavin_coefficients();
    let mut u = vec![0.0; d * m];
    let mut v = vec![0.0; d * m * m];
    let mut uh = vec![0.0; d];
    let mut vh = vec![0.0; d * m];
    let mut values = Vec::with_capacity((n + 1) * d);
    values.extend(std::iter::repeat_n(0.0, d));
    let mut next = vec![0.0; d];
    for i in 0..n {
        let dw = w.increment(i);
        lin.advance(i, &values[i * d..], 1, &mut next);
        linalg::matmul_acc(lin.diffusion(i), h.density(i), d, m, 1, dt, &mut next);
        if forced && i > 0 {
            let (t, hist) = (grid.time(i), w.history(i));
            uh.fill(0.0);
            vh.fill(0.0);
            for j in 0..i {
                let s = grid.time(j);
                let hd = h.density(j);
                eval_mall_drift(field, s, t, &hist, &mut u);
                eval_mall_diffusion(field, s, t, &hist, &mut v);
                linalg::matmul_acc(&u, hd, d, m, 1, dt, &mut uh);
                // (Σ_j V^{(·,k)}(s_j, t) ḣ_j dt) as a d×m matrix over k.
                for a in 0..d {
                    for k in 0..m {
                        vh[a * m + k] += (0..m).map(|c| v[(a * m + k) * m + c] * hd[c]).sum::<f64>() * dt;
                    }
                }
            }
            for a in 0..d {
                next[a] += uh[a] * dt + (0..m).map(|k| vh[a * m + k] * dw[k]).sum::<f64>();
            }
        }
        values.extend_from_slice(&next);
    }
    StatePath::new(grid, d, values)
}

/// `Q(t) = ∫_0^t D_s X(t) D_s X(t)ᵀ ds` on the `s`-lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct MalliavinMatrix {
    pub t: f64,
    pub q: Vec<f64>,
    pub min_eigenvalue: f64,
}

/// Trapezoidal quadrature of `M Mᵀ` over the lattice points `s <= t`;
/// `t_index` must itself be a lattice point.
pub fn malliavin_matrix(field: &MalliavinField, t_index: usize) -> Result<MalliavinMatrix> {
    let (d, m) = field.dims();
    let last = field
        .row_of(t_index)
        .ok_or_else(|| Error::invalid("t_index", "must lie on the s-lattice"))?;
    let ds = field.stride as f64 * field.grid.dt();
    let mut q = vec![0.0; d * d];
    for row in 0..=last {
        let weight = if row == 0 || row == last { 0.5 * ds } else { ds };
        let e = field.entry(row, t_index).expect("s <= t on the lattice");
        for a in 0..d {
            for b in 0..d {
                q[a * d + b] += weight * (0..m).map(|k| e[a * m + k] * e[b * m + k]).sum::<f64>();
            }
        }
    }
    if last == 0 {
        q.fill(0.0);
    }
    let min_eigenvalue = SymmetricEigen::new(linalg::to_matrix(&q, d, d)).eigenvalues.min();
    Ok(MalliavinMatrix {
        t: field.grid.time(t_index),
        q,
        min_eigenvalue,
    })
}
