//! Row-major dense helpers for the small (d ≤ 8) matrices carried along paths.

use nalgebra::DMatrix;

pub fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

/// `out = a (r×k) · b (k×c)`.
pub fn matmul(a: &[f64], b: &[f64], r: usize, k: usize, c: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), r * k);
    debug_assert_eq!(b.len(), k * c);
    debug_assert_eq!(out.len(), r * c);
    for i in 0..r {
        for j in 0..c {
            let mut s = 0.0;
            for l in 0..k {
                s += a[i * k + l] * b[l * c + j];
            }
            out[i * c + j] = s;
        }
    }
}

/// `out += scale · a (r×k) · b (k×c)`.
pub fn matmul_acc(a: &[f64], b: &[f64], r: usize, k: usize, c: usize, scale: f64, out: &mut [f64]) {
    for i in 0..r {
        for j in 0..c {
            let mut s = 0.0;
            for l in 0..k {
                s += a[i * k + l] * b[l * c + j];
            }
            out[i * c + j] += scale * s;
        }
    }
}

pub fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn norm(v: &[f64]) -> f64 {
    frobenius(v)
}

pub fn to_matrix(a: &[f64], r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(r, c, a)
}

pub fn from_matrix(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn determinant(a: &[f64], d: usize) -> f64 {
    match d {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        _ => to_matrix(a, d, d).determinant(),
    }
}

/// Solve `a x = b` for square `a`; `None` when singular.
pub fn solve(a: &[f64], b: &[f64], d: usize, cols: usize) -> Option<Vec<f64>> {
    if d == 1 {
        if a[0] == 0.0 || !a[0].is_finite() {
            return None;
        }
        return Some(b.iter().map(|v| v / a[0]).collect());
    }
    let lu = to_matrix(a, d, d).lu();
    lu.solve(&to_matrix(b, d, cols)).map(|x| from_matrix(&x))
}

pub fn inverse(a: &[f64], d: usize) -> Option<Vec<f64>> {
    solve(a, &identity(d), d, d)
}

/// 2-norm condition number via singular values.
pub fn condition_number(a: &[f64], d: usize) -> f64 {
    if d == 1 {
        return if a[0] == 0.0 { f64::INFINITY } else { 1.0 };
    }
    let sv = to_matrix(a, d, d).singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Largest eigenvalue of the symmetric part `(A + Aᵀ)/2`.
pub fn symmetric_max_eigenvalue(a: &[f64], d: usize) -> f64 {
    let m = to_matrix(a, d, d);
    let sym = (&m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().max()
}

/// Smallest eigenvalue of the symmetric part `(A + Aᵀ)/2`.
pub fn symmetric_min_eigenvalue(a: &[f64], d: usize) -> f64 {
    let m = to_matrix(a, d, d);
    let sym = (&m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

pub fn transpose(a: &[f64], r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a[i * c + j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_and_inverse() {
        let a = [2.0, 1.0, 0.5, 3.0];
        let inv = inverse(&a, 2).unwrap();
        let mut p = [0.0; 4];
        matmul(&a, &inv, 2, 2, 2, &mut p);
        for (x, y) in p.iter().zip(identity(2)) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!((determinant(&a, 2) - 5.5).abs() < 1e-14);
        assert!((determinant(&a, 2) - to_matrix(&a, 2, 2).determinant()).abs() < 1e-14);
    }

    #[test]
    fn singular_is_detected() {
        assert!(inverse(&[1.0, 2.0, 2.0, 4.0], 2).is_none() || condition_number(&[1.0, 2.0, 2.0, 4.0], 2) > 1e15);
        assert!(inverse(&[0.0], 1).is_none());
        assert_eq!(condition_number(&[0.0], 1), f64::INFINITY);
    }

    #[test]
    fn transpose_roundtrip() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(transpose(&transpose(&a, 2, 3), 3, 2), a.to_vec());
    }
}
