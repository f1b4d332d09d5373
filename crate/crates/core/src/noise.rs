//! Brownian increments, Cameron–Martin directions and the read-only history
//! view handed to coefficient callbacks.
//!
//! Every path is keyed by `(seed, path_index)`: the seed selects a ChaCha8
//! key and the path index selects its stream, so paths can be regenerated
//! independently and in any order.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

const AUX_KEY_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

/// Generator for the Brownian increments of one path.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Generator independent of the noise stream, used for random initial
/// conditions and other per-path auxiliary draws.
pub fn auxiliary_rng(seed: u64, path_index: u64, purpose: u64) -> ChaCha8Rng {
    let key = seed ^ AUX_KEY_MIX.wrapping_mul(purpose.wrapping_add(1));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(path_index);
    rng
}

/// Piecewise-constant density `ḣ` of a Cameron–Martin path, one
/// `m`-vector per step. `h(t_i) = Σ_{k<i} ḣ_k dt`, so `h(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameronMartinPath {
    grid: TimeGrid,
    m: usize,
    density: Vec<f64>,
}

impl CameronMartinPath {
    pub fn new(grid: TimeGrid, m: usize, density: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("m", "must be >= 1"));
        }
        if density.len() != grid.steps() * m {
            return Err(Error::DimensionMismatch {
                context: "Cameron-Martin density",
                expected: grid.steps() * m,
                found: density.len(),
            });
        }
        if density.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("h", "density must be finite"));
        }
        Ok(Self { grid, m, density })
    }

    pub fn constant(grid: TimeGrid, value: &[f64]) -> Result<Self> {
        let m = value.len();
        let density = (0..grid.steps()).flat_map(|_| value.iter().copied()).collect();
        Self::new(grid, m, density)
    }

    pub fn zero(grid: TimeGrid, m: usize) -> Result<Self> {
        Self::new(grid, m, vec![0.0; grid.steps() * m])
    }

    /// Density sampled at the left endpoint of each step.
    pub fn from_fn(grid: TimeGrid, m: usize, f: impl Fn(f64, usize) -> f64) -> Result<Self> {
        let mut density = Vec::with_capacity(grid.steps() * m);
        for i in 0..grid.steps() {
            let t = grid.time(i);
            density.extend((0..m).map(|k| f(t, k)));
        }
        Self::new(grid, m, density)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn density(&self, step: usize) -> &[f64] {
        &self.density[step * self.m..(step + 1) * self.m]
    }

    pub fn density_raw(&self) -> &[f64] {
        &self.density
    }

    /// `h(t_i)` as the running sum of `ḣ dt`.
    pub fn value(&self, i: usize) -> Vec<f64> {
        let dt = self.grid.dt();
        let mut h = vec![0.0; self.m];
        for step in 0..i {
            for (hk, d) in h.iter_mut().zip(self.density(step)) {
                *hk += d * dt;
            }
        }
        h
    }

    /// `‖ḣ‖²_{L²} = Σ |ḣ_i|² dt`.
    pub fn norm_sq(&self) -> f64 {
        self.density.iter().map(|v| v * v).sum::<f64>() * self.grid.dt()
    }

    pub fn is_zero(&self) -> bool {
        self.density.iter().all(|&v| v == 0.0)
    }
}

/// One realization of `m`-dimensional Brownian increments on a grid.
///
/// A path remembers the unshifted increments and the accumulated shift along
/// one Cameron–Martin direction, so repeated shifts along the same direction
/// compose exactly: `shift(shift(w, h, a), h, b)` equals `shift(w, h, a + b)`.
#[derive(Debug, Clone)]
pub struct NoisePath {
    grid: TimeGrid,
    m: usize,
    base: Arc<Vec<f64>>,
    shift: Option<(Arc<CameronMartinPath>, f64)>,
    increments: Vec<f64>,
    brownian: Vec<f64>,
}

impl PartialEq for NoisePath {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.m == other.m && self.increments == other.increments
    }
}

impl NoisePath {
    pub fn from_increments(grid: TimeGrid, m: usize, increments: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("m", "must be >= 1"));
        }
        if increments.len() != grid.steps() * m {
            return Err(Error::DimensionMismatch {
                context: "noise increments",
                expected: grid.steps() * m,
                found: increments.len(),
            });
        }
        if increments.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("increments", "must be finite"));
        }
        Ok(Self::assemble(grid, m, Arc::new(increments), None))
    }

    fn assemble(
        grid: TimeGrid,
        m: usize,
        base: Arc<Vec<f64>>,
        shift: Option<(Arc<CameronMartinPath>, f64)>,
    ) -> Self {
        let increments = match &shift {
            Some((h, eps)) if *eps != 0.0 => {
                let scale = eps * grid.dt();
                base.iter()
                    .zip(h.density_raw())
                    .map(|(w, d)| w + scale * d)
                    .collect()
            }
            _ => base.as_ref().clone(),
        };
        let mut brownian = vec![0.0; (grid.steps() + 1) * m];
        for i in 0..grid.steps() {
            for k in 0..m {
                brownian[(i + 1) * m + k] = brownian[i * m + k] + increments[i * m + k];
            }
        }
        Self {
            grid,
            m,
            base,
            shift,
            increments,
            brownian,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn increment(&self, step: usize) -> &[f64] {
        &self.increments[step * self.m..(step + 1) * self.m]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `W(t_i)` with `W(0) = 0`.
    pub fn brownian(&self, i: usize) -> &[f64] {
        &self.brownian[i * self.m..(i + 1) * self.m]
    }

    pub fn history(&self, step: usize) -> History<'_> {
        debug_assert!(step <= self.grid.steps());
        History { noise: self, step }
    }

    /// Sum increments over blocks of `factor` steps.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.coarsen(factor)?;
        let m = self.m;
        let mut inc = vec![0.0; grid.steps() * m];
        for (i, chunk) in self.increments.chunks(factor * m).enumerate() {
            for j in 0..factor {
                for k in 0..m {
                    inc[i * m + k] += chunk[j * m + k];
                }
            }
        }
        Self::from_increments(grid, m, inc)
    }
}

/// Draw `N` independent `Normal(0, dt I_m)` increments keyed by `(seed, path_index)`.
pub fn sample_noise(grid: &TimeGrid, m: usize, seed: u64, path_index: u64) -> Result<NoisePath> {
    if m == 0 {
        return Err(Error::invalid("m", "must be >= 1"));
    }
    let mut rng = path_rng(seed, path_index);
    let sd = grid.dt().sqrt();
    let increments: Vec<f64> = (0..grid.steps() * m)
        .map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    Ok(NoisePath::assemble(*grid, m, Arc::new(increments), None))
}

/// Perturb `w` to `w + ε h`, i.e. increments `ΔW_i + ε ḣ_i dt`.
pub fn shift_noise(w: &NoisePath, h: &CameronMartinPath, eps: f64) -> Result<NoisePath> {
    if h.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            context: "shift direction",
            expected: w.dim(),
            found: h.dim(),
        });
    }
    if h.grid() != w.grid() {
        return Err(Error::invalid("h", "grid differs from the noise grid"));
    }
    if !eps.is_finite() {
        return Err(Error::invalid("epsilon", "must be finite"));
    }
    if eps == 0.0 {
        return Ok(w.clone());
    }
    let (base, shift) = match &w.shift {
        None => (w.base.clone(), (Arc::new(h.clone()), eps)),
        Some((prev, total)) if prev.as_ref() == h => (w.base.clone(), (prev.clone(), total + eps)),
        Some(_) => (Arc::new(w.increments.clone()), (Arc::new(h.clone()), eps)),
    };
    Ok(NoisePath::assemble(w.grid, w.m, base, Some(shift)))
}

/// Progressive view of a noise path: only increments strictly before
/// `step` (and Brownian values up to node `step`) are visible.
#[derive(Debug, Clone, Copy)]
pub struct History<'a> {
    noise: &'a NoisePath,
    step: usize,
}

impl<'a> History<'a> {
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.noise.grid.time(self.step)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.noise.grid
    }

    pub fn dim(&self) -> usize {
        self.noise.m
    }

    /// `W(t_k)` for `k <= step`.
    pub fn brownian(&self, k: usize) -> &'a [f64] {
        assert!(k <= self.step, "history access beyond the current time");
        self.noise.brownian(k)
    }

    /// `ΔW_k` for `k < step`.
    pub fn increment(&self, k: usize) -> &'a [f64] {
        assert!(k < self.step, "history access beyond the current time");
        self.noise.increment(k)
    }

    pub fn current_brownian(&self) -> &'a [f64] {
        self.noise.brownian(self.step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(1.0, 10).unwrap()
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = grid();
        let a = sample_noise(&g, 2, 7, 3).unwrap();
        let b = sample_noise(&g, 2, 7, 3).unwrap();
        assert_eq!(a.increments(), b.increments());
        let c = sample_noise(&g, 2, 7, 4).unwrap();
        assert_ne!(a.increments(), c.increments());
    }

    #[test]
    fn zero_shift_is_identity() {
        let g = grid();
        let w = sample_noise(&g, 1, 1, 0).unwrap();
        let h = CameronMartinPath::constant(g, &[3.0]).unwrap();
        let s = shift_noise(&w, &h, 0.0).unwrap();
        assert_eq!(
            s.increments().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            w.increments().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn shift_and_unshift() {
        let g = grid();
        let w = sample_noise(&g, 1, 1, 0).unwrap();
        let h = CameronMartinPath::constant(g, &[0.7]).unwrap();
        let there = shift_noise(&w, &h, 0.3).unwrap();
        let back = shift_noise(&there, &h, -0.3).unwrap();
        assert_eq!(back.increments(), w.increments());
    }

    #[test]
    fn shift_arithmetic() {
        let g = grid();
        let w = sample_noise(&g, 1, 5, 0).unwrap();
        let h = CameronMartinPath::constant(g, &[1.0]).unwrap();
        let s = shift_noise(&w, &h, 2.0).unwrap();
        for (a, b) in s.increments().iter().zip(w.increments()) {
            assert!((a - b - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn shift_rejects_mismatch() {
        let g = grid();
        let w = sample_noise(&g, 2, 5, 0).unwrap();
        let h = CameronMartinPath::constant(g, &[1.0]).unwrap();
        assert!(matches!(
            shift_noise(&w, &h, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cameron_martin_starts_at_zero() {
        let g = grid();
        let h = CameronMartinPath::constant(g, &[2.0]).unwrap();
        assert_eq!(h.value(0), vec![0.0]);
        assert!((h.value(10)[0] - 2.0).abs() < 1e-14);
        assert!((h.norm_sq() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn brownian_is_running_sum() {
        let g = grid();
        let w = sample_noise(&g, 1, 9, 2).unwrap();
        let s: f64 = w.increments().iter().sum();
        assert!((w.brownian(10)[0] - s).abs() < 1e-14);
        assert_eq!(w.brownian(0)[0], 0.0);
    }

    #[test]
    fn coarsening_preserves_endpoints() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let w = sample_noise(&g, 1, 2, 0).unwrap();
        let c = w.coarsen(4).unwrap();
        for i in 0..=4 {
            assert!((c.brownian(i)[0] - w.brownian(4 * i)[0]).abs() < 1e-14);
        }
    }

    #[test]
    #[should_panic(expected = "beyond the current time")]
    fn history_is_progressive() {
        let g = grid();
        let w = sample_noise(&g, 1, 2, 0).unwrap();
        let h = w.history(3);
        let _ = h.increment(3);
    }
}
