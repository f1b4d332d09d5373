use crate::error::{Error, Result};

/// Monte Carlo mean with standard error, componentwise.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_paths: usize,
}

impl McEstimate {
    pub fn ci95_halfwidth(&self) -> Vec<f64> {
        self.stderr.iter().map(|s| 1.96 * s).collect()
    }

    /// First component, for scalar estimators.
    pub fn value(&self) -> f64 {
        self.mean[0]
    }

    pub fn error(&self) -> f64 {
        self.stderr[0]
    }

    /// `|a - b| / sqrt(se_a² + se_b²)` on the first component.
    pub fn z_score(&self, other: &McEstimate) -> f64 {
        let se = (self.error().powi(2) + other.error().powi(2)).sqrt();
        let diff = (self.value() - other.value()).abs();
        if se == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / se
        }
    }
}

/// Streaming mean / second-moment accumulator (Welford), mergeable in a
/// fixed order so chunked reductions are reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.mean.len());
        self.n += 1;
        let n = self.n as f64;
        for ((mu, m2), &xi) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = xi - *mu;
            *mu += delta / n;
            *m2 += delta * (xi - *mu);
        }
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for k in 0..self.mean.len() {
            let delta = other.mean[k] - self.mean[k];
            self.mean[k] += delta * nb / n;
            self.m2[k] += other.m2[k] + delta * delta * na * nb / n;
        }
        self.n += other.n;
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn finish(&self) -> Result<McEstimate> {
        if self.n < 2 {
            return Err(Error::invalid(
                "n_paths",
                format!("need at least 2 accepted paths for a standard error, have {}", self.n),
            ));
        }
        let n = self.n as f64;
        let stderr = self
            .m2
            .iter()
            .map(|m2| (m2.max(0.0) / (n - 1.0) / n).sqrt())
            .collect();
        Ok(McEstimate {
            mean: self.mean.clone(),
            stderr,
            n_paths: self.n,
        })
    }
}
