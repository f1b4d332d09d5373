use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Vector-valued path on the grid nodes, `d` entries per node.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    grid: TimeGrid,
    d: usize,
    values: Vec<f64>,
}

impl StatePath {
    pub fn new(grid: TimeGrid, d: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * d {
            return Err(Error::DimensionMismatch {
                context: "state path",
                expected: grid.len() * d,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let step = pos / d.max(1);
            return Err(Error::Divergence {
                step,
                time: grid.time(step),
            });
        }
        Ok(Self { grid, d, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn terminal(&self) -> &[f64] {
        self.value(self.grid.steps())
    }

    /// `max_i |X_i|` with the Euclidean norm per node.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks(self.d)
            .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// `max_i |X_i - Y_i|`.
    pub fn sup_distance(&self, other: &StatePath) -> f64 {
        self.values
            .chunks(self.d)
            .zip(other.values.chunks(self.d))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Matrix-valued path, a `rows×cols` row-major matrix per node.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPath {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixPath {
    pub fn with_capacity(rows: usize, cols: usize, nodes: usize) -> Self {
        Self {
            rows,
            cols,
            data: Vec::with_capacity(rows * cols * nodes),
        }
    }

    pub fn push(&mut self, m: &[f64]) {
        debug_assert_eq!(m.len(), self.rows * self.cols);
        self.data.extend_from_slice(m);
    }

    pub fn at(&self, i: usize) -> &[f64] {
        let sz = self.rows * self.cols;
        &self.data[i * sz..(i + 1) * sz]
    }

    pub fn len(&self) -> usize {
        self.data.len() / (self.rows * self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.rows * self.cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_is_divergence() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let err = StatePath::new(g, 1, vec![1.0, f64::INFINITY, 2.0]).unwrap_err();
        assert!(matches!(err, Error::Divergence { step: 1, .. }));
    }

    #[test]
    fn norms() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let a = StatePath::new(g, 2, vec![0.0, 0.0, 3.0, 4.0, 1.0, 0.0]).unwrap();
        let b = StatePath::new(g, 2, vec![0.0, 1.0, 3.0, 4.0, 1.0, 0.0]).unwrap();
        assert_eq!(a.sup_norm(), 5.0);
        assert_eq!(a.sup_distance(&b), 1.0);
        assert_eq!(a.terminal(), &[1.0, 0.0]);
    }
}
