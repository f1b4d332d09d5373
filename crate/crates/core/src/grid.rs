use crate::error::{Error, Result};

/// Uniform time grid `t_i = i * dt` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid("T", "must be finite and > 0"));
        }
        if steps == 0 {
            return Err(Error::invalid("N", "must be >= 1"));
        }
        Ok(Self {
            horizon,
            steps,
            dt: horizon / steps as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node time. The last node is pinned to `T` exactly.
    pub fn time(&self, i: usize) -> f64 {
        debug_assert!(i <= self.steps);
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.dt
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |i| self.time(i))
    }

    /// Index of the first node with `t_i >= t - tol`.
    pub fn index_at_or_after(&self, t: f64) -> usize {
        let raw = (t / self.dt - 1e-9).ceil();
        (raw.max(0.0) as usize).min(self.steps)
    }

    /// Index of a time that must lie on a node.
    pub fn node_index(&self, t: f64) -> Result<usize> {
        let k = (t / self.dt).round();
        if k < 0.0 || k as usize > self.steps || (k * self.dt - t).abs() > 1e-9 * self.horizon.max(1.0) {
            return Err(Error::invalid("t", format!("{t} is not a node of the grid")));
        }
        Ok(k as usize)
    }

    /// Grid with `steps / factor` steps over the same horizon.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.steps.is_multiple_of(factor) {
            return Err(Error::invalid(
                "factor",
                format!("must divide the step count {}", self.steps),
            ));
        }
        Self::new(self.horizon, self.steps / factor)
    }
}

pub fn make_grid(horizon: f64, steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(horizon, steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_grid() {
        let g = make_grid(1.0, 4).unwrap();
        let nodes: Vec<f64> = g.nodes().collect();
        assert_eq!(nodes, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn minimal_grid() {
        let g = make_grid(1.0, 1).unwrap();
        assert_eq!(g.nodes().collect::<Vec<_>>(), vec![0.0, 1.0]);
    }

    #[test]
    fn midpoint_of_long_grid() {
        let g = make_grid(2.0, 1000).unwrap();
        assert_eq!(g.dt(), 0.002);
        assert!((g.time(500) - 1.0).abs() < 1e-15);
        assert_eq!(g.node_index(1.0).unwrap(), 500);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_grid(0.0, 4).is_err());
        assert!(make_grid(-1.0, 4).is_err());
        assert!(make_grid(1.0, 0).is_err());
        assert!(make_grid(f64::NAN, 4).is_err());
    }

    #[test]
    fn coarsening() {
        let g = make_grid(1.0, 16).unwrap();
        assert_eq!(g.coarsen(4).unwrap().steps(), 4);
        assert!(g.coarsen(3).is_err());
    }
}
