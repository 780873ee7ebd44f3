//! Uniform time grids on `[0, T]` and node-valued paths.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};

/// Smallest admissible number of subintervals.
pub const MIN_INTERVALS: usize = 8;

/// One-sided second-order first-derivative weights at `t = 0`, in units of `1/dt`.
/// The mirrored weights at `t = T` are `[0.5, -2.0, 1.5]` on `x_{J-2}, x_{J-1}, x_J`.
pub(crate) const START_SLOPE: [f64; 3] = [-1.5, 2.0, -0.5];
pub(crate) const END_SLOPE: [f64; 3] = [0.5, -2.0, 1.5];

/// Uniform grid `t_j = j * dt`, `j = 0..=J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGrid {
    horizon: f64,
    intervals: usize,
}

impl PathGrid {
    pub fn new(horizon: f64, intervals: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(invalid("T", format!("horizon must be positive, got {horizon}")));
        }
        if intervals < MIN_INTERVALS {
            return Err(Error::GridTooCoarse(intervals));
        }
        Ok(Self { horizon, intervals })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of subintervals `J`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn n_nodes(&self) -> usize {
        self.intervals + 1
    }

    /// Number of interior nodes, `J - 1`.
    pub fn n_interior(&self) -> usize {
        self.intervals - 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.intervals as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.intervals {
            self.horizon
        } else {
            j as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.intervals).map(move |j| self.node(j))
    }

    /// Trapezoid weights for `∫_0^T g dt` on node values.
    pub fn trapezoid_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.intervals {
            0.5 * self.dt()
        } else {
            self.dt()
        }
    }

    /// Index of the node closest to `t`.
    pub fn nearest_node(&self, t: f64) -> usize {
        let j = (t / self.dt()).round();
        (j.max(0.0) as usize).min(self.intervals)
    }
}

pub fn make_grid(horizon: f64, intervals: usize) -> Result<PathGrid> {
    PathGrid::new(horizon, intervals)
}

/// Node values `x(t_j)` of a path in `R^d`, stored as a `(J+1) x d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    grid: PathGrid,
    values: DMatrix<f64>,
}

impl Path {
    pub fn new(grid: PathGrid, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != grid.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_nodes(),
                got: values.nrows(),
            });
        }
        if values.ncols() == 0 {
            return Err(invalid("d", "paths need at least one component"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: PathGrid, dim: usize) -> Self {
        Self {
            grid,
            values: DMatrix::zeros(grid.n_nodes(), dim.max(1)),
        }
    }

    /// Samples a scalar function of time into every component.
    pub fn from_fn(grid: PathGrid, dim: usize, mut f: impl FnMut(f64, usize) -> f64) -> Self {
        let values = DMatrix::from_fn(grid.n_nodes(), dim.max(1), |j, c| f(grid.node(j), c));
        Self { grid, values }
    }

    pub fn grid(&self) -> &PathGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    /// State at node `j` as a vector in `R^d`.
    pub fn state(&self, j: usize) -> Vec<f64> {
        self.values.row(j).iter().copied().collect()
    }

    pub fn at(&self, j: usize, component: usize) -> f64 {
        self.values[(j, component)]
    }
}

/// Grid derivative of a path. Central second-order stencils in the interior,
/// one-sided second-order stencils at both endpoints.
pub fn finite_difference(path: &Path, order: usize) -> Result<DMatrix<f64>> {
    let grid = path.grid();
    let n = grid.intervals();
    let x = path.values();
    let dt = grid.dt();
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    match order {
        1 => {
            let scale = 1.0 / dt;
            for c in 0..x.ncols() {
                out[(0, c)] = scale
                    * (START_SLOPE[0] * x[(0, c)]
                        + START_SLOPE[1] * x[(1, c)]
                        + START_SLOPE[2] * x[(2, c)]);
                for j in 1..n {
                    out[(j, c)] = 0.5 * scale * (x[(j + 1, c)] - x[(j - 1, c)]);
                }
                out[(n, c)] = scale
                    * (END_SLOPE[0] * x[(n - 2, c)]
                        + END_SLOPE[1] * x[(n - 1, c)]
                        + END_SLOPE[2] * x[(n, c)]);
            }
        }
        2 => {
            let scale = 1.0 / (dt * dt);
            for c in 0..x.ncols() {
                out[(0, c)] = scale
                    * (2.0 * x[(0, c)] - 5.0 * x[(1, c)] + 4.0 * x[(2, c)] - x[(3, c)]);
                for j in 1..n {
                    out[(j, c)] = scale * (x[(j + 1, c)] - 2.0 * x[(j, c)] + x[(j - 1, c)]);
                }
                out[(n, c)] = scale
                    * (2.0 * x[(n, c)] - 5.0 * x[(n - 1, c)] + 4.0 * x[(n - 2, c)]
                        - x[(n - 3, c)]);
            }
        }
        other => return Err(Error::UnsupportedOrder(other)),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_coarse_grids() {
        assert!(matches!(make_grid(1.0, 4), Err(Error::GridTooCoarse(4))));
        assert!(make_grid(0.0, 16).is_err());
        assert!(make_grid(-1.0, 16).is_err());
    }

    #[test]
    fn grid_spacing() {
        let g = make_grid(1.0, 8).unwrap();
        assert_eq!(g.dt(), 0.125);
        assert_eq!(g.node(8), 1.0);
        let g = make_grid(2.0, 16).unwrap();
        for (j, t) in g.nodes().enumerate() {
            assert_abs_diff_eq!(t, j as f64 / 8.0, epsilon = 1e-15);
        }
        let nodes: Vec<f64> = g.nodes().collect();
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn derivatives_of_low_degree_polynomials() {
        let g = make_grid(1.7, 20).unwrap();
        let constant = Path::from_fn(g, 2, |_, _| 3.25);
        let d1 = finite_difference(&constant, 1).unwrap();
        let d2 = finite_difference(&constant, 2).unwrap();
        assert!(d1.iter().all(|v| v.abs() < 1e-12));
        assert!(d2.iter().all(|v| v.abs() < 1e-10));

        let linear = Path::from_fn(g, 1, |t, _| t);
        let d1 = finite_difference(&linear, 1).unwrap();
        assert!(d1.iter().all(|v| (v - 1.0).abs() < 1e-12));

        let quad = Path::from_fn(g, 1, |t, _| t * t - 0.5 * t);
        let d1 = finite_difference(&quad, 1).unwrap();
        let d2 = finite_difference(&quad, 2).unwrap();
        for (j, t) in g.nodes().enumerate() {
            assert_abs_diff_eq!(d1[(j, 0)], 2.0 * t - 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(d2[(j, 0)], 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn unsupported_order() {
        let g = make_grid(1.0, 8).unwrap();
        let p = Path::zeros(g, 1);
        assert!(matches!(finite_difference(&p, 3), Err(Error::UnsupportedOrder(3))));
        assert!(matches!(finite_difference(&p, 0), Err(Error::UnsupportedOrder(0))));
    }

    #[test]
    fn path_shape_is_checked() {
        let g = make_grid(1.0, 8).unwrap();
        assert!(Path::new(g, DMatrix::zeros(8, 1)).is_err());
        assert!(Path::new(g, DMatrix::zeros(9, 2)).is_ok());
    }
}
