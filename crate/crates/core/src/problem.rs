//! Bridge problem definition and the parameter rescaling map.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::field::{ForceField, RescaledField};
use crate::grid::{Path, PathGrid};

/// Conditioned Langevin problem `m x'' = f(x) - x' + w'` on `[0, T]` with
/// `x(0) = x_minus`, `x'(0) ~ N(0, 1/2m)` and `x(T) = x_plus`.
#[derive(Debug, Clone)]
pub struct BridgeProblem {
    horizon: f64,
    mass: f64,
    x_minus: Vec<f64>,
    x_plus: Vec<f64>,
    field: Arc<dyn ForceField>,
}

impl BridgeProblem {
    pub fn new(
        horizon: f64,
        mass: f64,
        x_minus: Vec<f64>,
        x_plus: Vec<f64>,
        field: Arc<dyn ForceField>,
    ) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(invalid("T", format!("must be positive, got {horizon}")));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(invalid("m", format!("must be positive, got {mass}")));
        }
        if x_minus.is_empty() {
            return Err(invalid("d", "dimension must be at least 1"));
        }
        if x_plus.len() != x_minus.len() {
            return Err(Error::DimensionMismatch {
                expected: x_minus.len(),
                got: x_plus.len(),
            });
        }
        if let Some(fd) = field.dim() {
            if fd != x_minus.len() {
                return Err(Error::DimensionMismatch {
                    expected: x_minus.len(),
                    got: fd,
                });
            }
        }
        if x_minus.iter().chain(&x_plus).any(|v| !v.is_finite()) {
            return Err(invalid("x_minus/x_plus", "endpoints must be finite"));
        }
        Ok(Self {
            horizon,
            mass,
            x_minus,
            x_plus,
            field,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn dim(&self) -> usize {
        self.x_minus.len()
    }

    pub fn x_minus(&self) -> &[f64] {
        &self.x_minus
    }

    pub fn x_plus(&self) -> &[f64] {
        &self.x_plus
    }

    pub fn field(&self) -> &Arc<dyn ForceField> {
        &self.field
    }

    pub fn with_field(&self, field: Arc<dyn ForceField>) -> Result<Self> {
        Self::new(
            self.horizon,
            self.mass,
            self.x_minus.clone(),
            self.x_plus.clone(),
            field,
        )
    }

    pub fn with_endpoints(&self, x_minus: Vec<f64>, x_plus: Vec<f64>) -> Result<Self> {
        Self::new(self.horizon, self.mass, x_minus, x_plus, self.field.clone())
    }

    pub fn with_mass(&self, mass: f64) -> Result<Self> {
        Self::new(
            self.horizon,
            mass,
            self.x_minus.clone(),
            self.x_plus.clone(),
            self.field.clone(),
        )
    }

    /// Scaled time `γ = T / (π m)` of the operator normalized to `[0, π]`.
    pub fn rescaled_gamma(&self) -> f64 {
        self.horizon / (std::f64::consts::PI * self.mass)
    }
}

/// `y(t) = x(t / γ) / c` with `c = sqrt(β / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathMap {
    pub time_scale: f64,
    pub space_scale: f64,
}

impl PathMap {
    pub fn inverse(&self) -> PathMap {
        PathMap {
            time_scale: 1.0 / self.time_scale,
            space_scale: 1.0 / self.space_scale,
        }
    }

    /// Maps a path on `[0, T]` to the rescaled path on `[0, γT]` (same node count).
    pub fn apply(&self, path: &Path) -> Result<Path> {
        let grid = PathGrid::new(path.grid().horizon() * self.time_scale, path.grid().intervals())?;
        Path::new(grid, path.values() / self.space_scale)
    }

    pub fn apply_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v / self.space_scale).collect()
    }

    /// `(β, γ)` parameters that realise this map.
    pub fn parameters(&self) -> (f64, f64) {
        (2.0 * self.space_scale * self.space_scale, self.time_scale)
    }
}

/// Transforms the problem so that the friction and noise constants `γ` and
/// `sqrt(2γ/β)` of a general Langevin equation are absorbed into `m`, `T`, `f`.
pub fn rescale_problem(problem: &BridgeProblem, beta: f64, gamma: f64) -> Result<(BridgeProblem, PathMap)> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(invalid("beta", format!("must be positive, got {beta}")));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(invalid("gamma", format!("must be positive, got {gamma}")));
    }
    let map = PathMap {
        time_scale: gamma,
        space_scale: (beta / 2.0).sqrt(),
    };
    let field: Arc<dyn ForceField> = if map.space_scale == 1.0 {
        problem.field.clone()
    } else {
        Arc::new(RescaledField::new(problem.field.clone(), map.space_scale))
    };
    let rescaled = BridgeProblem::new(
        gamma * problem.horizon,
        gamma * gamma * problem.mass,
        map.apply_point(&problem.x_minus),
        map.apply_point(&problem.x_plus),
        field,
    )?;
    Ok((rescaled, map))
}

/// Values of `f` at every node of a path, `(J+1) x d`.
pub fn field_on_path(field: &dyn ForceField, path: &Path) -> DMatrix<f64> {
    let d = path.dim();
    let mut out = DMatrix::zeros(path.grid().n_nodes(), d);
    let mut buf = vec![0.0; d];
    for j in 0..path.grid().n_nodes() {
        field.value(&path.state(j), &mut buf);
        for c in 0..d {
            out[(j, c)] = buf[c];
        }
    }
    out
}
