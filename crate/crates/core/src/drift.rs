//! The nonlinear drift `N(x)` of the bridge SPDE and the Girsanov
//! log-density `U` of the bridge law relative to the force-free bridge.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ForceField;
use crate::grid::{finite_difference, Path, END_SLOPE, START_SLOPE};

/// `N(x)` on the grid. The Dirac-derivative terms at the ends are carried as
/// a load vector `b` with `<z, b>_h = -m <f(x_-), z'(0)> + m <f(x_+), z'(T)>`
/// for interior test vectors `z` (zero at the ends), using the one-sided
/// slope stencils.
#[derive(Debug, Clone)]
pub struct DriftOutput {
    pub interior: DMatrix<f64>,
    pub boundary_load: DMatrix<f64>,
}

impl DriftOutput {
    /// Interior values plus the boundary load, `(J-1) x d`.
    pub fn total(&self) -> DMatrix<f64> {
        &self.interior + &self.boundary_load
    }

    /// `<N(x), h>_h` for a path perturbation `h` (only interior nodes are read).
    pub fn pairing(&self, dt: f64, h: &DMatrix<f64>) -> f64 {
        let inner = self.interior.nrows();
        let mut acc = 0.0;
        for c in 0..self.interior.ncols() {
            for i in 0..inner {
                acc += (self.interior[(i, c)] + self.boundary_load[(i, c)]) * h[(i + 1, c)];
            }
        }
        dt * acc
    }
}

fn checked(values: &[f64], node: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteField { node })
    }
}

/// `ẍ` as the central difference of the central-difference velocity. This is
/// the stencil produced by differentiating the trapezoid sums of `U`, which keeps
/// `N` and the gradient of the discrete `U` close beyond their common `O(dt²)` error.
pub fn acceleration(path: &Path, velocity: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    finite_difference(&Path::new(*path.grid(), velocity.clone())?, 1)
}

/// Interior drift `-f_i ∂_k f_i + m ẋ_i ẋ_j ∂_i∂_j f_k - ẋ_i (∂_i f_k - ∂_k f_i)
/// + m ẍ_i (∂_i f_k + ∂_k f_i)` at every interior node, plus the boundary load.
pub fn eval_drift(field: &dyn ForceField, path: &Path, m: f64) -> Result<DriftOutput> {
    let grid = path.grid();
    let d = path.dim();
    let n = grid.intervals();
    let inner = grid.n_interior();
    let mut interior = DMatrix::zeros(inner, d);
    let mut boundary_load = DMatrix::zeros(inner, d);
    if field.is_zero() {
        return Ok(DriftOutput {
            interior,
            boundary_load,
        });
    }
    let v = finite_difference(path, 1)?;
    let a = acceleration(path, &v)?;
    let mut f = vec![0.0; d];
    let mut jac = vec![0.0; d * d];
    let mut hess = vec![0.0; d * d * d];
    for j in 1..n {
        let x = path.state(j);
        field.value(&x, &mut f);
        field.jacobian(&x, &mut jac);
        field.hessian(&x, &mut hess);
        checked(&f, j)?;
        checked(&jac, j)?;
        checked(&hess, j)?;
        for k in 0..d {
            let mut acc = 0.0;
            for i in 0..d {
                let vi = v[(j, i)];
                let (dif_k, dkf_i) = (jac[i * d + k], jac[k * d + i]);
                acc -= f[i] * dkf_i;
                acc -= vi * (dif_k - dkf_i);
                acc += m * a[(j, i)] * (dif_k + dkf_i);
                for jj in 0..d {
                    acc += m * vi * v[(j, jj)] * hess[(i * d + jj) * d + k];
                }
            }
            interior[(j - 1, k)] = acc;
        }
    }
    let dt2 = grid.dt() * grid.dt();
    let mut f_minus = vec![0.0; d];
    let mut f_plus = vec![0.0; d];
    field.value(&path.state(0), &mut f_minus);
    field.value(&path.state(n), &mut f_plus);
    checked(&f_minus, 0)?;
    checked(&f_plus, n)?;
    for c in 0..d {
        let lo = -m * f_minus[c] / dt2;
        boundary_load[(0, c)] += lo * START_SLOPE[1];
        boundary_load[(1, c)] += lo * START_SLOPE[2];
        let hi = m * f_plus[c] / dt2;
        boundary_load[(inner - 2, c)] += hi * END_SLOPE[0];
        boundary_load[(inner - 1, c)] += hi * END_SLOPE[1];
    }
    Ok(DriftOutput {
        interior,
        boundary_load,
    })
}

/// The terms of `U = boundary - quad + work - potential` (normalization omitted).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GirsanovTerms {
    /// `m <f(x_+), x'(T)> - m <f(x_-), x'(0)>`
    pub boundary: f64,
    /// `∫ m <Df(x) x', x'> dt`
    pub quad: f64,
    /// `∫ <f(x), x'> dt`
    pub work: f64,
    /// `½ ∫ |f(x)|² dt`
    pub potential: f64,
    pub u: f64,
}

pub fn log_density_u(field: &dyn ForceField, path: &Path, m: f64) -> Result<GirsanovTerms> {
    if field.is_zero() {
        return Ok(GirsanovTerms {
            boundary: 0.0,
            quad: 0.0,
            work: 0.0,
            potential: 0.0,
            u: 0.0,
        });
    }
    let grid = path.grid();
    let d = path.dim();
    let n = grid.intervals();
    let v = finite_difference(path, 1)?;
    let mut f = vec![0.0; d];
    let mut jac = vec![0.0; d * d];
    let (mut boundary, mut quad, mut work, mut potential) = (0.0, 0.0, 0.0, 0.0);
    for j in 0..=n {
        let x = path.state(j);
        field.value(&x, &mut f);
        field.jacobian(&x, &mut jac);
        checked(&f, j)?;
        checked(&jac, j)?;
        let w = grid.trapezoid_weight(j);
        let mut q = 0.0;
        for i in 0..d {
            for k in 0..d {
                // <Df ẋ, ẋ> = Σ ∂_i f_k ẋ_i ẋ_k
                q += jac[i * d + k] * v[(j, i)] * v[(j, k)];
            }
        }
        let fv: f64 = (0..d).map(|c| f[c] * v[(j, c)]).sum();
        let ff: f64 = f.iter().map(|x| x * x).sum();
        quad += w * m * q;
        work += w * fv;
        potential += w * 0.5 * ff;
        if j == 0 {
            boundary -= m * fv;
        } else if j == n {
            boundary += m * fv;
        }
    }
    let u = boundary - quad + work - potential;
    if !u.is_finite() {
        return Err(Error::NonFinite {
            context: "log-density".into(),
        });
    }
    Ok(GirsanovTerms {
        boundary,
        quad,
        work,
        potential,
        u,
    })
}

/// Central difference of `U` along `h` next to the pairing `<N(x), h>_h`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DirectionalCheck {
    pub finite_difference: f64,
    pub pairing: f64,
    /// `‖N_int‖_h ‖h‖_h`, the size the pairing would have for aligned directions.
    pub scale: f64,
}

impl DirectionalCheck {
    pub fn relative_error(&self) -> f64 {
        (self.finite_difference - self.pairing).abs() / self.pairing.abs()
    }

    /// Cosine between the interior drift and `h`; near zero the relative error is ill-conditioned.
    pub fn alignment(&self) -> f64 {
        (self.pairing / self.scale).abs()
    }
}

pub fn directional_check(field: &dyn ForceField, x: &Path, h: &Path, m: f64, eps: f64) -> Result<DirectionalCheck> {
    if x.grid() != h.grid() || x.dim() != h.dim() {
        return Err(Error::GridMismatch("path and perturbation"));
    }
    let grid = *x.grid();
    let shifted = |sign: f64| Path::new(grid, x.values() + h.values() * (sign * eps));
    let up = log_density_u(field, &shifted(1.0)?, m)?.u;
    let down = log_density_u(field, &shifted(-1.0)?, m)?.u;
    let drift = eval_drift(field, x, m)?;
    let dt = grid.dt();
    let n = grid.intervals();
    let h_int = h.values().rows(1, n - 1);
    let scale = (dt * drift.interior.norm_squared()).sqrt() * (dt * h_int.norm_squared()).sqrt();
    Ok(DirectionalCheck {
        finite_difference: (up - down) / (2.0 * eps),
        pairing: drift.pairing(dt, h.values()),
        scale,
    })
}
