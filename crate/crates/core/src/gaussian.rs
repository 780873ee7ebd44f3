//! The exact Gaussian bridge of the force-free problem and the discrete
//! Green's function check against the assembled operator.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Path, PathGrid};
use crate::operator::DiscreteOperator;
use crate::problem::BridgeProblem;

/// Covariance of the force-free position `q(t) - x_-` started with
/// `p(0) ~ N(0, 1/2m)`: `s∧t + (m/2)(e^{-s/m} + e^{-t/m} - e^{-|s-t|/m} - 1)`.
///
/// All exponents are non-positive, so evaluation is stable down to `m ≈ 1e-6 T`.
pub fn cov0(s: f64, t: f64, m: f64) -> f64 {
    s.min(t) + 0.5 * m * ((-s / m).exp() + (-t / m).exp() - (-(s - t).abs() / m).exp() - 1.0)
}

/// Bridge covariance `C(s,t) = C₀(s,t) - C₀(s,T) C₀(T,t) / C₀(T,T)`.
pub fn bridge_cov(s: f64, t: f64, horizon: f64, m: f64) -> f64 {
    cov0(s, t, m) - cov0(s, horizon, m) * cov0(horizon, t, m) / cov0(horizon, horizon, m)
}

/// Bridge mean `x_- + C₀(t,T)/C₀(T,T) (x_+ - x_-)`, one component.
pub fn bridge_mean(t: f64, horizon: f64, m: f64, x_minus: f64, x_plus: f64) -> f64 {
    x_minus + cov0(t, horizon, m) / cov0(horizon, horizon, m) * (x_plus - x_minus)
}

/// `N(x̄, C)` on a grid. The covariance lives on interior nodes and is shared by
/// every component; endpoints are pinned.
#[derive(Debug, Clone)]
pub struct BridgeGaussian {
    grid: PathGrid,
    mass: f64,
    mean: Path,
    cov: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl BridgeGaussian {
    pub fn grid(&self) -> &PathGrid {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn mean(&self) -> &Path {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower Cholesky factor of [`cov`](Self::cov).
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    /// Pointwise standard deviation at node `j` (zero at the endpoints).
    pub fn node_std(&self, j: usize) -> f64 {
        if j == 0 || j == self.grid.intervals() {
            0.0
        } else {
            self.cov[(j - 1, j - 1)].sqrt()
        }
    }

    /// Covariance between nodes `i` and `j` of the full grid.
    pub fn node_cov(&self, i: usize, j: usize) -> f64 {
        let n = self.grid.intervals();
        if i == 0 || j == 0 || i == n || j == n {
            0.0
        } else {
            self.cov[(i - 1, j - 1)]
        }
    }

    pub fn sample_bridge<R: Rng + ?Sized>(&self, rng: &mut R) -> Path {
        let mut path = self.mean.clone();
        let inner = self.grid.n_interior();
        for c in 0..self.dim() {
            let xi = DVector::from_fn(inner, |_, _| rng.sample::<f64, _>(StandardNormal));
            let dx = &self.factor * xi;
            for i in 0..inner {
                path.values_mut()[(i + 1, c)] += dx[i];
            }
        }
        path
    }
}

pub fn condition(grid: &PathGrid, problem: &BridgeProblem) -> Result<BridgeGaussian> {
    if (grid.horizon() - problem.horizon()).abs() > 1e-12 * problem.horizon() {
        return Err(Error::GridMismatch("problem horizon and grid"));
    }
    let (t_end, m) = (problem.horizon(), problem.mass());
    let inner = grid.n_interior();
    let n = grid.intervals();
    let cov = DMatrix::from_fn(inner, inner, |i, j| {
        bridge_cov(grid.node(i + 1), grid.node(j + 1), t_end, m)
    });
    let cov = (&cov + cov.transpose()) * 0.5;
    let factor = Cholesky::<f64, Dyn>::new(cov.clone())
        .ok_or(Error::Factorization("bridge covariance is not positive definite"))?
        .unpack();
    let mut mean = Path::from_fn(*grid, problem.dim(), |t, c| {
        bridge_mean(t, t_end, m, problem.x_minus()[c], problem.x_plus()[c])
    });
    for c in 0..problem.dim() {
        mean.values_mut()[(0, c)] = problem.x_minus()[c];
        mean.values_mut()[(n, c)] = problem.x_plus()[c];
    }
    Ok(BridgeGaussian {
        grid: *grid,
        mass: m,
        mean,
        cov,
        factor,
    })
}

/// Residuals of the discrete identity `(-M) C = I / dt`.
///
/// The discrete delta of a grid operator acting on the kinked kernel spreads
/// over the diagonal and its two neighbours, so the pointwise checks use the
/// band sum, and rows next to the Robin ends (where the natural boundary rows
/// carry `O(1/dt)` consistency error) are left out of the pointwise maxima.
#[derive(Debug, Clone, Serialize)]
pub struct GreensReport {
    pub intervals: usize,
    /// `max |(-M)⁻¹/dt - C|`.
    pub inverse_residual: f64,
    /// `max |dt (-M) C|` over entries more than one off the diagonal, boundary rows excluded.
    pub off_band_residual: f64,
    /// `max |dt Σ_{|i-j|≤1} ((-M) C)_ij - 1|`, boundary rows excluded.
    pub band_mass_error: f64,
    /// Mean of `dt ((-M) C)_ii` over interior rows.
    pub diagonal_mean: f64,
}

/// Rows at each end left out of pointwise residual maxima.
pub const BOUNDARY_ROWS: usize = 2;

pub fn greens_check(op: &DiscreteOperator, gauss: &BridgeGaussian) -> Result<GreensReport> {
    if op.grid() != gauss.grid() {
        return Err(Error::GridMismatch("operator and Gaussian"));
    }
    let dt = op.grid().dt();
    let neg = -op.matrix();
    let inner = neg.nrows();
    let inverse = neg
        .clone()
        .cholesky()
        .ok_or(Error::Factorization("-M is not positive definite"))?
        .inverse()
        / dt;
    let inverse_residual = (&inverse - gauss.cov()).amax();
    let product = &neg * gauss.cov() * dt;
    let rows = BOUNDARY_ROWS..inner - BOUNDARY_ROWS;
    let mut off_band: f64 = 0.0;
    let mut band_err: f64 = 0.0;
    for i in rows {
        let mut band = 0.0;
        for j in 0..inner {
            if i.abs_diff(j) <= 1 {
                band += product[(i, j)];
            } else {
                off_band = off_band.max(product[(i, j)].abs());
            }
        }
        band_err = band_err.max((band - 1.0).abs());
    }
    let diagonal_mean = (0..inner).map(|i| product[(i, i)]).sum::<f64>() / inner as f64;
    Ok(GreensReport {
        intervals: op.grid().intervals(),
        inverse_residual,
        off_band_residual: off_band,
        band_mass_error: band_err,
        diagonal_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ZeroField;
    use crate::grid::make_grid;
    use crate::operator::{assemble_operator, assemble_with_mass, solve_mean_path};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn problem(t: f64, m: f64, a: f64, b: f64) -> BridgeProblem {
        BridgeProblem::new(t, m, vec![a], vec![b], Arc::new(ZeroField)).unwrap()
    }

    #[test]
    fn cov0_closed_form_values() {
        for s in [0.0, 0.3, 1.0] {
            assert_eq!(cov0(s, 0.0, 0.5), 0.0);
            assert!((cov0(s, 0.7, 0.5) - cov0(0.7, s, 0.5)).abs() < 1e-15);
        }
        let want = 0.5 + 0.5 * (-2.0f64).exp();
        assert!((cov0(1.0, 1.0, 0.5) - want).abs() < 1e-15);
        assert!((cov0(1.0, 1.0, 0.5) - 0.567_667_641_618_306_3).abs() < 1e-12);
        // no overflow or NaN for tiny m
        assert!(cov0(0.5, 0.25, 1e-6).is_finite());
    }

    fn dt_cov(s: f64, t: f64, m: f64, h: f64, order: usize) -> f64 {
        // central differences in t
        let f = |u: f64| cov0(s, u, m);
        match order {
            1 => (f(t + h) - f(t - h)) / (2.0 * h),
            2 => (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h),
            _ => (f(t + 2.0 * h) - 2.0 * f(t + h) + 2.0 * f(t - h) - f(t - 2.0 * h)) / (2.0 * h.powi(3)),
        }
    }

    #[test]
    fn cov0_smoothness_across_diagonal() {
        let (m, s) = (0.3, 0.6);
        let dt = 1.0 / 512.0;
        let h = 1e-3;
        let left = s - 4.0 * dt;
        let right = s + 4.0 * dt;
        // value, slope and curvature match on both sides to O(dt)
        assert!((cov0(s, left, m) - cov0(s, right, m)).abs() < 20.0 * dt);
        assert!((dt_cov(s, left, m, h, 1) - dt_cov(s, right, m, h, 1)).abs() < 20.0 * dt);
        assert!((dt_cov(s, left, m, h, 2) - dt_cov(s, right, m, h, 2)).abs() < 20.0 * dt);
        // jump of the third derivative
        let jump = dt_cov(s, s + 4.0 * dt, m, dt, 3) - dt_cov(s, s - 4.0 * dt, m, dt, 3);
        let want = 1.0 / (m * m);
        assert!((jump - want).abs() < 0.1 * want, "jump {jump} want {want}");
    }

    #[test]
    fn cov0_robin_conditions() {
        let m = 0.4;
        // ∂_t and ∂_t² of C₀(s, t) on either side of the diagonal
        let below = |s: f64, t: f64| {
            let (a, b) = ((-t / m).exp(), (-(s - t) / m).exp());
            (1.0 - 0.5 * a - 0.5 * b, 0.5 * (a - b) / m)
        };
        let above = |s: f64, t: f64| {
            let (a, b) = ((-t / m).exp(), (-(t - s) / m).exp());
            (0.5 * (b - a), 0.5 * (a - b) / m)
        };
        for s in [0.2, 0.7, 1.1] {
            let (d1, d2) = below(s, 0.0);
            assert!((m * d2 - d1).abs() < 1e-14);
            let t_end = 1.3;
            let (d1, d2) = above(s, t_end);
            assert!((m * d2 + d1).abs() < 1e-14);
            // the closed-form derivatives agree with differences of cov0
            let h = 1e-5;
            let fd = (cov0(s, t_end + h, m) - cov0(s, t_end - h, m)) / (2.0 * h);
            assert!((fd - d1).abs() < 1e-8);
            let fd = (cov0(s, 2.0 * h, m) - cov0(s, 0.0, m)) / (2.0 * h);
            assert!((fd - below(s, h).0).abs() < 1e-6);
        }
    }

    #[test]
    fn conditioning_pins_endpoint() {
        for s in [0.0, 0.2, 0.9, 1.5] {
            assert!(bridge_cov(s, 1.5, 1.5, 0.3).abs() < 1e-14);
        }
    }

    #[test]
    fn mean_matches_kernel_solution() {
        for t in [0.5, 1.0, 2.0] {
            for m in [0.1, 0.5, 1.0] {
                let p = problem(t, m, 0.0, 1.0);
                let grid = make_grid(t, 32).unwrap();
                let g = condition(&grid, &p).unwrap();
                let mean = solve_mean_path(&p, &grid).unwrap();
                let diff = (g.mean().values() - mean.values().values()).amax();
                assert!(diff < 1e-10, "T={t} m={m}: {diff}");
            }
        }
    }

    #[test]
    fn zero_endpoints_give_zero_mean_and_cov_is_endpoint_free() {
        let grid = make_grid(1.0, 24).unwrap();
        let g0 = condition(&grid, &problem(1.0, 0.2, 0.0, 0.0)).unwrap();
        assert!(g0.mean().values().iter().all(|&v| v == 0.0));
        let g1 = condition(&grid, &problem(1.0, 0.2, -3.0, 7.5)).unwrap();
        assert_eq!(g0.cov(), g1.cov());
        let sym = (g1.cov() - g1.cov().transpose()).amax();
        assert!(sym == 0.0);
        let min_eig = g1.cov().clone().symmetric_eigenvalues().min();
        assert!(min_eig > 1e-10);
    }

    #[test]
    fn sampler_is_deterministic_and_pins_ends() {
        let grid = make_grid(1.0, 16).unwrap();
        let p = BridgeProblem::new(1.0, 0.3, vec![0.5, -1.0], vec![2.0, 0.0], Arc::new(ZeroField)).unwrap();
        let g = condition(&grid, &p).unwrap();
        let a = g.sample_bridge(&mut ChaCha8Rng::seed_from_u64(9));
        let b = g.sample_bridge(&mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert_eq!(a.state(0), vec![0.5, -1.0]);
        assert_eq!(a.state(16), vec![2.0, 0.0]);
    }

    #[test]
    fn sample_moments_match() {
        let grid = make_grid(1.0, 16).unwrap();
        let g = condition(&grid, &problem(1.0, 0.2, 0.0, 1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let (i, j) = (5usize, 11usize);
        let (mut si, mut sj, mut sij, mut sii, mut sjj) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = g.sample_bridge(&mut rng);
            let (a, b) = (x.at(i, 0), x.at(j, 0));
            si += a;
            sj += b;
            sij += a * b;
            sii += a * a;
            sjj += b * b;
        }
        let nf = n as f64;
        let (mi, mj) = (si / nf, sj / nf);
        assert!((mi - g.mean().at(i, 0)).abs() < 4.0 * g.node_std(i) / 100.0);
        assert!((mj - g.mean().at(j, 0)).abs() < 4.0 * g.node_std(j) / 100.0);
        let c = sij / nf - mi * mj;
        let (vi, vj) = (sii / nf - mi * mi, sjj / nf - mj * mj);
        let exact = g.node_cov(i, j);
        let se = ((g.node_cov(i, i) * g.node_cov(j, j) + exact * exact) / nf).sqrt();
        assert!((c - exact).abs() < 3.0 * se, "{c} vs {exact} (se {se})");
        assert!(vi > 0.0 && vj > 0.0);
    }

    #[test]
    fn greens_identity_converges() {
        let p = problem(1.0, 0.2, 0.0, 1.0);
        let mut prev: Option<GreensReport> = None;
        for j in [64, 128, 256] {
            let grid = make_grid(1.0, j).unwrap();
            let op = assemble_operator(&p, &grid).unwrap();
            let g = condition(&grid, &p).unwrap();
            let r = greens_check(&op, &g).unwrap();
            assert!(r.band_mass_error < 0.05, "{r:?}");
            assert!((r.diagonal_mean - 2.0 / 3.0).abs() < 0.05, "{r:?}");
            if let Some(q) = prev {
                let order = (q.inverse_residual / r.inverse_residual).log2();
                assert!(order > 1.5, "order {order}");
                assert!(r.off_band_residual < q.off_band_residual);
            }
            prev = Some(r);
        }
    }

    #[test]
    fn mismatched_mass_is_detected() {
        let p = problem(1.0, 0.2, 0.0, 1.0);
        let grid = make_grid(1.0, 128).unwrap();
        let good = greens_check(&assemble_operator(&p, &grid).unwrap(), &condition(&grid, &p).unwrap()).unwrap();
        let bad = greens_check(&assemble_with_mass(0.4, &grid).unwrap(), &condition(&grid, &p).unwrap()).unwrap();
        let scale = condition(&grid, &p).unwrap().cov().amax();
        assert!(bad.inverse_residual > 0.05 * scale);
        assert!(bad.inverse_residual > 100.0 * good.inverse_residual);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let p = problem(1.0, 0.2, 0.0, 1.0);
        let op = assemble_operator(&p, &make_grid(1.0, 32).unwrap()).unwrap();
        let g = condition(&make_grid(1.0, 16).unwrap(), &p).unwrap();
        assert!(matches!(greens_check(&op, &g), Err(Error::GridMismatch(_))));
    }
}
