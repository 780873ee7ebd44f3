//! The self-adjoint operator `L = -m² ∂⁴ + ∂²` with the natural Robin
//! conditions `m x''(0) = x'(0)`, `m x''(T) = -x'(T)` and Dirichlet ends,
//! its spectral decomposition, the mean path, and spectral projections.
//!
//! The grid operator is assembled from the quadratic form
//!
//! ```text
//! -<x, L x> = m² ∫ x''² dt + ∫ x'² dt + m (x'(0)² + x'(T)²)
//! ```
//!
//! so that symmetry holds exactly and the Robin conditions appear as natural
//! conditions. Curvature uses second differences with trapezoid weights (the
//! endpoint curvature reuses the adjacent difference), slopes use cell
//! differences, and the boundary slopes use one-sided second-order stencils.
//! Dividing the Gram matrix by the lumped mass `dt` gives a pointwise
//! approximation of `L` on interior nodes.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::grid::{Path, PathGrid, END_SLOPE, START_SLOPE};
use crate::problem::BridgeProblem;

/// The three Gram contributions of the quadratic form, restricted to interior
/// nodes and scaled like [`DiscreteOperator::matrix`] (divided by `-dt`).
#[derive(Debug, Clone)]
pub struct FormTerms {
    pub fourth_order: DMatrix<f64>,
    pub second_order: DMatrix<f64>,
    pub boundary: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: PathGrid,
    mass: f64,
    matrix: DMatrix<f64>,
    endpoint_columns: DMatrix<f64>,
    form_terms: FormTerms,
}

/// Gram matrix of one form term on the full node vector `u_0..u_J`.
fn full_terms(mass: f64, grid: &PathGrid) -> [DMatrix<f64>; 3] {
    let n = grid.intervals();
    let dt = grid.dt();
    let nodes = n + 1;
    let mut k4 = DMatrix::zeros(nodes, nodes);
    let mut k2 = DMatrix::zeros(nodes, nodes);
    let mut kb = DMatrix::zeros(nodes, nodes);

    let add_outer = |m: &mut DMatrix<f64>, idx: &[usize], w: &[f64], scale: f64| {
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                m[(ia, ib)] += scale * w[a] * w[b];
            }
        }
    };

    let curv = [1.0, -2.0, 1.0];
    let c4 = mass * mass / (dt * dt * dt * dt);
    for j in 0..=n {
        let centre = j.clamp(1, n - 1);
        let idx = [centre - 1, centre, centre + 1];
        add_outer(&mut k4, &idx, &curv, c4 * grid.trapezoid_weight(j));
    }
    for j in 0..n {
        add_outer(&mut k2, &[j, j + 1], &[-1.0, 1.0], 1.0 / dt);
    }
    add_outer(&mut kb, &[0, 1, 2], &START_SLOPE, mass / (dt * dt));
    add_outer(&mut kb, &[n - 2, n - 1, n], &END_SLOPE, mass / (dt * dt));
    [k4, k2, kb]
}

impl DiscreteOperator {
    pub fn grid(&self) -> &PathGrid {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `(J-1) x (J-1)` symmetric negative definite matrix approximating `L`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn form_terms(&self) -> &FormTerms {
        &self.form_terms
    }

    /// Couplings of the interior rows to the Dirichlet values `u_0`, `u_J`
    /// (columns 0 and 1), so that `L u ≈ M u_int + E [u_0, u_J]ᵀ`.
    pub fn endpoint_columns(&self) -> &DMatrix<f64> {
        &self.endpoint_columns
    }

    /// Applies the operator to a full node vector with prescribed endpoint values.
    pub fn apply_full(&self, values: &[f64]) -> Vec<f64> {
        let n = self.grid.intervals();
        let interior = nalgebra::DVector::from_column_slice(&values[1..n]);
        let mut out = &self.matrix * interior;
        for i in 0..n - 1 {
            out[i] += self.endpoint_columns[(i, 0)] * values[0]
                + self.endpoint_columns[(i, 1)] * values[n];
        }
        out.iter().copied().collect()
    }
}

pub fn assemble_operator(problem: &BridgeProblem, grid: &PathGrid) -> Result<DiscreteOperator> {
    assemble_with_mass(problem.mass(), grid)
}

pub fn assemble_with_mass(mass: f64, grid: &PathGrid) -> Result<DiscreteOperator> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(invalid("m", format!("mass must be positive, got {mass}")));
    }
    let n = grid.intervals();
    let inner = n - 1;
    let scale = -1.0 / grid.dt();
    let [k4, k2, kb] = full_terms(mass, grid);
    let restrict = |m: &DMatrix<f64>| m.view((1, 1), (inner, inner)) * scale;
    let form_terms = FormTerms {
        fourth_order: restrict(&k4),
        second_order: restrict(&k2),
        boundary: restrict(&kb),
    };
    let matrix = &form_terms.fourth_order + &form_terms.second_order + &form_terms.boundary;
    let total = k4 + k2 + kb;
    let mut endpoint_columns = DMatrix::zeros(inner, 2);
    for i in 0..inner {
        endpoint_columns[(i, 0)] = scale * total[(i + 1, 0)];
        endpoint_columns[(i, 1)] = scale * total[(i + 1, n)];
    }
    Ok(DiscreteOperator {
        grid: *grid,
        mass,
        matrix,
        endpoint_columns,
        form_terms,
    })
}

/// Eigenpairs of `-M`, ascending, with modes orthonormal under `<u, v>_h = dt Σ u_j v_j`.
/// The operator acts componentwise, so the same basis serves every dimension.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    grid: PathGrid,
    lambdas: Vec<f64>,
    modes: DMatrix<f64>,
}

impl SpectralBasis {
    pub fn grid(&self) -> &PathGrid {
        &self.grid
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Mode `k` (0-based) is column `k`, sampled on interior nodes.
    pub fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    /// `<x, e_k>_h` for every mode.
    pub fn coefficients(&self, interior: &[f64]) -> Vec<f64> {
        let dt = self.grid.dt();
        let x = nalgebra::DVector::from_column_slice(interior);
        (self.modes.tr_mul(&x) * dt).iter().copied().collect()
    }

    /// `Σ c_k e_k` on interior nodes, using as many modes as `coeffs` has entries.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let k = coeffs.len();
        let c = nalgebra::DVector::from_column_slice(coeffs);
        let x = self.modes.columns(0, k) * c;
        x.iter().copied().collect()
    }
}

pub fn inner_h(grid: &PathGrid, u: &[f64], v: &[f64]) -> f64 {
    grid.dt() * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
}

pub fn eigendecompose(op: &DiscreteOperator) -> Result<SpectralBasis> {
    let neg = -op.matrix();
    let eig = neg.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let inner = op.grid.n_interior();
    let norm = 1.0 / op.grid.dt().sqrt();
    let mut modes = DMatrix::zeros(inner, inner);
    let mut lambdas = Vec::with_capacity(inner);
    for (k, &idx) in order.iter().enumerate() {
        let value = eig.eigenvalues[idx];
        if !(value > 0.0) {
            return Err(Error::NonPositiveEigenvalue { index: k, value });
        }
        lambdas.push(value);
        let col = eig.eigenvectors.column(idx);
        let peak = col.amax();
        let sign = col
            .iter()
            .find(|v| v.abs() > 1e-10 * peak)
            .map_or(1.0, |v| v.signum());
        modes.set_column(k, &(col * (sign * norm)));
    }
    Ok(SpectralBasis {
        grid: op.grid,
        lambdas,
        modes,
    })
}

/// Eigenvalues of `-M` only, ascending. Cheaper than [`eigendecompose`] on fine grids.
pub fn eigenvalues(op: &DiscreteOperator) -> Result<Vec<f64>> {
    let neg = -op.matrix();
    let mut values: Vec<f64> = neg.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveEigenvalue { index, value });
    }
    Ok(values)
}

/// `κ± = sqrt(sqrt(μ⁴ + γ⁴/4) ± γ²/2)`.
pub fn kappas(mu: f64, gamma: f64) -> (f64, f64) {
    let g2 = gamma * gamma;
    let root = (mu.powi(4) + 0.25 * g2 * g2).sqrt();
    ((root + 0.5 * g2).sqrt(), (root - 0.5 * g2).max(0.0).sqrt())
}

/// Boundary matrix of `-∂⁴ + γ² ∂²` on `[0, π]` with `x(0) = x(π) = 0`,
/// `α x''(0) = x'(0)`, `α x''(π) = -x'(π)`, for the eigenfunction ansatz
/// `ξ₁ e^{κ₊(t-π)} + ξ₂ e^{-κ₊t} + ξ₃ e^{iκ₋t} + ξ₄ e^{-iκ₋t}`.
pub fn boundary_matrix(mu: f64, gamma: f64, alpha: f64) -> [[Complex64; 4]; 4] {
    let (kp, km) = kappas(mu, gamma);
    let rates = [
        Complex64::new(kp, 0.0),
        Complex64::new(-kp, 0.0),
        Complex64::new(0.0, km),
        Complex64::new(0.0, -km),
    ];
    let decay = (-kp * PI).exp();
    let at_zero = [
        Complex64::new(decay, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 0.0),
    ];
    let at_pi = [
        Complex64::new(1.0, 0.0),
        Complex64::new(decay, 0.0),
        Complex64::from_polar(1.0, km * PI),
        Complex64::from_polar(1.0, -km * PI),
    ];
    let mut a = [[Complex64::new(0.0, 0.0); 4]; 4];
    for c in 0..4 {
        let r = rates[c];
        a[0][c] = at_zero[c];
        a[1][c] = at_pi[c];
        // Rows scaled by 1/μ to keep entries O(1).
        a[2][c] = (r * r * alpha - r) * at_zero[c] / mu;
        a[3][c] = (r * r * alpha + r) * at_pi[c] / mu;
    }
    a
}

pub fn complex_det4(a: &[[Complex64; 4]; 4]) -> Complex64 {
    let mut m = *a;
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&i, &j| m[i][col].norm().total_cmp(&m[j][col].norm()))
            .unwrap_or(col);
        if m[pivot][col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for row in col + 1..4 {
            let factor = m[row][col] / m[col][col];
            for c in col..4 {
                let sub = factor * m[col][c];
                m[row][c] -= sub;
            }
        }
    }
    det
}

/// Real characteristic function whose zeros are the `μ` with `μ⁴` an eigenvalue.
/// The determinant is purely imaginary for real `μ`; the imaginary part is returned.
pub fn characteristic(mu: f64, gamma: f64, alpha: f64) -> f64 {
    complex_det4(&boundary_matrix(mu, gamma, alpha)).im
}

/// Root `μ_k` of the boundary determinant near `k`, found by bisection in
/// `(k - 1/2, k + 1/2)`; the bracket is widened once to `(k - 1, k + 1)` when
/// no sign change is found. The eigenvalue prediction of `-L̄` is `μ_k⁴`.
pub fn analytic_eigenvalue(k: usize, gamma: f64, alpha: f64) -> Result<f64> {
    if k == 0 {
        return Err(invalid("k", "mode index starts at 1"));
    }
    if !(gamma > 0.0) {
        return Err(invalid("gamma", format!("must be positive, got {gamma}")));
    }
    let kf = k as f64;
    let g = |mu: f64| characteristic(mu, gamma, alpha);
    let brackets = [(kf - 0.5, kf + 0.5), ((kf - 1.0).max(1e-6), kf + 1.0)];
    for (lo, hi) in brackets {
        let (mut lo, mut hi) = (lo.max(1e-6), hi);
        let (mut glo, ghi) = (g(lo), g(hi));
        if glo.signum() == ghi.signum() {
            continue;
        }
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            let gm = g(mid);
            if gm == 0.0 {
                return Ok(mid);
            }
            if gm.signum() == glo.signum() {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
            }
        }
        return Ok(0.5 * (lo + hi));
    }
    Err(Error::NoBracket { k })
}

/// `α` of the normalized operator: the Robin coefficient after mapping `[0, T]` to `[0, π]`.
pub fn normalized_alpha(problem: &BridgeProblem) -> f64 {
    PI * problem.mass() / problem.horizon()
}

/// Factor `m² π⁴ / T⁴` between eigenvalues of `-L` and of the normalized operator.
pub fn eigenvalue_scale(problem: &BridgeProblem) -> f64 {
    let m = problem.mass();
    m * m * (PI / problem.horizon()).powi(4)
}

/// Analytic eigenvalue of `-L` on `[0, T]`.
pub fn analytic_lambda(problem: &BridgeProblem, k: usize) -> Result<f64> {
    let mu = analytic_eigenvalue(k, problem.rescaled_gamma(), normalized_alpha(problem))?;
    Ok(eigenvalue_scale(problem) * mu.powi(4))
}

/// Kernel element `x̄(t) = a + b t + c₁ e^{-t/m} + c₂ e^{-(T-t)/m}` per dimension.
#[derive(Debug, Clone)]
pub struct MeanPath {
    horizon: f64,
    mass: f64,
    coefficients: Vec<[f64; 4]>,
    values: Path,
}

impl MeanPath {
    pub fn coefficients(&self) -> &[[f64; 4]] {
        &self.coefficients
    }

    pub fn values(&self) -> &Path {
        &self.values
    }

    fn basis(&self, t: f64, order: usize) -> [f64; 4] {
        let m = self.mass;
        let left = (-t / m).exp();
        let right = (-(self.horizon - t) / m).exp();
        match order {
            0 => [1.0, t, left, right],
            1 => [0.0, 1.0, -left / m, right / m],
            2 => [0.0, 0.0, left / (m * m), right / (m * m)],
            3 => [0.0, 0.0, -left / m.powi(3), right / m.powi(3)],
            _ => [0.0, 0.0, left / m.powi(4), right / m.powi(4)],
        }
    }

    /// `d^order x̄_c / dt^order` at `t`.
    pub fn derivative(&self, t: f64, component: usize, order: usize) -> f64 {
        let phi = self.basis(t, order);
        let c = &self.coefficients[component];
        (0..4).map(|i| c[i] * phi[i]).sum()
    }

    pub fn eval(&self, t: f64, component: usize) -> f64 {
        self.derivative(t, component, 0)
    }

    /// Grid samples on another grid over the same horizon.
    pub fn sample(&self, grid: &PathGrid) -> Path {
        Path::from_fn(*grid, self.coefficients.len(), |t, c| self.eval(t, c))
    }
}

pub fn solve_mean_path(problem: &BridgeProblem, grid: &PathGrid) -> Result<MeanPath> {
    if (grid.horizon() - problem.horizon()).abs() > 1e-12 * problem.horizon() {
        return Err(Error::GridMismatch("problem horizon and grid"));
    }
    let m = problem.mass();
    let horizon = problem.horizon();
    let proto = MeanPath {
        horizon,
        mass: m,
        coefficients: Vec::new(),
        values: Path::zeros(*grid, 1),
    };
    let rows = |t: f64, robin_sign: f64| {
        let d1 = proto.basis(t, 1);
        let d2 = proto.basis(t, 2);
        // m x'' ∓ x' = 0
        [
            m * d2[0] - robin_sign * d1[0],
            m * d2[1] - robin_sign * d1[1],
            m * d2[2] - robin_sign * d1[2],
            m * d2[3] - robin_sign * d1[3],
        ]
    };
    let v0 = proto.basis(0.0, 0);
    let vt = proto.basis(horizon, 0);
    let r0 = rows(0.0, 1.0);
    let rt = rows(horizon, -1.0);
    let a = Matrix4::from_rows(&[
        v0.into(),
        vt.into(),
        r0.into(),
        rt.into(),
    ].map(|r: Vector4<f64>| r.transpose()));
    let lu = a.lu();
    let mut coefficients = Vec::with_capacity(problem.dim());
    for c in 0..problem.dim() {
        let rhs = Vector4::new(problem.x_minus()[c], problem.x_plus()[c], 0.0, 0.0);
        let sol = lu.solve(&rhs).ok_or(Error::Singular("mean path boundary system"))?;
        coefficients.push([sol[0], sol[1], sol[2], sol[3]]);
    }
    let mut mean = MeanPath {
        horizon,
        mass: m,
        coefficients,
        values: Path::zeros(*grid, problem.dim()),
    };
    let mut values = mean.sample(grid);
    // Pin the endpoints exactly.
    let n = grid.intervals();
    for c in 0..problem.dim() {
        values.values_mut()[(0, c)] = problem.x_minus()[c];
        values.values_mut()[(n, c)] = problem.x_plus()[c];
    }
    mean.values = values;
    Ok(mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionKind {
    /// Sharp truncation onto the first `n` modes.
    Orthogonal,
    /// Triangular weights `(n - k) / n` for mode `k = 1..n`.
    Fejer,
}

#[derive(Debug, Clone)]
pub struct SpectralProjection {
    kind: ProjectionKind,
    weights: Vec<f64>,
}

impl SpectralProjection {
    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }

    /// Weight of each mode, 0-based (`weights[k - 1]` belongs to mode `k`).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn apply(&self, basis: &SpectralBasis, interior: &[f64]) -> Vec<f64> {
        let mut c = basis.coefficients(interior);
        for (ck, w) in c.iter_mut().zip(&self.weights) {
            *ck *= w;
        }
        basis.synthesize(&c)
    }
}

/// Weight of mode `k` (1-based) under the projection of order `n`.
pub fn projection_weight(kind: ProjectionKind, n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    match kind {
        ProjectionKind::Orthogonal => 1.0,
        ProjectionKind::Fejer => (n - k) as f64 / n as f64,
    }
}

pub fn projection(basis: &SpectralBasis, n: usize, kind: ProjectionKind) -> Result<SpectralProjection> {
    if n == 0 || n > basis.n_modes() {
        return Err(invalid(
            "n",
            format!("projection order must be in 1..={}, got {n}", basis.n_modes()),
        ));
    }
    let weights = (1..=basis.n_modes())
        .map(|k| projection_weight(kind, n, k))
        .collect();
    Ok(SpectralProjection { kind, weights })
}

impl SpectralProjection {
    /// Composition `self ∘ other` (both diagonal in the same basis).
    pub fn compose(&self, other: &SpectralProjection) -> SpectralProjection {
        SpectralProjection {
            kind: self.kind,
            weights: self
                .weights
                .iter()
                .zip(&other.weights)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ZeroField;
    use crate::grid::make_grid;
    use std::sync::Arc;

    fn problem(t: f64, m: f64) -> BridgeProblem {
        BridgeProblem::new(t, m, vec![0.0], vec![1.0], Arc::new(ZeroField)).unwrap()
    }

    #[test]
    fn symmetric_and_negative_definite() {
        for t in [0.5, 1.0, 2.0] {
            for m in [0.1, 0.5, 1.0] {
                for j in [32, 64, 128] {
                    let grid = make_grid(t, j).unwrap();
                    let op = assemble_operator(&problem(t, m), &grid).unwrap();
                    let a = op.matrix();
                    let asym = (a - a.transpose()).amax();
                    assert!(asym <= 1e-12 * a.amax(), "T={t} m={m} J={j}");
                    let top = eigenvalues(&op).unwrap()[0];
                    assert!(top > 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_mass() {
        let grid = make_grid(1.0, 16).unwrap();
        assert!(assemble_with_mass(0.0, &grid).is_err());
        assert!(assemble_with_mass(-1.0, &grid).is_err());
    }

    // Away from the boundary the curvature term is the five-point biharmonic stencil.
    #[test]
    fn fourth_order_term_is_biharmonic_stencil() {
        let (t, m, j) = (1.0, 3.0, 40);
        let grid = make_grid(t, j).unwrap();
        let op = assemble_with_mass(m, &grid).unwrap();
        let dt = grid.dt();
        let k4 = &op.form_terms().fourth_order;
        let stencil = [1.0, -4.0, 6.0, -4.0, 1.0];
        let scale = -m * m / dt.powi(4);
        for row in 3..(j - 4) {
            for col in 0..(j - 1) {
                let offset = col as isize - row as isize;
                let expected = if offset.abs() <= 2 {
                    scale * stencil[(offset + 2) as usize]
                } else {
                    0.0
                };
                assert!((k4[(row, col)] - expected).abs() <= 1e-9 * scale.abs());
            }
        }
        // second-order term is the standard three-point Laplacian everywhere
        let k2 = &op.form_terms().second_order;
        for row in 0..(j - 1) {
            assert!((k2[(row, row)] + 2.0 / (dt * dt)).abs() < 1e-6);
        }
        // boundary term only touches the first and last two unknowns
        let kb = &op.form_terms().boundary;
        for row in 2..(j - 3) {
            assert!(kb.row(row).amax() == 0.0);
        }
    }

    #[test]
    fn modes_are_orthonormal_eigenvectors() {
        let grid = make_grid(1.0, 48).unwrap();
        let op = assemble_operator(&problem(1.0, 0.2), &grid).unwrap();
        let basis = eigendecompose(&op).unwrap();
        let e = basis.modes();
        let gram = e.tr_mul(e) * grid.dt();
        let n = basis.n_modes();
        assert!((gram - DMatrix::identity(n, n)).amax() < 1e-10);
        let neg = -op.matrix();
        for k in 0..n {
            let col = e.column(k);
            let res = &neg * col - col * basis.lambdas()[k];
            assert!(res.norm() <= 1e-8 * basis.lambdas()[k] * col.norm());
            let first = col.iter().find(|v| v.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
        }
        assert!(basis.lambdas().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn unit_scaling_between_operators() {
        // λ_k(L on [0,T]) = (m²π⁴/T⁴) λ_k(normalized operator on [0,π]).
        let (t, m, j) = (2.0, 0.4, 96);
        let gamma = t / (PI * m);
        let base = eigenvalues(&assemble_with_mass(m, &make_grid(t, j).unwrap()).unwrap()).unwrap();
        // Normalized operator: T' = π with mass m' = 1/γ gives -∂⁴/γ² + ∂²;
        // multiply by γ² to obtain -∂⁴ + γ²∂².
        let mp = 1.0 / gamma;
        let norm = eigenvalues(&assemble_with_mass(mp, &make_grid(PI, j).unwrap()).unwrap()).unwrap();
        let scale = m * m * PI.powi(4) / t.powi(4);
        for k in 0..10 {
            let bar = norm[k] * gamma * gamma;
            assert!((base[k] - scale * bar).abs() <= 1e-9 * base[k]);
        }
    }

    #[test]
    fn mode_shapes_approach_sines() {
        // T = π, m = 1: γ = 1. Away from the ends e_k ≈ c·sin(kt) with c = sqrt(2/π).
        let grid = make_grid(PI, 512).unwrap();
        let op = assemble_operator(&problem(PI, 1.0), &grid).unwrap();
        let basis = eigendecompose(&op).unwrap();
        let amp = (2.0 / PI).sqrt();
        let mut deviations = Vec::new();
        for k in [4usize, 8, 16] {
            let col = basis.modes().column(k - 1);
            let mut dev: f64 = 0.0;
            for (i, v) in col.iter().enumerate() {
                let t = grid.node(i + 1);
                if t > 0.5 && t < PI - 0.5 {
                    dev = dev.max((*v / amp - (k as f64 * t).sin()).abs());
                }
            }
            deviations.push(dev * k as f64);
        }
        // O(1/k): k·deviation stays bounded.
        assert!(deviations.iter().all(|&d| d < 5.0), "{deviations:?}");
    }

    #[test]
    fn characteristic_is_imaginary() {
        for mu in [1.3, 2.7, 5.1] {
            let det = complex_det4(&boundary_matrix(mu, 1.0, 1.0));
            assert!(det.re.abs() <= 1e-9 * det.im.abs().max(1.0));
        }
    }

    #[test]
    fn analytic_roots_increase_and_approach_integers() {
        let mut prev = 0.0;
        for k in 1..=20 {
            let mu = analytic_eigenvalue(k, 1.0, 1.0).unwrap();
            assert!(mu > prev);
            assert!(characteristic(mu - 1e-7, 1.0, 1.0).signum() != characteristic(mu + 1e-7, 1.0, 1.0).signum());
            prev = mu;
        }
        let gaps: Vec<f64> = [5usize, 10, 20, 40]
            .iter()
            .map(|&k| (analytic_eigenvalue(k, 1.0, 1.0).unwrap() - k as f64).abs())
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        assert!(gaps[3] < 0.05);
    }

    #[test]
    fn analytic_root_fails_without_bracket() {
        // Very small mass: the low roots sit far from the integers.
        assert!(matches!(analytic_eigenvalue(1, 60.0, 1.0 / 60.0), Err(Error::NoBracket { k: 1 })));
        assert!(analytic_eigenvalue(0, 1.0, 1.0).is_err());
    }

    #[test]
    fn boundary_matrix_rescaling() {
        // Known limit value for γ = 1 (grid eigenvalue converged on J = 1024 independently).
        let mu = analytic_eigenvalue(1, 1.0, 1.0).unwrap();
        assert!((mu.powi(4) - 2.990711398858).abs() < 1e-8);
    }

    #[test]
    fn mean_path_constant_endpoints() {
        let p = BridgeProblem::new(1.3, 0.4, vec![0.7, -2.0], vec![0.7, -2.0], Arc::new(ZeroField)).unwrap();
        let grid = make_grid(1.3, 16).unwrap();
        let mean = solve_mean_path(&p, &grid).unwrap();
        for (c, want) in [0.7, -2.0].iter().enumerate() {
            let co = mean.coefficients()[c];
            assert!((co[0] - want).abs() < 1e-12);
            assert!(co[1].abs() < 1e-12 && co[2].abs() < 1e-12 && co[3].abs() < 1e-12);
        }
    }

    #[test]
    fn mean_path_boundary_conditions_and_linearity() {
        let (t, m) = (1.7, 0.3);
        let grid = make_grid(t, 32).unwrap();
        let mk = |a: f64, b: f64| {
            solve_mean_path(
                &BridgeProblem::new(t, m, vec![a], vec![b], Arc::new(ZeroField)).unwrap(),
                &grid,
            )
            .unwrap()
        };
        let x = mk(-0.4, 2.5);
        assert!((x.eval(0.0, 0) + 0.4).abs() < 1e-10);
        assert!((x.eval(t, 0) - 2.5).abs() < 1e-10);
        assert!((m * x.derivative(0.0, 0, 2) - x.derivative(0.0, 0, 1)).abs() < 1e-10);
        assert!((m * x.derivative(t, 0, 2) + x.derivative(t, 0, 1)).abs() < 1e-10);
        // L x̄ = -m² x'''' + x'' = 0 at a few points
        for s in [0.1, 0.8, 1.5] {
            let lx = -m * m * x.derivative(s, 0, 4) + x.derivative(s, 0, 2);
            assert!(lx.abs() < 1e-9);
        }
        let e0 = mk(1.0, 0.0);
        let e1 = mk(0.0, 1.0);
        for s in [0.0, 0.3, 0.9, t] {
            let combo = -0.4 * e0.eval(s, 0) + 2.5 * e1.eval(s, 0);
            assert!((x.eval(s, 0) - combo).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_weights_and_composition() {
        let grid = make_grid(1.0, 32).unwrap();
        let basis = eigendecompose(&assemble_operator(&problem(1.0, 0.3), &grid).unwrap()).unwrap();
        let fej = projection(&basis, 4, ProjectionKind::Fejer).unwrap();
        assert_eq!(fej.weights()[0], 0.75);
        assert_eq!(fej.weights()[3], 0.0);
        assert!(fej.weights()[4..].iter().all(|&w| w == 0.0));
        let orth = projection(&basis, 4, ProjectionKind::Orthogonal).unwrap();
        assert_eq!(fej.compose(&orth).weights(), fej.weights());
        assert!(projection(&basis, 0, ProjectionKind::Fejer).is_err());
        assert!(projection(&basis, 32, ProjectionKind::Fejer).is_err());
    }
}
