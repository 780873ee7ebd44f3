//! Force fields `f: R^d -> R^d` with analytic first and second derivatives.
//!
//! Derivative layouts are flat row-major buffers:
//! `jacobian[i * d + j] = ∂_i f_j` and `hessian[(i * d + j) * d + k] = ∂_i ∂_j f_k`.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{invalid, Result};

pub trait ForceField: Send + Sync + Debug {
    /// Fixed dimension, or `None` for fields defined in every dimension.
    fn dim(&self) -> Option<usize> {
        None
    }

    fn value(&self, x: &[f64], out: &mut [f64]);

    fn jacobian(&self, x: &[f64], out: &mut [f64]);

    fn hessian(&self, x: &[f64], out: &mut [f64]);

    /// Whether every evaluation is identically zero.
    fn is_zero(&self) -> bool {
        false
    }
}

impl dyn ForceField {
    pub fn value_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.value(x, &mut out);
        out
    }

    pub fn jacobian_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len() * x.len()];
        self.jacobian(x, &mut out);
        out
    }

    pub fn hessian_vec(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut out = vec![0.0; d * d * d];
        self.hessian(x, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl ForceField for ZeroField {
    fn value(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn is_zero(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct ConstantField {
    c: Vec<f64>,
}

impl ConstantField {
    pub fn new(c: Vec<f64>) -> Self {
        Self { c }
    }
}

impl ForceField for ConstantField {
    fn dim(&self) -> Option<usize> {
        Some(self.c.len())
    }
    fn value(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.c);
    }
    fn jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn is_zero(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }
}

/// `f(x) = A x`.
#[derive(Debug, Clone)]
pub struct LinearField {
    a: DMatrix<f64>,
}

impl LinearField {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(invalid("A", "linear field matrix must be square"));
        }
        Ok(Self { a })
    }
}

impl ForceField for LinearField {
    fn dim(&self) -> Option<usize> {
        Some(self.a.nrows())
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..d).map(|i| self.a[(j, i)] * x[i]).sum();
        }
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = self.a[(j, i)];
            }
        }
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Componentwise `f_k(x) = -a * tanh(x_k / s)`: bounded, with bounded derivatives.
#[derive(Debug, Clone, Copy)]
pub struct SoftWell {
    pub a: f64,
    pub s: f64,
}

impl SoftWell {
    pub fn new(a: f64, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(invalid("s", format!("soft_well width must be positive, got {s}")));
        }
        if !a.is_finite() {
            return Err(invalid("a", "soft_well amplitude must be finite"));
        }
        Ok(Self { a, s })
    }
}

impl ForceField for SoftWell {
    fn value(&self, x: &[f64], out: &mut [f64]) {
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = -self.a * (xi / self.s).tanh();
        }
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        out.fill(0.0);
        for (k, &xk) in x.iter().enumerate() {
            let th = (xk / self.s).tanh();
            out[k * d + k] = -self.a / self.s * (1.0 - th * th);
        }
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        out.fill(0.0);
        for (k, &xk) in x.iter().enumerate() {
            let th = (xk / self.s).tanh();
            out[(k * d + k) * d + k] = 2.0 * self.a / (self.s * self.s) * th * (1.0 - th * th);
        }
    }
    fn is_zero(&self) -> bool {
        self.a == 0.0
    }
}

/// Potential `V` with derivatives up to third order, used through [`GradientField`].
pub trait Potential: Send + Sync + Debug {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// `out[i * d + j] = ∂_i ∂_j V`
    fn hessian(&self, x: &[f64], out: &mut [f64]);
    /// `out[(i * d + j) * d + k] = ∂_i ∂_j ∂_k V`
    fn third(&self, x: &[f64], out: &mut [f64]);
}

/// `V(x) = k/2 |x|^2`.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic {
    pub k: f64,
}

impl Potential for Quadratic {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.k * x.iter().map(|v| v * v).sum::<f64>()
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = self.k * v;
        }
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        out.fill(0.0);
        for i in 0..d {
            out[i * d + i] = self.k;
        }
    }
    fn third(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// `V(x) = h * Σ (x_i^2 - 1)^2`, a separable double well with minima at `±1`.
#[derive(Debug, Clone, Copy)]
pub struct DoubleWell {
    pub h: f64,
}

impl Potential for DoubleWell {
    fn value(&self, x: &[f64]) -> f64 {
        self.h * x.iter().map(|v| (v * v - 1.0).powi(2)).sum::<f64>()
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = 4.0 * self.h * v * (v * v - 1.0);
        }
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        out.fill(0.0);
        for (i, &v) in x.iter().enumerate() {
            out[i * d + i] = self.h * (12.0 * v * v - 4.0);
        }
    }
    fn third(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        out.fill(0.0);
        for (i, &v) in x.iter().enumerate() {
            out[(i * d + i) * d + i] = 24.0 * self.h * v;
        }
    }
}

/// Conservative field `f = -∇V`.
#[derive(Debug, Clone)]
pub struct GradientField<P> {
    potential: P,
}

impl<P: Potential> GradientField<P> {
    pub fn new(potential: P) -> Self {
        Self { potential }
    }

    pub fn potential(&self) -> &P {
        &self.potential
    }
}

impl<P: Potential> ForceField for GradientField<P> {
    fn value(&self, x: &[f64], out: &mut [f64]) {
        self.potential.gradient(x, out);
        out.iter_mut().for_each(|v| *v = -*v);
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        self.potential.hessian(x, out);
        out.iter_mut().for_each(|v| *v = -*v);
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        self.potential.third(x, out);
        out.iter_mut().for_each(|v| *v = -*v);
    }
}

/// `f̃(y) = f(c y) / c`, the force field seen by a spatially rescaled path.
#[derive(Debug, Clone)]
pub struct RescaledField {
    inner: Arc<dyn ForceField>,
    scale: f64,
}

impl RescaledField {
    pub fn new(inner: Arc<dyn ForceField>, scale: f64) -> Self {
        Self { inner, scale }
    }
}

impl ForceField for RescaledField {
    fn dim(&self) -> Option<usize> {
        self.inner.dim()
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        let y: Vec<f64> = x.iter().map(|v| v * self.scale).collect();
        self.inner.value(&y, out);
        out.iter_mut().for_each(|v| *v /= self.scale);
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let y: Vec<f64> = x.iter().map(|v| v * self.scale).collect();
        self.inner.jacobian(&y, out);
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let y: Vec<f64> = x.iter().map(|v| v * self.scale).collect();
        self.inner.hessian(&y, out);
        out.iter_mut().for_each(|v| *v *= self.scale);
    }
    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }
}

/// Built-in field from a name and a flat parameter list, as used by config files.
///
/// | name          | params                         |
/// |---------------|--------------------------------|
/// | `zero`        | none                           |
/// | `constant`    | `c_1, ..., c_d`                |
/// | `linear`      | `A` row-major, `d*d` entries   |
/// | `soft_well`   | `a, s`                         |
/// | `quadratic`   | `k` (gradient of `k/2 |x|^2`)  |
/// | `double_well` | `h` (gradient of `h(x^2-1)^2`) |
pub fn builtin(name: &str, params: &[f64], dim: usize) -> Result<Arc<dyn ForceField>> {
    let expect = |n: usize| {
        if params.len() == n {
            Ok(())
        } else {
            Err(invalid(
                "force.params",
                format!("`{name}` takes {n} parameters, got {}", params.len()),
            ))
        }
    };
    let field: Arc<dyn ForceField> = match name {
        "zero" => {
            expect(0)?;
            Arc::new(ZeroField)
        }
        "constant" => {
            expect(dim)?;
            Arc::new(ConstantField::new(params.to_vec()))
        }
        "linear" => {
            expect(dim * dim)?;
            Arc::new(LinearField::new(DMatrix::from_row_slice(dim, dim, params))?)
        }
        "soft_well" => {
            expect(2)?;
            Arc::new(SoftWell::new(params[0], params[1])?)
        }
        "quadratic" => {
            expect(1)?;
            Arc::new(GradientField::new(Quadratic { k: params[0] }))
        }
        "double_well" => {
            expect(1)?;
            Arc::new(GradientField::new(DoubleWell { h: params[0] }))
        }
        other => return Err(invalid("force.name", format!("unknown force field `{other}`"))),
    };
    Ok(field)
}
