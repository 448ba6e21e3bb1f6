//! Smooth scalar functions used as objectives and inequality constraints.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::linalg;

/// A continuously differentiable map `ℝⁿ → ℝ`.
///
/// Implementors must return a gradient of the same dimension as `x`.
pub trait SmoothFunction: Send + Sync + fmt::Debug {
    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>);

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.value_and_gradient(x).0
    }

    /// `out += weight · ∇φ(x)`.
    fn add_scaled_gradient(&self, x: &DVector<f64>, weight: f64, out: &mut DVector<f64>) {
        let (_, g) = self.value_and_gradient(x);
        out.axpy(weight, &g, 1.0);
    }
}

/// Hessian storage for [`QuadraticFn`].
#[derive(Clone, Debug, PartialEq)]
pub enum Hessian {
    Zero,
    Diagonal(DVector<f64>),
    Dense(DMatrix<f64>),
}

impl Hessian {
    fn apply(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            Hessian::Zero => None,
            Hessian::Diagonal(d) => Some(d.component_mul(x)),
            Hessian::Dense(h) => Some(h * x),
        }
    }

    /// Spectral norm of the Hessian.
    pub fn norm(&self) -> f64 {
        match self {
            Hessian::Zero => 0.0,
            Hessian::Diagonal(d) => d.iter().fold(0.0, |m, v| m.max(v.abs())),
            Hessian::Dense(h) => linalg::spectral_norm(h),
        }
    }

    pub fn to_dense(&self, n: usize) -> DMatrix<f64> {
        match self {
            Hessian::Zero => DMatrix::zeros(n, n),
            Hessian::Diagonal(d) => DMatrix::from_diagonal(d),
            Hessian::Dense(h) => h.clone(),
        }
    }

    fn scaled(&self, s: f64) -> Hessian {
        match self {
            Hessian::Zero => Hessian::Zero,
            Hessian::Diagonal(d) => Hessian::Diagonal(d * s),
            Hessian::Dense(h) => Hessian::Dense(h * s),
        }
    }
}

/// `φ(x) = ½ xᵀHx + lᵀx + c`. Affine functions use [`Hessian::Zero`].
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticFn {
    pub hessian: Hessian,
    pub linear: DVector<f64>,
    pub constant: f64,
}

impl QuadraticFn {
    pub fn new(hessian: Hessian, linear: DVector<f64>, constant: f64) -> Self {
        QuadraticFn {
            hessian,
            linear,
            constant,
        }
    }

    /// `aᵀx + c`.
    pub fn affine(linear: DVector<f64>, constant: f64) -> Self {
        QuadraticFn::new(Hessian::Zero, linear, constant)
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self.hessian.apply(x) {
            Some(hx) => hx + &self.linear,
            None => self.linear.clone(),
        }
    }

    pub fn scaled(&self, s: f64) -> QuadraticFn {
        QuadraticFn {
            hessian: self.hessian.scaled(s),
            linear: &self.linear * s,
            constant: self.constant * s,
        }
    }
}

impl SmoothFunction for QuadraticFn {
    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        (self.value(x), self.gradient(x))
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let quad = match &self.hessian {
            Hessian::Zero => 0.0,
            Hessian::Diagonal(d) => 0.5 * d.iter().zip(x.iter()).map(|(d, x)| d * x * x).sum::<f64>(),
            Hessian::Dense(h) => 0.5 * x.dot(&(h * x)),
        };
        quad + self.linear.dot(x) + self.constant
    }

    fn add_scaled_gradient(&self, x: &DVector<f64>, weight: f64, out: &mut DVector<f64>) {
        out.axpy(weight, &self.linear, 1.0);
        match &self.hessian {
            Hessian::Zero => {}
            Hessian::Diagonal(d) => {
                for ((o, d), x) in out.iter_mut().zip(d.iter()).zip(x.iter()) {
                    *o += weight * d * x;
                }
            }
            Hessian::Dense(h) => out.gemv(weight, h, x, 1.0),
        }
    }
}

/// `s · φ(x)` for an arbitrary smooth `φ`.
#[derive(Debug)]
pub(crate) struct ScaledFunction {
    pub inner: Arc<dyn SmoothFunction>,
    pub scale: f64,
}

impl SmoothFunction for ScaledFunction {
    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let (v, g) = self.inner.value_and_gradient(x);
        (self.scale * v, g * self.scale)
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.scale * self.inner.value(x)
    }

    fn add_scaled_gradient(&self, x: &DVector<f64>, weight: f64, out: &mut DVector<f64>) {
        self.inner.add_scaled_gradient(x, weight * self.scale, out);
    }
}

/// Either a structured quadratic or an opaque user-supplied function.
#[derive(Clone, Debug)]
pub enum Smooth {
    Quadratic(QuadraticFn),
    Custom(Arc<dyn SmoothFunction>),
}

impl Smooth {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            Smooth::Quadratic(q) => q.value(x),
            Smooth::Custom(f) => f.value(x),
        }
    }

    pub fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        match self {
            Smooth::Quadratic(q) => q.value_and_gradient(x),
            Smooth::Custom(f) => f.value_and_gradient(x),
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Smooth::Quadratic(q) => q.gradient(x),
            Smooth::Custom(f) => f.value_and_gradient(x).1,
        }
    }

    pub fn add_scaled_gradient(&self, x: &DVector<f64>, weight: f64, out: &mut DVector<f64>) {
        match self {
            Smooth::Quadratic(q) => q.add_scaled_gradient(x, weight, out),
            Smooth::Custom(f) => f.add_scaled_gradient(x, weight, out),
        }
    }

    pub fn scaled(&self, s: f64) -> Smooth {
        match self {
            Smooth::Quadratic(q) => Smooth::Quadratic(q.scaled(s)),
            Smooth::Custom(f) => Smooth::Custom(Arc::new(ScaledFunction {
                inner: Arc::clone(f),
                scale: s,
            })),
        }
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticFn> {
        match self {
            Smooth::Quadratic(q) => Some(q),
            Smooth::Custom(_) => None,
        }
    }
}

impl From<QuadraticFn> for Smooth {
    fn from(q: QuadraticFn) -> Self {
        Smooth::Quadratic(q)
    }
}
