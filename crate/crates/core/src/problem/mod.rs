//! Smooth convex programs
//!
//! ```text
//! min f(x)   s.t.   g_i(x) ≤ 0 (i = 1..m_I),   Ax = b
//! ```
//!
//! together with primal-dual points, KKT residuals, active-set detection,
//! LICQ checks, built-in instances and the JSON problem schema.

mod builtin;
mod function;
mod kkt;
mod schema;
mod smoothness;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use builtin::{make_counterexample, make_random_qp, make_soc_demo, random_qp_spec, RandomQp};
pub use function::{Hessian, QuadraticFn, Smooth, SmoothFunction};
pub use kkt::{
    check_licq, detect_active_set, kkt_residual, solve_reference_kkt, KktReport, LicqReport, DEFAULT_TOL_ACTIVE,
};
pub use schema::{AffineBlock, BuiltinIneq, ProblemSpec, QuadraticBlock};
pub use smoothness::{estimate_bounds, SmoothnessBounds};

/// User-supplied `(x*, d) ↦ (L_{g,i}(d), M_{g,i}(d))`: a bound on `‖∇g_i‖`
/// and the Lipschitz constant of `∇g_i` over the ball `‖x − x*‖ ≤ d`.
/// Must be non-decreasing in `d`.
pub type BoundsFn = Arc<dyn Fn(&DVector<f64>, f64) -> (f64, f64) + Send + Sync>;

/// One inequality constraint `g_i(x) ≤ 0`.
#[derive(Clone)]
pub struct Inequality {
    pub func: Smooth,
    pub bounds: Option<BoundsFn>,
}

impl fmt::Debug for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Inequality")
            .field("func", &self.func)
            .field("bounds", &self.bounds.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl Inequality {
    pub fn new(func: impl Into<Smooth>) -> Self {
        Inequality {
            func: func.into(),
            bounds: None,
        }
    }

    pub fn with_bounds(mut self, bounds: BoundsFn) -> Self {
        self.bounds = Some(bounds);
        self
    }

    /// `g(x) = aᵀx − c`.
    pub fn affine(a: DVector<f64>, c: f64) -> Self {
        Inequality::new(QuadraticFn::affine(a, -c))
    }

    /// `(L_{g,i}(d), M_{g,i}(d))` around `x_star`, if known without sampling.
    ///
    /// Quadratic constraints carry exact bounds: `‖∇g(x*)‖ + ‖H‖d` and `‖H‖`.
    pub fn smoothness(&self, x_star: &DVector<f64>, d: f64) -> Option<(f64, f64)> {
        if let Some(b) = &self.bounds {
            return Some(b(x_star, d));
        }
        match &self.func {
            Smooth::Quadratic(q) => {
                let h = q.hessian.norm();
                Some((q.gradient(x_star).norm() + h * d, h))
            }
            Smooth::Custom(_) => None,
        }
    }

    pub(crate) fn scaled(&self, s: f64) -> Inequality {
        Inequality {
            func: self.func.scaled(s),
            bounds: self.bounds.as_ref().map(|b| {
                let b = Arc::clone(b);
                let s = s.abs();
                Arc::new(move |x: &DVector<f64>, d: f64| {
                    let (l, m) = b(x, d);
                    (s * l, s * m)
                }) as BoundsFn
            }),
        }
    }
}

/// Dimensions `(n, m_I, m_E)` of a program or state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub m_i: usize,
    pub m_e: usize,
}

impl Dims {
    pub fn new(n: usize, m_i: usize, m_e: usize) -> Self {
        Dims { n, m_i, m_e }
    }

    pub fn total(&self) -> usize {
        self.n + self.m_i + self.m_e
    }
}

/// A smooth convex program with affine equalities.
///
/// Immutable after construction; clone is cheap for custom functions (shared `Arc`s).
#[derive(Clone, Debug)]
pub struct ConvexProgram {
    pub name: String,
    n: usize,
    objective: Smooth,
    inequalities: Vec<Inequality>,
    eq_matrix: DMatrix<f64>,
    eq_rhs: DVector<f64>,
    mu: f64,
    ell: f64,
}

impl ConvexProgram {
    /// Validates dimensions and `0 < μ ≤ ℓ`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        n: usize,
        objective: impl Into<Smooth>,
        inequalities: Vec<Inequality>,
        eq_matrix: DMatrix<f64>,
        eq_rhs: DVector<f64>,
        mu: f64,
        ell: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::contract("n must be positive"));
        }
        if !(mu > 0.0) || !(ell >= mu) || !ell.is_finite() {
            return Err(Error::contract(format!(
                "need 0 < mu <= ell, got mu = {mu}, ell = {ell}"
            )));
        }
        if eq_matrix.ncols() != n && eq_matrix.nrows() > 0 {
            return Err(Error::contract(format!(
                "eq_matrix has {} columns, expected {n}",
                eq_matrix.ncols()
            )));
        }
        if eq_matrix.nrows() != eq_rhs.len() {
            return Err(Error::contract(format!(
                "eq_matrix has {} rows but eq_rhs has length {}",
                eq_matrix.nrows(),
                eq_rhs.len()
            )));
        }
        let objective = objective.into();
        if let Smooth::Quadratic(q) = &objective {
            if q.dim() != n {
                return Err(Error::contract("objective dimension mismatch"));
            }
        }
        for (i, g) in inequalities.iter().enumerate() {
            if let Smooth::Quadratic(q) = &g.func {
                if q.dim() != n {
                    return Err(Error::contract(format!("inequality {i} dimension mismatch")));
                }
            }
        }
        let eq_matrix = if eq_matrix.nrows() == 0 {
            DMatrix::zeros(0, n)
        } else {
            eq_matrix
        };
        Ok(ConvexProgram {
            name: name.into(),
            n,
            objective,
            inequalities,
            eq_matrix,
            eq_rhs,
            mu,
            ell,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m_i(&self) -> usize {
        self.inequalities.len()
    }

    pub fn m_e(&self) -> usize {
        self.eq_matrix.nrows()
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.n, self.m_i(), self.m_e())
    }

    pub fn objective(&self) -> &Smooth {
        &self.objective
    }

    pub fn inequalities(&self) -> &[Inequality] {
        &self.inequalities
    }

    pub fn eq_matrix(&self) -> &DMatrix<f64> {
        &self.eq_matrix
    }

    pub fn eq_rhs(&self) -> &DVector<f64> {
        &self.eq_rhs
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn eval_objective(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        self.objective.value_and_gradient(x)
    }

    pub fn eval_constraint(&self, i: usize, x: &DVector<f64>) -> (f64, DVector<f64>) {
        self.inequalities[i].func.value_and_gradient(x)
    }

    /// `(g_1(x), …, g_{m_I}(x))`.
    pub fn constraint_values(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.m_i(), self.inequalities.iter().map(|g| g.func.value(x)))
    }

    /// Jacobian of `g` at `x` (rows `∇g_i(x)ᵀ`).
    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.m_i(), self.n);
        for (i, g) in self.inequalities.iter().enumerate() {
            jac.row_mut(i).copy_from(&g.func.gradient(x).transpose());
        }
        jac
    }

    /// `Ax − b`.
    pub fn eq_residual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.eq_matrix * x - &self.eq_rhs
    }

    pub(crate) fn check_point(&self, z: &PrimalDualPoint) -> Result<()> {
        if z.dims() != self.dims() {
            return Err(Error::contract(format!(
                "point dimensions {:?} do not match program {:?}",
                z.dims(),
                self.dims()
            )));
        }
        Ok(())
    }

    pub(crate) fn with_scaled_constraints(&self, s: f64, name: impl Into<String>) -> ConvexProgram {
        ConvexProgram {
            name: name.into(),
            n: self.n,
            objective: self.objective.clone(),
            inequalities: self.inequalities.iter().map(|g| g.scaled(s)).collect(),
            eq_matrix: &self.eq_matrix * s,
            eq_rhs: &self.eq_rhs * s,
            mu: self.mu,
            ell: self.ell,
        }
    }
}

/// A state `z = (x, λ, ν)` of the primal-dual flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimalDualPoint {
    #[serde(with = "plain_vector")]
    pub x: DVector<f64>,
    #[serde(with = "plain_vector")]
    pub lambda: DVector<f64>,
    #[serde(with = "plain_vector")]
    pub nu: DVector<f64>,
}

/// Vectors as bare JSON arrays.
mod plain_vector {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

impl PrimalDualPoint {
    pub fn new(x: DVector<f64>, lambda: DVector<f64>, nu: DVector<f64>) -> Self {
        PrimalDualPoint { x, lambda, nu }
    }

    pub fn zeros(dims: Dims) -> Self {
        PrimalDualPoint {
            x: DVector::zeros(dims.n),
            lambda: DVector::zeros(dims.m_i),
            nu: DVector::zeros(dims.m_e),
        }
    }

    pub fn from_slices(x: &[f64], lambda: &[f64], nu: &[f64]) -> Self {
        PrimalDualPoint {
            x: DVector::from_column_slice(x),
            lambda: DVector::from_column_slice(lambda),
            nu: DVector::from_column_slice(nu),
        }
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.x.len(), self.lambda.len(), self.nu.len())
    }

    /// Stacked `(x, λ, ν)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dims().total());
        v.extend(self.x.iter());
        v.extend(self.lambda.iter());
        v.extend(self.nu.iter());
        v
    }

    pub fn from_flat(dims: Dims, flat: &[f64]) -> Self {
        assert_eq!(flat.len(), dims.total(), "flat state length mismatch");
        let (x, rest) = flat.split_at(dims.n);
        let (lambda, nu) = rest.split_at(dims.m_i);
        PrimalDualPoint::from_slices(x, lambda, nu)
    }

    /// Euclidean distance of the stacked difference.
    pub fn distance(&self, other: &PrimalDualPoint) -> f64 {
        ((&self.x - &other.x).norm_squared()
            + (&self.lambda - &other.lambda).norm_squared()
            + (&self.nu - &other.nu).norm_squared())
        .sqrt()
    }

    pub fn norm(&self) -> f64 {
        (self.x.norm_squared() + self.lambda.norm_squared() + self.nu.norm_squared()).sqrt()
    }

    pub fn min_lambda(&self) -> f64 {
        self.lambda.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(self.lambda.iter())
            .chain(self.nu.iter())
            .all(|v| v.is_finite())
    }
}
