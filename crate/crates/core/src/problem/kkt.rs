use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{ConvexProgram, PrimalDualPoint};
use crate::dynamics::{AugPdgdField, DynamicsParams};
use crate::error::{Error, Result};
use crate::integrate::{integrate_until_converged, AdaptiveOptions};
use crate::linalg;

/// Default slack for declaring a constraint active.
pub const DEFAULT_TOL_ACTIVE: f64 = 1e-7;

/// KKT residuals of a primal-dual point. All fields are nonnegative.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KktReport {
    /// `‖∇f(x) + Σ λ_i ∇g_i(x) + Aᵀν‖`
    pub stationarity: f64,
    /// `max_i [g_i(x)]_+`
    pub primal_ineq: f64,
    /// `‖Ax − b‖`
    pub primal_eq: f64,
    /// `max_i |λ_i g_i(x)|`
    pub complementarity: f64,
    /// `max_i [−λ_i]_+`
    pub dual_nonneg: f64,
    /// `{i : g_i(x) ≥ −tol_active}` (0-based)
    pub active_set: Vec<usize>,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.stationarity
            .max(self.primal_ineq)
            .max(self.primal_eq)
            .max(self.complementarity)
            .max(self.dual_nonneg)
    }

    pub fn is_kkt(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

pub fn kkt_residual(prog: &ConvexProgram, z: &PrimalDualPoint, tol_active: f64) -> Result<KktReport> {
    prog.check_point(z)?;
    let x = &z.x;
    let mut grad = prog.objective().gradient(x);
    grad.gemv_tr(1.0, prog.eq_matrix(), &z.nu, 1.0);
    let mut primal_ineq: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    let mut active_set = Vec::new();
    for (i, g) in prog.inequalities().iter().enumerate() {
        let gi = g.func.value(x);
        g.func.add_scaled_gradient(x, z.lambda[i], &mut grad);
        primal_ineq = primal_ineq.max(gi.max(0.0));
        complementarity = complementarity.max((z.lambda[i] * gi).abs());
        if gi >= -tol_active {
            active_set.push(i);
        }
    }
    let dual_nonneg = z.lambda.iter().fold(0.0_f64, |m, &l| m.max((-l).max(0.0)));
    Ok(KktReport {
        stationarity: grad.norm(),
        primal_ineq,
        primal_eq: prog.eq_residual(x).norm(),
        complementarity,
        dual_nonneg,
        active_set,
    })
}

/// `𝓘 = {i : g_i(x*) ≥ −tol_active}` (0-based indices).
pub fn detect_active_set(prog: &ConvexProgram, x_star: &DVector<f64>, tol_active: f64) -> Vec<usize> {
    prog.inequalities()
        .iter()
        .enumerate()
        .filter(|(_, g)| g.func.value(x_star) >= -tol_active)
        .map(|(i, _)| i)
        .collect()
}

/// Outcome of the LICQ test at `x*`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LicqReport {
    /// `λ_min([J_𝓘; A][J_𝓘; A]ᵀ)`
    pub kappa: f64,
    pub holds: bool,
    /// Rank threshold used for `holds`: `1e-10 · ‖[J_𝓘; A]‖²`.
    pub threshold: f64,
}

/// `[J_𝓘; A]` at `x_star`.
pub(crate) fn active_constraint_matrix(prog: &ConvexProgram, x_star: &DVector<f64>, active: &[usize]) -> DMatrix<f64> {
    let rows: Vec<DVector<f64>> = active
        .iter()
        .map(|&i| prog.inequalities()[i].func.gradient(x_star))
        .collect();
    let j_active = linalg::stack_rows(&rows, prog.n());
    linalg::vstack(&j_active, prog.eq_matrix())
}

pub fn check_licq(prog: &ConvexProgram, x_star: &DVector<f64>, active: &[usize]) -> Result<LicqReport> {
    if active.len() + prog.m_e() == 0 {
        return Err(Error::Assumption(
            "no active inequality and no equality constraint (|I| + m_E = 0)".into(),
        ));
    }
    if let Some(&bad) = active.iter().find(|&&i| i >= prog.m_i()) {
        return Err(Error::contract(format!("active index {bad} out of range")));
    }
    let stacked = active_constraint_matrix(prog, x_star, active);
    let gram = &stacked * stacked.transpose();
    let (kappa, top) = linalg::sym_extreme_eigenvalues(&gram);
    let threshold = 1e-10 * top.max(0.0);
    Ok(LicqReport {
        kappa,
        holds: kappa > threshold,
        threshold,
    })
}

/// Finds a KKT point by integrating the flow until every KKT residual is at
/// most `tol`, starting from `z0` (which needs `λ ≥ 0`).
pub fn solve_reference_kkt(
    prog: &ConvexProgram,
    params: &DynamicsParams,
    z0: &PrimalDualPoint,
    tol: f64,
    max_time: f64,
) -> Result<PrimalDualPoint> {
    let field = AugPdgdField::new(prog, *params)?;
    // Explicit steps near the stability limit leave an equilibrium offset of
    // order rel_tol, so the tolerance has to sit well below the target.
    let rel_tol = (tol * 1e-3).clamp(1e-13, 1e-10);
    let opts = AdaptiveOptions {
        rel_tol,
        abs_tol: rel_tol * 1e-2,
        ..AdaptiveOptions::default()
    };
    let (_, z_star) = integrate_until_converged(&field, prog, z0, tol, max_time, &opts)?;
    Ok(z_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{make_counterexample, Hessian, Inequality, QuadraticFn};

    fn scalar_program(constraints: Vec<Inequality>, a: Option<f64>) -> ConvexProgram {
        let obj = QuadraticFn::new(Hessian::Diagonal(DVector::from_element(1, 1.0)), DVector::zeros(1), 0.0);
        let (am, b) = match a {
            Some(a) => (DMatrix::from_element(1, 1, a), DVector::zeros(1)),
            None => (DMatrix::zeros(0, 1), DVector::zeros(0)),
        };
        ConvexProgram::new("scalar", 1, obj, constraints, am, b, 1.0, 1.0).unwrap()
    }

    #[test]
    fn counterexample_kkt_point_has_zero_residuals() {
        let prog = make_counterexample();
        let r = kkt_residual(&prog, &PrimalDualPoint::zeros(prog.dims()), 1e-8).unwrap();
        assert_eq!(r.max_residual(), 0.0);
        assert!(r.active_set.is_empty());
    }

    #[test]
    fn counterexample_residuals_at_initial_point() {
        let prog = make_counterexample();
        let z = PrimalDualPoint::from_slices(&[0.5], &[1.0], &[-1.0]);
        let r = kkt_residual(&prog, &z, 1e-8).unwrap();
        assert!((r.primal_eq - 0.5).abs() < 1e-15);
        assert!((r.stationarity - 0.5).abs() < 1e-15);
        assert!((r.complementarity - 0.5).abs() < 1e-15);
        assert_eq!(r.primal_ineq, 0.0);
    }

    #[test]
    fn no_inequalities_means_zero_ineq_residuals() {
        let prog = scalar_program(vec![], Some(1.0));
        let r = kkt_residual(&prog, &PrimalDualPoint::from_slices(&[3.0], &[], &[0.0]), 1e-7).unwrap();
        assert_eq!(r.primal_ineq, 0.0);
        assert_eq!(r.complementarity, 0.0);
        assert_eq!(r.dual_nonneg, 0.0);
    }

    #[test]
    fn dimension_mismatch_is_a_contract_violation() {
        let prog = make_counterexample();
        let z = PrimalDualPoint::from_slices(&[0.0, 1.0], &[0.0], &[0.0]);
        assert!(matches!(kkt_residual(&prog, &z, 1e-7), Err(Error::Contract(_))));
    }

    #[test]
    fn active_set_examples() {
        let prog = make_counterexample();
        assert!(detect_active_set(&prog, &DVector::zeros(1), 1e-8).is_empty());

        let one = scalar_program(vec![Inequality::affine(DVector::from_element(1, 1.0), 1.0)], None);
        assert_eq!(detect_active_set(&one, &DVector::from_element(1, 1.0), 1e-8), vec![0]);

        let two = scalar_program(
            vec![
                Inequality::affine(DVector::from_element(1, 1.0), 1.0),
                Inequality::affine(DVector::from_element(1, -1.0), 0.0),
            ],
            None,
        );
        assert_eq!(detect_active_set(&two, &DVector::zeros(1), 1e-8), vec![1]);
    }

    #[test]
    fn licq_examples() {
        let prog = make_counterexample();
        let r = check_licq(&prog, &DVector::zeros(1), &[]).unwrap();
        assert!((r.kappa - 1.0).abs() < 1e-15 && r.holds);

        // A = [1] with an active constraint whose gradient is 1: Gram [[1,1],[1,1]].
        let r = check_licq(&prog, &DVector::from_element(1, 1.0), &[0]).unwrap();
        assert!(r.kappa.abs() < 1e-14);
        assert!(!r.holds);

        let obj = QuadraticFn::new(Hessian::Diagonal(DVector::from_element(2, 1.0)), DVector::zeros(2), 0.0);
        let id = ConvexProgram::new(
            "id",
            2,
            obj,
            vec![],
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            1.0,
            1.0,
        )
        .unwrap();
        assert!((check_licq(&id, &DVector::zeros(2), &[]).unwrap().kappa - 1.0).abs() < 1e-14);
    }

    #[test]
    fn licq_requires_some_constraint() {
        let prog = scalar_program(vec![Inequality::affine(DVector::from_element(1, 1.0), 1.0)], None);
        assert!(matches!(
            check_licq(&prog, &DVector::zeros(1), &[]),
            Err(Error::Assumption(_))
        ));
    }

    #[test]
    fn reference_solution_from_counterexample_start() {
        let prog = make_counterexample();
        let params = DynamicsParams::new(1.0).unwrap();
        let z0 = PrimalDualPoint::from_slices(&[0.5], &[1.0], &[-1.0]);
        let zs = solve_reference_kkt(&prog, &params, &z0, 1e-9, 500.0).unwrap();
        assert!(zs.norm() < 1e-6, "{zs:?}");
    }

    #[test]
    fn reference_solution_at_fixed_point_returns_immediately() {
        let prog = make_counterexample();
        let params = DynamicsParams::new(1.0).unwrap();
        let z0 = PrimalDualPoint::zeros(prog.dims());
        let zs = solve_reference_kkt(&prog, &params, &z0, 1e-12, 1.0).unwrap();
        assert_eq!(zs, z0);
    }
}
