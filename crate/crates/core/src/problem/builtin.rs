use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ConvexProgram, Hessian, Inequality, ProblemSpec, QuadraticFn};
use crate::error::{Error, Result};
use crate::linalg;

/// `min ½x²  s.t.  x − 1 ≤ 0,  x = 0`.
///
/// Unique KKT point `(0, 0, 0)`; the inequality is inactive there but its
/// gradient is parallel to the equality row.
pub fn make_counterexample() -> ConvexProgram {
    let objective = QuadraticFn::new(Hessian::Diagonal(DVector::from_element(1, 1.0)), DVector::zeros(1), 0.0);
    let g = Inequality::affine(DVector::from_element(1, 1.0), 1.0);
    ConvexProgram::new(
        "counterexample",
        1,
        objective,
        vec![g],
        DMatrix::from_element(1, 1, 1.0),
        DVector::zeros(1),
        1.0,
        1.0,
    )
    .expect("counterexample data is valid")
}

/// `min ½‖x − (2, 1)‖²  s.t.  ‖x‖² − 1 ≤ 0,  x₂ − 2 ≤ 0`.
///
/// The ball constraint is active at the optimum `x* = (2, 1)/√5`, so the
/// instance exercises a curved constraint with `M_g > 0`.
pub fn make_soc_demo() -> ConvexProgram {
    let objective = QuadraticFn::new(
        Hessian::Diagonal(DVector::from_element(2, 1.0)),
        DVector::from_vec(vec![-2.0, -1.0]),
        2.5,
    );
    let ball = Inequality::new(QuadraticFn::new(
        Hessian::Diagonal(DVector::from_element(2, 2.0)),
        DVector::zeros(2),
        -1.0,
    ));
    let cap = Inequality::affine(DVector::from_vec(vec![0.0, 1.0]), 2.0);
    ConvexProgram::new(
        "soc",
        2,
        objective,
        vec![ball, cap],
        DMatrix::zeros(0, 2),
        DVector::zeros(0),
        1.0,
        1.0,
    )
    .expect("soc demo data is valid")
}

/// Raw data of a generated strongly convex QP.
#[derive(Clone, Debug)]
pub struct RandomQp {
    pub spec: ProblemSpec,
    /// Strictly feasible point: `Fx < v`, `Ax = b`.
    pub witness: DVector<f64>,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

const MAX_RETRIES: usize = 100;

/// Deterministic random QP `min ½xᵀHx + qᵀx  s.t.  Fx ≤ v,  Ax = b`.
///
/// `spec(H) ⊂ [mu, ell]` with both endpoints attained when `n ≥ 2`; `F` is
/// built around a witness point with positive slack, `A` has full row rank
/// (smallest singular value at least 0.1).
pub fn random_qp_spec(seed: u64, n: usize, m_i: usize, m_e: usize, mu: f64, ell: f64) -> Result<RandomQp> {
    if !(mu > 0.0 && ell >= mu) {
        return Err(Error::contract(format!("need 0 < mu <= ell, got {mu}, {ell}")));
    }
    if n == 0 || m_e >= n {
        return Err(Error::contract(format!("need m_E < n, got m_E = {m_e}, n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let q_orth = gaussian_matrix(&mut rng, n, n).qr().q();
    let spectrum = DVector::from_fn(n, |i, _| match i {
        0 => mu,
        i if i == n - 1 => ell,
        _ => mu + (ell - mu) * rng.random::<f64>(),
    });
    let h = &q_orth * DMatrix::from_diagonal(&spectrum) * q_orth.transpose();
    let h = (&h + h.transpose()) * 0.5;

    let witness = gaussian_vector(&mut rng, n);
    let f = gaussian_matrix(&mut rng, m_i, n);
    let slack = DVector::from_fn(m_i, |_, _| 0.1 + 0.9 * rng.random::<f64>());
    let v = &f * &witness + slack;

    let mut a = DMatrix::zeros(m_e, n);
    let mut ok = m_e == 0;
    for _ in 0..MAX_RETRIES {
        if ok {
            break;
        }
        a = gaussian_matrix(&mut rng, m_e, n);
        ok = linalg::min_singular_value(&a) >= 0.1;
    }
    if !ok {
        return Err(Error::Generation(format!(
            "no well-conditioned equality matrix after {MAX_RETRIES} draws"
        )));
    }
    let b = &a * &witness;

    // Pull the unconstrained minimizer away from the witness so that some
    // inequalities bind.
    let target = &witness + gaussian_vector(&mut rng, n) * 3.0;
    let q = -(&h * target);

    Ok(RandomQp {
        spec: ProblemSpec::from_qp(&h, &q, &f, &v, &a, &b, mu, ell),
        witness,
    })
}

pub fn make_random_qp(seed: u64, n: usize, m_i: usize, m_e: usize, mu: f64, ell: f64) -> Result<ConvexProgram> {
    random_qp_spec(seed, n, m_i, m_e, mu, ell)?
        .spec
        .to_program(format!("qp-{seed}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counterexample_evaluations() {
        let p = make_counterexample();
        let (f, g) = p.eval_objective(&DVector::from_element(1, 2.0));
        assert_eq!(f, 2.0);
        assert_eq!(g[0], 2.0);
        assert_eq!(p.constraint_values(&DVector::zeros(1))[0], -1.0);
        assert_eq!(p.dims(), super::super::Dims::new(1, 1, 1));
    }

    #[test]
    fn random_qp_is_deterministic() {
        let a = random_qp_spec(7, 4, 2, 1, 1.0, 5.0).unwrap();
        let b = random_qp_spec(7, 4, 2, 1, 1.0, 5.0).unwrap();
        assert_eq!(a.spec, b.spec);
        let c = random_qp_spec(8, 4, 2, 1, 1.0, 5.0).unwrap();
        assert_ne!(a.spec, c.spec);
    }

    #[test]
    fn random_qp_spectrum_and_witness() {
        for seed in 0..10 {
            let qp = random_qp_spec(seed, 5, 3, 2, 0.5, 4.0).unwrap();
            let h = DMatrix::from_fn(5, 5, |i, j| qp.spec.quadratic.h[i][j]);
            let ev = linalg::sym_eigenvalues(&h);
            assert!(ev[0] >= 0.5 - 1e-12 && ev[4] <= 4.0 + 1e-12, "{ev:?}");
            let prog = qp.spec.to_program("t").unwrap();
            assert!(prog.constraint_values(&qp.witness).iter().all(|&g| g < 0.0));
            assert!(prog.eq_residual(&qp.witness).norm() < 1e-12);
        }
    }

    #[test]
    fn random_qp_rejects_bad_dimensions() {
        assert!(matches!(random_qp_spec(0, 2, 1, 2, 1.0, 2.0), Err(Error::Contract(_))));
        assert!(matches!(random_qp_spec(0, 2, 1, 1, 3.0, 2.0), Err(Error::Contract(_))));
    }
}
