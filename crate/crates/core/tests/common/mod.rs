//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use augpdgd::problem::{random_qp_spec, ProblemSpec};
use nalgebra::{DMatrix, DVector};

/// Dense data of `min ½xᵀHx + qᵀx  s.t.  Fx ≤ v,  Ax = b`.
pub struct QpData {
    pub h: DMatrix<f64>,
    pub q: DVector<f64>,
    pub f: DMatrix<f64>,
    pub v: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

fn rows(m: &[Vec<f64>], ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m.len(), ncols, |i, j| m[i][j])
}

impl QpData {
    pub fn from_spec(s: &ProblemSpec) -> Self {
        let (f, v) = match &s.ineq_affine {
            Some(blk) => (rows(&blk.f, s.n), DVector::from_vec(blk.v.clone())),
            None => (DMatrix::zeros(0, s.n), DVector::zeros(0)),
        };
        QpData {
            h: rows(&s.quadratic.h, s.n),
            q: DVector::from_vec(s.quadratic.q.clone()),
            f,
            v,
            a: rows(&s.a, s.n),
            b: DVector::from_vec(s.b.clone()),
        }
    }

    pub fn random(seed: u64, n: usize, m_i: usize, m_e: usize) -> (Self, ProblemSpec) {
        let spec = random_qp_spec(seed, n, m_i, m_e, 1.0, 10.0).unwrap().spec;
        (QpData::from_spec(&spec), spec)
    }
}

/// Exact QP solution by enumerating every candidate active set and solving the
/// equality-constrained KKT system; keeps the primal-feasible, dual-feasible one.
pub fn brute_force_qp(d: &QpData) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = d.h.nrows();
    let mi = d.f.nrows();
    let me = d.a.nrows();
    let mut best: Option<(f64, DVector<f64>, DVector<f64>)> = None;
    for mask in 0u32..(1 << mi) {
        let set: Vec<usize> = (0..mi).filter(|i| mask & (1 << i) != 0).collect();
        let k = set.len();
        // More active rows than variables cannot satisfy LICQ.
        if k + me > n {
            continue;
        }
        let dim = n + k + me;
        let mut kkt = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&d.h);
        for (r, &i) in set.iter().enumerate() {
            for j in 0..n {
                kkt[(n + r, j)] = d.f[(i, j)];
                kkt[(j, n + r)] = d.f[(i, j)];
            }
            rhs[n + r] = d.v[i];
        }
        for r in 0..me {
            for j in 0..n {
                kkt[(n + k + r, j)] = d.a[(r, j)];
                kkt[(j, n + k + r)] = d.a[(r, j)];
            }
            rhs[n + k + r] = d.b[r];
        }
        rhs.rows_mut(0, n).copy_from(&(-&d.q));
        let Some(sol) = kkt.clone().lu().solve(&rhs) else {
            continue;
        };
        if (&kkt * &sol - &rhs).norm() > 1e-8 * (1.0 + rhs.norm()) || !sol.iter().all(|v| v.is_finite()) {
            continue;
        }
        let x = sol.rows(0, n).into_owned();
        let lam_s = sol.rows(n, k).into_owned();
        let feasible = (0..mi).all(|i| d.f.row(i).dot(&x.transpose()) <= d.v[i] + 1e-9);
        let dual_ok = lam_s.iter().all(|&l| l >= -1e-9);
        if feasible && dual_ok {
            let obj = 0.5 * x.dot(&(&d.h * &x)) + d.q.dot(&x);
            let mut lambda = DVector::zeros(mi);
            for (r, &i) in set.iter().enumerate() {
                lambda[i] = lam_s[r].max(0.0);
            }
            if best.as_ref().is_none_or(|b| obj < b.0 - 1e-12) {
                best = Some((obj, x, lambda));
            }
        }
    }
    best.map(|(_, x, l)| (x, l))
}

/// Exact counterexample trajectory, written out directly from the formulas.
pub fn counterexample_exact(alpha: f64, rho: f64, t: f64) -> [f64; 3] {
    if t <= alpha {
        [0.5, (alpha + rho - t) / 2.0, (t - alpha - 1.0) / 2.0]
    } else {
        let s = t - alpha;
        let k = 3f64.sqrt();
        let e = (-s / 2.0).exp() * k / 3.0;
        [
            e * (k * s / 2.0 + std::f64::consts::FRAC_PI_3).sin(),
            rho / 2.0 * (-s / rho).exp(),
            e * (k * s / 2.0 - std::f64::consts::FRAC_PI_3).sin(),
        ]
    }
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let xi = x[i];
            p[i] = xi + h;
            let up = f(&p);
            p[i] = xi - h;
            let down = f(&p);
            p[i] = xi;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖b‖, 1)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1.0);
    diff / scale
}
