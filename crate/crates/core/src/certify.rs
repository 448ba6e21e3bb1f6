//! Semi-global exponential stability certificates.
//!
//! Given a KKT point `z*` and an initial distance `d0`, every trajectory with
//! `λ(0) ≥ 0` and `‖z(0) − z*‖ ≤ d0` satisfies
//!
//! ```text
//! ‖z(t) − z*‖ ≤ M_β e^{−βt} ‖z(0) − z*‖
//! ```
//!
//! for any `β > 0` meeting two scalar conditions:
//!
//! ```text
//! margin:   β ≤ κ δ_min / (46 ρ (L_g² + ‖A‖²))
//! balance:  κμ/(4β) − 4β² ≥ ‖A‖² + L_g² + κ/4 + (ℓ + M_Θ)(μ + M_Θ + 1/ρ) + 1/(2ρ²)
//! ```
//!
//! with `δ_min = 1 − [1 + ρ max_{i∉𝓘} g_i(x*) / d0]_+²` and
//! `M_Θ = ρL_g² + (ρL_g d0 + d0 + ‖λ*‖) M_g`. The envelope factor is
//! `M_β = √(‖P_c‖‖P_c⁻¹‖)` for the Lyapunov matrix
//!
//! ```text
//!       ⎡ I    cJᵀ  cAᵀ ⎤
//! P_c = ⎢ cJ   I    0   ⎥ ,   c = 4β/κ,   V_c = ½ (z − z*)ᵀ P_c (z − z*)
//!       ⎣ cA   0    I   ⎦
//! ```
//!
//! where `J` is the full constraint Jacobian at `x*`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::plus_part;
use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::linalg;
use crate::problem::{
    check_licq, detect_active_set, ConvexProgram, PrimalDualPoint, SmoothnessBounds, DEFAULT_TOL_ACTIVE,
};

/// Relative slack allowed on the envelope (integrator error budget).
pub const ENVELOPE_SLACK: f64 = 1e-8;
/// Absolute slack on the Lyapunov decay check, relative to `V_c(0)`.
pub const DECAY_SLACK: f64 = 1e-6;

/// `‖z0 − z*‖` over the stacked `(x, λ, ν)`.
pub fn compute_d0(z0: &PrimalDualPoint, z_star: &PrimalDualPoint) -> Result<f64> {
    if z0.dims() != z_star.dims() {
        return Err(Error::contract("d0: point dimensions differ"));
    }
    Ok(z0.distance(z_star))
}

/// Inactivity margin `δ_min ∈ (0, 1]`; equal to 1 when there are no inactive constraints.
pub fn compute_delta_min(
    prog: &ConvexProgram,
    x_star: &DVector<f64>,
    inactive: &[usize],
    rho: f64,
    d0: f64,
) -> Result<f64> {
    if !(d0 > 0.0) {
        return Err(Error::contract(format!("d0 must be positive, got {d0}")));
    }
    let mut worst = f64::NEG_INFINITY;
    for &i in inactive {
        if i >= prog.m_i() {
            return Err(Error::contract(format!("inactive index {i} out of range")));
        }
        let g = prog.inequalities()[i].func.value(x_star);
        if g >= 0.0 {
            return Err(Error::Classification(format!(
                "constraint {i} listed as inactive but g_{i}(x*) = {g:e} >= 0"
            )));
        }
        worst = worst.max(g);
    }
    if inactive.is_empty() {
        return Ok(1.0);
    }
    let s = plus_part(1.0 + rho * worst / d0);
    Ok(1.0 - s * s)
}

/// Lipschitz constant of `∇ₓΘ_ρ` over the `d0`-ball.
pub fn compute_m_theta(rho: f64, l_g: f64, m_g: f64, d0: f64, lambda_star_norm: f64) -> f64 {
    rho * l_g * l_g + (rho * l_g * d0 + d0 + lambda_star_norm) * m_g
}

/// Constants entering the two rate conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateInputs {
    pub kappa: f64,
    pub delta_min: f64,
    pub rho: f64,
    pub l_g: f64,
    pub a_norm: f64,
    pub mu: f64,
    pub ell: f64,
    pub m_theta: f64,
}

/// Upper bound on β from the inactivity margin.
pub fn margin_bound(kappa: f64, delta_min: f64, rho: f64, l_g: f64, a_norm: f64) -> f64 {
    kappa * delta_min / (46.0 * rho * (l_g * l_g + a_norm * a_norm))
}

pub fn margin_condition(beta: f64, kappa: f64, delta_min: f64, rho: f64, l_g: f64, a_norm: f64) -> bool {
    beta <= margin_bound(kappa, delta_min, rho, l_g, a_norm)
}

fn balance_lhs(beta: f64, kappa: f64, mu: f64) -> f64 {
    kappa * mu / (4.0 * beta) - 4.0 * beta * beta
}

fn balance_rhs(kappa: f64, mu: f64, ell: f64, m_theta: f64, rho: f64, l_g: f64, a_norm: f64) -> f64 {
    a_norm * a_norm + l_g * l_g + kappa / 4.0 + (ell + m_theta) * (mu + m_theta + 1.0 / rho) + 1.0 / (2.0 * rho * rho)
}

#[allow(clippy::too_many_arguments)]
pub fn balance_condition(
    beta: f64,
    kappa: f64,
    mu: f64,
    ell: f64,
    m_theta: f64,
    rho: f64,
    l_g: f64,
    a_norm: f64,
) -> bool {
    beta > 0.0 && balance_lhs(beta, kappa, mu) >= balance_rhs(kappa, mu, ell, m_theta, rho, l_g, a_norm)
}

/// Largest admissible β and the two individual limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BetaSolution {
    pub beta: f64,
    pub margin_bound: f64,
    /// Unique root of the balance condition taken with equality.
    pub balance_root: f64,
}

const BISECTION_RTOL: f64 = 1e-12;

/// Bisection for the largest β with `balance_lhs(β) ≥ rhs` below `hi`, which
/// does not satisfy it. The left side is strictly decreasing and unbounded at 0.
fn bisect_balance(mut hi: f64, kappa: f64, mu: f64, rhs: f64) -> f64 {
    let mut lo = 0.5 * hi;
    while balance_lhs(lo, kappa, mu) < rhs {
        hi = lo;
        lo *= 0.5;
    }
    for _ in 0..400 {
        if hi - lo <= BISECTION_RTOL * lo {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if balance_lhs(mid, kappa, mu) >= rhs {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `β̂ = min(margin bound, balance root)`.
pub fn solve_beta(inp: &RateInputs) -> Result<BetaSolution> {
    let RateInputs {
        kappa,
        delta_min,
        rho,
        l_g,
        a_norm,
        mu,
        ell,
        m_theta,
    } = *inp;
    if !(kappa > 0.0 && rho > 0.0 && mu > 0.0 && ell >= mu && m_theta >= 0.0) {
        return Err(Error::contract(format!("invalid rate inputs {inp:?}")));
    }
    if !(delta_min > 0.0 && delta_min <= 1.0) {
        return Err(Error::contract(format!(
            "delta_min must lie in (0, 1], got {delta_min}"
        )));
    }
    if !(l_g * l_g + a_norm * a_norm > 0.0) {
        return Err(Error::contract("L_g and ||A|| cannot both vanish"));
    }
    let rhs = balance_rhs(kappa, mu, ell, m_theta, rho, l_g, a_norm);
    let cap = margin_bound(kappa, delta_min, rho, l_g, a_norm);

    let mut hi = cap;
    while balance_lhs(hi, kappa, mu) >= rhs {
        hi *= 2.0;
    }
    let root = bisect_balance(hi, kappa, mu, rhs);

    let beta = if balance_lhs(cap, kappa, mu) >= rhs {
        cap
    } else {
        bisect_balance(cap, kappa, mu, rhs)
    };
    Ok(BetaSolution {
        beta,
        margin_bound: cap,
        balance_root: root,
    })
}

/// `P_c` with its extreme eigenvalues and `M_β`.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovMatrix {
    pub pc: DMatrix<f64>,
    pub min_eig: f64,
    pub max_eig: f64,
    pub m_beta: f64,
}

/// Assembles `P_c` from the constraint Jacobian `J` (m_I × n) and `A` (m_E × n).
pub fn build_pc(j: &DMatrix<f64>, a: &DMatrix<f64>, c: f64) -> Result<LyapunovMatrix> {
    if !(c >= 0.0) {
        return Err(Error::contract(format!("c must be nonnegative, got {c}")));
    }
    let n = j.ncols().max(a.ncols());
    if (j.nrows() > 0 && j.ncols() != n) || (a.nrows() > 0 && a.ncols() != n) {
        return Err(Error::contract("J and A column counts differ"));
    }
    let (mi, me) = (j.nrows(), a.nrows());
    let dim = n + mi + me;
    let mut pc = DMatrix::identity(dim, dim);
    for r in 0..mi {
        for col in 0..n {
            pc[(n + r, col)] = c * j[(r, col)];
            pc[(col, n + r)] = c * j[(r, col)];
        }
    }
    for r in 0..me {
        for col in 0..n {
            pc[(n + mi + r, col)] = c * a[(r, col)];
            pc[(col, n + mi + r)] = c * a[(r, col)];
        }
    }
    let (min_eig, max_eig) = linalg::sym_extreme_eigenvalues(&pc);
    // Eigenvalues within rounding of zero count as singular.
    if !(min_eig > 64.0 * f64::EPSILON * max_eig) {
        return Err(Error::CertificateInvalid(format!(
            "P_c is not positive definite (min eigenvalue {min_eig:e})"
        )));
    }
    Ok(LyapunovMatrix {
        m_beta: (max_eig / min_eig).sqrt(),
        pc,
        min_eig,
        max_eig,
    })
}

/// `V_c = ½ (z − z*)ᵀ P_c (z − z*)`.
pub fn lyapunov_value(pc: &DMatrix<f64>, z: &PrimalDualPoint, z_star: &PrimalDualPoint) -> f64 {
    let diff = DVector::from_vec(z.to_vec()) - DVector::from_vec(z_star.to_vec());
    0.5 * diff.dot(&(pc * &diff))
}

/// Every constant of the stability bound for one `(z*, d0, ρ)`.
#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub d0: f64,
    pub kappa: f64,
    pub delta_min: f64,
    #[serde(rename = "L_g")]
    pub l_g: f64,
    #[serde(rename = "M_g")]
    pub m_g: f64,
    #[serde(rename = "M_theta")]
    pub m_theta: f64,
    #[serde(rename = "A_norm")]
    pub a_norm: f64,
    pub beta: f64,
    pub c: f64,
    #[serde(rename = "M_beta")]
    pub m_beta: f64,
    pub pc_min_eig: f64,
    pub pc_max_eig: f64,
    /// Some smoothness constant came from sampling rather than structure.
    pub heuristic: bool,
    // Inputs and intermediate values.
    pub rho: f64,
    pub mu: f64,
    pub ell: f64,
    pub lambda_star_norm: f64,
    pub active_set: Vec<usize>,
    pub margin_bound: f64,
    pub balance_root: f64,
    #[serde(skip)]
    pub pc: DMatrix<f64>,
}

impl Certificate {
    pub fn rate_inputs(&self) -> RateInputs {
        RateInputs {
            kappa: self.kappa,
            delta_min: self.delta_min,
            rho: self.rho,
            l_g: self.l_g,
            a_norm: self.a_norm,
            mu: self.mu,
            ell: self.ell,
            m_theta: self.m_theta,
        }
    }

    /// `M_β e^{−βt} d`.
    pub fn envelope(&self, t: f64, d: f64) -> f64 {
        self.m_beta * (-self.beta * t).exp() * d
    }
}

/// Computes the certificate for initial distance `d0` around the KKT point `z_star`.
///
/// Fails with [`Error::Assumption`] when LICQ fails or `|𝓘| + m_E = 0`.
pub fn certify(prog: &ConvexProgram, z_star: &PrimalDualPoint, d0: f64, rho: f64) -> Result<Certificate> {
    certify_with_tol(prog, z_star, d0, rho, DEFAULT_TOL_ACTIVE)
}

pub fn certify_with_tol(
    prog: &ConvexProgram,
    z_star: &PrimalDualPoint,
    d0: f64,
    rho: f64,
    tol_active: f64,
) -> Result<Certificate> {
    prog.check_point(z_star)?;
    if !(rho > 0.0) {
        return Err(Error::contract("rho must be positive"));
    }
    let x_star = &z_star.x;
    let active = detect_active_set(prog, x_star, tol_active);
    let inactive: Vec<usize> = (0..prog.m_i()).filter(|i| !active.contains(i)).collect();
    let licq = check_licq(prog, x_star, &active)?;
    if !licq.holds {
        return Err(Error::Assumption(format!(
            "LICQ fails at x*: kappa = {:e} <= {:e}",
            licq.kappa, licq.threshold
        )));
    }
    let bounds = SmoothnessBounds::for_program(prog, x_star, d0);
    let delta_min = compute_delta_min(prog, x_star, &inactive, rho, d0)?;
    let lambda_star_norm = z_star.lambda.norm();
    let m_theta = compute_m_theta(rho, bounds.l_g, bounds.m_g, d0, lambda_star_norm);
    let a_norm = linalg::spectral_norm(prog.eq_matrix());
    let inputs = RateInputs {
        kappa: licq.kappa,
        delta_min,
        rho,
        l_g: bounds.l_g,
        a_norm,
        mu: prog.mu(),
        ell: prog.ell(),
        m_theta,
    };
    let sol = solve_beta(&inputs)?;
    let c = 4.0 * sol.beta / licq.kappa;
    let lyap = build_pc(&prog.jacobian(x_star), prog.eq_matrix(), c)?;
    Ok(Certificate {
        d0,
        kappa: licq.kappa,
        delta_min,
        l_g: bounds.l_g,
        m_g: bounds.m_g,
        m_theta,
        a_norm,
        beta: sol.beta,
        c,
        m_beta: lyap.m_beta,
        pc_min_eig: lyap.min_eig,
        pc_max_eig: lyap.max_eig,
        heuristic: bounds.heuristic,
        rho,
        mu: prog.mu(),
        ell: prog.ell(),
        lambda_star_norm,
        active_set: active,
        margin_bound: sol.margin_bound,
        balance_root: sol.balance_root,
        pc: lyap.pc,
    })
}

/// Result of checking a trajectory against a certificate.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    /// `max_t ‖z(t) − z*‖ / (M_β e^{−βt} ‖z(0) − z*‖)`.
    pub max_ratio: f64,
    pub envelope_holds: bool,
    /// `max_t [dV_c/dt + 2βV_c − tol]` over interior samples; ≤ 0 means decay holds.
    pub max_decay_excess: f64,
    pub decay_tolerance: f64,
    pub decay_holds: bool,
    pub samples: usize,
    pub passed: bool,
}

/// Fills `dist_to_ref` and `lyapunov` on `traj`.
pub fn annotate(traj: &mut Trajectory, cert: &Certificate, z_star: &PrimalDualPoint) {
    traj.attach_reference(z_star);
    let v = traj
        .points
        .iter()
        .map(|z| lyapunov_value(&cert.pc, z, z_star))
        .collect();
    traj.attach_lyapunov(v);
}

/// Checks the exponential envelope at every sample and the Lyapunov decay
/// `dV_c/dt ≤ −2βV_c + 1e-6·V_c(0)` (central differences) at interior samples.
pub fn verify_envelope(traj: &Trajectory, cert: &Certificate, z_star: &PrimalDualPoint) -> Result<EnvelopeReport> {
    if traj.is_empty() {
        return Err(Error::contract("empty trajectory"));
    }
    if traj.dims != z_star.dims() || cert.pc.nrows() != traj.dims.total() {
        return Err(Error::contract("certificate, trajectory and z* dimensions differ"));
    }
    if !(cert.beta > 0.0 && cert.m_beta >= 1.0 - 1e-12) {
        return Err(Error::contract("certificate is missing beta or M_beta"));
    }
    let start = traj.points[0].distance(z_star);
    if start > cert.d0 * (1.0 + 1e-12) + 1e-300 {
        return Err(Error::contract(format!(
            "trajectory starts at distance {start} beyond certified d0 = {}",
            cert.d0
        )));
    }
    if traj.points[0].min_lambda() < 0.0 {
        return Err(Error::contract("trajectory starts with negative multipliers"));
    }

    let mut max_ratio: f64 = 0.0;
    for (t, z) in traj.iter() {
        let d = z.distance(z_star);
        let bound = cert.envelope(t, start);
        let ratio = if bound > 0.0 {
            d / bound
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        max_ratio = max_ratio.max(ratio);
    }

    let v: Vec<f64> = traj
        .points
        .iter()
        .map(|z| lyapunov_value(&cert.pc, z, z_star))
        .collect();
    let tol = DECAY_SLACK * v[0];
    let mut max_excess = f64::NEG_INFINITY;
    for k in 1..traj.len().saturating_sub(1) {
        let dt = traj.times[k + 1] - traj.times[k - 1];
        let dv = (v[k + 1] - v[k - 1]) / dt;
        max_excess = max_excess.max(dv + 2.0 * cert.beta * v[k] - tol);
    }
    if max_excess == f64::NEG_INFINITY {
        max_excess = 0.0;
    }
    let envelope_holds = max_ratio <= 1.0 + ENVELOPE_SLACK;
    let decay_holds = max_excess <= 0.0;
    Ok(EnvelopeReport {
        max_ratio,
        envelope_holds,
        max_decay_excess: max_excess,
        decay_tolerance: tol,
        decay_holds,
        samples: traj.len(),
        passed: envelope_holds && decay_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::make_counterexample;

    fn counterexample_inputs(d0: f64) -> RateInputs {
        let prog = make_counterexample();
        let x = DVector::zeros(1);
        RateInputs {
            kappa: 1.0,
            delta_min: compute_delta_min(&prog, &x, &[0], 1.0, d0).unwrap(),
            rho: 1.0,
            l_g: 1.0,
            a_norm: 1.0,
            mu: 1.0,
            ell: 1.0,
            m_theta: compute_m_theta(1.0, 1.0, 0.0, d0, 0.0),
        }
    }

    #[test]
    fn d0_examples() {
        let z = PrimalDualPoint::from_slices(&[0.5], &[1.5], &[-1.5]);
        let o = PrimalDualPoint::from_slices(&[0.0], &[0.0], &[0.0]);
        assert_eq!(compute_d0(&o, &o).unwrap(), 0.0);
        assert!((compute_d0(&z, &o).unwrap() - 19f64.sqrt() / 2.0).abs() < 1e-15);
        let e = PrimalDualPoint::from_slices(&[0.0], &[1.0], &[0.0]);
        assert_eq!(compute_d0(&e, &o).unwrap(), 1.0);
    }

    #[test]
    fn delta_min_examples() {
        let prog = make_counterexample();
        let x = DVector::zeros(1);
        // g(x*) = −1, ρ = 1, d0 = 2 → 1 − (1/2)²
        assert!((compute_delta_min(&prog, &x, &[0], 1.0, 2.0).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(compute_delta_min(&prog, &x, &[0], 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(compute_delta_min(&prog, &x, &[0], 5.0, 1.0).unwrap(), 1.0);
        assert_eq!(compute_delta_min(&prog, &x, &[], 1.0, 1.0).unwrap(), 1.0);
        let at_boundary = DVector::from_element(1, 1.0);
        assert!(matches!(
            compute_delta_min(&prog, &at_boundary, &[0], 1.0, 1.0),
            Err(Error::Classification(_))
        ));
    }

    #[test]
    fn m_theta_examples() {
        assert_eq!(compute_m_theta(1.0, 1.0, 0.0, 7.0, 0.0), 1.0);
        assert_eq!(compute_m_theta(2.0, 1.0, 1.0, 1.0, 0.0), 5.0);
        assert_eq!(compute_m_theta(3.0, 2.0, 0.0, 100.0, 4.0), 12.0);
    }

    #[test]
    fn margin_examples() {
        assert!(margin_condition(1.0 / 92.0, 1.0, 1.0, 1.0, 1.0, 1.0));
        assert!(!margin_condition(1.0 / 91.0, 1.0, 1.0, 1.0, 1.0, 1.0));
        assert!(margin_condition(1e-300, 1.0, 1.0, 1.0, 1.0, 1.0));
        let b1 = margin_bound(1.0, 1.0, 1.0, 1.0, 1.0);
        let b2 = margin_bound(1.0, 1.0, 2.0, 1.0, 1.0);
        assert!((b1 - 2.0 * b2).abs() < 1e-18);
    }

    #[test]
    fn balance_examples() {
        let ok = |b: f64| balance_condition(b, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        assert!(ok(1.0 / 92.0));
        assert!(ok(0.028));
        assert!(!ok(0.030));
        assert!(!ok(1e6));
    }

    #[test]
    fn beta_for_counterexample() {
        let sol = solve_beta(&counterexample_inputs(1.0)).unwrap();
        assert!((sol.beta - 1.0 / 92.0).abs() <= 1e-10 / 92.0);
        assert!((sol.balance_root - 0.02855).abs() < 1e-4, "{}", sol.balance_root);
    }

    #[test]
    fn tiny_balance_root_is_still_admissible() {
        let inp = RateInputs {
            m_theta: 1e10,
            ..counterexample_inputs(1.0)
        };
        let sol = solve_beta(&inp).unwrap();
        // κμ/(4β) ≈ M_Θ² puts the root near 2.5e-21.
        assert!(sol.beta < 1e-20 && sol.beta > 1e-22, "{}", sol.beta);
        assert!(balance_condition(sol.beta, 1.0, 1.0, 1.0, 1e10, 1.0, 1.0, 1.0));
        assert!(!balance_condition(sol.beta * (1.0 + 1e-9), 1.0, 1.0, 1.0, 1e10, 1.0, 1.0, 1.0));
    }

    #[test]
    fn pc_examples() {
        let j = DMatrix::from_element(1, 1, 1.0);
        let a = DMatrix::from_element(1, 1, 1.0);
        let id = build_pc(&j, &a, 0.0).unwrap();
        assert_eq!(id.pc, DMatrix::identity(3, 3));
        assert_eq!((id.min_eig, id.m_beta), (1.0, 1.0));

        let c = 1.0 / 23.0;
        let l = build_pc(&j, &a, c).unwrap();
        let s = 2f64.sqrt() / 23.0;
        assert!((l.min_eig - (1.0 - s)).abs() < 1e-14);
        assert!((l.max_eig - (1.0 + s)).abs() < 1e-14);
        assert!((l.m_beta - ((1.0 + s) / (1.0 - s)).sqrt()).abs() < 1e-13);
        assert!((l.m_beta - 1.0635).abs() < 1e-4);

        assert!(matches!(
            build_pc(&j, &a, 1.0 / 2f64.sqrt()),
            Err(Error::CertificateInvalid(_))
        ));
        assert!(matches!(build_pc(&j, &a, 1.0), Err(Error::CertificateInvalid(_))));
    }

    #[test]
    fn lyapunov_examples() {
        let o = PrimalDualPoint::from_slices(&[0.0], &[0.0], &[0.0]);
        let j = DMatrix::from_element(1, 1, 1.0);
        let id = build_pc(&j, &j, 0.0).unwrap();
        assert_eq!(lyapunov_value(&id.pc, &o, &o), 0.0);
        let ex = PrimalDualPoint::from_slices(&[1.0], &[0.0], &[0.0]);
        assert_eq!(lyapunov_value(&id.pc, &ex, &o), 0.5);
        let l = build_pc(&j, &j, 1.0 / 23.0).unwrap();
        let ones = PrimalDualPoint::from_slices(&[1.0], &[1.0], &[1.0]);
        assert!((lyapunov_value(&l.pc, &ones, &o) - 0.5 * (3.0 + 4.0 / 23.0)).abs() < 1e-14);
    }

    #[test]
    fn certificate_for_counterexample() {
        let prog = make_counterexample();
        let z_star = PrimalDualPoint::zeros(prog.dims());
        let cert = certify(&prog, &z_star, 1.0, 1.0).unwrap();
        assert!((cert.beta - 1.0 / 92.0).abs() < 1e-16);
        assert!((cert.c - 1.0 / 23.0).abs() < 1e-16);
        assert_eq!(cert.c, 4.0 * cert.beta / cert.kappa);
        assert!(cert.active_set.is_empty());
        assert!(!cert.heuristic);
        assert!(cert.c * cert.c * (cert.l_g.powi(2) + cert.a_norm.powi(2)) < 2.0 / 23.0);
    }
}
