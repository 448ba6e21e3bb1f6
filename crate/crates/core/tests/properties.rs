mod common;

use augpdgd::certify::{build_pc, certify, compute_delta_min};
use augpdgd::counterexample::{closed_form, CounterexampleParams};
use augpdgd::dynamics::{
    apply_eta_scaling, augmented_lagrangian, theta_rho, to_scaled_duals, vector_field, AugPdgdField, DynamicsParams,
};
use augpdgd::integrate::{integrate_adaptive, integrate_fixed, AdaptiveOptions, Method};
use augpdgd::linalg::{min_singular_value, spectral_norm, vstack};
use augpdgd::powercurtail::{make_power_curtailment, FeederConfig, PowerProgram};
use augpdgd::problem::{
    detect_active_set, kkt_residual, make_counterexample, make_random_qp, make_soc_demo, solve_reference_kkt,
    ConvexProgram, PrimalDualPoint, DEFAULT_TOL_ACTIVE,
};
use common::{fd_gradient, rel_err};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use std::sync::OnceLock;

fn vec_strategy(len: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, len)
}

fn soc() -> &'static ConvexProgram {
    static P: OnceLock<ConvexProgram> = OnceLock::new();
    P.get_or_init(make_soc_demo)
}

fn soc_star() -> &'static PrimalDualPoint {
    static Z: OnceLock<PrimalDualPoint> = OnceLock::new();
    Z.get_or_init(|| {
        solve_reference_kkt(
            soc(),
            &DynamicsParams::new(1.0).unwrap(),
            &PrimalDualPoint::zeros(soc().dims()),
            1e-10,
            1e5,
        )
        .unwrap()
    })
}

fn power() -> &'static PowerProgram {
    static P: OnceLock<PowerProgram> = OnceLock::new();
    P.get_or_init(|| make_power_curtailment(&FeederConfig::synthetic_36(), 4.0).unwrap())
}

fn power_star() -> &'static PrimalDualPoint {
    static Z: OnceLock<PrimalDualPoint> = OnceLock::new();
    Z.get_or_init(|| {
        let prog = &power().program;
        solve_reference_kkt(
            prog,
            &DynamicsParams::new(0.1).unwrap(),
            &PrimalDualPoint::zeros(prog.dims()),
            1e-10,
            1e5,
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn soc_gradients_match_finite_differences(x in vec_strategy(2, 3.0)) {
        let prog = soc();
        let xv = DVector::from_vec(x.clone());
        let fd = fd_gradient(&|v: &[f64]| prog.eval_objective(&DVector::from_row_slice(v)).0, &x, 1e-6);
        prop_assert!(rel_err(prog.eval_objective(&xv).1.as_slice(), &fd) < 1e-6);
        for i in 0..prog.m_i() {
            let fd = fd_gradient(&|v: &[f64]| prog.eval_constraint(i, &DVector::from_row_slice(v)).0, &x, 1e-6);
            prop_assert!(rel_err(prog.eval_constraint(i, &xv).1.as_slice(), &fd) < 1e-6);
        }
    }

    #[test]
    fn field_is_lagrangian_gradient_on_random_qps(seed in 0u64..50, pt in vec_strategy(11, 2.0), rho in 0.2f64..3.0) {
        let prog = make_random_qp(seed, 6, 3, 2, 1.0, 10.0).unwrap();
        let params = DynamicsParams::new(rho).unwrap();
        let z = PrimalDualPoint::from_slices(&pt[..6], &pt[6..9].iter().map(|v| v.abs()).collect::<Vec<_>>(), &pt[9..]);
        let g = prog.constraint_values(&z.x);
        prop_assume!((0..3).all(|i| (rho * g[i] + z.lambda[i]).abs() > 1e-3));
        let d = prog.dims();
        let grad = fd_gradient(&|v: &[f64]| augmented_lagrangian(&prog, &params, &PrimalDualPoint::from_flat(d, v)).unwrap(), &z.to_vec(), 1e-6);
        let expected: Vec<f64> = grad.iter().enumerate().map(|(k, g)| if k < d.n { -g } else { *g }).collect();
        prop_assert!(rel_err(vector_field(&prog, &params, &z).unwrap().to_vec().as_slice(), &expected) < 1e-5);
    }

    #[test]
    fn theta_is_convex_in_x_and_concave_in_lambda(
        x1 in vec_strategy(2, 3.0), x2 in vec_strategy(2, 3.0),
        l1 in vec_strategy(2, 3.0), l2 in vec_strategy(2, 3.0),
        rho in 0.1f64..5.0,
    ) {
        let prog = soc();
        let params = DynamicsParams::new(rho).unwrap();
        let (x1, x2) = (DVector::from_vec(x1), DVector::from_vec(x2));
        let (l1, l2) = (DVector::from_vec(l1).abs(), DVector::from_vec(l2).abs());
        let xm = (&x1 + &x2) * 0.5;
        let lm = (&l1 + &l2) * 0.5;
        let th = |x: &DVector<f64>, l: &DVector<f64>| theta_rho(prog, &params, x, l);
        let tol = 1e-9 * (1.0 + th(&x1, &l1).abs() + th(&x2, &l1).abs() + th(&x1, &l2).abs());
        prop_assert!(th(&xm, &l1) <= 0.5 * (th(&x1, &l1) + th(&x2, &l1)) + tol);
        prop_assert!(th(&x1, &lm) >= 0.5 * (th(&x1, &l1) + th(&x1, &l2)) - tol);
    }

    #[test]
    fn field_is_lipschitz_on_bounded_sets(a in vec_strategy(11, 3.0), b in vec_strategy(11, 3.0)) {
        let prog = make_random_qp(4, 6, 3, 2, 1.0, 10.0).unwrap();
        let params = DynamicsParams::new(1.0).unwrap();
        let d = prog.dims();
        let za = PrimalDualPoint::from_flat(d, &a);
        let zb = PrimalDualPoint::from_flat(d, &b);
        let fa = vector_field(&prog, &params, &za).unwrap();
        let fb = vector_field(&prog, &params, &zb).unwrap();
        // Crude global bound from the data: ℓ + ρ‖J‖² + 2‖J‖ + 2‖A‖ + 2/ρ with affine g.
        let j = prog.jacobian(&za.x);
        let lip = prog.ell() + spectral_norm(&j).powi(2) + 2.0 * spectral_norm(&j) + 2.0 * spectral_norm(prog.eq_matrix()) + 2.0;
        prop_assert!(fa.distance(&fb) <= lip * za.distance(&zb) + 1e-12);
    }

    #[test]
    fn delta_min_lies_in_unit_interval(d0 in 0.01f64..1e4, rho in 0.01f64..10.0) {
        let prog = make_counterexample();
        let delta = compute_delta_min(&prog, &DVector::zeros(1), &[0], rho, d0).unwrap();
        prop_assert!(delta > 0.0 && delta <= 1.0);
    }

    #[test]
    fn certified_rate_is_non_increasing_in_d0(d1 in 0.1f64..100.0, scale in 1.0f64..20.0) {
        let a = certify(soc(), soc_star(), d1, 1.0).unwrap();
        let b = certify(soc(), soc_star(), d1 * scale, 1.0).unwrap();
        prop_assert!(b.beta <= a.beta * (1.0 + 1e-12));
    }

    #[test]
    fn m_beta_bounded_by_perturbation(c in 1e-9f64..0.05) {
        let z = soc_star();
        let j = soc().jacobian(&z.x);
        let sigma = spectral_norm(&vstack(&j, soc().eq_matrix()));
        prop_assume!(c * sigma < 0.5);
        let lm = build_pc(&j, soc().eq_matrix(), c).unwrap();
        // Eigenvalues of P_c lie within 1 ± cσ.
        prop_assert!(lm.min_eig >= 1.0 - c * sigma - 1e-12);
        prop_assert!(lm.max_eig <= 1.0 + c * sigma + 1e-12);
        prop_assert!(lm.m_beta <= ((1.0 + c * sigma) / (1.0 - c * sigma)).sqrt() + 1e-12);
    }

    #[test]
    fn power_objective_is_strongly_convex(x in vec_strategy(36, 2.0), y in vec_strategy(36, 2.0)) {
        let prog = &power().program;
        let (x, y) = (DVector::from_vec(x), DVector::from_vec(y));
        let gx = prog.eval_objective(&x).1;
        let gy = prog.eval_objective(&y).1;
        let diff = &x - &y;
        let growth = (gx - gy).dot(&diff);
        prop_assert!(growth >= prog.mu() * diff.norm_squared() * (1.0 - 1e-12));
        prop_assert!(growth <= prog.ell() * diff.norm_squared() * (1.0 + 1e-12));
    }

    #[test]
    fn power_constraints_match_finite_differences(x in vec_strategy(36, 2.0)) {
        let prog = &power().program;
        let xv = DVector::from_vec(x.clone());
        for i in (0..prog.m_i()).step_by(7) {
            let fd = fd_gradient(&|v: &[f64]| prog.eval_constraint(i, &DVector::from_row_slice(v)).0, &x, 1e-6);
            prop_assert!(rel_err(prog.eval_constraint(i, &xv).1.as_slice(), &fd) < 1e-6);
        }
    }

    #[test]
    fn voltage_map_superposes(p1 in vec_strategy(18, 3.0), q1 in vec_strategy(18, 3.0), p2 in vec_strategy(18, 3.0), q2 in vec_strategy(18, 3.0)) {
        let m = &power().model;
        let (p1, q1, p2, q2) = (DVector::from_vec(p1), DVector::from_vec(q1), DVector::from_vec(p2), DVector::from_vec(q2));
        let lhs = m.voltages(&(&p1 + &p2), &(&q1 + &q2)) - &m.r;
        let rhs = (m.voltages(&p1, &q1) - &m.r) + (m.voltages(&p2, &q2) - &m.r);
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn voltage_map_matches_branch_flow_walk(p in vec_strategy(18, 3.0), q in vec_strategy(18, 3.0)) {
        let pp = power();
        let cfg = &pp.config;
        let (p, q) = (DVector::from_vec(p), DVector::from_vec(q));
        // Net injections, then line flows as sums over each line's subtree.
        let mut inj_p = cfg.loads.iter().map(|l| -l).collect::<Vec<_>>();
        let mut inj_q = vec![0.0; cfg.buses];
        for (i, inv) in cfg.inverters.iter().enumerate() {
            inj_p[inv.bus] += p[i];
            inj_q[inv.bus] += q[i];
        }
        let children = |b: usize| cfg.lines.iter().filter(move |l| l.from == b).map(|l| l.to);
        fn subtree(b: usize, kids: &dyn Fn(usize) -> Vec<usize>, w: &[f64]) -> f64 {
            w[b] + kids(b).into_iter().map(|c| subtree(c, kids, w)).sum::<f64>()
        }
        let kids = |b: usize| children(b).collect::<Vec<_>>();
        let mut v = vec![f64::NAN; cfg.buses];
        v[0] = cfg.v0 * cfg.v0;
        let mut stack = vec![0usize];
        while let Some(b) = stack.pop() {
            for l in cfg.lines.iter().filter(|l| l.from == b) {
                let pl = subtree(l.to, &kids, &inj_p);
                let ql = subtree(l.to, &kids, &inj_q);
                v[l.to] = v[b] + 2.0 * (l.r * pl + l.x * ql);
                stack.push(l.to);
            }
        }
        let model = pp.model.voltages(&p, &q);
        for j in 1..cfg.buses {
            prop_assert!((model[j - 1] - v[j]).abs() < 1e-12);
        }
    }
}

#[test]
fn eta_scaling_maps_trajectories() {
    let prog = make_random_qp(2, 4, 2, 1, 1.0, 10.0).unwrap();
    let eta = 2.5;
    let params = DynamicsParams::with_eta(0.8, eta).unwrap();
    let (scaled, unit) = apply_eta_scaling(&prog, &params).unwrap();
    assert_eq!(unit.eta, 1.0);
    let z0 = PrimalDualPoint::from_slices(&[1.0, -0.5, 0.3, 2.0], &[0.4, 0.0], &[-1.0]);
    let opts = AdaptiveOptions {
        rel_tol: 1e-11,
        abs_tol: 1e-12,
        n_output: 50,
        ..AdaptiveOptions::default()
    };
    let a = integrate_adaptive(&AugPdgdField::new(&prog, params).unwrap(), &z0, 5.0, &opts).unwrap();
    let b = integrate_adaptive(
        &AugPdgdField::new(&scaled, unit).unwrap(),
        &to_scaled_duals(&z0, eta),
        5.0,
        &opts,
    )
    .unwrap();
    for (za, zb) in a.points.iter().zip(&b.points) {
        assert!(to_scaled_duals(za, eta).distance(zb) < 1e-8);
    }
}

#[test]
fn rk4_converges_with_fourth_order() {
    // Past t = α the clamp stays on one branch, so the field is smooth.
    let cp = CounterexampleParams::new(2.0, 1.0).unwrap();
    let start_t = cp.alpha + 0.5;
    let z0 = closed_form(&cp, start_t).unwrap();
    let prog = make_counterexample();
    let field = AugPdgdField::new(&prog, DynamicsParams::new(1.0).unwrap()).unwrap();
    let err = |dt: f64| {
        let traj = integrate_fixed(&field, &z0, 10.0, dt, Method::Rk4).unwrap();
        traj.last().distance(&closed_form(&cp, start_t + 10.0).unwrap())
    };
    let (e1, e2) = (err(0.2), err(0.1));
    assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
}

#[test]
fn adaptive_and_fixed_agree_on_counterexample() {
    let cp = CounterexampleParams::new(3.0, 1.0).unwrap();
    let prog = make_counterexample();
    let field = AugPdgdField::new(&prog, DynamicsParams::new(1.0).unwrap()).unwrap();
    let z0 = augpdgd::counterexample::initial_point(&cp);
    let t_end = cp.alpha + 10.0;
    let fixed = integrate_fixed(&field, &z0, t_end, 1e-3, Method::Rk4).unwrap();
    let opts = AdaptiveOptions {
        rel_tol: 1e-10,
        abs_tol: 1e-12,
        n_output: 13,
        ..AdaptiveOptions::default()
    };
    let adaptive = integrate_adaptive(&field, &z0, t_end, &opts).unwrap();
    for (t, z) in adaptive.iter() {
        let k = (t / 1e-3).round() as usize;
        assert!((fixed.times[k] - t).abs() < 1e-9);
        assert!(fixed.points[k].distance(z) < 1e-6, "t = {t}");
    }
}

#[test]
fn reference_solution_is_kkt_and_kappa_is_squared_singular_value() {
    for (prog, rho) in [
        (make_soc_demo(), 1.0),
        (make_random_qp(9, 5, 3, 1, 1.0, 10.0).unwrap(), 1.0),
    ] {
        let z = solve_reference_kkt(
            &prog,
            &DynamicsParams::new(rho).unwrap(),
            &PrimalDualPoint::zeros(prog.dims()),
            1e-10,
            1e5,
        )
        .unwrap();
        assert!(kkt_residual(&prog, &z, DEFAULT_TOL_ACTIVE).unwrap().max_residual() <= 1e-10);
        let active = detect_active_set(&prog, &z.x, DEFAULT_TOL_ACTIVE);
        let j = prog.jacobian(&z.x);
        let ji = DMatrix::from_fn(active.len(), prog.n(), |r, c| j[(active[r], c)]);
        let stacked = vstack(&ji, prog.eq_matrix());
        let sigma = stacked.clone().svd(false, false).singular_values.min();
        let cert = certify(&prog, &z, 1.0, rho).unwrap();
        assert!((cert.kappa - sigma * sigma).abs() <= 1e-9 * sigma * sigma);
        assert!((min_singular_value(&stacked) - sigma).abs() <= 1e-9 * sigma);
        if prog.name == "soc" {
            // Only the unit ball is active: κ = ‖2x*‖² = 4.
            assert_eq!(active, vec![0]);
            assert!((cert.kappa - 4.0).abs() < 1e-9);
        }
    }
}

#[test]
fn power_reference_is_feasible() {
    let pp = power();
    let z = power_star();
    let (p, q) = pp.split(&z.x);
    for (i, inv) in pp.config.inverters.iter().enumerate() {
        assert!(p[i] * p[i] + q[i] * q[i] <= inv.s_max * inv.s_max + 1e-6);
        assert!(p[i] >= -1e-6 && p[i] <= pp.p_pv[i] + 1e-6);
    }
    let v = pp.model.voltages(&p, &q);
    assert!(v
        .iter()
        .all(|&vj| vj >= pp.config.v_min - 1e-6 && vj <= pp.config.v_max + 1e-6));
    assert!(z.min_lambda() >= 0.0);
}
