//! Certifies the ball-constrained demo and checks the envelope along a trajectory.

use augpdgd::certify::{annotate, certify, compute_d0, verify_envelope};
use augpdgd::dynamics::{AugPdgdField, DynamicsParams};
use augpdgd::integrate::{integrate_adaptive, AdaptiveOptions};
use augpdgd::problem::{make_soc_demo, solve_reference_kkt, PrimalDualPoint};

fn main() -> augpdgd::Result<()> {
    let rho = 1.0;
    let prog = make_soc_demo();
    let params = DynamicsParams::new(rho)?;
    let start = PrimalDualPoint::from_slices(&[-1.0, 2.0], &[0.5, 0.0], &[]);
    let z_star = solve_reference_kkt(&prog, &params, &start, 1e-10, 1e5)?;
    println!(
        "x* = {:?}, lambda* = {:?}",
        z_star.x.as_slice(),
        z_star.lambda.as_slice()
    );

    let d0 = compute_d0(&start, &z_star)?;
    let cert = certify(&prog, &z_star, d0, rho)?;
    println!(
        "d0 = {d0:.4}, beta = {:.3e}, M_beta = {:.8}, active set {:?}",
        cert.beta, cert.m_beta, cert.active_set
    );

    let field = AugPdgdField::new(&prog, params)?;
    let opts = AdaptiveOptions {
        n_output: 2000,
        ..AdaptiveOptions::default()
    };
    let mut traj = integrate_adaptive(&field, &start, 30.0, &opts)?;
    annotate(&mut traj, &cert, &z_star);
    let report = verify_envelope(&traj, &cert, &z_star)?;
    println!(
        "max distance/envelope {:.6}, decay excess {:.2e}: {}",
        report.max_ratio,
        report.max_decay_excess,
        if report.passed { "holds" } else { "violated" }
    );
    for d in [1.0, 2.0, 5.0, 10.0, 50.0] {
        println!("  d0 = {d:>4}: beta = {:.3e}", certify(&prog, &z_star, d, rho)?.beta);
    }
    Ok(())
}
