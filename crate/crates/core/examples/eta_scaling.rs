//! The dual step η can be folded into the problem: the scaled program at unit
//! rate traces the same primal path.

use augpdgd::dynamics::{apply_eta_scaling, to_scaled_duals, AugPdgdField, DynamicsParams};
use augpdgd::integrate::{integrate_adaptive, AdaptiveOptions};
use augpdgd::problem::{make_soc_demo, PrimalDualPoint};

fn main() -> augpdgd::Result<()> {
    let prog = make_soc_demo();
    let z0 = PrimalDualPoint::from_slices(&[0.0, -1.0], &[1.0, 0.0], &[]);
    let opts = AdaptiveOptions {
        rel_tol: 1e-11,
        abs_tol: 1e-12,
        n_output: 5,
        ..AdaptiveOptions::default()
    };
    for eta in [0.5, 1.0, 4.0] {
        let params = DynamicsParams::with_eta(1.0, eta)?;
        let (scaled, unit) = apply_eta_scaling(&prog, &params)?;
        let a = integrate_adaptive(&AugPdgdField::new(&prog, params)?, &z0, 10.0, &opts)?;
        let b = integrate_adaptive(
            &AugPdgdField::new(&scaled, unit)?,
            &to_scaled_duals(&z0, eta),
            10.0,
            &opts,
        )?;
        let gap = a
            .points
            .iter()
            .zip(&b.points)
            .map(|(za, zb)| to_scaled_duals(za, eta).distance(zb))
            .fold(0.0, f64::max);
        println!(
            "eta = {eta}: x(10) = {:?}, max gap to folded run {gap:.1e}",
            a.last().x.as_slice()
        );
    }
    Ok(())
}
