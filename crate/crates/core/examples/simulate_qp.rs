//! Runs the flow on a random QP and reports the KKT residual over time.

use augpdgd::dynamics::{AugPdgdField, DynamicsParams};
use augpdgd::integrate::{integrate_adaptive, AdaptiveOptions};
use augpdgd::problem::{kkt_residual, make_random_qp, PrimalDualPoint, DEFAULT_TOL_ACTIVE};

fn main() -> augpdgd::Result<()> {
    let prog = make_random_qp(7, 6, 4, 2, 1.0, 10.0)?;
    let field = AugPdgdField::new(&prog, DynamicsParams::new(1.0)?)?;
    let opts = AdaptiveOptions {
        n_output: 10,
        ..AdaptiveOptions::default()
    };
    let traj = integrate_adaptive(&field, &PrimalDualPoint::zeros(prog.dims()), 40.0, &opts)?;
    for (t, z) in traj.iter() {
        let r = kkt_residual(&prog, z, DEFAULT_TOL_ACTIVE)?;
        println!(
            "t = {t:>5.1}  residual {:.3e}  active {:?}",
            r.max_residual(),
            r.active_set
        );
    }
    println!("x(T) = {:?}", traj.last().x.as_slice());
    Ok(())
}
