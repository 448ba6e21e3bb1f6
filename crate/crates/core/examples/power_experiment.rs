//! Reduced power-curtailment run on the built-in 36-bus feeder.

use augpdgd::dynamics::DynamicsParams;
use augpdgd::powercurtail::{make_power_curtailment, run_experiment, ExperimentOptions, FeederConfig};
use augpdgd::problem::{detect_active_set, solve_reference_kkt, PrimalDualPoint, DEFAULT_TOL_ACTIVE};

fn main() -> augpdgd::Result<()> {
    let pp = make_power_curtailment(&FeederConfig::synthetic_36(), 4.0)?;
    let prog = &pp.program;
    let opts = ExperimentOptions {
        instances_per_ratio: 3,
        ..ExperimentOptions::default()
    };
    let z_star = solve_reference_kkt(
        prog,
        &DynamicsParams::new(opts.rho)?,
        &PrimalDualPoint::zeros(prog.dims()),
        1e-10,
        1e5,
    )?;
    let (p, q) = pp.split(&z_star.x);
    println!("curtailed real power {:.4} of {:.4} available", p.sum(), pp.p_pv.sum());
    println!("reactive injection {:.4}", q.sum());
    let v = pp.model.voltages(&p, &q);
    println!("voltage^2 range [{:.5}, {:.5}]", v.min(), v.max());
    println!(
        "active constraints {:?}",
        detect_active_set(prog, &z_star.x, DEFAULT_TOL_ACTIVE)
    );

    let report = run_experiment(prog, &z_star, &opts)?;
    for s in &report.summaries {
        println!(
            "ratio {:>4}: early rate {:.4}, worst final distance {:.1e}",
            s.ratio,
            s.mean_early_rate.unwrap_or(f64::NAN),
            s.max_final_normalized
        );
    }
    Ok(())
}
