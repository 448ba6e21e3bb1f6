//! Integrates the counterexample for a few plateau lengths and compares the
//! squared-distance integral with what any (M, ξ) envelope would allow.

use augpdgd::counterexample::{closed_form, demonstrate_nonexponential, initial_point, CounterexampleParams};
use augpdgd::dynamics::{AugPdgdField, DynamicsParams};
use augpdgd::integrate::{integrate_adaptive, AdaptiveOptions};
use augpdgd::problem::make_counterexample;

fn main() -> augpdgd::Result<()> {
    let rho = 1.0;
    let prog = make_counterexample();
    let field = AugPdgdField::new(&prog, DynamicsParams::new(rho)?)?;
    for alpha in [1.0, 5.0, 10.0] {
        let cp = CounterexampleParams::new(alpha, rho)?;
        let traj = integrate_adaptive(&field, &initial_point(&cp), alpha + 20.0, &AdaptiveOptions::default())?;
        let mut worst: f64 = 0.0;
        for (t, z) in traj.iter() {
            worst = worst.max(z.distance(&closed_form(&cp, t)?));
        }
        println!("alpha = {alpha:>4}: max deviation from the exact solution {worst:.2e}");
    }

    let alphas: Vec<f64> = (0..=6).map(|k| 10f64.powi(k)).collect();
    let report = demonstrate_nonexponential(&alphas, rho, 2.0, 0.1)?;
    println!(
        "\n{:>10} {:>14} {:>14} {:>10}",
        "alpha", "integral", "envelope", "ratio"
    );
    for r in &report.rows {
        println!(
            "{:>10.0e} {:>14.6e} {:>14.6e} {:>10.4}",
            r.alpha, r.integral, r.envelope_bound, r.ratio
        );
    }
    if let Some(a) = report.crossover_alpha {
        println!("(M, xi) = (2, 0.1) is violated from alpha = {a:.4} on");
    }
    Ok(())
}
