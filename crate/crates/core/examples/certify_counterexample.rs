//! The hand-checkable certificate: counterexample, ρ = 1, d0 = 1.

use augpdgd::certify::certify;
use augpdgd::problem::{make_counterexample, PrimalDualPoint};

fn main() -> augpdgd::Result<()> {
    let prog = make_counterexample();
    let cert = certify(&prog, &PrimalDualPoint::zeros(prog.dims()), 1.0, 1.0)?;
    println!("kappa     = {}", cert.kappa);
    println!("delta_min = {}", cert.delta_min);
    println!("M_theta   = {}", cert.m_theta);
    println!("beta      = {} (1/92 = {})", cert.beta, 1.0 / 92.0);
    println!("c         = {}", cert.c);
    println!("M_beta    = {}", cert.m_beta);
    Ok(())
}
