use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ConvexProgram, Inequality};

const SAMPLE_PAIRS: usize = 1000;
const INFLATION: f64 = 1.1;

/// Constraint smoothness constants over the ball `‖x − x*‖ ≤ d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessBounds {
    /// Per-constraint gradient-norm bounds `L_{g,i}`.
    pub l_each: Vec<f64>,
    /// Per-constraint gradient Lipschitz constants `M_{g,i}`.
    pub m_each: Vec<f64>,
    /// `√Σ L_{g,i}²`.
    pub l_g: f64,
    /// `√Σ M_{g,i}²`.
    pub m_g: f64,
    /// Set when at least one pair was estimated by sampling.
    pub heuristic: bool,
}

impl SmoothnessBounds {
    pub fn for_program(prog: &ConvexProgram, x_star: &DVector<f64>, d: f64) -> Self {
        let mut l_each = Vec::with_capacity(prog.m_i());
        let mut m_each = Vec::with_capacity(prog.m_i());
        let mut heuristic = false;
        for (i, g) in prog.inequalities().iter().enumerate() {
            let (l, m) = match g.smoothness(x_star, d) {
                Some(lm) => lm,
                None => {
                    heuristic = true;
                    estimate_bounds(g, x_star, d, 0x5eed ^ i as u64)
                }
            };
            l_each.push(l);
            m_each.push(m);
        }
        let l_g = l_each.iter().map(|v| v * v).sum::<f64>().sqrt();
        let m_g = m_each.iter().map(|v| v * v).sum::<f64>().sqrt();
        SmoothnessBounds {
            l_each,
            m_each,
            l_g,
            m_g,
            heuristic,
        }
    }
}

fn sample_ball(rng: &mut ChaCha8Rng, center: &DVector<f64>, radius: f64) -> DVector<f64> {
    let n = center.len();
    let dir = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = dir.norm();
    if norm == 0.0 {
        return center.clone();
    }
    let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
    center + dir * (r / norm)
}

/// Sampling estimate of `(L_{g,i}(d), M_{g,i}(d))`: maxima over 1000 random
/// pairs in the ball, inflated by 10%. Not a rigorous bound.
pub fn estimate_bounds(g: &Inequality, x_star: &DVector<f64>, d: f64, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut l: f64 = g.func.gradient(x_star).norm();
    let mut m: f64 = 0.0;
    for _ in 0..SAMPLE_PAIRS {
        let a = sample_ball(&mut rng, x_star, d);
        let b = sample_ball(&mut rng, x_star, d);
        let ga = g.func.gradient(&a);
        let gb = g.func.gradient(&b);
        l = l.max(ga.norm()).max(gb.norm());
        let dx = (&a - &b).norm();
        if dx > 1e-12 {
            m = m.max((ga - gb).norm() / dx);
        }
    }
    (INFLATION * l, INFLATION * m)
}
