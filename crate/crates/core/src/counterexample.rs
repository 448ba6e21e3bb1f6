//! The scalar program `min ½x² s.t. x ≤ 1, x = 0`, whose Aug-PDGD flow is
//! asymptotically but not globally exponentially stable.
//!
//! From `z(0) = (½, (α+ρ)/2, −(α+1)/2)` the constraint stays inactive and the
//! trajectory drifts linearly for time `α` before entering its exponential
//! phase, so `∫₀^∞ ‖z(t)‖² dt` grows like `α³` while any exponential envelope
//! `M e^{−ξt}‖z(0)‖` only integrates to `O(α²)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::PrimalDualPoint;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CounterexampleParams {
    pub alpha: f64,
    pub rho: f64,
}

impl CounterexampleParams {
    pub fn new(alpha: f64, rho: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::contract(format!("alpha must be positive, got {alpha}")));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::contract(format!("rho must be positive, got {rho}")));
        }
        Ok(CounterexampleParams { alpha, rho })
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::contract(format!("t must be a finite nonnegative time, got {t}")))
    }
}

/// Exact solution at time `t`. The junction `t = α` uses the linear branch.
pub fn closed_form(p: &CounterexampleParams, t: f64) -> Result<PrimalDualPoint> {
    check_time(t)?;
    let CounterexampleParams { alpha, rho } = *p;
    let z = if t <= alpha {
        PrimalDualPoint::from_slices(&[0.5], &[(alpha + rho - t) / 2.0], &[(t - alpha - 1.0) / 2.0])
    } else {
        let s = t - alpha;
        let r3 = 3f64.sqrt();
        let amp = r3 / 3.0 * (-s / 2.0).exp();
        let w = r3 * s / 2.0;
        PrimalDualPoint::from_slices(
            &[amp * (w + PI / 3.0).sin()],
            &[rho / 2.0 * (-s / rho).exp()],
            &[amp * (w - PI / 3.0).sin()],
        )
    };
    Ok(z)
}

/// `z(0)` for the given plateau length.
pub fn initial_point(p: &CounterexampleParams) -> PrimalDualPoint {
    PrimalDualPoint::from_slices(&[0.5], &[(p.alpha + p.rho) / 2.0], &[-(p.alpha + 1.0) / 2.0])
}

/// `h_α(t) = ‖z(t) − z*‖²` with `z* = 0`.
pub fn h_alpha(p: &CounterexampleParams, t: f64) -> Result<f64> {
    check_time(t)?;
    let CounterexampleParams { alpha, rho } = *p;
    Ok(if t <= alpha {
        0.25 * (1.0 + (alpha + rho - t).powi(2) + (t - alpha - 1.0).powi(2))
    } else {
        let s = t - alpha;
        rho * rho / 4.0 * (-2.0 * s / rho).exp() + (-s).exp() * (2.0 + (3f64.sqrt() * s).cos()) / 6.0
    })
}

/// `∫₀^∞ h_α(t) dt = α³/6 + (ρ+1)α²/4 + (2+ρ²)α/4 + (3+ρ³)/8`.
pub fn h_alpha_integral(p: &CounterexampleParams) -> f64 {
    let CounterexampleParams { alpha: a, rho: r } = *p;
    a.powi(3) / 6.0 + (r + 1.0) * a * a / 4.0 + (2.0 + r * r) * a / 4.0 + (3.0 + r.powi(3)) / 8.0
}

/// `∫₀^∞ (M e^{−ξt} ‖z(0)‖)² dt = (M²/2ξ)·¼(1 + (α+ρ)² + (α+1)²)`.
pub fn envelope_integral(p: &CounterexampleParams, m: f64, xi: f64) -> f64 {
    let CounterexampleParams { alpha: a, rho: r } = *p;
    m * m / (2.0 * xi) * 0.25 * (1.0 + (a + r).powi(2) + (a + 1.0).powi(2))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonexpRow {
    pub alpha: f64,
    pub integral: f64,
    pub envelope_bound: f64,
    /// `integral / envelope_bound`; above 1 means no `(M, ξ)` envelope holds from this start.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonexpReport {
    pub rho: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub xi: f64,
    pub rows: Vec<NonexpRow>,
    /// Smallest α on a geometric scan of `[1e-3, 1e9]` with ratio ≥ 1, refined by bisection.
    pub crossover_alpha: Option<f64>,
}

fn ratio_at(alpha: f64, rho: f64, m: f64, xi: f64) -> f64 {
    let p = CounterexampleParams { alpha, rho };
    h_alpha_integral(&p) / envelope_integral(&p, m, xi)
}

fn find_crossover(rho: f64, m: f64, xi: f64) -> Option<f64> {
    let grid: Vec<f64> = (0..=240).map(|k| 1e-3 * 10f64.powf(k as f64 / 20.0)).collect();
    let first = grid.iter().position(|&a| ratio_at(a, rho, m, xi) >= 1.0)?;
    if first == 0 {
        return Some(grid[0]);
    }
    let (mut lo, mut hi) = (grid[first - 1], grid[first]);
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if ratio_at(mid, rho, m, xi) >= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Compares the actual squared-distance integral with the best an exponential
/// envelope `(M, ξ)` could allow, for each α.
pub fn demonstrate_nonexponential(alphas: &[f64], rho: f64, m: f64, xi: f64) -> Result<NonexpReport> {
    if alphas.is_empty() {
        return Err(Error::contract("alpha list is empty"));
    }
    if alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::contract("alphas must be strictly increasing"));
    }
    if !(m > 0.0 && xi > 0.0) {
        return Err(Error::contract("M and xi must be positive"));
    }
    let rows = alphas
        .iter()
        .map(|&alpha| {
            let p = CounterexampleParams::new(alpha, rho)?;
            let integral = h_alpha_integral(&p);
            let envelope_bound = envelope_integral(&p, m, xi);
            Ok(NonexpRow {
                alpha,
                integral,
                envelope_bound,
                ratio: integral / envelope_bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NonexpReport {
        rho,
        m,
        xi,
        rows,
        crossover_alpha: find_crossover(rho, m, xi),
    })
}
