//! Augmented Lagrangian and the augmented primal-dual gradient vector field.
//!
//! ```text
//! L_ρ(x, λ, ν) = f(x) + Θ_ρ(x, λ) + νᵀ(Ax − b)
//! Θ_ρ(x, λ)    = Σ_i ([ρ g_i(x) + λ_i]_+² − λ_i²) / (2ρ)
//!
//! ẋ = −∇f(x) − Aᵀν − Σ_i [ρ g_i(x) + λ_i]_+ ∇g_i(x)
//! λ̇ = η (1/ρ) ([ρ g(x) + λ]_+ − λ)
//! ν̇ = η (Ax − b)
//! ```
//!
//! The clamp makes the field continuous but only piecewise smooth; λ is never
//! projected.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::Field;
use crate::problem::{ConvexProgram, Dims, PrimalDualPoint};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DynamicsParams {
    /// Penalty parameter ρ > 0.
    pub rho: f64,
    /// Dual-rate scale η > 0.
    pub eta: f64,
}

impl DynamicsParams {
    pub fn new(rho: f64) -> Result<Self> {
        Self::with_eta(rho, 1.0)
    }

    pub fn with_eta(rho: f64, eta: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::contract(format!("rho must be positive, got {rho}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::contract(format!("eta must be positive, got {eta}")));
        }
        Ok(DynamicsParams { rho, eta })
    }
}

/// `[s]_+ = max(s, 0)`.
#[inline]
pub fn plus_part(s: f64) -> f64 {
    if s > 0.0 {
        s
    } else {
        0.0
    }
}

pub fn theta_rho(prog: &ConvexProgram, params: &DynamicsParams, x: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
    let rho = params.rho;
    prog.inequalities()
        .iter()
        .zip(lambda.iter())
        .map(|(g, &l)| {
            let s = plus_part(rho * g.func.value(x) + l);
            (s * s - l * l) / (2.0 * rho)
        })
        .sum()
}

/// `L_ρ(x, λ, ν)`.
pub fn augmented_lagrangian(prog: &ConvexProgram, params: &DynamicsParams, z: &PrimalDualPoint) -> Result<f64> {
    prog.check_point(z)?;
    Ok(prog.objective().value(&z.x) + theta_rho(prog, params, &z.x, &z.lambda) + z.nu.dot(&prog.eq_residual(&z.x)))
}

fn field_into(prog: &ConvexProgram, params: &DynamicsParams, z: &[f64], dz: &mut [f64]) {
    let Dims { n, m_i, m_e } = prog.dims();
    let x = DVector::from_column_slice(&z[..n]);
    let lambda = &z[n..n + m_i];
    let nu = DVector::from_column_slice(&z[n + m_i..]);
    let rho = params.rho;
    let eta = params.eta;

    let mut xdot = -prog.objective().gradient(&x);
    if m_e > 0 {
        xdot.gemv_tr(-1.0, prog.eq_matrix(), &nu, 1.0);
    }
    for (i, g) in prog.inequalities().iter().enumerate() {
        let w = plus_part(rho * g.func.value(&x) + lambda[i]);
        if w != 0.0 {
            g.func.add_scaled_gradient(&x, -w, &mut xdot);
        }
        dz[n + i] = eta * (w - lambda[i]) / rho;
    }
    dz[..n].copy_from_slice(xdot.as_slice());
    if m_e > 0 {
        let r = prog.eq_residual(&x);
        for (d, r) in dz[n + m_i..].iter_mut().zip(r.iter()) {
            *d = eta * r;
        }
    }
}

/// `(ẋ, λ̇, ν̇)` at `z`, returned as a point of the same shape.
pub fn vector_field(prog: &ConvexProgram, params: &DynamicsParams, z: &PrimalDualPoint) -> Result<PrimalDualPoint> {
    prog.check_point(z)?;
    let flat = z.to_vec();
    let mut out = vec![0.0; flat.len()];
    field_into(prog, params, &flat, &mut out);
    Ok(PrimalDualPoint::from_flat(z.dims(), &out))
}

/// Folds η into the problem: `g → √η g`, `A → √η A`, `b → √η b`, `ρ → ρ/η`.
///
/// Unit-rate trajectories of the result, in the variables `λ/√η`, `ν/√η`,
/// coincide with the η-scaled trajectories of the input (see [`to_scaled_duals`]).
pub fn apply_eta_scaling(prog: &ConvexProgram, params: &DynamicsParams) -> Result<(ConvexProgram, DynamicsParams)> {
    let eta = params.eta;
    if !(eta > 0.0) {
        return Err(Error::contract("eta must be positive"));
    }
    if eta == 1.0 {
        return Ok((prog.clone(), *params));
    }
    let s = eta.sqrt();
    let scaled = prog.with_scaled_constraints(s, format!("{}-eta{eta}", prog.name));
    Ok((scaled, DynamicsParams::with_eta(params.rho / eta, 1.0)?))
}

/// Maps `(x, λ, ν) → (x, λ/√η, ν/√η)`.
pub fn to_scaled_duals(z: &PrimalDualPoint, eta: f64) -> PrimalDualPoint {
    let s = eta.sqrt();
    PrimalDualPoint::new(z.x.clone(), &z.lambda / s, &z.nu / s)
}

/// The flow as an integrable [`Field`].
#[derive(Clone, Debug)]
pub struct AugPdgdField<'a> {
    prog: &'a ConvexProgram,
    params: DynamicsParams,
}

impl<'a> AugPdgdField<'a> {
    pub fn new(prog: &'a ConvexProgram, params: DynamicsParams) -> Result<Self> {
        DynamicsParams::with_eta(params.rho, params.eta)?;
        Ok(AugPdgdField { prog, params })
    }

    pub fn program(&self) -> &ConvexProgram {
        self.prog
    }

    pub fn params(&self) -> &DynamicsParams {
        &self.params
    }
}

impl Field for AugPdgdField<'_> {
    fn dims(&self) -> Dims {
        self.prog.dims()
    }

    fn eval(&self, z: &[f64], dz: &mut [f64]) {
        field_into(self.prog, &self.params, z, dz);
    }
}
