//! Numerical integration of autonomous flows `ż = F(z)` on primal-dual states.
//!
//! Two families: classic fixed-step Euler/RK4, and the Dormand–Prince 5(4)
//! embedded pair with a PI step-size controller. The adaptive driver lands
//! exactly on a uniform output grid, so samples need no interpolation. Kinks
//! of the clamped field are handled by step rejection only.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::problem::{kkt_residual, ConvexProgram, Dims, PrimalDualPoint, DEFAULT_TOL_ACTIVE};

/// An autonomous vector field on stacked `(x, λ, ν)` states.
pub trait Field: Sync {
    fn dims(&self) -> Dims;
    fn eval(&self, z: &[f64], dz: &mut [f64]);
}

/// Wraps a closure as a [`Field`].
pub struct FnField<F> {
    dims: Dims,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    pub fn new(dims: Dims, f: F) -> Self {
        FnField { dims, f }
    }
}

impl<F> Field for FnField<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    fn dims(&self) -> Dims {
        self.dims
    }

    fn eval(&self, z: &[f64], dz: &mut [f64]) {
        (self.f)(z, dz)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    Euler,
    Rk4,
}

/// Time-stamped states with optional diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub dims: Dims,
    pub times: Vec<f64>,
    pub points: Vec<PrimalDualPoint>,
    /// `‖z(t) − z*‖` per sample, once a reference is attached.
    pub dist_to_ref: Option<Vec<f64>>,
    /// `V_c(z(t))` per sample, once a certificate is attached.
    pub lyapunov: Option<Vec<f64>>,
}

impl Trajectory {
    fn new(dims: Dims) -> Self {
        Trajectory {
            dims,
            times: Vec::new(),
            points: Vec::new(),
            dist_to_ref: None,
            lyapunov: None,
        }
    }

    fn push(&mut self, t: f64, y: &[f64]) {
        self.times.push(t);
        self.points.push(PrimalDualPoint::from_flat(self.dims, y));
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &PrimalDualPoint {
        self.points.last().expect("trajectories hold at least one sample")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &PrimalDualPoint)> {
        self.times.iter().copied().zip(self.points.iter())
    }

    pub fn attach_reference(&mut self, z_star: &PrimalDualPoint) {
        self.dist_to_ref = Some(self.points.iter().map(|z| z.distance(z_star)).collect());
    }

    pub fn attach_lyapunov(&mut self, values: Vec<f64>) {
        assert_eq!(values.len(), self.len(), "one Lyapunov value per sample");
        self.lyapunov = Some(values);
    }

    /// `min_t min_i λ_i(t)`; `+∞` without inequalities.
    pub fn min_lambda(&self) -> f64 {
        self.points
            .iter()
            .map(PrimalDualPoint::min_lambda)
            .fold(f64::INFINITY, f64::min)
    }

    /// `max_t ‖z(t) − z*‖ / ‖z(0) − z*‖` (1 when starting at `z*`).
    pub fn max_expansion_ratio(&self, z_star: &PrimalDualPoint) -> f64 {
        let d0 = self.points[0].distance(z_star);
        if d0 == 0.0 {
            let moved = self.points.iter().any(|z| z.distance(z_star) > 0.0);
            return if moved { f64::INFINITY } else { 1.0 };
        }
        self.points.iter().map(|z| z.distance(z_star) / d0).fold(0.0, f64::max)
    }

    /// CSV with header `t,x_0..,lambda_0..,nu_0..[,dist][,V_c]`.
    pub fn to_csv(&self) -> String {
        let Dims { n, m_i, m_e } = self.dims;
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("x_{i}")));
        header.extend((0..m_i).map(|i| format!("lambda_{i}")));
        header.extend((0..m_e).map(|i| format!("nu_{i}")));
        if self.dist_to_ref.is_some() {
            header.push("dist".into());
        }
        if self.lyapunov.is_some() {
            header.push("V_c".into());
        }
        let mut table = CsvTable::new(&header);
        for (k, (t, z)) in self.iter().enumerate() {
            let mut row = vec![t];
            row.extend(z.to_vec());
            if let Some(d) = &self.dist_to_ref {
                row.push(d[k]);
            }
            if let Some(v) = &self.lyapunov {
                row.push(v[k]);
            }
            table.push_row(&[], row);
        }
        table.into_string()
    }
}

fn check_start(dims: Dims, z0: &PrimalDualPoint, t_end: f64) -> Result<()> {
    if z0.dims() != dims {
        return Err(Error::contract(format!(
            "initial point dimensions {:?} do not match field {:?}",
            z0.dims(),
            dims
        )));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::contract(format!(
            "t_end must be positive and finite, got {t_end}"
        )));
    }
    if z0.lambda.iter().any(|&l| l < 0.0) {
        return Err(Error::contract("initial multipliers must be nonnegative"));
    }
    if !z0.is_finite() {
        return Err(Error::contract("initial point is not finite"));
    }
    Ok(())
}

fn all_finite(y: &[f64]) -> bool {
    y.iter().all(|v| v.is_finite())
}

/// Fixed-step integration with a sample at every step; the final step is
/// shortened to land on `t_end`.
pub fn integrate_fixed<F: Field + ?Sized>(
    field: &F,
    z0: &PrimalDualPoint,
    t_end: f64,
    dt: f64,
    method: Method,
) -> Result<Trajectory> {
    check_start(field.dims(), z0, t_end)?;
    if !(dt > 0.0) {
        return Err(Error::contract(format!("dt must be positive, got {dt}")));
    }
    let dims = field.dims();
    let dim = dims.total();
    let mut traj = Trajectory::new(dims);
    let mut y = z0.to_vec();
    traj.push(0.0, &y);
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
    );
    for s in 0..steps {
        let t = s as f64 * dt;
        let t_next = if s + 1 == steps { t_end } else { (s + 1) as f64 * dt };
        let h = t_next - t;
        match method {
            Method::Euler => {
                field.eval(&y, &mut k1);
                for (yi, ki) in y.iter_mut().zip(&k1) {
                    *yi += h * ki;
                }
            }
            Method::Rk4 => {
                field.eval(&y, &mut k1);
                axpy_into(&mut tmp, &y, 0.5 * h, &k1);
                field.eval(&tmp, &mut k2);
                axpy_into(&mut tmp, &y, 0.5 * h, &k2);
                field.eval(&tmp, &mut k3);
                axpy_into(&mut tmp, &y, h, &k3);
                field.eval(&tmp, &mut k4);
                for i in 0..dim {
                    y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        if !all_finite(&y) {
            return Err(Error::Divergence {
                t: t_next,
                last_finite: Box::new(traj.last().clone()),
            });
        }
        traj.push(t_next, &y);
    }
    Ok(traj)
}

fn axpy_into(out: &mut [f64], y: &[f64], a: f64, k: &[f64]) {
    for ((o, y), k) in out.iter_mut().zip(y).zip(k) {
        *o = y + a * k;
    }
}

/// Controls for [`integrate_adaptive`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdaptiveOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Number of uniform output intervals on `[0, t_end]`.
    pub n_output: usize,
    /// Also record every accepted step.
    pub record_steps: bool,
    pub initial_step: Option<f64>,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            rel_tol: 1e-9,
            abs_tol: 1e-9,
            n_output: 200,
            record_steps: false,
            initial_step: None,
            max_step: f64::INFINITY,
            max_steps: 20_000_000,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const _: () = assert!(C2 < C3 && C3 < C4 && C4 < C5);

const SAFETY: f64 = 0.9;
const PI_BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Outcome of the observer callback: keep going or stop at this sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Control {
    Continue,
    Stop,
}

struct Dopri5Work {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl Dopri5Work {
    fn new(dim: usize) -> Self {
        Dopri5Work {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
            y_new: vec![0.0; dim],
        }
    }

    /// One trial step from `y` (with `k[0] = F(y)`); returns the scaled error norm.
    fn step<F: Field + ?Sized>(&mut self, field: &F, y: &[f64], h: f64, opts: &AdaptiveOptions) -> f64 {
        let dim = y.len();
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;
        for i in 0..dim {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        field.eval(tmp, k2);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        field.eval(tmp, k3);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        field.eval(tmp, k4);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        field.eval(tmp, k5);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        field.eval(tmp, k6);
        for i in 0..dim {
            self.y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        field.eval(&self.y_new, k7);
        let mut acc = 0.0;
        for i in 0..dim {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(self.y_new[i].abs());
            acc += (e / sc) * (e / sc);
        }
        if dim == 0 {
            0.0
        } else {
            (acc / dim as f64).sqrt()
        }
    }
}

fn initial_step<F: Field + ?Sized>(field: &F, y: &[f64], f0: &[f64], opts: &AdaptiveOptions, span: f64) -> f64 {
    if let Some(h) = opts.initial_step {
        return h.min(span);
    }
    let dim = y.len().max(1) as f64;
    let (mut d0, mut d1) = (0.0, 0.0);
    for (yi, fi) in y.iter().zip(f0) {
        let sc = opts.abs_tol + opts.rel_tol * yi.abs();
        d0 += (yi / sc).powi(2);
        d1 += (fi / sc).powi(2);
    }
    let (d0, d1) = ((d0 / dim).sqrt(), (d1 / dim).sqrt());
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    // Second derivative estimate from an explicit Euler probe.
    let y1: Vec<f64> = y.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y.len()];
    field.eval(&y1, &mut f1);
    let mut d2 = 0.0;
    for ((yi, a), b) in y.iter().zip(f0).zip(&f1) {
        let sc = opts.abs_tol + opts.rel_tol * yi.abs();
        d2 += ((b - a) / sc).powi(2);
    }
    let d2 = (d2 / dim).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span).min(opts.max_step)
}

/// Shared adaptive driver. `observe` runs on every accepted state (and at
/// `t = 0`); returning [`Control::Stop`] ends the run there.
pub(crate) fn run_adaptive<F, O>(
    field: &F,
    z0: &PrimalDualPoint,
    t_end: f64,
    opts: &AdaptiveOptions,
    mut observe: O,
) -> Result<(Trajectory, bool)>
where
    F: Field + ?Sized,
    O: FnMut(f64, &[f64]) -> Control,
{
    check_start(field.dims(), z0, t_end)?;
    if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0) {
        return Err(Error::contract("tolerances must be positive"));
    }
    let dims = field.dims();
    let dim = dims.total();
    let n_out = opts.n_output.max(1);
    let grid = |k: usize| {
        if k == n_out {
            t_end
        } else {
            t_end * k as f64 / n_out as f64
        }
    };

    let mut traj = Trajectory::new(dims);
    let mut y = z0.to_vec();
    traj.push(0.0, &y);
    if observe(0.0, &y) == Control::Stop {
        return Ok((traj, true));
    }

    let mut work = Dopri5Work::new(dim);
    field.eval(&y, &mut work.k[0]);
    let mut t = 0.0;
    let mut next_out = 1;
    let mut h = initial_step(field, &y, &work.k[0], opts, t_end);
    let mut err_old: f64 = 1e-4;
    let mut steps = 0usize;
    let mut rejected_last = false;

    while next_out <= n_out {
        if steps >= opts.max_steps {
            return Err(Error::StepLimit { t, steps });
        }
        let target = grid(next_out);
        let h_natural = h.min(opts.max_step);
        let remaining = target - t;
        let (h_try, hits_output) = if h_natural >= remaining * (1.0 - 1e-12) {
            (remaining, true)
        } else {
            (h_natural, false)
        };
        let h_min = 1e-13 * t.abs().max(1.0);
        if h_try < h_min && !hits_output {
            return Err(Error::StepUnderflow { t, h: h_try });
        }

        let err = work.step(field, &y, h_try, opts);
        steps += 1;

        if err.is_finite() && err <= 1.0 {
            // Accept.
            t = if hits_output { target } else { t + h_try };
            std::mem::swap(&mut y, &mut work.y_new);
            if !all_finite(&y) {
                return Err(Error::Divergence {
                    t,
                    last_finite: Box::new(traj.last().clone()),
                });
            }
            let [k1, .., k7] = &mut work.k;
            std::mem::swap(k1, k7);

            let fac11 = err.max(1e-16).powf(0.2 - 0.75 * PI_BETA);
            let fac = fac11 / err_old.powf(PI_BETA);
            let fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h_try / fac;
            if rejected_last {
                h_new = h_new.min(h_try);
            }
            err_old = err.max(1e-4);
            rejected_last = false;
            // A step clipped onto the output grid keeps the controller's earlier proposal.
            let clipped = hits_output && h_try < h_natural;
            h = if clipped { h_natural } else { h_new };

            let on_grid = hits_output;
            if on_grid {
                next_out += 1;
            }
            if on_grid || opts.record_steps {
                traj.push(t, &y);
            }
            if observe(t, &y) == Control::Stop {
                if !(on_grid || opts.record_steps) {
                    traj.push(t, &y);
                }
                return Ok((traj, true));
            }
        } else {
            rejected_last = true;
            if !err.is_finite() {
                h = h_try * 0.1;
                if !all_finite(&work.y_new) && h < h_min {
                    return Err(Error::Divergence {
                        t,
                        last_finite: Box::new(traj.last().clone()),
                    });
                }
            } else {
                let fac11 = err.powf(0.2 - 0.75 * PI_BETA);
                h = h_try / (fac11 / SAFETY).min(1.0 / FAC_MIN);
            }
        }
    }
    Ok((traj, false))
}

/// Adaptive Dormand–Prince 5(4) integration on `[0, t_end]`, sampled on a
/// uniform grid of `opts.n_output` intervals (plus every accepted step when
/// `opts.record_steps`).
pub fn integrate_adaptive<F: Field + ?Sized>(
    field: &F,
    z0: &PrimalDualPoint,
    t_end: f64,
    opts: &AdaptiveOptions,
) -> Result<Trajectory> {
    run_adaptive(field, z0, t_end, opts, |_, _| Control::Continue).map(|(traj, _)| traj)
}

/// Integrates until every KKT residual of `prog` is at most `residual_tol`.
///
/// The returned trajectory ends at the converged state. Running past
/// `max_time` yields [`Error::Timeout`] carrying the lowest-residual state seen.
pub fn integrate_until_converged<F: Field + ?Sized>(
    field: &F,
    prog: &ConvexProgram,
    z0: &PrimalDualPoint,
    residual_tol: f64,
    max_time: f64,
    opts: &AdaptiveOptions,
) -> Result<(Trajectory, PrimalDualPoint)> {
    if field.dims() != prog.dims() {
        return Err(Error::contract("field and program dimensions differ"));
    }
    let dims = prog.dims();
    let mut best = (f64::INFINITY, z0.clone(), 0.0);
    let (traj, stopped) = run_adaptive(field, z0, max_time, opts, |t, y| {
        let z = PrimalDualPoint::from_flat(dims, y);
        let r = kkt_residual(prog, &z, DEFAULT_TOL_ACTIVE)
            .map(|k| k.max_residual())
            .unwrap_or(f64::INFINITY);
        if r < best.0 {
            best = (r, z, t);
        }
        if r <= residual_tol {
            Control::Stop
        } else {
            Control::Continue
        }
    })?;
    if stopped {
        let last = traj.last().clone();
        Ok((traj, last))
    } else {
        Err(Error::Timeout {
            t: max_time,
            residual: best.0,
            tol: residual_tol,
            best: Box::new(best.1),
        })
    }
}
