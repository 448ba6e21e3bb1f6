//! Optimal solar curtailment on a radial distribution feeder.
//!
//! ```text
//! min  Σ c_p (p_i − p_i^PV)² + c_q q_i²
//! s.t. p_i² + q_i² ≤ S_i²,  0 ≤ p ≤ p^PV,  v_min ≤ Mp + Nq + r ≤ v_max
//! ```
//!
//! Voltages are squared magnitudes from linearized DistFlow. The bundled feeder
//! is synthetic: 36 buses, 18 inverters at the Table 1 buses and ratings; its
//! impedances and loads are documented in [`FeederConfig::synthetic_36`].

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{AugPdgdField, DynamicsParams};
use crate::error::{Error, Result};
use crate::integrate::{integrate_adaptive, AdaptiveOptions};
use crate::io::CsvTable;
use crate::problem::{ConvexProgram, Hessian, Inequality, PrimalDualPoint, QuadraticFn};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Resistance (per-unit).
    pub r: f64,
    /// Reactance (per-unit).
    pub x: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inverter {
    pub bus: usize,
    pub s_max: f64,
}

/// Radial feeder rooted at bus 0 (the substation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeederConfig {
    pub buses: usize,
    pub lines: Vec<Line>,
    pub inverters: Vec<Inverter>,
    /// Real load per bus (per-unit), `buses` entries.
    pub loads: Vec<f64>,
    #[serde(default = "default_v0")]
    pub v0: f64,
    #[serde(default = "default_cp")]
    pub c_p: f64,
    #[serde(default = "default_cq")]
    pub c_q: f64,
    /// Squared-magnitude bounds.
    #[serde(default = "default_vmin")]
    pub v_min: f64,
    #[serde(default = "default_vmax")]
    pub v_max: f64,
    #[serde(default = "default_scale")]
    pub voltage_scale: f64,
}

fn default_v0() -> f64 {
    1.0
}
fn default_cp() -> f64 {
    3.0
}
fn default_cq() -> f64 {
    1.0
}
fn default_vmin() -> f64 {
    0.95 * 0.95
}
fn default_vmax() -> f64 {
    1.05 * 1.05
}
fn default_scale() -> f64 {
    200.0
}

/// Inverter buses and ratings of the 18-inverter study.
pub const TABLE1_INVERTERS: [(usize, f64); 18] = [
    (2, 2.7),
    (4, 1.35),
    (5, 2.7),
    (6, 1.35),
    (7, 2.025),
    (10, 2.025),
    (13, 2.7),
    (15, 2.7),
    (16, 1.35),
    (20, 2.025),
    (21, 2.025),
    (27, 2.025),
    (28, 2.7),
    (29, 2.7),
    (31, 1.35),
    (32, 2.7),
    (33, 2.025),
    (34, 1.35),
];

impl FeederConfig {
    /// 36-bus radial feeder: a nine-line trunk `0–1–…–9` with laterals
    /// `2–26…30`, `3–10…14`, `5–15…20`, `7–21…25` and `9–31…35`.
    /// Line resistance cycles through 4, 5, 6, 7 ×10⁻⁴ with X/R = 2; every
    /// non-root bus carries 0.1, 0.15 or 0.2 of load.
    pub fn synthetic_36() -> Self {
        let mut edges: Vec<(usize, usize)> = (0..9).map(|k| (k, k + 1)).collect();
        let laterals: [(usize, std::ops::RangeInclusive<usize>); 5] =
            [(2, 26..=30), (3, 10..=14), (5, 15..=20), (7, 21..=25), (9, 31..=35)];
        for (root, range) in laterals {
            let mut prev = root;
            for b in range {
                edges.push((prev, b));
                prev = b;
            }
        }
        let lines = edges
            .iter()
            .enumerate()
            .map(|(k, &(from, to))| {
                let r = 1e-5 * (4 + k % 4) as f64;
                Line { from, to, r, x: r }
            })
            .collect();
        let loads = (0..36)
            .map(|b| if b == 0 { 0.0 } else { [0.3, 0.35, 0.4][b % 3] })
            .collect();
        FeederConfig {
            buses: 36,
            lines,
            inverters: TABLE1_INVERTERS
                .iter()
                .map(|&(bus, s_max)| Inverter { bus, s_max })
                .collect(),
            loads,
            v0: default_v0(),
            c_p: default_cp(),
            c_q: default_cq(),
            v_min: default_vmin(),
            v_max: default_vmax(),
            voltage_scale: default_scale(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn total_load(&self) -> f64 {
        self.loads.iter().sum()
    }

    /// For each bus, the line indices on its path from the root.
    fn paths(&self) -> Result<Vec<Vec<usize>>> {
        let m = self.buses;
        if m < 2 {
            return Err(Error::Feeder("need at least two buses".into()));
        }
        if self.lines.len() != m - 1 {
            return Err(Error::Feeder(format!(
                "a radial feeder with {m} buses has {} lines, got {}",
                m - 1,
                self.lines.len()
            )));
        }
        let mut parent_line = vec![None; m];
        for (k, l) in self.lines.iter().enumerate() {
            if l.from >= m || l.to >= m || l.to == 0 || l.from == l.to {
                return Err(Error::Feeder(format!("line {k} ({} -> {}) is invalid", l.from, l.to)));
            }
            if !(l.r > 0.0 && l.x > 0.0) {
                return Err(Error::Feeder(format!("line {k} needs positive impedance")));
            }
            if parent_line[l.to].replace(k).is_some() {
                return Err(Error::Feeder(format!("bus {} has two parents", l.to)));
            }
        }
        let mut paths = vec![Vec::new(); m];
        for (b, path) in paths.iter_mut().enumerate().skip(1) {
            let mut cur = b;
            while cur != 0 {
                let k = parent_line[cur].expect("every non-root bus has a parent");
                path.push(k);
                if path.len() > m {
                    return Err(Error::Feeder(format!("bus {b} is on a cycle")));
                }
                cur = self.lines[k].from;
            }
            path.reverse();
        }
        Ok(paths)
    }

    fn validate(&self) -> Result<Vec<Vec<usize>>> {
        let paths = self.paths()?;
        if self.loads.len() != self.buses {
            return Err(Error::Feeder(format!(
                "expected {} loads, got {}",
                self.buses,
                self.loads.len()
            )));
        }
        if self.loads.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(Error::Feeder("loads must be finite and nonnegative".into()));
        }
        if self.inverters.is_empty() {
            return Err(Error::Feeder("no inverters".into()));
        }
        for inv in &self.inverters {
            if inv.bus >= self.buses || !(inv.s_max > 0.0) {
                return Err(Error::Feeder(format!("invalid inverter {inv:?}")));
            }
        }
        if !(self.c_p > 0.0 && self.c_q > 0.0 && self.voltage_scale > 0.0 && self.v_min < self.v_max) {
            return Err(Error::Feeder("costs, voltage scale or band are invalid".into()));
        }
        Ok(paths)
    }
}

/// Affine voltage map `v = Mp + Nq + r` over non-root buses `1..buses`.
#[derive(Clone, Debug, PartialEq)]
pub struct VoltageModel {
    pub m: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub r: DVector<f64>,
}

impl VoltageModel {
    pub fn voltages(&self, p: &DVector<f64>, q: &DVector<f64>) -> DVector<f64> {
        &self.m * p + &self.n * q + &self.r
    }
}

fn common_sum(a: &[usize], b: &[usize], value: impl Fn(usize) -> f64) -> f64 {
    a.iter()
        .zip(b)
        .take_while(|(x, y)| x == y)
        .map(|(&k, _)| value(k))
        .sum()
}

/// Linearized DistFlow: `M(j, i) = 2 Σ_{common path} R`, `N` likewise with X,
/// `r_j = v0² − 2 Σ_l Σ_{common path(j, l)} R · load_l`.
pub fn build_voltage_model(config: &FeederConfig) -> Result<VoltageModel> {
    let paths = config.validate()?;
    let rows = config.buses - 1;
    let cols = config.inverters.len();
    let res = |k: usize| config.lines[k].r;
    let rea = |k: usize| config.lines[k].x;
    let mut m = DMatrix::zeros(rows, cols);
    let mut n = DMatrix::zeros(rows, cols);
    let mut r = DVector::from_element(rows, config.v0 * config.v0);
    for j in 1..config.buses {
        for (i, inv) in config.inverters.iter().enumerate() {
            m[(j - 1, i)] = 2.0 * common_sum(&paths[j], &paths[inv.bus], res);
            n[(j - 1, i)] = 2.0 * common_sum(&paths[j], &paths[inv.bus], rea);
        }
        for (l, &load) in config.loads.iter().enumerate() {
            if load != 0.0 {
                r[j - 1] -= 2.0 * common_sum(&paths[j], &paths[l], res) * load;
            }
        }
    }
    Ok(VoltageModel { m, n, r })
}

/// The generated program with its data.
#[derive(Clone, Debug)]
pub struct PowerProgram {
    pub program: ConvexProgram,
    pub p_pv: DVector<f64>,
    pub model: VoltageModel,
    pub config: FeederConfig,
}

impl PowerProgram {
    pub fn inverters(&self) -> usize {
        self.p_pv.len()
    }

    /// Splits `x` into `(p, q)`.
    pub fn split(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let k = self.inverters();
        (x.rows(0, k).into_owned(), x.rows(k, k).into_owned())
    }
}

/// Builds the curtailment program with `p^PV ∝ S_max` and `Σ p^PV = pv_ratio · Σ load`.
///
/// Constraint order: inverter limits, `−p ≤ 0`, `p − p^PV ≤ 0`, upper voltage,
/// lower voltage (each block indexed by inverter or non-root bus).
pub fn make_power_curtailment(config: &FeederConfig, pv_ratio: f64) -> Result<PowerProgram> {
    if !(pv_ratio > 0.0 && pv_ratio.is_finite()) {
        return Err(Error::contract(format!("pv_ratio must be positive, got {pv_ratio}")));
    }
    let model = build_voltage_model(config)?;
    let k = config.inverters.len();
    let dim = 2 * k;
    let s_total: f64 = config.inverters.iter().map(|i| i.s_max).sum();
    let scale = pv_ratio * config.total_load() / s_total;
    let p_pv = DVector::from_iterator(k, config.inverters.iter().map(|i| scale * i.s_max));
    if p_pv.iter().any(|&v| v < 0.0) {
        return Err(Error::contract("p^PV must be nonnegative"));
    }

    let (cp, cq) = (config.c_p, config.c_q);
    let mut h = DVector::zeros(dim);
    let mut lin = DVector::zeros(dim);
    for i in 0..k {
        h[i] = 2.0 * cp;
        h[k + i] = 2.0 * cq;
        lin[i] = -2.0 * cp * p_pv[i];
    }
    let constant = cp * p_pv.norm_squared();
    let objective = QuadraticFn::new(Hessian::Diagonal(h), lin, constant);

    let unit = |j: usize, v: f64| {
        let mut e = DVector::zeros(dim);
        e[j] = v;
        e
    };
    let mut ineqs = Vec::with_capacity(3 * k + 2 * model.r.len());
    for (i, inv) in config.inverters.iter().enumerate() {
        let mut d = DVector::zeros(dim);
        d[i] = 2.0;
        d[k + i] = 2.0;
        ineqs.push(Inequality::new(QuadraticFn::new(
            Hessian::Diagonal(d),
            DVector::zeros(dim),
            -inv.s_max * inv.s_max,
        )));
    }
    for i in 0..k {
        ineqs.push(Inequality::affine(unit(i, -1.0), 0.0));
    }
    for i in 0..k {
        ineqs.push(Inequality::affine(unit(i, 1.0), p_pv[i]));
    }
    let s = config.voltage_scale;
    let row = |j: usize| {
        let mut a = DVector::zeros(dim);
        for i in 0..k {
            a[i] = model.m[(j, i)];
            a[k + i] = model.n[(j, i)];
        }
        a
    };
    for j in 0..model.r.len() {
        ineqs.push(Inequality::affine(row(j) * s, s * (config.v_max - model.r[j])));
    }
    for j in 0..model.r.len() {
        ineqs.push(Inequality::affine(row(j) * -s, s * (model.r[j] - config.v_min)));
    }

    let program = ConvexProgram::new(
        "power",
        dim,
        objective,
        ineqs,
        DMatrix::zeros(0, dim),
        DVector::zeros(0),
        2.0 * cp.min(cq),
        2.0 * cp.max(cq),
    )?;
    Ok(PowerProgram {
        program,
        p_pv,
        model,
        config: config.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentOptions {
    /// `d0 / ‖(x*, λ*)‖` values.
    pub ratios: Vec<f64>,
    pub instances_per_ratio: usize,
    pub rho: f64,
    pub seed: u64,
    pub horizon: f64,
    pub n_output: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            ratios: vec![0.5, 10.0, 50.0],
            instances_per_ratio: 10,
            rho: 0.1,
            seed: 0,
            horizon: 200.0,
            n_output: 400,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InstanceResult {
    pub id: usize,
    pub ratio: f64,
    #[serde(skip)]
    pub times: Vec<f64>,
    /// `‖(x(t) − x*, λ(t) − λ*)‖ / ‖(x*, λ*)‖`.
    #[serde(skip)]
    pub normalized: Vec<f64>,
    pub final_normalized: f64,
    /// Fitted over `[0, t₁]` where the distance first falls to 1% of its start.
    pub early_rate: Option<f64>,
    /// Fitted over the final third of the decay before the noise floor.
    pub late_rate: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioSummary {
    pub ratio: f64,
    pub mean_early_rate: Option<f64>,
    pub mean_late_rate: Option<f64>,
    pub max_final_normalized: f64,
    pub failures: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub options: ExperimentOptions,
    pub reference_norm: f64,
    pub summaries: Vec<RatioSummary>,
    pub instances: Vec<InstanceResult>,
}

impl ExperimentReport {
    /// `instance,ratio,t,normalized_distance`.
    pub fn curves_csv(&self) -> String {
        let mut t = CsvTable::new(&["instance", "ratio", "t", "normalized_distance"]);
        for inst in &self.instances {
            for (&time, &d) in inst.times.iter().zip(&inst.normalized) {
                t.push_row(&[inst.id.to_string(), crate::io::fmt17(inst.ratio)], [time, d]);
            }
        }
        t.into_string()
    }
}

/// Below this normalized distance samples are treated as integration noise in rate fits.
const NOISE_FLOOR: f64 = 1e-7;

/// Least-squares slope of `ln y` against `t`, negated.
pub fn fit_decay_rate(t: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&a, &v)| (a, v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

fn early_rate(t: &[f64], d: &[f64]) -> Option<f64> {
    let target = 1e-2 * d.first()?;
    let end = d.iter().position(|&v| v <= target).unwrap_or(d.len() - 1);
    fit_decay_rate(&t[..=end], &d[..=end])
}

fn late_rate(t: &[f64], d: &[f64]) -> Option<f64> {
    let last = d.iter().rposition(|&v| v > NOISE_FLOOR)?;
    let t_end = t[last];
    let start = t.iter().position(|&s| s >= t_end * 2.0 / 3.0)?;
    fit_decay_rate(&t[start..=last], &d[start..=last])
}

/// Point on the sphere of radius `radius` around `(x*, λ*)` with `λ ≥ 0`:
/// Gaussian direction, λ clamped at zero, displacement rescaled to the radius;
/// repeated until the rescaled point stays nonnegative, redrawn if it degenerates.
fn sample_start(z_star: &PrimalDualPoint, radius: f64, rng: &mut ChaCha8Rng) -> Result<PrimalDualPoint> {
    let n = z_star.x.len();
    let mi = z_star.lambda.len();
    for _ in 0..100 {
        let mut u: Vec<f64> = (0..n + mi).map(|_| StandardNormal.sample(rng)).collect();
        'rescale: for _ in 0..100 {
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-12 {
                break 'rescale;
            }
            for v in &mut u {
                *v *= radius / norm;
            }
            let mut clamped = false;
            for i in 0..mi {
                if z_star.lambda[i] + u[n + i] < 0.0 {
                    u[n + i] = -z_star.lambda[i];
                    clamped = true;
                }
            }
            if !clamped {
                let x = &z_star.x + DVector::from_column_slice(&u[..n]);
                let lambda = &z_star.lambda + DVector::from_column_slice(&u[n..]);
                return Ok(PrimalDualPoint::new(x, lambda.map(|v| v.max(0.0)), z_star.nu.clone()));
            }
        }
    }
    Err(Error::Generation(
        "could not sample a nonnegative start on the sphere".into(),
    ))
}

/// Integrates `instances_per_ratio` random starts per ratio concurrently and
/// fits decay rates. Instance failures are recorded, not propagated.
pub fn run_experiment(
    prog: &ConvexProgram,
    z_star: &PrimalDualPoint,
    opts: &ExperimentOptions,
) -> Result<ExperimentReport> {
    prog.check_point(z_star)?;
    if opts.ratios.is_empty() {
        return Err(Error::contract("ratio list is empty"));
    }
    if opts.ratios.iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
        return Err(Error::contract("ratios must be finite and nonnegative"));
    }
    if opts.instances_per_ratio == 0 {
        return Err(Error::contract("need at least one instance per ratio"));
    }
    let params = DynamicsParams::new(opts.rho)?;
    let field = AugPdgdField::new(prog, params)?;
    let reference_norm = (z_star.x.norm_squared() + z_star.lambda.norm_squared()).sqrt();
    if !(reference_norm > 0.0) {
        return Err(Error::contract("‖(x*, λ*)‖ must be positive to normalize"));
    }
    let adaptive = AdaptiveOptions {
        rel_tol: opts.rel_tol,
        abs_tol: opts.abs_tol,
        n_output: opts.n_output,
        ..AdaptiveOptions::default()
    };

    let jobs: Vec<(usize, f64)> = opts
        .ratios
        .iter()
        .flat_map(|&r| std::iter::repeat_n(r, opts.instances_per_ratio))
        .enumerate()
        .collect();
    let instances: Vec<InstanceResult> = jobs
        .par_iter()
        .map(|&(id, ratio)| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(id as u64);
            let mut run = || -> Result<(Vec<f64>, Vec<f64>)> {
                let z0 = if ratio == 0.0 {
                    z_star.clone()
                } else {
                    sample_start(z_star, ratio * reference_norm, &mut rng)?
                };
                let traj = integrate_adaptive(&field, &z0, opts.horizon, &adaptive)?;
                let d = traj
                    .points
                    .iter()
                    .map(|z| {
                        let dx = (&z.x - &z_star.x).norm_squared();
                        let dl = (&z.lambda - &z_star.lambda).norm_squared();
                        (dx + dl).sqrt() / reference_norm
                    })
                    .collect();
                Ok((traj.times, d))
            };
            match run() {
                Ok((times, normalized)) => InstanceResult {
                    id,
                    ratio,
                    final_normalized: *normalized.last().unwrap_or(&f64::NAN),
                    early_rate: early_rate(&times, &normalized),
                    late_rate: late_rate(&times, &normalized),
                    times,
                    normalized,
                    error: None,
                },
                Err(e) => InstanceResult {
                    id,
                    ratio,
                    times: Vec::new(),
                    normalized: Vec::new(),
                    final_normalized: f64::NAN,
                    early_rate: None,
                    late_rate: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let summaries = opts
        .ratios
        .iter()
        .map(|&ratio| {
            let group: Vec<&InstanceResult> = instances.iter().filter(|i| i.ratio == ratio).collect();
            RatioSummary {
                ratio,
                mean_early_rate: mean(group.iter().filter_map(|i| i.early_rate).collect()),
                mean_late_rate: mean(group.iter().filter_map(|i| i.late_rate).collect()),
                max_final_normalized: group.iter().map(|i| i.final_normalized).fold(0.0, |a: f64, b| {
                    if b.is_nan() {
                        f64::INFINITY
                    } else {
                        a.max(b)
                    }
                }),
                failures: group.iter().filter(|i| i.error.is_some()).count(),
            }
        })
        .collect();
    Ok(ExperimentReport {
        options: opts.clone(),
        reference_norm,
        summaries,
        instances,
    })
}
