//! Variance-decay experiments.
//!
//! An [`ExperimentPlan`] names a potential, a target interval, a decreasing
//! ε-grid and one or more arms (sampler + ladder). For every ε each arm runs
//! `replications` independent replicates; the sample variance of θ times
//! T^ε is regressed as `ln(Var·T) = a − rate/ε` by weighted least squares,
//! and the fitted rate is compared with the predicted lower bound.
//!
//! Seeds: the cell seed for grid point `e` is
//! `seed ^ (e · 0x9E3779B97F4A7C15)`; replicate `r` of every arm uses that
//! cell seed with replicate index `r`, so arms are paired replicate by
//! replicate.

use crate::ensemble::TemperatureLadder;
use crate::error::{Error, Result};
use crate::graphcalc::graph_rate_data;
use crate::potential::{
    classify_two_well, extract_landscape, load_critical_points, FlatPotential, FranzPotential,
    LandscapeGraph, Potential, Site, TwoWellSpec,
};
use crate::rates::{assemble_r_terms, optimal_two_well, two_well_report, Provenance, TargetSet};
use crate::sampler::{self, Horizon, Method, SimulationConfig, DEFAULT_MAX_STEPS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Grid used to locate critical points when a plan needs the landscape.
pub const LANDSCAPE_GRID: usize = 20_000;

// Gauss–Kronrod 7/15 nodes and weights on [−1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.partial_cmp(&o.err).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive Gauss–Kronrod integration to relative accuracy `rel`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    const START: usize = 64;
    const MAX_PANELS: usize = 200_000;
    let mut heap = BinaryHeap::new();
    let (mut total, mut err) = (0.0, 0.0);
    for i in 0..START {
        let pa = a + (b - a) * i as f64 / START as f64;
        let pb = a + (b - a) * (i + 1) as f64 / START as f64;
        let (value, e) = gk15(f, pa, pb);
        total += value;
        err += e;
        heap.push(Panel { a: pa, b: pb, value, err: e });
    }
    while err > rel * total.abs() {
        if heap.len() >= MAX_PANELS {
            return Err(Error::Quadrature {
                achieved: err / total.abs(),
                requested: rel,
            });
        }
        let p = heap.pop().expect("non-empty");
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(f, p.a, m);
        let (v2, e2) = gk15(f, m, p.b);
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.err;
        heap.push(Panel { a: p.a, b: m, value: v1, err: e1 });
        heap.push(Panel { a: m, b: p.b, value: v2, err: e2 });
    }
    // re-sum to shed drift from the running updates
    Ok(heap.iter().map(|p| p.value).sum())
}

/// Requested relative accuracy of the Gibbs integrals.
pub const QUADRATURE_REL: f64 = 1e-8;

/// ln ∫_a^b e^{−V/ε} dx, integrated after shifting by the smallest sampled V
/// on [a, b].
fn log_gibbs_integral<P: Potential + ?Sized>(p: &P, eps: f64, a: f64, b: f64) -> Result<f64> {
    let n = 4096;
    let vmin = (0..=n)
        .map(|i| p.value(a + (b - a) * i as f64 / n as f64))
        .fold(f64::INFINITY, f64::min);
    let f = |x: f64| (-(p.value(x) - vmin) / eps).exp();
    let i = integrate(&f, a, b, QUADRATURE_REL)?;
    Ok(i.ln() - vmin / eps)
}

/// μ^ε([lo, hi]) for the Gibbs density ∝ e^{−V/ε} on the periodic domain.
pub fn gibbs_quadrature<P: Potential + ?Sized>(p: &P, eps: f64, target: (f64, f64)) -> Result<f64> {
    let (dlo, dhi) = p.domain();
    let (lo, hi) = target;
    if !(eps > 0.0) {
        return Err(Error::domain(format!("temperature must be positive, got {eps}")));
    }
    if !(lo <= hi) || lo < dlo || hi > dhi {
        return Err(Error::domain(format!(
            "target [{lo}, {hi}] is not inside the domain [{dlo}, {dhi}]"
        )));
    }
    if lo == hi {
        return Ok(0.0);
    }
    let z = log_gibbs_integral(p, eps, dlo, dhi)?;
    let a = log_gibbs_integral(p, eps, lo, hi)?;
    Ok((a - z).exp().min(1.0))
}

/// Gibbs mass of every bin of `spec` (bins must lie inside the domain).
pub fn gibbs_bin_masses<P: Potential + ?Sized>(
    p: &P,
    eps: f64,
    spec: &sampler::HistogramSpec,
) -> Result<Vec<f64>> {
    let edges = spec.edges();
    let (dlo, dhi) = p.domain();
    let z = log_gibbs_integral(p, eps, dlo, dhi)?;
    edges
        .windows(2)
        .map(|w| Ok((log_gibbs_integral(p, eps, w[0], w[1])? - z).exp()))
        .collect()
}

/// Total-variation distance between two mass vectors.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Franz { theta: f64 },
    CriticalPoints { path: PathBuf },
    Flat { lo: f64, hi: f64 },
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Box<dyn Potential>> {
        Ok(match self {
            PotentialSpec::Franz { theta } => Box::new(FranzPotential::new(*theta)?),
            PotentialSpec::CriticalPoints { path } => Box::new(load_critical_points(path)?),
            PotentialSpec::Flat { lo, hi } => {
                if !(lo < hi) {
                    return Err(Error::config("potential", format!("empty domain [{lo}, {hi}]")));
                }
                Box::new(FlatPotential {
                    lo: *lo,
                    hi: *hi,
                    level: 0.0,
                })
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LadderRule {
    Explicit { alphas: Vec<f64> },
    Geometric { k: usize },
    /// The optimal two-well ladder for the plan's target.
    Optimal {
        k: usize,
        #[serde(default)]
        delta: Option<f64>,
    },
}

impl Default for LadderRule {
    fn default() -> Self {
        LadderRule::Explicit { alphas: vec![1.0] }
    }
}

impl LadderRule {
    pub fn resolve(&self, two_well: Option<(&TwoWellSpec<f64>, &TargetSet<f64>)>) -> Result<TemperatureLadder<f64>> {
        match self {
            LadderRule::Explicit { alphas } => TemperatureLadder::new(alphas.clone()),
            LadderRule::Geometric { k } => TemperatureLadder::geometric(*k),
            LadderRule::Optimal { k, delta } => {
                let (spec, target) = two_well.ok_or_else(|| {
                    Error::config("ladder", "the optimal ladder needs a two-well potential")
                })?;
                let rep = optimal_two_well(spec, target, *k, delta.unwrap_or(crate::rates::DEFAULT_DELTA))?;
                Ok(rep.optimal_ladder)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArmMethod {
    Mcmc,
    Pt,
    Ins,
    /// No simulation: θ takes two values around `level` with sample
    /// variance exactly e^{−rate/ε}/T.
    Synthetic { rate: f64, level: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub label: String,
    pub method: ArmMethod,
    #[serde(default)]
    pub ladder: LadderRule,
    #[serde(default)]
    pub swap_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum HorizonRule {
    /// T^ε = e^{c/ε}
    Fixed { c: f64 },
    /// c = factor × the largest minimal admissible exponent over the arms.
    Auto { factor: f64 },
    Time { t: f64 },
}

/// `higher` must show a strictly larger fitted rate than `lower`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub higher: String,
    pub lower: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub potential: PotentialSpec,
    pub target: (f64, f64),
    pub eps_grid: Vec<f64>,
    pub replications: usize,
    pub arms: Vec<Arm>,
    pub horizon: HorizonRule,
    pub dt: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    /// Starting point of every particle; defaults to the global minimum.
    #[serde(default)]
    pub initial_position: Option<f64>,
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub orderings: Vec<OrderingCheck>,
    #[serde(default = "default_true")]
    pub check_bias: bool,
    /// Rerun each arm at dt/2 on the first grid point.
    #[serde(default)]
    pub dt_check: bool,
}

fn default_max_steps() -> u64 {
    DEFAULT_MAX_STEPS
}
fn default_tolerance() -> f64 {
    0.15
}
fn default_true() -> bool {
    true
}

/// Fewest replications accepted when a slope is fitted.
pub const MIN_REPLICATIONS_FOR_FIT: usize = 30;

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.eps_grid.is_empty() {
            return Err(Error::config("eps_grid", "must not be empty"));
        }
        if self.eps_grid.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::config("eps_grid", "temperatures must be positive"));
        }
        if self.eps_grid.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::config("eps_grid", "must be strictly decreasing"));
        }
        if self.replications < 2 {
            return Err(Error::config("replications", "need at least 2 for a variance"));
        }
        if self.eps_grid.len() >= 2 && self.replications < MIN_REPLICATIONS_FOR_FIT {
            return Err(Error::config(
                "replications",
                format!("slope fits need at least {MIN_REPLICATIONS_FOR_FIT}, got {}", self.replications),
            ));
        }
        if self.arms.is_empty() {
            return Err(Error::config("arms", "at least one arm is required"));
        }
        for (i, a) in self.arms.iter().enumerate() {
            if a.label.is_empty() || self.arms[..i].iter().any(|b| b.label == a.label) {
                return Err(Error::config("arms", format!("labels must be unique and non-empty: {:?}", a.label)));
            }
        }
        for o in &self.orderings {
            for l in [&o.higher, &o.lower] {
                if !self.arms.iter().any(|a| &a.label == l) {
                    return Err(Error::config("orderings", format!("unknown arm {l:?}")));
                }
            }
        }
        if !(self.dt > 0.0) {
            return Err(Error::config("dt", "must be positive"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::config("tolerance", "must be non-negative"));
        }
        match self.horizon {
            HorizonRule::Fixed { c } if !(c > 0.0) => Err(Error::config("horizon", "c must be positive")),
            HorizonRule::Auto { factor } if !(factor > 1.0) => {
                Err(Error::config("horizon", "the auto factor must exceed 1"))
            }
            HorizonRule::Time { t } if !(t >= self.dt) => Err(Error::config("horizon", "T must be at least dt")),
            _ => Ok(()),
        }
    }
}

/// Weighted least-squares fit of `ln(Var·T) = a − rate/ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub rate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Fit from `(ε, Var·T, variance of ln(Var·T))` points. Weights are the
/// reciprocal variances; the standard error treats them as known.
pub fn fit_decay_rate(points: &[(f64, f64, f64)]) -> Option<SlopeFit> {
    if points.len() < 2 || points.iter().any(|p| !(p.1 > 0.0) || !p.1.is_finite()) {
        return None;
    }
    let w: Vec<f64> = points.iter().map(|p| 1.0 / p.2.max(1e-300)).collect();
    let x: Vec<f64> = points.iter().map(|p| 1.0 / p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = w.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&x).map(|(w, x)| w * (x - xm) * (x - xm)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = (0..x.len()).map(|i| w[i] * (x[i] - xm) * (y[i] - ym)).sum();
    let slope = sxy / sxx;
    let se = (1.0 / sxx).sqrt();
    let rate = -slope;
    Some(SlopeFit {
        rate,
        std_error: se,
        ci_low: rate - 1.96 * se,
        ci_high: rate + 1.96 * se,
        intercept: ym - slope * xm,
        points: points.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtCheck {
    pub eps: f64,
    pub mean: f64,
    pub mean_half_dt: f64,
    /// |difference| in units of the combined standard error.
    pub difference_in_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsRecord {
    pub eps: f64,
    pub horizon_time: f64,
    pub steps: u64,
    pub truncated: bool,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    /// Var · T
    pub var_t: f64,
    pub kurtosis: f64,
    pub truth: Option<f64>,
    pub relative_bias: Option<f64>,
    /// 3 · SE / μ^ε(A)
    pub bias_threshold: Option<f64>,
    pub bias_pass: Option<bool>,
    pub seeds: Vec<u64>,
    pub thetas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmRecord {
    pub label: String,
    pub method: ArmMethod,
    pub ladder: Vec<f64>,
    pub per_eps: Vec<EpsRecord>,
    pub fit: Option<SlopeFit>,
    pub predicted: Option<f64>,
    pub predicted_provenance: Option<Provenance>,
    pub rate_verdict: Option<bool>,
    pub bias_verdict: Option<bool>,
    pub dt_check: Option<DtCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingResult {
    pub higher: String,
    pub lower: String,
    pub higher_rate: Option<f64>,
    pub lower_rate: Option<f64>,
    pub pass: bool,
    /// Per grid point: is K·Var of `higher` not significantly above K·Var
    /// of `lower` (paired bootstrap, one-sided 5%)?
    pub variance_pass: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub schema_version: u32,
    pub plan: ExperimentPlan,
    pub horizon_exponent: Option<f64>,
    pub arms: Vec<ArmRecord>,
    pub orderings: Vec<OrderingResult>,
    pub truncated: bool,
    pub verdict: bool,
}

impl ExperimentRecord {
    pub fn empty(plan: ExperimentPlan) -> Self {
        ExperimentRecord {
            schema_version: SCHEMA_VERSION,
            plan,
            horizon_exponent: None,
            arms: Vec::new(),
            orderings: Vec::new(),
            truncated: false,
            verdict: true,
        }
    }

    pub fn arm(&self, label: &str) -> Option<&ArmRecord> {
        self.arms.iter().find(|a| a.label == label)
    }
}

/// Landscape facts a plan may need.
struct Context {
    potential: Box<dyn Potential>,
    landscape: Option<LandscapeGraph<f64>>,
    two_well: Option<(TwoWellSpec<f64>, TargetSet<f64>)>,
    target: Option<TargetSet<f64>>,
}

impl Context {
    fn new(plan: &ExperimentPlan) -> Result<Self> {
        let potential = plan.potential.build()?;
        let landscape = extract_landscape(&*potential, LANDSCAPE_GRID)
            .ok()
            .filter(|lg| lg.validate().is_ok());
        let target = landscape
            .as_ref()
            .and_then(|lg| TargetSet::from_potential(&*potential, lg, plan.target.0, plan.target.1).ok());
        let two_well = match (&landscape, &target) {
            (Some(lg), Some(t)) => classify_two_well(lg).ok().map(|s| (s, t.clone())),
            _ => None,
        };
        Ok(Context {
            potential,
            landscape,
            two_well,
            target,
        })
    }

    fn ladder(&self, arm: &Arm) -> Result<TemperatureLadder<f64>> {
        match arm.method {
            ArmMethod::Mcmc | ArmMethod::Synthetic { .. } => TemperatureLadder::new(vec![1.0]),
            _ => arm
                .ladder
                .resolve(self.two_well.as_ref().map(|(s, t)| (s, t))),
        }
    }

    /// Predicted lower bound on the decay rate for INS/MCMC arms.
    fn predict(&self, arm: &Arm, ladder: &TemperatureLadder<f64>) -> Option<(f64, Provenance)> {
        match arm.method {
            ArmMethod::Synthetic { rate, .. } => return Some((rate, Provenance::BruteForce)),
            ArmMethod::Pt => return None,
            ArmMethod::Mcmc | ArmMethod::Ins => {}
        }
        if let Some((spec, target)) = &self.two_well {
            if let Ok(rep) = two_well_report(spec, target, ladder) {
                return Some((rep.predicted_rate, rep.provenance));
            }
        }
        let lg = self.landscape.as_ref()?;
        let target = self.target.as_ref()?;
        let data = graph_rate_data(lg, ladder).ok()?;
        let rep = assemble_r_terms(lg, ladder, target, &data).ok()?;
        Some((rep.predicted_rate, rep.provenance))
    }

    fn min_exponent(&self, arm: &Arm, ladder: &TemperatureLadder<f64>) -> Option<f64> {
        if matches!(arm.method, ArmMethod::Synthetic { .. }) {
            return None;
        }
        let lg = self.landscape.as_ref()?;
        graph_rate_data(lg, ladder).ok().map(|d| d.min_horizon_exponent())
    }

    fn start(&self, plan: &ExperimentPlan) -> f64 {
        if let Some(x) = plan.initial_position {
            return x;
        }
        match &self.landscape {
            Some(lg) => lg.location(Site::Min(lg.global_min_id)),
            None => {
                let (lo, hi) = self.potential.domain();
                0.5 * (lo + hi)
            }
        }
    }
}

fn cell_seed(seed: u64, e: usize) -> u64 {
    seed ^ (e as u64).wrapping_mul(GOLDEN)
}

fn moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    let kurt = if m2 > 0.0 { m4 / (m2 * m2) } else { f64::NAN };
    (mean, var, kurt)
}

/// Delta-method variance of ln(sample variance): (κ − (n−3)/(n−1)) / n.
fn log_variance_variance(kurtosis: f64, n: usize) -> f64 {
    let n = n as f64;
    ((kurtosis - (n - 3.0) / (n - 1.0)) / n).max(1e-12)
}

fn synthetic_thetas(level: f64, variance: f64, r: usize) -> Vec<f64> {
    let pairs = r / 2;
    let d = (variance * (r as f64 - 1.0) / (2 * pairs) as f64).sqrt();
    (0..r)
        .map(|i| {
            if i == r - 1 && r % 2 == 1 {
                level
            } else if i % 2 == 0 {
                level + d
            } else {
                level - d
            }
        })
        .collect()
}

struct CellRun {
    thetas: Vec<f64>,
    steps: u64,
    truncated: bool,
}

fn run_cell(
    plan: &ExperimentPlan,
    ctx: &Context,
    arm: &Arm,
    ladder: &TemperatureLadder<f64>,
    eps: f64,
    horizon: Horizon,
    seed: u64,
    dt: f64,
) -> Result<CellRun> {
    let r = plan.replications;
    if let ArmMethod::Synthetic { rate, level } = arm.method {
        let t = horizon.time(eps);
        return Ok(CellRun {
            thetas: synthetic_thetas(level, (-rate / eps).exp() / t, r),
            steps: 0,
            truncated: false,
        });
    }
    let method = match arm.method {
        ArmMethod::Mcmc => Method::Mcmc,
        ArmMethod::Pt => Method::Pt,
        _ => Method::Ins,
    };
    let k = if method == Method::Mcmc { 1 } else { ladder.len() };
    let x0 = ctx.start(plan);
    let mut base = SimulationConfig::new(eps, dt, horizon, ladder.clone(), seed, vec![x0; k], plan.target);
    base.swap_rate = arm.swap_rate;
    base.max_steps = plan.max_steps;
    let outs: Vec<Result<sampler::EstimatorOutput>> = (0..r as u64)
        .into_par_iter()
        .map(|rep| {
            let mut cfg = base.clone();
            cfg.replicate = rep;
            sampler::run(method, &cfg, &*ctx.potential).map_err(|e| Error::Replicate {
                seed,
                replicate: rep,
                source: Box::new(e),
            })
        })
        .collect();
    let mut thetas = Vec::with_capacity(r);
    let mut steps = 0;
    let mut truncated = false;
    for o in outs {
        let o = o?;
        steps = o.wall_steps;
        truncated |= o.truncated;
        thetas.push(o.theta);
    }
    Ok(CellRun {
        thetas,
        steps,
        truncated,
    })
}

/// Paired bootstrap: is K_h·Var_h − K_l·Var_l not significantly positive?
fn variance_not_worse(h: &[f64], kh: f64, l: &[f64], kl: f64, seed: u64) -> bool {
    const B: usize = 2000;
    let n = h.len().min(l.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut diffs = Vec::with_capacity(B);
    let mut hs = vec![0.0; n];
    let mut ls = vec![0.0; n];
    for _ in 0..B {
        for j in 0..n {
            let i = rng.random_range(0..n);
            hs[j] = h[i];
            ls[j] = l[i];
        }
        diffs.push(kh * moments(&hs).1 - kl * moments(&ls).1);
    }
    diffs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    !(diffs[B / 20] > 0.0)
}

/// Run every arm of `plan` over the ε-grid.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentRecord> {
    plan.validate()?;
    let ctx = Context::new(plan)?;
    let ladders = plan
        .arms
        .iter()
        .map(|a| ctx.ladder(a))
        .collect::<Result<Vec<_>>>()?;
    let exponent = match plan.horizon {
        HorizonRule::Fixed { c } => Some(c),
        HorizonRule::Time { .. } => None,
        HorizonRule::Auto { factor } => {
            let mut best: Option<f64> = None;
            for (a, l) in plan.arms.iter().zip(&ladders) {
                if matches!(a.method, ArmMethod::Synthetic { .. }) {
                    continue;
                }
                let m = ctx.min_exponent(a, l).ok_or_else(|| {
                    Error::config(
                        "horizon",
                        format!("cannot derive a horizon for arm {:?}: landscape unavailable", a.label),
                    )
                })?;
                best = Some(best.map_or(m, |b: f64| b.max(m)));
            }
            Some(factor * best.unwrap_or(0.0).max(f64::MIN_POSITIVE))
        }
    };
    let horizon = match (plan.horizon, exponent) {
        (HorizonRule::Time { t }, _) => Horizon::Time(t),
        (_, Some(c)) => Horizon::Exponent(c),
        _ => unreachable!("exponent set for non-time rules"),
    };
    let truths = if plan.check_bias {
        plan.eps_grid
            .iter()
            .map(|&e| gibbs_quadrature(&*ctx.potential, e, plan.target).map(Some))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![None; plan.eps_grid.len()]
    };

    let mut record = ExperimentRecord::empty(plan.clone());
    record.horizon_exponent = exponent;
    for (arm, ladder) in plan.arms.iter().zip(&ladders) {
        let mut per_eps = Vec::new();
        for (e, &eps) in plan.eps_grid.iter().enumerate() {
            let seed = cell_seed(plan.seed, e);
            let cell = run_cell(plan, &ctx, arm, ladder, eps, horizon, seed, plan.dt)?;
            let (mean, variance, kurtosis) = moments(&cell.thetas);
            let t = horizon.time(eps);
            let se = (variance / cell.thetas.len() as f64).sqrt();
            let truth = truths[e];
            let (relative_bias, bias_threshold, bias_pass) = match truth {
                Some(mu) if mu > 0.0 && !matches!(arm.method, ArmMethod::Synthetic { .. }) => {
                    let rb = (mean - mu).abs() / mu;
                    let th = 3.0 * se / mu;
                    (Some(rb), Some(th), Some(rb <= th))
                }
                _ => (None, None, None),
            };
            record.truncated |= cell.truncated;
            per_eps.push(EpsRecord {
                eps,
                horizon_time: t,
                steps: cell.steps,
                truncated: cell.truncated,
                mean,
                variance,
                std_error: se,
                var_t: variance * t,
                kurtosis,
                truth,
                relative_bias,
                bias_threshold,
                bias_pass,
                seeds: vec![seed; cell.thetas.len()],
                thetas: cell.thetas,
            });
        }
        let fit = fit_decay_rate(
            &per_eps
                .iter()
                .map(|p| (p.eps, p.var_t, log_variance_variance(p.kurtosis, p.thetas.len())))
                .collect::<Vec<_>>(),
        );
        let pred = ctx.predict(arm, ladder);
        let rate_verdict = match (&fit, &pred) {
            (Some(f), Some((p, _))) => Some(f.rate >= p - plan.tolerance),
            _ => None,
        };
        let bias: Vec<bool> = per_eps.iter().filter_map(|p| p.bias_pass).collect();
        let bias_verdict = if bias.is_empty() {
            None
        } else {
            Some(bias.iter().all(|b| *b))
        };
        let dt_check = if plan.dt_check && !matches!(arm.method, ArmMethod::Synthetic { .. }) {
            let eps = plan.eps_grid[0];
            let seed = cell_seed(plan.seed, 0);
            let half = run_cell(plan, &ctx, arm, ladder, eps, horizon, seed, plan.dt / 2.0)?;
            let (m2, v2, _) = moments(&half.thetas);
            let p0 = &per_eps[0];
            let se = (p0.std_error.powi(2) + v2 / half.thetas.len() as f64).sqrt();
            Some(DtCheck {
                eps,
                mean: p0.mean,
                mean_half_dt: m2,
                difference_in_se: if se > 0.0 { (p0.mean - m2).abs() / se } else { 0.0 },
            })
        } else {
            None
        };
        record.arms.push(ArmRecord {
            label: arm.label.clone(),
            method: arm.method.clone(),
            ladder: ladder.alphas().to_vec(),
            per_eps,
            fit,
            predicted: pred.map(|p| p.0),
            predicted_provenance: pred.map(|p| p.1),
            rate_verdict,
            bias_verdict,
            dt_check,
        });
    }
    for (oi, o) in plan.orderings.iter().enumerate() {
        let h = record.arm(&o.higher).expect("validated label");
        let l = record.arm(&o.lower).expect("validated label");
        let (hr, lr) = (h.fit.as_ref().map(|f| f.rate), l.fit.as_ref().map(|f| f.rate));
        let particles = |a: &ArmRecord| match a.method {
            ArmMethod::Mcmc | ArmMethod::Synthetic { .. } => 1.0,
            _ => a.ladder.len() as f64,
        };
        let variance_pass = h
            .per_eps
            .iter()
            .zip(&l.per_eps)
            .enumerate()
            .map(|(e, (a, b))| {
                variance_not_worse(
                    &a.thetas,
                    particles(h),
                    &b.thetas,
                    particles(l),
                    plan.seed ^ ((oi as u64) << 32) ^ e as u64,
                )
            })
            .collect();
        record.orderings.push(OrderingResult {
            higher: o.higher.clone(),
            lower: o.lower.clone(),
            higher_rate: hr,
            lower_rate: lr,
            pass: matches!((hr, lr), (Some(a), Some(b)) if a > b),
            variance_pass,
        });
    }
    record.verdict = record.arms.iter().all(|a| {
        a.rate_verdict != Some(false) && (!plan.check_bias || a.bias_verdict != Some(false))
    }) && record.orderings.iter().all(|o| o.pass);
    Ok(record)
}

/// Relative bias per grid point for every simulated arm.
pub fn bias_check(plan: &ExperimentPlan) -> Result<Vec<(String, Vec<EpsRecord>)>> {
    let mut p = plan.clone();
    p.check_bias = true;
    let rec = run_experiment(&p)?;
    Ok(rec
        .arms
        .into_iter()
        .filter(|a| !matches!(a.method, ArmMethod::Synthetic { .. }))
        .map(|a| (a.label, a.per_eps))
        .collect())
}

/// One CSV row per (ε, replicate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub eps: f64,
    pub replicate: u64,
    pub seed: u64,
    pub theta: f64,
    /// (θ − mean)² / (R − 1); sums to the sample variance over a grid point.
    pub var_contrib: f64,
}

pub const CSV_COLUMNS: [&str; 5] = ["eps", "replicate", "seed", "theta", "var_contrib"];

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Write `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|source| Error::File {
        path: dir.to_path_buf(),
        source,
    })?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub const RECORD_FILE: &str = "record.json";

/// `record.json` plus `<arm>.csv` per arm in `dir`. With no arms a single
/// header-only `replicates.csv` is written.
pub fn persist(record: &ExperimentRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::File {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    let csv_bytes = |rows: Vec<CsvRow>| -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(CSV_COLUMNS)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    };
    if record.arms.is_empty() {
        let p = dir.join("replicates.csv");
        write_atomic(&p, &csv_bytes(Vec::new())?)?;
        written.push(p);
    }
    for arm in &record.arms {
        let mut rows = Vec::new();
        for e in &arm.per_eps {
            let denom = (e.thetas.len() as f64 - 1.0).max(1.0);
            for (r, (&theta, &seed)) in e.thetas.iter().zip(&e.seeds).enumerate() {
                rows.push(CsvRow {
                    eps: e.eps,
                    replicate: r as u64,
                    seed,
                    theta,
                    var_contrib: (theta - e.mean).powi(2) / denom,
                });
            }
        }
        let p = dir.join(format!("{}.csv", file_safe(&arm.label)));
        write_atomic(&p, &csv_bytes(rows)?)?;
        written.push(p);
    }
    let p = dir.join(RECORD_FILE);
    write_atomic(&p, serde_json::to_string_pretty(record)?.as_bytes())?;
    written.push(p);
    Ok(written)
}

/// Load `record.json` from `dir`, refusing other schema versions.
pub fn load(dir: &Path) -> Result<ExperimentRecord> {
    let path = dir.join(RECORD_FILE);
    let text = std::fs::read_to_string(&path).map_err(|source| Error::File { path, source })?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .unwrap_or(0) as u32;
    if found != SCHEMA_VERSION {
        return Err(Error::Schema {
            expected: SCHEMA_VERSION,
            found,
        });
    }
    Ok(serde_json::from_value(value)?)
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != CSV_COLUMNS {
        return Err(Error::Parse {
            line: 1,
            detail: format!("unexpected CSV columns {header:?}"),
        });
    }
    r.deserialize().map(|row| Ok(row?)).collect()
}
