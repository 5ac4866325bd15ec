//! Euler–Maruyama samplers: plain overdamped Langevin (MCMC), parallel
//! tempering with a finite swap rate (PT) and infinite swapping (INS).
//!
//! All three integrate `dX = −V'(X) dt + σ dW` on the periodic domain and
//! return a time average θ estimating μ^ε(A).
//!
//! Randomness: every particle has its own ChaCha8 stream. The generator for
//! replicate `r`, particle `i` is seeded from the cell seed and switched to
//! stream `(r << 8) | i`; PT swap decisions use stream `(r << 8) | 0xFF`.
//! Particle 0 therefore sees the same normals in every method, which makes a
//! K = 1 INS run and a PT run with `a = 0` reproduce the MCMC path exactly.

use crate::ensemble::{TemperatureLadder, WeightEngine};
use crate::error::{Error, Result};
use crate::potential::Potential;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

/// Upper limit on steps per run unless the config says otherwise.
pub const DEFAULT_MAX_STEPS: u64 = 100_000_000;

/// Largest admissible `a · dt` for thinned swap clocks.
pub const MAX_SWAP_PROBABILITY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mcmc,
    Pt,
    Ins,
}

/// T^ε = e^{c/ε} or an explicit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Exponent(f64),
    Time(f64),
}

impl Horizon {
    pub fn time(&self, eps: f64) -> f64 {
        match *self {
            Horizon::Exponent(c) => (c / eps).exp(),
            Horizon::Time(t) => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl HistogramSpec {
    pub fn bin(&self, x: f64) -> usize {
        let t = ((x - self.lo) / (self.hi - self.lo) * self.bins as f64).floor();
        (t.max(0.0) as usize).min(self.bins - 1)
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / self.bins as f64)
            .collect()
    }
}

/// Dump every `every`-th state to `path`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpSpec {
    pub path: PathBuf,
    pub every: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub eps: f64,
    pub dt: f64,
    pub horizon: Horizon,
    pub ladder: TemperatureLadder<f64>,
    pub seed: u64,
    #[serde(default)]
    pub replicate: u64,
    pub initial_positions: Vec<f64>,
    #[serde(default)]
    pub swap_rate: f64,
    /// A = [lo, hi].
    pub target: (f64, f64),
    #[serde(default)]
    pub histogram: Option<HistogramSpec>,
    #[serde(default)]
    pub dump: Option<DumpSpec>,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
}

fn default_max_steps() -> u64 {
    DEFAULT_MAX_STEPS
}

impl SimulationConfig {
    /// A config with no histogram, no dump and the default step cap.
    pub fn new(
        eps: f64,
        dt: f64,
        horizon: Horizon,
        ladder: TemperatureLadder<f64>,
        seed: u64,
        initial_positions: Vec<f64>,
        target: (f64, f64),
    ) -> Self {
        SimulationConfig {
            eps,
            dt,
            horizon,
            ladder,
            seed,
            replicate: 0,
            initial_positions,
            swap_rate: 0.0,
            target,
            histogram: None,
            dump: None,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }

    fn validate(&self, particles: usize) -> Result<()> {
        let bad = |field: &str, detail: String| Err(Error::config(field, detail));
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps", format!("must be positive, got {}", self.eps));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", format!("must be positive, got {}", self.dt));
        }
        let t = self.horizon.time(self.eps);
        if !(t >= self.dt) {
            return bad("horizon", format!("T = {t} is shorter than dt = {}", self.dt));
        }
        if self.initial_positions.len() != particles {
            return bad(
                "initial_positions",
                format!("expected {particles} positions, got {}", self.initial_positions.len()),
            );
        }
        if self.initial_positions.iter().any(|x| !x.is_finite()) {
            return bad("initial_positions", "positions must be finite".into());
        }
        if !(self.target.0 <= self.target.1) {
            return bad("target", format!("empty interval {:?}", self.target));
        }
        if let Some(h) = &self.histogram {
            if h.bins == 0 || !(h.lo < h.hi) {
                return bad("histogram", format!("invalid grid {h:?}"));
            }
        }
        if let Some(d) = &self.dump {
            if d.every == 0 {
                return bad("dump.every", "must be at least 1".into());
            }
        }
        if self.max_steps == 0 {
            return bad("max_steps", "must be at least 1".into());
        }
        Ok(())
    }

    /// Number of steps and whether the step cap cut the horizon short.
    pub fn steps(&self) -> (u64, bool) {
        let want = (self.horizon.time(self.eps) / self.dt).ceil();
        if want > self.max_steps as f64 {
            (self.max_steps, true)
        } else {
            ((want as u64).max(1), false)
        }
    }

    fn in_target(&self, x: f64) -> bool {
        x >= self.target.0 && x <= self.target.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOutput {
    pub theta: f64,
    /// Per temperature slot, the mass in each bin (empty without a grid).
    pub occupation_histogram: Vec<Vec<f64>>,
    pub wall_steps: u64,
    pub seed: u64,
    pub replicate: u64,
    pub swaps: u64,
    pub truncated: bool,
}

/// Generator for one particle of one replicate.
pub fn particle_rng(seed: u64, replicate: u64, particle: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replicate << 8) | particle);
    rng
}

fn swap_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    particle_rng(seed, replicate, 0xFF)
}

/// Noise amplitude sqrt(2 ε s dt) for a particle at effective temperature
/// ε·s.
#[inline]
pub fn noise_amp(eps: f64, s: f64, dt: f64) -> f64 {
    (2.0 * eps * s * dt).sqrt()
}

/// An Euler–Maruyama proposal, wrapped into the domain, and whether it
/// crossed the periodic seam.
#[inline]
fn advance<P: Potential + ?Sized>(
    p: &P,
    x: f64,
    dt: f64,
    amp: f64,
    half_period: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, bool)> {
    let xi: f64 = rng.sample(StandardNormal);
    let dx = -p.gradient(x) * dt + amp * xi;
    if !(dx.abs() <= half_period) {
        return Err(Error::StepSize { x, jump: dx });
    }
    let (lo, hi) = p.domain();
    let y = x + dx;
    Ok((p.wrap(y), !(y >= lo && y < hi)))
}

/// True when the periodic extension of `p` jumps at the seam. Steps across
/// such a seam go through a Metropolis filter on the stationary density so
/// that the jump is respected; the gradient alone never sees it.
fn seam_is_discontinuous<P: Potential + ?Sized>(p: &P) -> bool {
    let (lo, hi) = p.domain();
    let (a, b) = (p.raw_value(lo), p.raw_value(hi));
    (a - b).abs() > 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// Accept a move whose log stationary density changes by `dlog`.
#[inline]
fn metropolis(dlog: f64, rng: &mut ChaCha8Rng) -> bool {
    dlog >= 0.0 || rng.random::<f64>() < dlog.exp()
}

/// Compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Per-slot weighted occupation counts on a fixed grid.
#[derive(Debug, Clone)]
pub struct WeightedHistogram {
    spec: HistogramSpec,
    k: usize,
    mass: Vec<Vec<Kahan>>,
    samples: u64,
}

impl WeightedHistogram {
    pub fn new(spec: HistogramSpec, k: usize) -> Self {
        WeightedHistogram {
            spec,
            k,
            mass: vec![vec![Kahan::default(); spec.bins]; k],
            samples: 0,
        }
    }

    /// Add one state with its row-major K×K ρ matrix.
    pub fn add(&mut self, positions: &[f64], rho: &[f64]) {
        let k = self.k;
        for (i, &x) in positions.iter().enumerate() {
            let b = self.spec.bin(x);
            for j in 0..k {
                let r = rho[i * k + j];
                if r != 0.0 {
                    self.mass[j][b].add(r);
                }
            }
        }
        self.samples += 1;
    }

    /// Masses per slot, each summing to 1.
    pub fn finish(&self) -> Vec<Vec<f64>> {
        let n = self.samples.max(1) as f64;
        self.mass
            .iter()
            .map(|row| row.iter().map(|m| m.sum / n).collect())
            .collect()
    }
}

/// Slot marginals of the weighted empirical measure of a stored trajectory.
pub fn weighted_histogram<'a, P: Potential + ?Sized>(
    states: impl IntoIterator<Item = &'a [f64]>,
    ladder: &TemperatureLadder<f64>,
    eps: f64,
    spec: HistogramSpec,
    p: &P,
) -> Result<Vec<Vec<f64>>> {
    if !(eps > 0.0) {
        return Err(Error::domain(format!("temperature must be positive, got {eps}")));
    }
    let k = ladder.len();
    let mut engine = WeightEngine::new(ladder)?;
    let mut rho = vec![0.0; k * k];
    let mut v = vec![0.0; k];
    let mut h = WeightedHistogram::new(spec, k);
    for s in states {
        if s.len() != k {
            return Err(Error::structural(format!(
                "state with {} positions for K = {k}",
                s.len()
            )));
        }
        for (vi, &x) in v.iter_mut().zip(s) {
            *vi = p.value(x);
        }
        engine.rho_into(&v, eps, &mut rho);
        h.add(s, &rho);
    }
    Ok(h.finish())
}

const DUMP_MAGIC: &[u8; 8] = b"INSTRAJ\0";

struct Dumper {
    out: BufWriter<File>,
    every: u64,
}

impl Dumper {
    fn open(spec: &Option<DumpSpec>, k: usize, dt: f64, eps: f64) -> Result<Option<Self>> {
        let Some(spec) = spec else { return Ok(None) };
        let file = File::create(&spec.path).map_err(|source| Error::File {
            path: spec.path.clone(),
            source,
        })?;
        let mut out = BufWriter::new(file);
        out.write_all(DUMP_MAGIC)?;
        out.write_all(&(k as u64).to_le_bytes())?;
        out.write_all(&dt.to_le_bytes())?;
        out.write_all(&eps.to_le_bytes())?;
        out.write_all(&spec.every.to_le_bytes())?;
        Ok(Some(Dumper {
            out,
            every: spec.every,
        }))
    }

    fn record(&mut self, step: u64, t: f64, xs: &[f64]) -> Result<()> {
        if step % self.every == 0 {
            self.out.write_all(&t.to_le_bytes())?;
            for x in xs {
                self.out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Contents of a trajectory dump.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDump {
    pub k: usize,
    pub dt: f64,
    pub eps: f64,
    pub every: u64,
    /// (time, positions)
    pub records: Vec<(f64, Vec<f64>)>,
}

pub fn read_trajectory(path: &Path) -> Result<TrajectoryDump> {
    let file = File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::Parse {
            line: 0,
            detail: "not a trajectory dump".into(),
        });
    }
    let mut word = [0u8; 8];
    let mut next = |r: &mut BufReader<File>| -> std::io::Result<[u8; 8]> {
        r.read_exact(&mut word)?;
        Ok(word)
    };
    let k = u64::from_le_bytes(next(&mut r)?) as usize;
    let dt = f64::from_le_bytes(next(&mut r)?);
    let eps = f64::from_le_bytes(next(&mut r)?);
    let every = u64::from_le_bytes(next(&mut r)?);
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    let rec = 8 * (k + 1);
    if rec == 8 || rest.len() % rec != 0 {
        return Err(Error::Parse {
            line: 0,
            detail: format!("truncated trajectory dump ({} trailing bytes)", rest.len() % rec),
        });
    }
    let f = |b: &[u8]| f64::from_le_bytes(b.try_into().expect("8 bytes"));
    let records = rest
        .chunks(rec)
        .map(|c| (f(&c[..8]), c[8..].chunks(8).map(f).collect()))
        .collect();
    Ok(TrajectoryDump {
        k,
        dt,
        eps,
        every,
        records,
    })
}

/// Overdamped Langevin at temperature ε; θ is the fraction of time in A.
pub fn run_mcmc<P: Potential + ?Sized>(cfg: &SimulationConfig, p: &P) -> Result<EstimatorOutput> {
    cfg.validate(1)?;
    let (n, truncated) = cfg.steps();
    let half = p.period() / 2.0;
    let mut rng = particle_rng(cfg.seed, cfg.replicate, 0);
    let amp = noise_amp(cfg.eps, 1.0, cfg.dt);
    let mut x = p.wrap(cfg.initial_positions[0]);
    let seam = seam_is_discontinuous(p);
    let mut acc = Kahan::default();
    let mut hist = cfg.histogram.map(|s| WeightedHistogram::new(s, 1));
    let mut dump = Dumper::open(&cfg.dump, 1, cfg.dt, cfg.eps)?;
    for step in 0..n {
        acc.add(if cfg.in_target(x) { 1.0 } else { 0.0 });
        if let Some(h) = hist.as_mut() {
            h.add(&[x], &[1.0]);
        }
        if let Some(d) = dump.as_mut() {
            d.record(step, step as f64 * cfg.dt, &[x])?;
        }
        let (y, crossed) = advance(p, x, cfg.dt, amp, half, &mut rng)?;
        if !(seam && crossed) || metropolis(-(p.value(y) - p.value(x)) / cfg.eps, &mut rng) {
            x = y;
        }
    }
    if let Some(d) = dump {
        d.finish()?;
    }
    Ok(EstimatorOutput {
        theta: acc.sum / n as f64,
        occupation_histogram: hist.map(|h| h.finish()).unwrap_or_default(),
        wall_steps: n,
        seed: cfg.seed,
        replicate: cfg.replicate,
        swaps: 0,
        truncated,
    })
}

/// Two-temperature parallel tempering with swap intensity
/// `a · (1 ∧ ψ(x₂, x₁)/ψ(x₁, x₂))`, realised by thinning: after each step
/// the particles swap with probability `a · dt · (1 ∧ ratio)`.
pub fn run_pt<P: Potential + ?Sized>(cfg: &SimulationConfig, p: &P) -> Result<EstimatorOutput> {
    if cfg.ladder.len() != 2 {
        return Err(Error::config(
            "ladder",
            format!("parallel tempering uses two temperatures, got {}", cfg.ladder.len()),
        ));
    }
    cfg.validate(2)?;
    let a = cfg.swap_rate;
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::config("swap_rate", format!("must be non-negative, got {a}")));
    }
    if a * cfg.dt > MAX_SWAP_PROBABILITY {
        return Err(Error::config(
            "dt",
            format!(
                "swap_rate · dt = {} exceeds {MAX_SWAP_PROBABILITY}; reduce dt",
                a * cfg.dt
            ),
        ));
    }
    let (n, truncated) = cfg.steps();
    let half = p.period() / 2.0;
    let alpha2 = cfg.ladder.alpha(1);
    let amps = [
        noise_amp(cfg.eps, 1.0, cfg.dt),
        noise_amp(cfg.eps, 1.0 / alpha2, cfg.dt),
    ];
    let mut rngs = [
        particle_rng(cfg.seed, cfg.replicate, 0),
        particle_rng(cfg.seed, cfg.replicate, 1),
    ];
    let mut srng = swap_rng(cfg.seed, cfg.replicate);
    let mut x = [p.wrap(cfg.initial_positions[0]), p.wrap(cfg.initial_positions[1])];
    let seam = seam_is_discontinuous(p);
    let alphas = [1.0, alpha2];
    let mut acc = Kahan::default();
    let mut hist = cfg.histogram.map(|s| WeightedHistogram::new(s, 2));
    let mut dump = Dumper::open(&cfg.dump, 2, cfg.dt, cfg.eps)?;
    let mut swaps = 0;
    let identity = [1.0, 0.0, 0.0, 1.0];
    for step in 0..n {
        acc.add(if cfg.in_target(x[0]) { 1.0 } else { 0.0 });
        if let Some(h) = hist.as_mut() {
            h.add(&x, &identity);
        }
        if let Some(d) = dump.as_mut() {
            d.record(step, step as f64 * cfg.dt, &x)?;
        }
        for i in 0..2 {
            let (y, crossed) = advance(p, x[i], cfg.dt, amps[i], half, &mut rngs[i])?;
            if !(seam && crossed)
                || metropolis(-alphas[i] * (p.value(y) - p.value(x[i])) / cfg.eps, &mut rngs[i])
            {
                x[i] = y;
            }
        }
        if a > 0.0 {
            let ratio = (-(1.0 - alpha2) * (p.value(x[1]) - p.value(x[0])) / cfg.eps).exp();
            let u: f64 = srng.random();
            if u < a * cfg.dt * ratio.min(1.0) {
                x.swap(0, 1);
                swaps += 1;
            }
        }
    }
    if let Some(d) = dump {
        d.finish()?;
    }
    Ok(EstimatorOutput {
        theta: acc.sum / n as f64,
        occupation_histogram: hist.map(|h| h.finish()).unwrap_or_default(),
        wall_steps: n,
        seed: cfg.seed,
        replicate: cfg.replicate,
        swaps,
        truncated,
    })
}

/// Infinite swapping with K temperatures: particle `i` diffuses with
/// sqrt(2ε Σ_j ρ_ij/α_j) and θ averages Σ_i ρ_i1 1_A(x_i).
pub fn run_ins<P: Potential + ?Sized>(cfg: &SimulationConfig, p: &P) -> Result<EstimatorOutput> {
    let k = cfg.ladder.len();
    let mut engine = WeightEngine::new(&cfg.ladder)?;
    cfg.validate(k)?;
    let (n, truncated) = cfg.steps();
    let half = p.period() / 2.0;
    let alphas = cfg.ladder.alphas().to_vec();
    let mut rngs: Vec<ChaCha8Rng> = (0..k as u64)
        .map(|i| particle_rng(cfg.seed, cfg.replicate, i))
        .collect();
    let mut x: Vec<f64> = cfg.initial_positions.iter().map(|&y| p.wrap(y)).collect();
    let mut v = vec![0.0; k];
    let mut rho = vec![0.0; k * k];
    let seam = seam_is_discontinuous(p);
    let mut scratch = vec![0.0; k * k];
    let mut acc = Kahan::default();
    let mut hist = cfg.histogram.map(|s| WeightedHistogram::new(s, k));
    let mut dump = Dumper::open(&cfg.dump, k, cfg.dt, cfg.eps)?;
    for step in 0..n {
        for (vi, &xi) in v.iter_mut().zip(&x) {
            *vi = p.value(xi);
        }
        engine.rho_into(&v, cfg.eps, &mut rho);
        let mut contrib = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            if cfg.in_target(xi) {
                contrib += rho[i * k];
            }
        }
        acc.add(contrib);
        if let Some(h) = hist.as_mut() {
            h.add(&x, &rho);
        }
        if let Some(d) = dump.as_mut() {
            d.record(step, step as f64 * cfg.dt, &x)?;
        }
        for i in 0..k {
            let s: f64 = (0..k).map(|j| rho[i * k + j] / alphas[j]).sum();
            let amp = noise_amp(cfg.eps, s, cfg.dt);
            let (y, crossed) = advance(p, x[i], cfg.dt, amp, half, &mut rngs[i])?;
            if seam && crossed {
                // log of the symmetrized density, before and after the move
                let before = log_sym_density(&mut engine, &mut v, &x, p, cfg.eps, &mut scratch);
                let old = x[i];
                x[i] = y;
                let after = log_sym_density(&mut engine, &mut v, &x, p, cfg.eps, &mut scratch);
                if !metropolis(after - before, &mut rngs[i]) {
                    x[i] = old;
                }
            } else {
                x[i] = y;
            }
        }
    }
    if let Some(d) = dump {
        d.finish()?;
    }
    Ok(EstimatorOutput {
        theta: acc.sum / n as f64,
        occupation_histogram: hist.map(|h| h.finish()).unwrap_or_default(),
        wall_steps: n,
        seed: cfg.seed,
        replicate: cfg.replicate,
        swaps: 0,
        truncated,
    })
}

/// log Σ_σ exp(−Σ_l α_l V(x_σ(l))/ε) up to a constant.
fn log_sym_density<P: Potential + ?Sized>(
    engine: &mut WeightEngine<f64>,
    v: &mut [f64],
    x: &[f64],
    p: &P,
    eps: f64,
    scratch: &mut [f64],
) -> f64 {
    for (vi, &xi) in v.iter_mut().zip(x) {
        *vi = p.value(xi);
    }
    let (emin, log_total) = engine.rho_into(v, eps, scratch);
    -emin / eps + log_total
}

pub fn run<P: Potential + ?Sized>(method: Method, cfg: &SimulationConfig, p: &P) -> Result<EstimatorOutput> {
    match method {
        Method::Mcmc => run_mcmc(cfg, p),
        Method::Pt => run_pt(cfg, p),
        Method::Ins => run_ins(cfg, p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{FlatPotential, FranzPotential};

    fn cfg(k: usize, t: f64) -> SimulationConfig {
        let ladder = TemperatureLadder::new((0..k as u32).map(|i| 0.5f64.powi(i as i32)).collect()).unwrap();
        SimulationConfig::new(0.3, 1e-3, Horizon::Time(t), ladder, 7, vec![-1.0; k], (0.6, 1.1))
    }

    #[test]
    fn full_domain_gives_one() {
        let p = FranzPotential::new(0.85).unwrap();
        let mut c = cfg(3, 2.0);
        c.target = (-2.5, 2.0);
        let out = run_ins(&c, &p).unwrap();
        assert!((out.theta - 1.0).abs() < 1e-12);
        let mut c1 = cfg(1, 2.0);
        c1.target = (-2.5, 2.0);
        assert_eq!(run_mcmc(&c1, &p).unwrap().theta, 1.0);
    }

    #[test]
    fn ins_single_temperature_is_mcmc() {
        let p = FranzPotential::new(0.85).unwrap();
        let mut c = cfg(1, 5.0);
        c.initial_positions = vec![0.8];
        c.histogram = Some(HistogramSpec { lo: -2.5, hi: 2.0, bins: 50 });
        assert_eq!(run_ins(&c, &p).unwrap(), run_mcmc(&c, &p).unwrap());
    }

    #[test]
    fn pt_without_swaps_follows_mcmc() {
        let p = FranzPotential::new(0.85).unwrap();
        let mut c = cfg(2, 5.0);
        c.initial_positions = vec![0.8, -1.0];
        let pt = run_pt(&c, &p).unwrap();
        let mut c1 = cfg(1, 5.0);
        c1.initial_positions = vec![0.8];
        assert_eq!(pt.theta, run_mcmc(&c1, &p).unwrap().theta);
        assert_eq!(pt.swaps, 0);
    }

    #[test]
    fn pt_rejects_coarse_thinning() {
        let p = FranzPotential::new(0.85).unwrap();
        let mut c = cfg(2, 1.0);
        c.swap_rate = 1000.0;
        assert!(matches!(run_pt(&c, &p), Err(Error::Config { .. })));
        c.dt = 1e-4;
        assert!(run_pt(&c, &p).unwrap().swaps > 0);
    }

    #[test]
    fn divergence_is_reported() {
        let p = FranzPotential::new(0.85).unwrap();
        let mut c = cfg(1, 1.0);
        c.dt = 0.5;
        c.initial_positions = vec![1.9];
        assert!(matches!(run_mcmc(&c, &p), Err(Error::StepSize { .. })));
    }

    #[test]
    fn deterministic() {
        let p = FranzPotential::new(0.85).unwrap();
        let mut c = cfg(2, 3.0);
        c.histogram = Some(HistogramSpec { lo: -2.5, hi: 2.0, bins: 20 });
        assert_eq!(run_ins(&c, &p).unwrap(), run_ins(&c, &p).unwrap());
        let mut c2 = c.clone();
        c2.replicate = 1;
        assert_ne!(
            run_ins(&c, &p).unwrap().occupation_histogram,
            run_ins(&c2, &p).unwrap().occupation_histogram
        );
    }

    #[test]
    fn histograms_are_normalized() {
        let p = FranzPotential::new(0.85).unwrap();
        let mut c = cfg(3, 2.0);
        c.histogram = Some(HistogramSpec { lo: -2.5, hi: 2.0, bins: 40 });
        let out = run_ins(&c, &p).unwrap();
        for row in &out.occupation_histogram {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn equal_positions_single_bin() {
        let p = FranzPotential::new(0.85).unwrap();
        let l = TemperatureLadder::new(vec![1.0, 0.5]).unwrap();
        let s = [0.3, 0.3];
        let spec = HistogramSpec { lo: -2.5, hi: 2.0, bins: 9 };
        let h = weighted_histogram([&s[..]], &l, 0.2, spec, &p).unwrap();
        let b = spec.bin(0.3);
        for row in h {
            assert!((row[b] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_potential_uniform() {
        let p = FlatPotential { lo: 0.0, hi: 1.0, level: 0.0 };
        let mut c = cfg(1, 400.0);
        c.eps = 0.05;
        c.dt = 0.01;
        c.initial_positions = vec![0.5];
        c.target = (0.0, 0.25);
        let theta = run_mcmc(&c, &p).unwrap().theta;
        assert!((theta - 0.25).abs() < 0.05, "{theta}");
    }

    #[test]
    fn dump_round_trip() {
        let p = FranzPotential::new(0.85).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.bin");
        let mut c = cfg(2, 0.1);
        c.dump = Some(DumpSpec { path: path.clone(), every: 10 });
        run_ins(&c, &p).unwrap();
        let d = read_trajectory(&path).unwrap();
        assert_eq!(d.k, 2);
        assert_eq!(d.every, 10);
        assert_eq!(d.records.len(), 10);
        assert_eq!(d.records[0].1, vec![-1.0, -1.0]);
    }
}
