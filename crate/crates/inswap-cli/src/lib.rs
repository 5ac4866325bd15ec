//! Config handling and subcommand bodies for the `inswap` binary.

pub mod verify;

use inswap::ensemble::MAX_K;
use inswap::graphcalc::{graph_rate_data, GraphRateData};
use inswap::harness::{
    self, Arm, ArmMethod, ExperimentPlan, ExperimentRecord, HorizonRule, LadderRule, OrderingCheck,
    PotentialSpec,
};
use inswap::potential::{classify_two_well, extract_landscape, LandscapeGraph, Potential, TwoWellSpec};
use inswap::rates::{assemble_r_terms, multiwell_bound, optimal_two_well, two_well_report, Side, DEFAULT_DELTA};
use inswap::{Error, Ladder, Report, Result, Target};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Everything a run needs. Flags given on the command line override the
/// corresponding fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    #[serde(default)]
    pub ladder: LadderRule,
    pub target: (f64, f64),
    #[serde(default = "default_method")]
    pub method: ArmMethod,
    /// When non-empty, replaces the single arm built from `method`/`ladder`.
    #[serde(default)]
    pub arms: Vec<Arm>,
    #[serde(default = "default_grid")]
    pub eps_grid: Vec<f64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_horizon")]
    pub horizon: HorizonRule,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default)]
    pub initial_position: Option<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub orderings: Vec<OrderingCheck>,
    #[serde(default = "default_true")]
    pub check_bias: bool,
    #[serde(default)]
    pub dt_check: bool,
}

fn default_method() -> ArmMethod {
    ArmMethod::Ins
}
fn default_grid() -> Vec<f64> {
    vec![0.40, 0.30, 0.22]
}
fn default_replications() -> usize {
    100
}
fn default_horizon() -> HorizonRule {
    HorizonRule::Auto { factor: 1.2 }
}
fn default_dt() -> f64 {
    1e-3
}
fn default_max_steps() -> u64 {
    inswap::sampler::DEFAULT_MAX_STEPS
}
fn default_tolerance() -> f64 {
    0.15
}
fn default_true() -> bool {
    true
}

/// Command-line overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub eps_grid: Option<Vec<f64>>,
    pub k: Option<usize>,
    pub theta: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(p) = &o.out {
            self.out = Some(p.clone());
        }
        if let Some(g) = &o.eps_grid {
            self.eps_grid = g.clone();
        }
        if let Some(k) = o.k {
            self.ladder = match self.ladder {
                LadderRule::Optimal { delta, .. } => LadderRule::Optimal { k, delta },
                _ => LadderRule::Geometric { k },
            };
        }
        if let Some(theta) = o.theta {
            self.potential = PotentialSpec::Franz { theta };
        }
    }

    fn check_k(k: usize) -> Result<()> {
        if k == 0 || k > MAX_K {
            return Err(Error::config("ladder", format!("K must lie in 1..={MAX_K}, got {k}")));
        }
        Ok(())
    }

    /// Field-level checks that do not need the landscape.
    pub fn validate(&self) -> Result<()> {
        let p = self.potential.build().map_err(|e| Error::config("potential", e.to_string()))?;
        let (lo, hi) = p.domain();
        let (a, b) = self.target;
        if !(a < b) || a < lo || b > hi {
            return Err(Error::config(
                "target",
                format!("[{a}, {b}] must be a non-empty interval inside the domain [{lo}, {hi}]"),
            ));
        }
        let rules = std::iter::once(&self.ladder).chain(self.arms.iter().map(|a| &a.ladder));
        for rule in rules {
            match rule {
                LadderRule::Explicit { alphas } => {
                    Self::check_k(alphas.len())?;
                    Ladder::new(alphas.clone())
                        .map_err(|e| Error::config("ladder", format!("not in Δ: {e}")))?;
                }
                LadderRule::Geometric { k } | LadderRule::Optimal { k, .. } => Self::check_k(*k)?,
            }
        }
        Ok(())
    }

    pub fn plan(&self) -> Result<ExperimentPlan> {
        let seed = self.seed.ok_or_else(|| Error::config("seed", "a seed is required to simulate"))?;
        let arms = if self.arms.is_empty() {
            let label = match self.method {
                ArmMethod::Mcmc => "mcmc",
                ArmMethod::Pt => "pt",
                ArmMethod::Ins => "ins",
                ArmMethod::Synthetic { .. } => "synthetic",
            };
            vec![Arm {
                label: label.into(),
                method: self.method.clone(),
                ladder: self.ladder.clone(),
                swap_rate: 0.0,
            }]
        } else {
            self.arms.clone()
        };
        let plan = ExperimentPlan {
            potential: self.potential.clone(),
            target: self.target,
            eps_grid: self.eps_grid.clone(),
            replications: self.replications,
            arms,
            horizon: self.horizon,
            dt: self.dt,
            max_steps: self.max_steps,
            initial_position: self.initial_position,
            seed,
            tolerance: self.tolerance,
            orderings: self.orderings.clone(),
            check_bias: self.check_bias,
            dt_check: self.dt_check,
        };
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoWellAnalysis {
    pub spec: TwoWellSpec<f64>,
    /// Bound at the configured ladder.
    pub at_ladder: Report,
    pub optimal: Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub ladder: Vec<f64>,
    pub k: usize,
    pub v_of_a: f64,
    pub side: Side,
    /// Headline lower bound on the decay rate.
    pub predicted_rate: f64,
    pub two_well: Option<TwoWellAnalysis>,
    pub multiwell: Report,
    pub graph_terms: Option<Report>,
    pub h: f64,
    pub w: Option<f64>,
    pub w_upper_bound: f64,
    #[serde(rename = "B")]
    pub big_b: f64,
    pub min_horizon_exponent: f64,
}

struct Loaded {
    lg: LandscapeGraph<f64>,
    target: Target,
    two_well: Option<TwoWellSpec<f64>>,
}

fn load_landscape(cfg: &RunConfig) -> Result<Loaded> {
    cfg.validate()?;
    let p = cfg.potential.build()?;
    let lg = extract_landscape(&*p, harness::LANDSCAPE_GRID)?;
    lg.validate()?;
    let target = Target::from_potential(&*p, &lg, cfg.target.0, cfg.target.1)
        .map_err(|e| Error::config("target", e.to_string()))?;
    let two_well = classify_two_well(&lg).ok();
    Ok(Loaded { lg, target, two_well })
}

fn ladder_k(rule: &LadderRule) -> usize {
    match rule {
        LadderRule::Explicit { alphas } => alphas.len(),
        LadderRule::Geometric { k } | LadderRule::Optimal { k, .. } => *k,
    }
}

pub fn analyze(cfg: &RunConfig) -> Result<Analysis> {
    let l = load_landscape(cfg)?;
    let k = ladder_k(&cfg.ladder);
    let two_side = l.target.side != Side::General;
    let ladder = cfg
        .ladder
        .resolve(l.two_well.as_ref().filter(|_| two_side).map(|s| (s, &l.target)))?;
    let two_well = match &l.two_well {
        Some(spec) if two_side => Some(TwoWellAnalysis {
            spec: spec.clone(),
            at_ladder: two_well_report(spec, &l.target, &ladder)?,
            optimal: optimal_two_well(spec, &l.target, k, DEFAULT_DELTA)?,
        }),
        _ => None,
    };
    let multiwell = multiwell_bound(&l.lg, k, &l.target)?;
    let data: GraphRateData<f64> = graph_rate_data(&l.lg, &ladder)?;
    let graph_terms = assemble_r_terms(&l.lg, &ladder, &l.target, &data).ok();
    let predicted_rate = match (&two_well, &graph_terms) {
        (Some(t), _) => t.at_ladder.predicted_rate,
        (None, Some(g)) => g.predicted_rate,
        (None, None) => multiwell.predicted_rate,
    };
    Ok(Analysis {
        ladder: ladder.alphas().to_vec(),
        k,
        v_of_a: l.target.v_of_a,
        side: l.target.side,
        predicted_rate,
        two_well,
        multiwell,
        graph_terms,
        h: data.h,
        w: data.w,
        w_upper_bound: data.w_upper_bound,
        big_b: data.big_b,
        min_horizon_exponent: data.min_horizon_exponent(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderFile {
    pub alphas: Vec<f64>,
    pub predicted_rate: f64,
    pub flags: Vec<String>,
    pub boundary_substituted: bool,
}

pub fn optimize(cfg: &RunConfig) -> Result<LadderFile> {
    let l = load_landscape(cfg)?;
    let k = ladder_k(&cfg.ladder);
    let delta = match cfg.ladder {
        LadderRule::Optimal { delta: Some(d), .. } => d,
        _ => DEFAULT_DELTA,
    };
    let rep = match &l.two_well {
        Some(spec) if l.target.side != Side::General => optimal_two_well(spec, &l.target, k, delta)?,
        _ => {
            let mut r = multiwell_bound(&l.lg, k, &l.target)?;
            r.flags.push("multiwell_geometric".into());
            r
        }
    };
    Ok(LadderFile {
        alphas: rep.optimal_ladder.alphas().to_vec(),
        predicted_rate: rep.predicted_rate,
        boundary_substituted: rep.flags.iter().any(|f| f == "alpha_k_boundary_substituted"),
        flags: rep.flags,
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<(ExperimentRecord, PathBuf)> {
    cfg.validate()?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| Error::config("out", "an output directory is required to simulate"))?;
    let plan = cfg.plan()?;
    let record = harness::run_experiment(&plan)?;
    harness::persist(&record, &out)?;
    Ok((record, out))
}

/// Write `value` as JSON to `dir/name`, or to stdout without a directory.
pub fn emit<S: Serialize>(value: &S, dir: Option<&Path>, name: &str) -> Result<Option<PathBuf>> {
    let text = serde_json::to_string_pretty(value)?;
    match dir {
        Some(d) => {
            std::fs::create_dir_all(d).map_err(|source| Error::File {
                path: d.to_path_buf(),
                source,
            })?;
            let p = d.join(name);
            harness::write_atomic(&p, text.as_bytes())?;
            Ok(Some(p))
        }
        None => {
            use std::io::Write;
            writeln!(std::io::stdout().lock(), "{text}")?;
            Ok(None)
        }
    }
}

/// Comma-separated temperatures.
pub fn parse_grid(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}
