//! Fast invariant suite behind `inswap verify`.

use inswap::ensemble::{compute_weights, EnsembleState, TemperatureLadder};
use inswap::graphcalc::{arrow_costs, compute_h, enumerate_wgraphs, h_by_paths, w_values, CostTable};
use inswap::potential::random_circle_landscape;
use inswap::rates::{sup_r, sup_r_grid};
use inswap::{Exact, ExactLadder, ExactLandscape, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

pub const SUITES: [&str; 5] = ["weights", "w-u-identity", "h-closed-form", "supr", "wgraph-count"];

/// Deliberate corruption used to check that a suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    CorruptCostTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

pub fn run_suite(name: &str, fault: Option<Fault>) -> Result<SuiteResult> {
    let (name, outcome) = match name {
        "weights" => ("weights", weights()),
        "w-u-identity" => ("w-u-identity", w_u_identity(fault)),
        "h-closed-form" => ("h-closed-form", h_closed_form()),
        "supr" => ("supr", supr()),
        "wgraph-count" => ("wgraph-count", wgraph_count()),
        other => {
            return Err(inswap::Error::config("suite", format!("unknown suite {other:?}")));
        }
    };
    let (pass, detail) = outcome?;
    Ok(SuiteResult { name, pass, detail })
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5EED)
}

fn random_ladder(rng: &mut ChaCha8Rng, k: usize) -> Result<TemperatureLadder<f64>> {
    let mut a = vec![1.0];
    for _ in 1..k {
        let prev = *a.last().unwrap();
        a.push(prev * rng.random_range(0.05..=1.0));
    }
    TemperatureLadder::new(a)
}

fn weights() -> Result<(bool, String)> {
    let mut rng = rng();
    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let k = rng.random_range(1..=4);
        let ladder = random_ladder(&mut rng, k)?;
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..3.0)).collect();
        let eps = rng.random_range(0.05..1.0);
        let t = compute_weights(&EnsembleState::from_values(vec![0.0; k], v)?, &ladder, eps)?;
        let total: f64 = t.log_weights.iter().map(|w| w.exp()).sum();
        worst = worst.max((total - 1.0).abs());
        for i in 0..k {
            let row: f64 = t.rho[i].iter().sum();
            let col: f64 = (0..k).map(|j| t.rho[j][i]).sum();
            worst = worst.max((row - 1.0).abs()).max((col - 1.0).abs());
        }
    }
    Ok((worst <= 1e-12, format!("largest deviation {worst:.3e}")))
}

fn landscapes(wells: &[usize], per: usize) -> Result<Vec<ExactLandscape>> {
    let mut rng = rng();
    let mut out = Vec::new();
    for &h in wells {
        for _ in 0..per {
            out.push(random_circle_landscape(&mut rng, h, 9)?);
        }
    }
    Ok(out)
}

fn w_u_identity(fault: Option<Fault>) -> Result<(bool, String)> {
    let ladder = ExactLadder::new(vec![Exact::from_integer(1), Exact::new(1, 2)])?;
    let mut checked = 0;
    for lg in landscapes(&[2, 3], 10)? {
        let (eqs, mut cost) = arrow_costs(&lg, &ladder)?;
        if fault == Some(Fault::CorruptCostTable) {
            let mut c = cost.cost.clone();
            for x in c[1].iter_mut().flatten() {
                *x += Exact::from_integer(1);
            }
            cost = CostTable::new(c);
        }
        let (single, _) = w_values(&cost)?;
        for i in 0..eqs.len() {
            for j in 0..eqs.len() {
                let lhs = single[i] - single[j];
                let rhs = eqs[i].u_value - eqs[j].u_value;
                if lhs != rhs {
                    return Ok((false, format!("W difference {lhs} != U difference {rhs} for ({i}, {j})")));
                }
                checked += 1;
            }
        }
    }
    Ok((true, format!("{checked} pairs exact")))
}

fn h_closed_form() -> Result<(bool, String)> {
    let mut rng = rng();
    let lgs = landscapes(&[2, 3, 4], 5)?;
    for lg in &lgs {
        let k = rng.random_range(1..=3);
        let mut a = vec![Exact::from_integer(1)];
        for _ in 1..k {
            let prev = *a.last().unwrap();
            a.push(prev * Exact::new(rng.random_range(1..=4), 4));
        }
        let ladder = ExactLadder::new(a)?;
        let closed = compute_h(lg, &ladder)?;
        if h_by_paths(lg, &ladder)? != Some(closed) {
            return Ok((false, format!("closed form {closed} disagrees with the path search")));
        }
    }
    Ok((true, format!("{} landscapes", lgs.len())))
}

fn supr() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for k in 1..=3 {
        for v in [0.5f64, 1.0, 1.7] {
            let (exact, _) = sup_r(v, k)?;
            let (grid, _) = sup_r_grid(v, k, 64)?;
            worst = worst.max((exact - grid).abs());
        }
    }
    Ok((worst <= 2e-2, format!("largest gap to the grid {worst:.3e}")))
}

fn wgraph_count() -> Result<(bool, String)> {
    for n in 1..=5usize {
        let expect = if n == 1 { 1 } else { n.pow(n as u32 - 2) };
        for j in 0..n {
            let got = enumerate_wgraphs(n, &BTreeSet::from([j]))?.len();
            if got != expect {
                return Ok((false, format!("{got} graphs on {n} nodes, expected {expect}")));
            }
        }
    }
    Ok((true, "n^(n-2) for n <= 5".into()))
}
