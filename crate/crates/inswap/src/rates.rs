//! Variance decay rates of the INS estimator.
//!
//! The benchmark for a target set A is `2V(A)`, twice the decay rate of
//! μ^ε(A). Everything here is a lower bound on
//! `lim −ε log(Var(θ) · T^ε)` for some ladder, or the ladder maximising it:
//!
//! * [`r_of_alpha`] and [`sup_r`], the ladder-only part of every bound;
//! * [`two_well_rates`] and [`optimal_two_well`] for two-well potentials;
//! * [`multiwell_bound`], a landscape-level bound for the geometric ladder;
//! * [`assemble_r_terms`], the full R-term minimisation over the graph data.

use crate::ensemble::{swap_excess, symmetrized_potential, TemperatureLadder};
use crate::error::{Error, Result};
use crate::graphcalc::{compute_B, dijkstra, GraphRateData};
use crate::potential::{LandscapeGraph, Potential, Site, TwoWellSpec};
use crate::scalar::{convert, max2, min2, pos_part, Real, Scalar};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Which well a target lies in. "Left" is the global-minimum well.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    LeftOfBarrier,
    RightOfBarrier,
    General,
}

/// Target set A, either located on a circle landscape or described only by
/// its level V(A) and side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSet<T> {
    pub interval: Option<(T, T)>,
    /// Normalized potential at the two endpoints.
    pub endpoint_values: Option<(T, T)>,
    /// V(A) = inf over A of V.
    pub v_of_a: T,
    pub side: Side,
}

impl<T: Scalar> TargetSet<T> {
    /// A target known only through V(A).
    pub fn level(v_of_a: T, side: Side) -> Result<Self> {
        if !(v_of_a > T::zero()) {
            return Err(Error::domain(format!(
                "V(A) must be positive (A may not contain the global minimum), got {v_of_a}"
            )));
        }
        Ok(TargetSet {
            interval: None,
            endpoint_values: None,
            v_of_a,
            side,
        })
    }

    /// The interval `[lo, hi]` on a circle landscape, with the normalized
    /// potential at its endpoints supplied by the caller. Each endpoint value
    /// must lie between the values of the critical points around it.
    pub fn on_landscape(lg: &LandscapeGraph<T>, lo: T, hi: T, v_lo: T, v_hi: T) -> Result<Self> {
        let (dlo, dhi) = lg
            .domain
            .clone()
            .ok_or_else(|| Error::domain("a located target needs a circle landscape"))?;
        if !(lo < hi) || lo < dlo || hi > dhi {
            return Err(Error::domain(format!(
                "target [{lo}, {hi}] must be a proper interval inside [{dlo}, {dhi}]"
            )));
        }
        let cyc = lg.cyclic_order().expect("circle landscape");
        for (x, v) in [(&lo, &v_lo), (&hi, &v_hi)] {
            let (a, b) = segment_of(lg, &cyc, x);
            let (va, vb) = (lg.value(a), lg.value(b));
            let (m, mx) = (min2(va.clone(), vb.clone()), max2(va, vb));
            let tol = T::tolerance() * (T::one() + mx.abs());
            if v.clone() < m.clone() - tol.clone() || v.clone() > mx.clone() + tol {
                return Err(Error::domain(format!(
                    "value {v} at {x} is outside the range [{m}, {mx}] of its monotone piece"
                )));
            }
        }
        let inside: Vec<Site> = cyc
            .iter()
            .copied()
            .filter(|&s| lg.location(s) >= lo && lg.location(s) <= hi)
            .collect();
        if inside.contains(&Site::Min(lg.global_min_id)) {
            return Err(Error::domain(format!(
                "target [{lo}, {hi}] contains the global minimum"
            )));
        }
        let v_of_a = inside
            .iter()
            .map(|&s| lg.value(s))
            .fold(min2(v_lo.clone(), v_hi.clone()), min2);
        if !(v_of_a > T::zero()) {
            return Err(Error::domain(format!("V(A) = {v_of_a} must be positive")));
        }
        let straddles = inside
            .iter()
            .any(|&s| matches!(s, Site::Saddle(_)) && lg.location(s) > lo && lg.location(s) < hi);
        let side = if straddles {
            Side::General
        } else {
            let mid = (lo.clone() + hi.clone()) / T::from_ratio(2, 1);
            let basin = match segment_of(lg, &cyc, &mid) {
                (Site::Min(m), _) | (_, Site::Min(m)) => m,
                _ => unreachable!("circle sites alternate"),
            };
            if basin == lg.global_min_id {
                Side::LeftOfBarrier
            } else if lg.num_minima() == 2 {
                Side::RightOfBarrier
            } else {
                Side::General
            }
        };
        Ok(TargetSet {
            interval: Some((lo, hi)),
            endpoint_values: Some((v_lo, v_hi)),
            v_of_a,
            side,
        })
    }

    pub fn convert<S: Scalar>(&self) -> TargetSet<S> {
        TargetSet {
            interval: self.interval.as_ref().map(|(a, b)| (convert(a), convert(b))),
            endpoint_values: self
                .endpoint_values
                .as_ref()
                .map(|(a, b)| (convert(a), convert(b))),
            v_of_a: convert(&self.v_of_a),
            side: self.side,
        }
    }
}

impl<T: Real> TargetSet<T> {
    /// `[lo, hi]` for a potential whose landscape is `lg`.
    pub fn from_potential<P: Potential<T> + ?Sized>(
        p: &P,
        lg: &LandscapeGraph<T>,
        lo: T,
        hi: T,
    ) -> Result<Self> {
        let v_lo = p.raw_value(lo) - lg.offset;
        let v_hi = p.raw_value(hi) - lg.offset;
        Self::on_landscape(lg, lo, hi, v_lo, v_hi)
    }
}

/// Consecutive critical points (in cyclic location order) enclosing `x`.
fn segment_of<T: Scalar>(lg: &LandscapeGraph<T>, cyc: &[Site], x: &T) -> (Site, Site) {
    let n = cyc.len();
    for i in 0..n - 1 {
        if lg.location(cyc[i]) <= *x && *x <= lg.location(cyc[i + 1]) {
            return (cyc[i], cyc[i + 1]);
        }
    }
    (cyc[n - 1], cyc[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// r̂₁ ∧ r̂₃ at a given ladder, target in the global well.
    TwoWellLeft,
    /// r̂₁ ∧ r̂₂ at a given ladder, target in the shallow well.
    TwoWellRight,
    OptimalLeft,
    OptimalRight,
    MultiwellBound,
    BruteForce,
    GraphTerms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct RateReport<T> {
    pub predicted_rate: T,
    /// 2 V(A)
    pub benchmark: T,
    pub gap: T,
    pub optimal_ladder: TemperatureLadder<T>,
    pub provenance: Provenance,
    pub components: BTreeMap<String, T>,
    pub flags: Vec<String>,
    /// The horizon T^ε = e^{c/ε} needs c strictly above this.
    pub min_horizon_exponent: T,
}

impl<T: Scalar> RateReport<T> {
    fn new(
        rate: T,
        v_of_a: &T,
        ladder: TemperatureLadder<T>,
        provenance: Provenance,
        min_horizon_exponent: T,
    ) -> Self {
        let benchmark = T::from_ratio(2, 1) * v_of_a.clone();
        RateReport {
            gap: benchmark.clone() - rate.clone(),
            predicted_rate: rate,
            benchmark,
            optimal_ladder: ladder,
            provenance,
            components: BTreeMap::new(),
            flags: Vec::new(),
            min_horizon_exponent,
        }
    }

    fn with(mut self, name: &str, value: T) -> Self {
        self.components.insert(name.to_string(), value);
        self
    }
}

/// r(α) = inf over V₁ = V(A), 0 ≤ V₂ ≤ … ≤ V_K ≤ V₁ of
/// (2α₁ − α_K)V₁ + Σ_{ℓ≥2} (2α_ℓ − α_{ℓ−1})V_ℓ.
///
/// The objective is linear on the ordered simplex, so the infimum sits at a
/// vertex V_j = … = V_K = V₁, V₂ = … = V_{j−1} = 0.
pub fn r_of_alpha<T: Scalar>(v_of_a: T, ladder: &TemperatureLadder<T>) -> T {
    let k = ladder.len();
    let two = T::from_ratio(2, 1);
    let mut best = T::zero();
    let mut tail = T::zero();
    for l in (1..k).rev() {
        tail = tail + two.clone() * ladder.alpha(l) - ladder.alpha(l - 1);
        best = min2(best, tail.clone());
    }
    v_of_a * (two - ladder.last() + best)
}

/// Grid minimum of 2Σα_ℓV_ℓ − U(V) over V₁ = V(A) and V₂…V_K on an
/// `n`-point grid of `[0, v_max]`. Cost grows like n^{K−1}.
pub fn r_of_alpha_grid<T: Scalar>(
    v_of_a: T,
    ladder: &TemperatureLadder<T>,
    v_max: T,
    n: usize,
) -> Result<T> {
    let k = ladder.len();
    if n < 2 {
        return Err(Error::domain("grid needs at least two points"));
    }
    let grid: Vec<T> = (0..n)
        .map(|i| v_max.clone() * T::from_count(i) / T::from_count(n - 1))
        .collect();
    let two = T::from_ratio(2, 1);
    let mut idx = vec![0usize; k.saturating_sub(1)];
    let mut best: Option<T> = None;
    loop {
        let mut vals = vec![v_of_a.clone()];
        vals.extend(idx.iter().map(|&i| grid[i].clone()));
        let direct = vals
            .iter()
            .zip(ladder.alphas())
            .fold(T::zero(), |s, (v, a)| s + a.clone() * v.clone());
        let val = two.clone() * direct - symmetrized_potential(&vals, ladder)?;
        best = Some(match best {
            Some(b) => min2(b, val),
            None => val,
        });
        let mut p = idx.len();
        loop {
            if p == 0 {
                return Ok(best.expect("at least one grid point"));
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < n {
                break;
            }
            idx[p] = 0;
        }
    }
}

/// sup over the ladder of r(α): ((2 − (1/2)^{K−1}) V(A), geometric ladder).
pub fn sup_r<T: Scalar>(v_of_a: T, k: usize) -> Result<(T, TemperatureLadder<T>)> {
    let ladder = TemperatureLadder::geometric(k)?;
    let rate = (T::from_ratio(2, 1) - T::half_pow(k as u32 - 1)) * v_of_a;
    Ok((rate, ladder))
}

/// Visit every ladder whose multipliers are multiples of `1/steps` in
/// `(0, 1]`.
pub fn for_each_grid_ladder<T: Scalar>(
    k: usize,
    steps: usize,
    mut visit: impl FnMut(&TemperatureLadder<T>),
) -> Result<()> {
    if k == 0 || steps == 0 {
        return Err(Error::domain("grid ladders need K ≥ 1 and steps ≥ 1"));
    }
    let mut idx = vec![steps; k];
    idx[0] = steps;
    fn rec<T: Scalar>(
        pos: usize,
        idx: &mut Vec<usize>,
        steps: usize,
        visit: &mut dyn FnMut(&TemperatureLadder<T>),
    ) {
        if pos == idx.len() {
            let alphas = idx
                .iter()
                .map(|&i| T::from_count(i) / T::from_count(steps))
                .collect();
            visit(&TemperatureLadder::new(alphas).expect("grid ladder is valid"));
            return;
        }
        for i in 1..=idx[pos - 1] {
            idx[pos] = i;
            rec(pos + 1, idx, steps, visit);
        }
    }
    rec(1, &mut idx, steps, &mut visit);
    Ok(())
}

/// Best r(α) over the `1/steps` ladder grid.
pub fn sup_r_grid<T: Scalar>(v_of_a: T, k: usize, steps: usize) -> Result<(T, TemperatureLadder<T>)> {
    let mut best: Option<(T, TemperatureLadder<T>)> = None;
    for_each_grid_ladder(k, steps, |l: &TemperatureLadder<T>| {
        let r = r_of_alpha(v_of_a.clone(), l);
        if best.as_ref().map_or(true, |(b, _)| r > *b) {
            best = Some((r, l.clone()));
        }
    })?;
    Ok(best.expect("grid is non-empty"))
}

/// r̂₁, r̂₂, r̂₃ and the bound they give for the target's side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoWellRates<T> {
    pub r1: T,
    pub r2: T,
    pub r3: T,
    pub bound: T,
}

/// r̂₂ = min over i ∈ {2, …, K+1} of
/// {2V(A) + [Σ_{ℓ=1}^{i−2} α_{K−ℓ+1} − α_{K−i+2}](h_L − h_R)} − α_K h_R,
/// with 1-based multipliers. The sum is empty at i = 2 and the subtracted
/// multiplier is α₁ at i = K+1.
pub fn r_hat_2<T: Scalar>(v_of_a: T, h_l: T, h_r: T, ladder: &TemperatureLadder<T>) -> T {
    let k = ladder.len();
    let a = |j: usize| ladder.alpha(j - 1);
    let two_v = T::from_ratio(2, 1) * v_of_a;
    let mut best: Option<T> = None;
    for i in 2..=k + 1 {
        let sum = (1..=i - 2).fold(T::zero(), |s, l| s + a(k - l + 1));
        let term = two_v.clone() + (sum - a(k + 2 - i)) * (h_l.clone() - h_r.clone());
        best = Some(match best {
            Some(b) => min2(b, term),
            None => term,
        });
    }
    best.expect("K ≥ 1") - ladder.last() * h_r
}

/// r̂₃ = 2V(A) − α_K h_L.
pub fn r_hat_3<T: Scalar>(v_of_a: T, h_l: T, ladder: &TemperatureLadder<T>) -> T {
    T::from_ratio(2, 1) * v_of_a - ladder.last() * h_l
}

pub fn two_well_rates<T: Scalar>(
    spec: &TwoWellSpec<T>,
    target: &TargetSet<T>,
    ladder: &TemperatureLadder<T>,
) -> Result<TwoWellRates<T>> {
    let v = target.v_of_a.clone();
    let r1 = r_of_alpha(v.clone(), ladder);
    let r2 = r_hat_2(v.clone(), spec.h_l.clone(), spec.h_r.clone(), ladder);
    let r3 = r_hat_3(v, spec.h_l.clone(), ladder);
    let bound = match target.side {
        Side::LeftOfBarrier => min2(r1.clone(), r3.clone()),
        Side::RightOfBarrier => min2(r1.clone(), r2.clone()),
        Side::General => {
            return Err(Error::domain(
                "the two-well bound needs a target on one side of the barrier",
            ))
        }
    };
    Ok(TwoWellRates { r1, r2, r3, bound })
}

/// Report for a given ladder from [`two_well_rates`].
pub fn two_well_report<T: Scalar>(
    spec: &TwoWellSpec<T>,
    target: &TargetSet<T>,
    ladder: &TemperatureLadder<T>,
) -> Result<RateReport<T>> {
    let r = two_well_rates(spec, target, ladder)?;
    let prov = if target.side == Side::LeftOfBarrier {
        Provenance::TwoWellLeft
    } else {
        Provenance::TwoWellRight
    };
    Ok(RateReport::new(
        r.bound,
        &target.v_of_a,
        ladder.clone(),
        prov,
        ladder.last() * spec.h_l.clone(),
    )
    .with("r_hat_1", r.r1)
    .with("r_hat_2", r.r2)
    .with("r_hat_3", r.r3))
}

/// Default δ replacing a vanishing optimal α_K.
pub const DEFAULT_DELTA: f64 = 0.1;

/// The optimal ladder and rate for a two-well target.
///
/// For K ≥ 2 the ladder is geometric up to α_{K−1}; α_K is either the next
/// geometric term or the interior optimum. When the optimum would be
/// α_K = 0 (right target at V(A) = h_L − h_R) the ladder uses
/// α_K = δ (1/2)^{K−2} instead, the reported rate is the bound at that
/// ladder and the report is flagged. For K = 1 there is nothing to
/// optimise and the bound at α = (1) is returned.
pub fn optimal_two_well<T: Scalar>(
    spec: &TwoWellSpec<T>,
    target: &TargetSet<T>,
    k: usize,
    delta: T,
) -> Result<RateReport<T>> {
    if k == 0 {
        return Err(Error::Ladder("K must be at least 1".into()));
    }
    if !(delta > T::zero() && delta < T::one()) {
        return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    let v = target.v_of_a.clone();
    let (h_l, h_r) = (spec.h_l.clone(), spec.h_r.clone());
    let two = T::from_ratio(2, 1);
    let tol = T::tolerance() * (T::one() + v.abs() + h_l.abs());
    let left = match target.side {
        Side::LeftOfBarrier => true,
        Side::RightOfBarrier => false,
        Side::General => {
            return Err(Error::domain(
                "the optimal two-well ladder needs a target on one side of the barrier",
            ))
        }
    };
    let prov = if left {
        Provenance::OptimalLeft
    } else {
        Provenance::OptimalRight
    };
    if k == 1 {
        let ladder = TemperatureLadder::new(vec![T::one()])?;
        let mut rep = two_well_report(spec, target, &ladder)?;
        rep.provenance = prov;
        rep.flags.push("single_temperature".into());
        return Ok(rep);
    }
    let geo = |last: T| -> Result<TemperatureLadder<T>> {
        let mut a: Vec<T> = (0..k as u32 - 1).map(T::half_pow).collect();
        a.push(last);
        TemperatureLadder::new(a)
    };
    let hp1 = T::half_pow(k as u32 - 1);
    let hp2 = T::half_pow(k as u32 - 2);
    let mut flags = Vec::new();
    let (ladder, sup_rate, case) = if left {
        if v >= h_l {
            (geo(hp1.clone())?, two.clone() * v.clone() - hp1 * v.clone(), "left_high")
        } else {
            let frac = v.clone() / (v.clone() + h_l.clone());
            let rate = two.clone() * v.clone() - hp2.clone() * (h_l.clone() / (v.clone() + h_l.clone())) * v.clone();
            (geo(frac * hp2)?, rate, "left_low")
        }
    } else if h_l >= two.clone() * h_r.clone() || v >= h_l {
        let m = max2(v.clone(), h_l.clone());
        (geo(hp1.clone())?, two.clone() * v.clone() - hp1 * m, "right_geometric")
    } else if v.clone() >= h_l.clone() - h_r.clone() - tol.clone() {
        let num = v.clone() - (h_l.clone() - h_r.clone());
        let den = v.clone() - (h_l.clone() - two.clone() * h_r.clone());
        let rate = two.clone() * v.clone() - hp2.clone() * (h_r.clone() / den.clone()) * v.clone();
        let last = num / den;
        if last <= tol {
            flags.push("alpha_k_boundary_substituted".to_string());
            (geo(delta.clone() * hp2)?, rate, "right_interior")
        } else {
            (geo(last * hp2)?, rate, "right_interior")
        }
    } else {
        return Err(Error::domain(format!(
            "V(A) = {v} is below the shallow well level h_L − h_R = {}: no optimal-ladder case applies",
            h_l - h_r
        )));
    };
    let at = two_well_rates(spec, target, &ladder)?;
    let predicted = if flags.is_empty() {
        sup_rate.clone()
    } else {
        at.bound.clone()
    };
    let mut rep = RateReport::new(
        predicted,
        &v,
        ladder.clone(),
        prov,
        ladder.last() * h_l,
    )
    .with("supremum", sup_rate)
    .with("r_hat_1", at.r1)
    .with("r_hat_2", at.r2)
    .with("r_hat_3", at.r3)
    .with("V(A)", v);
    rep.flags = flags;
    rep.flags.push(format!("case_{case}"));
    if rep.flags.iter().any(|f| f == "alpha_k_boundary_substituted") {
        rep = rep.with("delta", delta);
    }
    Ok(rep)
}

/// Best two-well bound over the `1/steps` ladder grid.
pub fn grid_optimum_two_well<T: Scalar>(
    spec: &TwoWellSpec<T>,
    target: &TargetSet<T>,
    k: usize,
    steps: usize,
) -> Result<RateReport<T>> {
    let mut best: Option<(T, TemperatureLadder<T>)> = None;
    let mut err = None;
    for_each_grid_ladder(k, steps, |l: &TemperatureLadder<T>| match two_well_rates(spec, target, l) {
        Ok(r) => {
            if best.as_ref().map_or(true, |(b, _)| r.bound > *b) {
                best = Some((r.bound, l.clone()));
            }
        }
        Err(e) => err = Some(e),
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let (rate, ladder) = best.expect("grid is non-empty");
    let c = ladder.last() * spec.h_l.clone();
    Ok(RateReport::new(rate, &target.v_of_a, ladder, Provenance::BruteForce, c))
}

/// (2 − (1/2)^{K−1}) V(A) − B (1/2)^{K−1} with the geometric ladder; the
/// horizon exponent must exceed B (1/2)^{K−1}.
pub fn multiwell_bound<T: Scalar>(
    lg: &LandscapeGraph<T>,
    k: usize,
    target: &TargetSet<T>,
) -> Result<RateReport<T>> {
    let (sup, ladder) = sup_r(target.v_of_a.clone(), k)?;
    let b = compute_B(lg, k)?;
    let c = b.clone() * T::half_pow(k as u32 - 1);
    Ok(
        RateReport::new(sup.clone() - c.clone(), &target.v_of_a, ladder, Provenance::MultiwellBound, c.clone())
            .with("B", b)
            .with("sup_r", sup)
            .with("geometric_penalty", c),
    )
}

/// A point a coordinate may occupy when taking infima: a critical point or
/// an endpoint of A.
#[derive(Debug, Clone)]
struct Slot<T> {
    value: T,
    in_a: bool,
    site: Option<Site>,
}

/// Points of the circle in location order: critical points plus the
/// endpoints of A.
fn slots<T: Scalar>(lg: &LandscapeGraph<T>, target: &TargetSet<T>) -> Result<Vec<Slot<T>>> {
    let (lo, hi) = target.interval.clone().ok_or_else(|| {
        Error::domain("R terms need a target located on the landscape")
    })?;
    let (v_lo, v_hi) = target.endpoint_values.clone().expect("located target");
    let cyc = lg
        .cyclic_order()
        .ok_or_else(|| Error::domain("R terms need a circle landscape"))?;
    let mut pts: Vec<(T, Slot<T>)> = cyc
        .iter()
        .map(|&s| {
            let loc = lg.location(s);
            let in_a = loc >= lo && loc <= hi;
            (
                loc,
                Slot {
                    value: lg.value(s),
                    in_a,
                    site: Some(s),
                },
            )
        })
        .collect();
    for (x, v) in [(lo, v_lo), (hi, v_hi)] {
        if !pts.iter().any(|(l, _)| *l == x) {
            pts.push((
                x,
                Slot {
                    value: v,
                    in_a: true,
                    site: None,
                },
            ));
        }
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("comparable locations"));
    Ok(pts.into_iter().map(|p| p.1).collect())
}

/// Largest product state space searched by [`assemble_r_terms`].
pub const MAX_R_STATES: usize = 1 << 20;

/// R-term lower bound from exact graph data.
///
/// Coordinates range over critical points and the endpoints of A (the first
/// coordinate over those in A), which is enough because the objectives are
/// piecewise linear in the V-values with breakpoints at those values.
/// Q(O_i, x) is the cheapest chain of single-coordinate moves between
/// neighbouring points, each costing the rise of U.
pub fn assemble_r_terms<T: Scalar>(
    lg: &LandscapeGraph<T>,
    ladder: &TemperatureLadder<T>,
    target: &TargetSet<T>,
    data: &GraphRateData<T>,
) -> Result<RateReport<T>> {
    let w = data.w.clone().ok_or_else(|| Error::Capacity {
        what: "exact graph data for R terms",
        got: data.equilibria.len(),
        limit: crate::graphcalc::MAX_EXACT_NODES,
    })?;
    let pts = slots(lg, target)?;
    let p = pts.len();
    let k = ladder.len();
    let n = (p as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if n > MAX_R_STATES as u128 {
        return Err(Error::Capacity {
            what: "R-term product states",
            got: n.min(usize::MAX as u128) as usize,
            limit: MAX_R_STATES,
        });
    }
    let n = n as usize;
    let decode = |mut code: usize| -> Vec<usize> {
        let mut d = vec![0; k];
        for c in d.iter_mut().rev() {
            *c = code % p;
            code /= p;
        }
        d
    };
    let values = |d: &[usize]| -> Vec<T> { d.iter().map(|&i| pts[i].value.clone()).collect() };
    let mut u = Vec::with_capacity(n);
    for code in 0..n {
        u.push(symmetrized_potential(&values(&decode(code)), ladder)?);
    }
    let mut adj: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    let mut stride = 1;
    for _ in 0..k {
        for code in 0..n {
            let digit = (code / stride) % p;
            for nd in [(digit + 1) % p, (digit + p - 1) % p] {
                if nd == digit {
                    continue;
                }
                let other = code - digit * stride + nd * stride;
                adj[code].push((other, pos_part(u[other].clone() - u[code].clone())));
            }
        }
        stride *= p;
    }
    let index_of = |site: Site| pts.iter().position(|s| s.site == Some(site)).expect("site present");
    let candidates: Vec<(usize, T)> = (0..n)
        .filter_map(|code| {
            let d = decode(code);
            if !pts[d[0]].in_a {
                return None;
            }
            Some((code, swap_excess(&values(&d), ladder).expect("length K")))
        })
        .collect();

    let two = T::from_ratio(2, 1);
    let w1 = data.w_values[0].clone();
    let mut rep = RateReport::new(
        T::zero(),
        &target.v_of_a,
        ladder.clone(),
        Provenance::GraphTerms,
        max2(data.h.clone(), w.clone()),
    );
    let (mut min1, mut min2_, mut min3): (Option<T>, Option<T>, Option<T>) = (None, None, None);
    let upd = |m: &mut Option<T>, v: T| {
        *m = Some(match m.take() {
            Some(x) => min2(x, v),
            None => v,
        })
    };
    for (i, eq) in data.equilibria.iter().enumerate() {
        let mut code = 0;
        for &m in &eq.well_ids {
            code = code * p + index_of(Site::Min(m));
        }
        let q = dijkstra(&adj, code);
        let (mut inf2, mut inf1): (Option<T>, Option<T>) = (None, None);
        for (c, f) in &candidates {
            if let Some(qc) = &q[*c] {
                upd(&mut inf2, two.clone() * f.clone() + qc.clone());
                upd(&mut inf1, f.clone() + qc.clone());
            }
        }
        let (inf2, inf1) = match (inf2, inf1) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::structural("target unreachable from an equilibrium")),
        };
        let wi = data.w_values[i].clone();
        let r1 = inf2 + wi.clone() - w1.clone();
        let r2 = if i == 0 {
            two.clone() * inf1.clone() - data.h.clone()
        } else {
            let pair = data.w_pair_values[i].clone().expect("pair value for i ≠ 1");
            two.clone() * inf1.clone() + wi.clone() - two.clone() * w1.clone() + pair
        };
        let r3 = two.clone() * inf1 + two.clone() * wi - two.clone() * w1.clone() - w.clone();
        rep = rep
            .with(&format!("R1[{}]", i + 1), r1.clone())
            .with(&format!("R2[{}]", i + 1), r2.clone())
            .with(&format!("R3[{}]", i + 1), r3.clone());
        upd(&mut min1, r1);
        upd(&mut min2_, r2);
        upd(&mut min3, r3);
    }
    let (min1, min2_, min3) = (min1.unwrap(), min2_.unwrap(), min3.unwrap());
    let use_r3 = data.h < w;
    let mut predicted = min2(min1.clone(), min2_.clone());
    if use_r3 {
        predicted = min2(predicted, min3.clone());
    }
    let r = r_of_alpha(target.v_of_a.clone(), ladder);
    let tol = T::tolerance() * (T::one() + r.abs());
    if (min1.clone() - r.clone()).abs() > tol {
        rep.flags.push("min_r1_differs_from_r_alpha".into());
    }
    rep.flags.push(if use_r3 { "h_below_w" } else { "h_at_least_w" }.into());
    rep.gap = rep.benchmark.clone() - predicted.clone();
    rep.predicted_rate = predicted;
    Ok(rep
        .with("r_alpha", r)
        .with("min_R1", min1)
        .with("min_R2", min2_)
        .with("min_R3", min3)
        .with("h", data.h.clone())
        .with("w", w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphcalc::graph_rate_data;
    use crate::potential::{classify_two_well, extract_landscape, FranzPotential};
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    fn q(n: i64, d: i64) -> Q {
        Ratio::new(n, d)
    }

    fn ladder(a: &[f64]) -> TemperatureLadder<f64> {
        TemperatureLadder::new(a.to_vec()).unwrap()
    }

    #[test]
    fn r_alpha_examples() {
        let l = TemperatureLadder::new(vec![q(1, 1), q(1, 2)]).unwrap();
        assert_eq!(r_of_alpha(q(1, 1), &l), q(3, 2));
        let flat = TemperatureLadder::new(vec![q(1, 1), q(1, 1)]).unwrap();
        assert_eq!(r_of_alpha(q(1, 1), &flat), q(1, 1));
        let one = TemperatureLadder::new(vec![q(1, 1)]).unwrap();
        assert_eq!(r_of_alpha(q(3, 1), &one), q(3, 1));
    }

    #[test]
    fn r_alpha_grid_agrees() {
        let l = ladder(&[1.0, 0.3, 0.2]);
        let exact = r_of_alpha(0.7, &l);
        let grid = r_of_alpha_grid(0.7, &l, 2.0, 201).unwrap();
        assert!((exact - grid).abs() < 1e-9, "{exact} {grid}");
    }

    #[test]
    fn sup_r_examples() {
        let (r, l) = sup_r(q(2, 1), 3).unwrap();
        assert_eq!(r, q(7, 2));
        assert_eq!(l.alphas(), &[q(1, 1), q(1, 2), q(1, 4)]);
        let (r1, _) = sup_r(q(5, 1), 1).unwrap();
        assert_eq!(r1, q(5, 1));
        let (r7, _) = sup_r(q(1, 1), 7).unwrap();
        assert_eq!(q(2, 1) - r7, q(1, 64));
    }

    fn spec(h_l: Q, h_r: Q) -> TwoWellSpec<Q> {
        TwoWellSpec {
            h_l,
            h_r,
            x_l: q(0, 1),
            x_r: q(2, 1),
            barrier: q(1, 1),
            left_min: 0,
            right_min: 1,
            barrier_saddle: 0,
        }
    }

    #[test]
    fn r_hat_3_examples() {
        let s = spec(q(1, 1), q(1, 2));
        let l = TemperatureLadder::new(vec![q(1, 1), q(1, 2)]).unwrap();
        let t = TargetSet::level(q(1, 1), Side::LeftOfBarrier).unwrap();
        assert_eq!(two_well_rates(&s, &t, &l).unwrap().r3, q(3, 2));
    }

    #[test]
    fn r_hat_2_k2_by_hand() {
        // i = 2: 2V − α₂(h_L − h_R); i = 3: 2V + (α₂ − α₁)(h_L − h_R)
        let (v, hl, hr, d) = (q(4, 5), q(1, 1), q(3, 5), q(1, 10));
        let l = TemperatureLadder::new(vec![q(1, 1), d]).unwrap();
        let i2 = q(2, 1) * v - d * (hl - hr);
        let i3 = q(2, 1) * v + (d - q(1, 1)) * (hl - hr);
        assert_eq!(r_hat_2(v, hl, hr, &l), min2(i2, i3) - d * hr);
    }

    #[test]
    fn optimal_examples() {
        let s = spec(q(1, 1), q(1, 2));
        let left_hi = TargetSet::level(q(2, 1), Side::LeftOfBarrier).unwrap();
        let r = optimal_two_well(&s, &left_hi, 3, q(1, 10)).unwrap();
        assert_eq!(r.predicted_rate, q(7, 2));
        assert_eq!(r.optimal_ladder.alphas(), &[q(1, 1), q(1, 2), q(1, 4)]);
        let left_lo = TargetSet::level(q(1, 2), Side::LeftOfBarrier).unwrap();
        let r = optimal_two_well(&s, &left_lo, 2, q(1, 10)).unwrap();
        assert_eq!(r.predicted_rate, q(2, 3));
        assert_eq!(r.optimal_ladder.alphas(), &[q(1, 1), q(1, 3)]);
    }

    #[test]
    fn franz_right_target() {
        let p = FranzPotential::new(0.85).unwrap();
        let lg: LandscapeGraph<f64> = extract_landscape(&p, 20_000).unwrap();
        let s = classify_two_well(&lg).unwrap();
        let t = TargetSet::level(0.8, Side::RightOfBarrier).unwrap();
        let r = optimal_two_well(&s, &t, 2, 0.1).unwrap();
        assert!((r.predicted_rate - 1.127).abs() < 1e-3);
        assert!((r.optimal_ladder.last() - 0.4088).abs() < 1e-3);
        let grid = grid_optimum_two_well(&s, &t, 2, 400).unwrap();
        assert!(grid.predicted_rate <= r.predicted_rate + 1e-9);
        assert!(grid.predicted_rate > r.predicted_rate - 5e-3);
    }

    #[test]
    fn franz_boundary_target_is_flagged() {
        let p = FranzPotential::new(0.85).unwrap();
        let lg: LandscapeGraph<f64> = extract_landscape(&p, 20_000).unwrap();
        let s = classify_two_well(&lg).unwrap();
        let t = TargetSet::from_potential(&p, &lg, 0.6, 1.1).unwrap();
        assert_eq!(t.side, Side::RightOfBarrier);
        assert!((t.v_of_a - (s.h_l - s.h_r)).abs() < 1e-9);
        let r = optimal_two_well(&s, &t, 2, 0.1).unwrap();
        assert!(r.flags.iter().any(|f| f == "alpha_k_boundary_substituted"));
        assert!((r.optimal_ladder.last() - 0.1).abs() < 1e-12);
        let at = two_well_rates(&s, &t, &r.optimal_ladder).unwrap();
        assert_eq!(r.predicted_rate, at.bound);
    }

    #[test]
    fn general_target_rejected() {
        let s = spec(q(1, 1), q(1, 2));
        let t = TargetSet::level(q(1, 1), Side::General).unwrap();
        let l = TemperatureLadder::new(vec![q(1, 1)]).unwrap();
        assert!(two_well_rates(&s, &t, &l).is_err());
    }

    #[test]
    fn multiwell_example() {
        // wells 0 and 1/2, barrier 1: h_L = 1, h_R = 1/2
        let lg = LandscapeGraph::from_circle_values(&[q(0, 1), q(1, 2)], &[q(1, 1), q(10, 1)]).unwrap();
        let t = TargetSet::level(q(1, 1), Side::RightOfBarrier).unwrap();
        let r = multiwell_bound(&lg, 4, &t).unwrap();
        assert_eq!(r.predicted_rate, q(13, 8));
        assert_eq!(r.components["B"], q(2, 1));
    }

    #[test]
    fn r_terms_single_well() {
        // one well at 0 with saddle 3; A = [1/4, 1/2] on the rising slope
        let lg = LandscapeGraph::from_circle_values(&[q(0, 1)], &[q(3, 1)]).unwrap();
        let t = TargetSet::on_landscape(&lg, q(1, 4), q(1, 2), q(1, 1), q(2, 1)).unwrap();
        let l = TemperatureLadder::new(vec![q(1, 1)]).unwrap();
        let data = graph_rate_data(&lg, &l).unwrap();
        let r = assemble_r_terms(&lg, &l, &t, &data).unwrap();
        assert_eq!(r.components["min_R1"], q(1, 1));
        assert_eq!(r.components["r_alpha"], q(1, 1));
        assert!(!r.flags.iter().any(|f| f.contains("differs")));
    }

    #[test]
    fn r_terms_two_well_relations() {
        let lg = LandscapeGraph::from_circle_values(&[q(0, 1), q(1, 1)], &[q(4, 1), q(20, 1)]).unwrap();
        // right well at location 2; A = [5/2, 11/4] on the slope up to saddle 20
        let t = TargetSet::on_landscape(&lg, q(5, 2), q(11, 4), q(2, 1), q(5, 1)).unwrap();
        assert_eq!(t.side, Side::RightOfBarrier);
        for l in [
            vec![q(1, 1), q(1, 2)],
            vec![q(1, 1), q(1, 3)],
            vec![q(1, 1), q(1, 1)],
        ] {
            let l = TemperatureLadder::new(l).unwrap();
            let data = graph_rate_data(&lg, &l).unwrap();
            let rep = assemble_r_terms(&lg, &l, &t, &data).unwrap();
            let r = r_of_alpha(q(2, 1), &l);
            let hw = max2(data.h, data.w.unwrap());
            assert_eq!(rep.components["min_R1"], r);
            assert!(rep.components["min_R2"] >= r - hw);
            assert!(rep.components["min_R3"] >= r - data.w.unwrap());
            assert!(rep.predicted_rate <= rep.benchmark);
        }
    }
}
