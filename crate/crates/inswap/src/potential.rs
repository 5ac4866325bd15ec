//! One-dimensional periodic potentials and their critical-point structure.
//!
//! A [`Potential`] lives on a compact interval `[lo, hi]` and is extended
//! periodically. [`extract_landscape`] turns it into a [`LandscapeGraph`]
//! (minima, saddles and the wells each saddle separates), which is the only
//! input the graph calculus needs.

use crate::error::{ConditionBullet, Error, Result};
use crate::scalar::{max2, min2, Real, Scalar};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Default periodic domain for the Franz potential.
pub const FRANZ_DOMAIN: (f64, f64) = (-2.5, 2.0);

pub trait Potential<T: Real = f64>: Send + Sync {
    /// The fundamental interval `[lo, hi]`.
    fn domain(&self) -> (T, T);

    /// Value for `x` inside the fundamental interval.
    fn raw_value(&self, x: T) -> T;

    /// Derivative for `x` inside the fundamental interval.
    fn raw_gradient(&self, x: T) -> T;

    fn description(&self) -> String;

    fn period(&self) -> T {
        let (lo, hi) = self.domain();
        hi - lo
    }

    /// Map `x` into `[lo, hi)`.
    fn wrap(&self, x: T) -> T {
        let (lo, hi) = self.domain();
        if x >= lo && x < hi {
            return x;
        }
        let p = hi - lo;
        let mut y = (x - lo) % p;
        if y < T::zero() {
            y = y + p;
        }
        if y >= p {
            y = y - p;
        }
        lo + y
    }

    fn value(&self, x: T) -> T {
        self.raw_value(self.wrap(x))
    }

    fn gradient(&self, x: T) -> T {
        self.raw_gradient(self.wrap(x))
    }
}

impl<T: Real, P: Potential<T> + ?Sized> Potential<T> for Box<P> {
    fn domain(&self) -> (T, T) {
        (**self).domain()
    }
    fn raw_value(&self, x: T) -> T {
        (**self).raw_value(x)
    }
    fn raw_gradient(&self, x: T) -> T {
        (**self).raw_gradient(x)
    }
    fn description(&self) -> String {
        (**self).description()
    }
}

/// V(x;θ) = (3x⁴ − 4(θ−1)x³ − 6θx²)/(2θ+1) + 1.
///
/// Minimum 0 at x = −1, barrier of height 1 at x = 0, second minimum at
/// x = θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FranzPotential<T = f64> {
    theta: T,
    lo: T,
    hi: T,
}

impl<T: Real> FranzPotential<T> {
    pub fn new(theta: T) -> Result<Self> {
        let lo = T::from_f64(FRANZ_DOMAIN.0).unwrap();
        let hi = T::from_f64(FRANZ_DOMAIN.1).unwrap();
        Self::with_domain(theta, lo, hi)
    }

    pub fn with_domain(theta: T, lo: T, hi: T) -> Result<Self> {
        if !(theta >= T::zero() && theta <= T::one()) {
            return Err(Error::domain(format!(
                "theta must lie in [0, 1], got {theta}"
            )));
        }
        if !(lo < -T::one() && hi > theta && lo.is_finite() && hi.is_finite()) {
            return Err(Error::domain(format!(
                "domain [{lo}, {hi}] must contain both minima"
            )));
        }
        Ok(FranzPotential { theta, lo, hi })
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    /// 1 − θ³(θ+2)/(2θ+1)
    pub fn right_minimum_value(&self) -> T {
        let t = self.theta;
        let two = T::from_ratio(2, 1);
        T::one() - t * t * t * (t + two) / (two * t + T::one())
    }
}

pub fn franz_potential(theta: f64) -> Result<FranzPotential<f64>> {
    FranzPotential::new(theta)
}

impl<T: Real> Potential<T> for FranzPotential<T> {
    fn domain(&self) -> (T, T) {
        (self.lo, self.hi)
    }

    fn raw_value(&self, x: T) -> T {
        let t = self.theta;
        let c = |n: i64| T::from_ratio(n, 1);
        let d = c(2) * t + T::one();
        let poly = x * x * (c(3) * x * x - c(4) * (t - T::one()) * x - c(6) * t);
        poly / d + T::one()
    }

    fn raw_gradient(&self, x: T) -> T {
        let t = self.theta;
        let d = T::from_ratio(2, 1) * t + T::one();
        T::from_ratio(12, 1) * x * (x - t) * (x + T::one()) / d
    }

    fn description(&self) -> String {
        format!("franz(theta={})", self.theta)
    }
}

/// V(x) = k(x − c)²/2 on `[c − w, c + w]`: one well, one barrier at the seam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticWell<T = f64> {
    pub center: T,
    pub half_width: T,
    pub curvature: T,
}

impl<T: Real> Potential<T> for QuadraticWell<T> {
    fn domain(&self) -> (T, T) {
        (self.center - self.half_width, self.center + self.half_width)
    }
    fn raw_value(&self, x: T) -> T {
        let d = x - self.center;
        self.curvature * d * d / T::from_ratio(2, 1)
    }
    fn raw_gradient(&self, x: T) -> T {
        self.curvature * (x - self.center)
    }
    fn description(&self) -> String {
        format!("quadratic(k={})", self.curvature)
    }
}

/// A constant potential. Useful for sampler checks; it has no landscape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatPotential<T = f64> {
    pub lo: T,
    pub hi: T,
    pub level: T,
}

impl<T: Real> Potential<T> for FlatPotential<T> {
    fn domain(&self) -> (T, T) {
        (self.lo, self.hi)
    }
    fn raw_value(&self, _x: T) -> T {
        self.level
    }
    fn raw_gradient(&self, _x: T) -> T {
        T::zero()
    }
    fn description(&self) -> String {
        "flat".into()
    }
}

/// Piecewise cubic Hermite interpolant through prescribed critical points.
///
/// Between consecutive nodes `(a, v_a)` and `(b, v_b)` the curve is
/// `v_a + (v_b − v_a)(3t² − 2t³)` with `t = (x − a)/(b − a)`, so every node is
/// a critical point with exactly the prescribed value and the curve is
/// monotone in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermitePotential<T = f64> {
    lo: T,
    period: T,
    nodes: Vec<(T, T)>,
}

impl<T: Real> HermitePotential<T> {
    /// `points` are `(location, value)` pairs inside `[lo, lo + period)`.
    /// Values must alternate between local minima and local maxima around
    /// the circle.
    pub fn new(lo: T, period: T, mut points: Vec<(T, T)>) -> Result<Self> {
        if !(period > T::zero()) {
            return Err(Error::domain("period must be positive"));
        }
        if points.len() < 2 || points.len() % 2 != 0 {
            return Err(Error::structural(
                "need an even number (at least two) of alternating critical points",
            ));
        }
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite locations"));
        let hi = lo + period;
        for w in points.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(Error::structural(format!(
                    "duplicate critical point location {}",
                    w[0].0
                )));
            }
        }
        for &(x, _) in &points {
            if x < lo || x >= hi {
                return Err(Error::domain(format!(
                    "critical point {x} outside [{lo}, {hi})"
                )));
            }
        }
        let n = points.len();
        for i in 0..n {
            let v = points[i].1;
            let prev = points[(i + n - 1) % n].1;
            let next = points[(i + 1) % n].1;
            let is_min = v < prev && v < next;
            let is_max = v > prev && v > next;
            if !(is_min || is_max) {
                return Err(Error::structural(format!(
                    "critical point at {} is neither a strict minimum nor a strict maximum",
                    points[i].0
                )));
            }
        }
        Ok(HermitePotential {
            lo,
            period,
            nodes: points,
        })
    }

    pub fn nodes(&self) -> &[(T, T)] {
        &self.nodes
    }

    fn segment(&self, x: T) -> (T, T, T, T) {
        let n = self.nodes.len();
        let first = self.nodes[0];
        let last = self.nodes[n - 1];
        if x < first.0 {
            return (last.0 - self.period, last.1, first.0, first.1);
        }
        if x >= last.0 {
            return (last.0, last.1, first.0 + self.period, first.1);
        }
        let idx = self.nodes.partition_point(|p| p.0 <= x);
        let a = self.nodes[idx - 1];
        let b = self.nodes[idx];
        (a.0, a.1, b.0, b.1)
    }
}

impl<T: Real> Potential<T> for HermitePotential<T> {
    fn domain(&self) -> (T, T) {
        (self.lo, self.lo + self.period)
    }

    fn raw_value(&self, x: T) -> T {
        let (xa, va, xb, vb) = self.segment(x);
        let t = (x - xa) / (xb - xa);
        va + (vb - va) * t * t * (T::from_ratio(3, 1) - T::from_ratio(2, 1) * t)
    }

    fn raw_gradient(&self, x: T) -> T {
        let (xa, va, xb, vb) = self.segment(x);
        let t = (x - xa) / (xb - xa);
        (vb - va) * T::from_ratio(6, 1) * t * (T::one() - t) / (xb - xa)
    }

    fn description(&self) -> String {
        format!("hermite({} critical points)", self.nodes.len())
    }
}

/// Parse a critical-point file.
///
/// ```text
/// # comment
/// period 4.5
/// start -2.5
/// min(-1.0, 0.0)
/// saddle(0.0, 1.0)
/// ```
///
/// `start` defaults to 0. The declared kinds must agree with the values.
pub fn parse_critical_points(text: &str) -> Result<HermitePotential<f64>> {
    let mut period = None;
    let mut start = 0.0;
    let mut points = Vec::new();
    let mut kinds = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let perr = |detail: String| Error::Parse {
            line: line_no,
            detail,
        };
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| perr(format!("bad number `{}`: {e}", s.trim())))
        };
        if let Some(rest) = line.strip_prefix("period") {
            period = Some(num(rest)?);
            continue;
        }
        if let Some(rest) = line.strip_prefix("start") {
            start = num(rest)?;
            continue;
        }
        let (kind, args) = line
            .split_once('(')
            .ok_or_else(|| perr(format!("expected `kind(location, value)`, got `{line}`")))?;
        let args = args
            .strip_suffix(')')
            .ok_or_else(|| perr("missing closing parenthesis".into()))?;
        let (loc, val) = args
            .split_once(',')
            .ok_or_else(|| perr("expected two comma-separated numbers".into()))?;
        let is_min = match kind.trim() {
            "min" => true,
            "saddle" | "max" => false,
            other => return Err(perr(format!("unknown kind `{other}`"))),
        };
        points.push((num(loc)?, num(val)?));
        kinds.push(is_min);
    }
    let period = period.ok_or(Error::Parse {
        line: 0,
        detail: "missing `period` header".into(),
    })?;
    let mut tagged: Vec<_> = points.into_iter().zip(kinds).collect();
    tagged.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0));
    let n = tagged.len();
    for i in 0..n {
        let v = tagged[i].0 .1;
        let prev = tagged[(i + n - 1) % n].0 .1;
        if n > 1 && tagged[i].1 != (v < prev) {
            return Err(Error::Parse {
                line: 0,
                detail: format!(
                    "point at {} declared {} but its value disagrees with its neighbours",
                    tagged[i].0 .0,
                    if tagged[i].1 { "min" } else { "saddle" }
                ),
            });
        }
    }
    HermitePotential::new(start, period, tagged.into_iter().map(|t| t.0).collect())
}

pub fn load_critical_points(path: &Path) -> Result<HermitePotential<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    parse_critical_points(&text)
}

/// Render a Hermite potential in the critical-point file format.
pub fn critical_points_text(p: &HermitePotential<f64>) -> String {
    let mut out = format!("period {}\nstart {}\n", p.period, p.lo);
    let n = p.nodes.len();
    for (i, &(x, v)) in p.nodes.iter().enumerate() {
        let prev = p.nodes[(i + n - 1) % n].1;
        let kind = if v < prev { "min" } else { "saddle" };
        out.push_str(&format!("{kind}({x}, {v})\n"));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Site {
    Min(usize),
    Saddle(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint<T> {
    pub location: T,
    pub value: T,
}

/// Saddle `saddle` separates the wells of minima `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub saddle: usize,
    pub b: usize,
}

/// Critical points of a potential and the adjacency between its wells.
///
/// Values are normalized so that the global minimum is 0. `domain` is set
/// for one-dimensional circle landscapes, whose critical points alternate
/// between minima and saddles in location order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeGraph<T> {
    pub minima: Vec<CriticalPoint<T>>,
    pub saddles: Vec<CriticalPoint<T>>,
    pub edges: Vec<Edge>,
    pub global_min_id: usize,
    pub domain: Option<(T, T)>,
    /// Normalized potential at `lo` and `hi`.
    pub boundary_values: Option<(T, T)>,
    /// Index of the saddle sitting on the periodic seam, if any.
    pub seam_saddle: Option<usize>,
    /// Raw value of the global minimum, subtracted during normalization.
    pub offset: T,
}

impl<T: Scalar> LandscapeGraph<T> {
    /// A general well graph. Values are taken as given (not renormalized).
    pub fn new(
        minima: Vec<CriticalPoint<T>>,
        saddles: Vec<CriticalPoint<T>>,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        if minima.is_empty() {
            return Err(Error::structural("landscape without minima"));
        }
        for e in &edges {
            if e.a >= minima.len() || e.b >= minima.len() || e.saddle >= saddles.len() {
                return Err(Error::structural(format!("edge {e:?} out of range")));
            }
        }
        let global_min_id = argmin(minima.iter().map(|m| m.value.clone()));
        Ok(LandscapeGraph {
            minima,
            saddles,
            edges,
            global_min_id,
            domain: None,
            boundary_values: None,
            seam_saddle: None,
            offset: T::zero(),
        })
    }

    /// A circle landscape from points `(is_min, location, value)` inside
    /// `domain`. Points are sorted by location and must alternate.
    pub fn circle(
        mut points: Vec<(bool, T, T)>,
        domain: (T, T),
        boundary_values: Option<(T, T)>,
    ) -> Result<Self> {
        if points.len() < 2 || points.len() % 2 != 0 {
            return Err(Error::structural(
                "a circle landscape needs alternating minima and saddles",
            ));
        }
        points.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("comparable locations"));
        let n = points.len();
        for i in 0..n {
            if points[i].0 == points[(i + 1) % n].0 {
                return Err(Error::structural(format!(
                    "critical points at {} and {} do not alternate",
                    points[i].1,
                    points[(i + 1) % n].1
                )));
            }
        }
        let mut minima = Vec::new();
        let mut saddles = Vec::new();
        let mut order = Vec::new();
        for (is_min, loc, val) in &points {
            let cp = CriticalPoint {
                location: loc.clone(),
                value: val.clone(),
            };
            if *is_min {
                order.push(Site::Min(minima.len()));
                minima.push(cp);
            } else {
                order.push(Site::Saddle(saddles.len()));
                saddles.push(cp);
            }
        }
        let mut edges = Vec::new();
        for i in 0..n {
            if let Site::Saddle(s) = order[i] {
                let left = order[(i + n - 1) % n];
                let right = order[(i + 1) % n];
                if let (Site::Min(a), Site::Min(b)) = (left, right) {
                    edges.push(Edge { a, saddle: s, b });
                }
            }
        }
        let seam_saddle = match order[0] {
            Site::Saddle(s) if saddles[s].location == domain.0 => Some(s),
            _ => None,
        };
        let global_min_id = argmin(minima.iter().map(|m| m.value.clone()));
        Ok(LandscapeGraph {
            minima,
            saddles,
            edges,
            global_min_id,
            domain: Some(domain),
            boundary_values,
            seam_saddle,
            offset: T::zero(),
        })
    }

    /// Circle landscape `min0 s0 min1 s1 …` where `s_i` separates minimum `i`
    /// from minimum `i+1` (cyclically). Minimum `i` sits at location `2i`,
    /// saddle `i` at `2i + 1`, on the domain `[−1/2, 2H − 1/2)`.
    pub fn from_circle_values(min_values: &[T], saddle_values: &[T]) -> Result<Self> {
        if min_values.len() != saddle_values.len() || min_values.is_empty() {
            return Err(Error::structural(
                "need as many saddles as minima on a circle",
            ));
        }
        let h = min_values.len() as i64;
        let mut pts = Vec::new();
        for i in 0..min_values.len() {
            let k = i as i64;
            pts.push((true, T::from_ratio(2 * k, 1), min_values[i].clone()));
            pts.push((false, T::from_ratio(2 * k + 1, 1), saddle_values[i].clone()));
        }
        Self::circle(pts, (T::from_ratio(-1, 2), T::from_ratio(4 * h - 1, 2)), None)
    }

    pub fn num_minima(&self) -> usize {
        self.minima.len()
    }

    pub fn is_circle(&self) -> bool {
        self.domain.is_some()
    }

    pub fn value(&self, site: Site) -> T {
        match site {
            Site::Min(i) => self.minima[i].value.clone(),
            Site::Saddle(i) => self.saddles[i].value.clone(),
        }
    }

    pub fn location(&self, site: Site) -> T {
        match site {
            Site::Min(i) => self.minima[i].location.clone(),
            Site::Saddle(i) => self.saddles[i].location.clone(),
        }
    }

    /// Saddles next to minimum `m`, each with the well on its other side.
    pub fn exits(&self, m: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for e in &self.edges {
            if e.a == m {
                out.push((e.saddle, e.b));
            } else if e.b == m {
                out.push((e.saddle, e.a));
            }
        }
        out
    }

    /// Minima adjacent to saddle `s`.
    pub fn saddle_minima(&self, s: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for e in &self.edges {
            if e.saddle == s {
                out.push(e.a);
                if e.b != e.a {
                    out.push(e.b);
                }
            }
        }
        out
    }

    /// Value of the lowest saddle adjacent to the global-minimum well.
    pub fn b1(&self) -> Result<T> {
        let exits = self.exits(self.global_min_id);
        exits
            .into_iter()
            .map(|(s, _)| self.saddles[s].value.clone() - self.minima[self.global_min_id].value.clone())
            .reduce(min2)
            .ok_or_else(|| Error::structural("global minimum has no adjacent saddle"))
    }

    /// Critical points in location order (circle landscapes only).
    pub fn cyclic_order(&self) -> Option<Vec<Site>> {
        self.domain.as_ref()?;
        let mut sites: Vec<Site> = (0..self.minima.len())
            .map(Site::Min)
            .chain((0..self.saddles.len()).map(Site::Saddle))
            .collect();
        sites.sort_by(|a, b| {
            self.location(*a)
                .partial_cmp(&self.location(*b))
                .expect("comparable locations")
        });
        Some(sites)
    }

    /// True when exactly one minimum attains the lowest value.
    pub fn has_unique_global_min(&self) -> bool {
        let g = self.minima[self.global_min_id].value.clone();
        self.minima
            .iter()
            .enumerate()
            .all(|(i, m)| i == self.global_min_id || m.value.clone() - g.clone() > T::tolerance())
    }

    /// Check the structural invariants required by the graph calculus.
    pub fn validate(&self) -> Result<()> {
        let g = &self.minima[self.global_min_id];
        if g.value.abs() > T::tolerance() {
            return Err(Error::structural(format!(
                "global minimum has value {} instead of 0",
                g.value
            )));
        }
        if !self.has_unique_global_min() {
            return Err(Error::structural("the global minimum is not unique"));
        }
        for s in &self.saddles {
            if !(s.value > T::tolerance()) {
                return Err(Error::structural(format!(
                    "saddle at {} has non-positive value",
                    s.location
                )));
            }
        }
        for e in &self.edges {
            let sv = self.saddles[e.saddle].value.clone();
            if !(sv > self.minima[e.a].value && sv > self.minima[e.b].value) {
                return Err(Error::structural(format!(
                    "saddle {} does not exceed the minima it separates",
                    e.saddle
                )));
            }
        }
        let n = self.minima.len();
        let mut seen = vec![false; n];
        let mut stack = vec![self.global_min_id];
        seen[self.global_min_id] = true;
        while let Some(m) = stack.pop() {
            for (_, other) in self.exits(m) {
                if !seen[other] {
                    seen[other] = true;
                    stack.push(other);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::structural("well graph is not connected"));
        }
        Ok(())
    }
}

/// Random circle landscape with integer critical values: the global
/// minimum is 0, the other minima are distinct values in `1..=top`, and
/// every saddle is a distinct value above both of its neighbours.
pub fn random_circle_landscape<T: Scalar, R: rand::Rng + ?Sized>(
    rng: &mut R,
    wells: usize,
    top: i64,
) -> Result<LandscapeGraph<T>> {
    if wells == 0 || top < wells as i64 {
        return Err(Error::domain(format!("cannot place {wells} wells below {top}")));
    }
    let mut mins: Vec<i64> = Vec::with_capacity(wells);
    while mins.len() < wells - 1 {
        let v = rng.random_range(1..=top);
        if !mins.contains(&v) {
            mins.push(v);
        }
    }
    mins.insert(rng.random_range(0..wells), 0);
    let mut saddles: Vec<i64> = Vec::with_capacity(wells);
    for i in 0..wells {
        let floor = mins[i].max(mins[(i + 1) % wells]) + 1;
        loop {
            let v = rng.random_range(floor..=floor + top);
            if !saddles.contains(&v) {
                saddles.push(v);
                break;
            }
        }
    }
    let conv = |v: &Vec<i64>| v.iter().map(|&x| T::from_ratio(x, 1)).collect::<Vec<T>>();
    LandscapeGraph::from_circle_values(&conv(&mins), &conv(&saddles))
}

fn argmin<T: Scalar>(values: impl Iterator<Item = T>) -> usize {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in values.enumerate() {
        match &best {
            Some((_, b)) if !(v < *b) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|b| b.0).unwrap_or(0)
}

fn sign<T: Real>(x: T) -> i8 {
    if x > T::zero() {
        1
    } else if x < T::zero() {
        -1
    } else {
        0
    }
}

/// Locate and classify every critical point of `p`.
///
/// The gradient is scanned on `grid_n + 1` equispaced points, each sign
/// change is refined by bisection to 1e-10, and the kind is read off a
/// centred second difference with stencil `period/1000`. A second
/// difference below `1e-8 × (max V − min V)` is reported as a degenerate
/// critical point. The periodic seam is examined separately; when the
/// periodic extension jumps there, the seam must act as a barrier whose
/// height is the larger one-sided value.
pub fn extract_landscape<T: Real, P: Potential<T> + ?Sized>(
    p: &P,
    grid_n: usize,
) -> Result<LandscapeGraph<T>> {
    if grid_n < 1000 {
        return Err(Error::domain(format!("grid_n must be at least 1000, got {grid_n}")));
    }
    let (lo, hi) = p.domain();
    let period = hi - lo;
    let nt = T::from_count(grid_n);
    let xs: Vec<T> = (0..=grid_n)
        .map(|k| if k == grid_n { hi } else { lo + period * T::from_count(k) / nt })
        .collect();
    let g: Vec<T> = xs.iter().map(|&x| p.raw_gradient(x)).collect();
    let (vmin, vmax) = xs.iter().fold((T::infinity(), T::neg_infinity()), |acc, &x| {
        let v = p.raw_value(x);
        (acc.0.min(v), acc.1.max(v))
    });
    let vrange = vmax - vmin;
    if !(vrange > T::zero()) {
        return Err(Error::Classification {
            location: lo.to_f64_lossy(),
            detail: "flat potential has no isolated critical points".into(),
        });
    }
    let f = |v: f64| T::from_f64(v).unwrap();
    let eps = T::epsilon();
    let scale = max2(max2(lo.abs(), hi.abs()), period);
    let tol = max2(f(1e-10), f(16.0) * eps * scale);
    let stencil = period * f(1e-3);
    let degenerate = f(1e-8) * vrange;

    let mut roots = Vec::new();
    for k in 1..grid_n {
        if sign(g[k]) == 0 {
            roots.push(xs[k]);
        }
    }
    for k in 0..grid_n {
        if sign(g[k]) * sign(g[k + 1]) < 0 {
            let (mut a, mut b) = (xs[k], xs[k + 1]);
            let sa = sign(g[k]);
            for _ in 0..200 {
                if b - a <= tol {
                    break;
                }
                let m = (a + b) / f(2.0);
                if m <= a || m >= b {
                    break;
                }
                let sm = sign(p.raw_gradient(m));
                if sm == 0 {
                    a = m;
                    b = m;
                    break;
                }
                if sm == sa {
                    a = m;
                } else {
                    b = m;
                }
            }
            roots.push((a + b) / f(2.0));
        }
    }

    let mut points: Vec<(bool, T, T)> = Vec::new();
    for &r in &roots {
        let d2 = p.value(r + stencil) - f(2.0) * p.value(r) + p.value(r - stencil);
        if d2.abs() < degenerate {
            return Err(Error::Classification {
                location: r.to_f64_lossy(),
                detail: format!("second difference {} below tolerance", d2.to_f64_lossy()),
            });
        }
        points.push((d2 > T::zero(), r, p.raw_value(r)));
    }

    let v_lo = p.raw_value(lo);
    let v_hi = p.raw_value(hi);
    let left_of_seam = p.raw_value(hi - stencil);
    let right_of_seam = p.raw_value(lo + stencil);
    let continuous = (v_hi - v_lo).abs() <= f(1e-9) * vrange;
    let seam_max = v_hi > left_of_seam && v_lo > right_of_seam;
    let seam_min = v_hi < left_of_seam && v_lo < right_of_seam;
    if seam_max {
        points.push((false, lo, max2(v_lo, v_hi)));
    } else if seam_min {
        if !continuous {
            return Err(Error::Classification {
                location: lo.to_f64_lossy(),
                detail: "a well straddles a discontinuous periodic seam".into(),
            });
        }
        points.push((true, lo, v_lo));
    } else if !continuous {
        return Err(Error::Classification {
            location: lo.to_f64_lossy(),
            detail: "discontinuous periodic extension must form a barrier at the seam".into(),
        });
    }
    if points.is_empty() {
        return Err(Error::structural("no critical points found"));
    }

    let offset = points
        .iter()
        .filter(|pt| pt.0)
        .map(|pt| pt.2)
        .reduce(min2)
        .ok_or_else(|| Error::structural("no minima found"))?;
    for pt in &mut points {
        pt.2 = pt.2 - offset;
    }
    let mut lg = LandscapeGraph::circle(points, (lo, hi), Some((v_lo - offset, v_hi - offset)))?;
    lg.offset = offset;
    Ok(lg)
}

/// Two-well data extracted from a landscape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoWellSpec<T> {
    pub h_l: T,
    pub h_r: T,
    pub x_l: T,
    pub x_r: T,
    pub barrier: T,
    pub left_min: usize,
    pub right_min: usize,
    pub barrier_saddle: usize,
}

/// Accept a landscape with exactly two wells, a unique global minimum and an
/// outer boundary higher than the interior barrier.
///
/// "Left" always refers to the global-minimum well, whatever its location.
pub fn classify_two_well<T: Scalar>(lg: &LandscapeGraph<T>) -> Result<TwoWellSpec<T>> {
    let reject = |bullet, detail: String| Err(Error::Condition { bullet, detail });
    if !lg.is_circle() {
        return reject(
            ConditionBullet::PeriodicDomain,
            "landscape is not a one-dimensional periodic potential".into(),
        );
    }
    if lg.minima.len() != 2 {
        return reject(
            ConditionBullet::TwoMinima,
            format!("two local minima required, found {}", lg.minima.len()),
        );
    }
    let left = lg.global_min_id;
    let right = 1 - left;
    let v_l = lg.minima[left].value.clone();
    let v_r = lg.minima[right].value.clone();
    if !(v_r.clone() - v_l.clone() > T::tolerance()) {
        return reject(
            ConditionBullet::TwoMinima,
            "V(x_L) = V(x_R): the global minimum must be unique".into(),
        );
    }
    if v_l.abs() > T::tolerance() {
        return reject(
            ConditionBullet::Normalization,
            format!("V(x_L) = {v_l} instead of 0"),
        );
    }
    // Two minima on a circle always have two saddles; the interior barrier
    // is the one off the seam (or the lower one when there is no seam).
    let interior: Vec<usize> = (0..lg.saddles.len())
        .filter(|&s| Some(s) != lg.seam_saddle)
        .collect();
    let barrier_saddle = match (interior.len(), lg.seam_saddle) {
        (1, Some(_)) => interior[0],
        (2, None) => {
            if lg.saddles[0].value <= lg.saddles[1].value {
                0
            } else {
                1
            }
        }
        _ => {
            return reject(
                ConditionBullet::SingleBarrier,
                "exactly one interior local maximum required".into(),
            )
        }
    };
    let outer = 1 - barrier_saddle;
    let h_l = lg.saddles[barrier_saddle].value.clone() - v_l.clone();
    let h_r = h_l.clone() - (v_r.clone() - v_l);
    if !(h_r > T::zero()) {
        return reject(
            ConditionBullet::Normalization,
            format!("h_R = {h_r} must be positive"),
        );
    }
    let boundary_min = match &lg.boundary_values {
        Some((a, b)) => min2(a.clone(), b.clone()),
        None => lg.saddles[outer].value.clone(),
    };
    if !(boundary_min > h_l) {
        return reject(
            ConditionBullet::BoundaryHeight,
            format!("boundary value {boundary_min} does not exceed h_L = {h_l}"),
        );
    }
    Ok(TwoWellSpec {
        h_l,
        h_r,
        x_l: lg.minima[left].location.clone(),
        x_r: lg.minima[right].location.clone(),
        barrier: lg.saddles[barrier_saddle].location.clone(),
        left_min: left,
        right_min: right,
        barrier_saddle,
    })
}
