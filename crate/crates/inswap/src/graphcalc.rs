//! Graph calculus over product equilibria.
//!
//! The INS process on `M^K` has the equilibria `O = (y_{i_1}, …, y_{i_K})`
//! built from the minima of V. Because the process is reversible with
//! potential U, the cost of moving one coordinate over a saddle is the rise
//! of U along the move, and arrow costs between equilibria are shortest
//! paths over such single-coordinate moves. W-graph minimisation on top of
//! those costs gives `W(O_j)`, `W(O₁ ∪ O_j)`, and from them the constants
//! `h`, `w` and `B`.

use crate::ensemble::{symmetrized_potential, TemperatureLadder};
use crate::error::{Error, Result};
use crate::potential::{LandscapeGraph, Site};
use crate::scalar::{max2, min2, pos_part, Scalar};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

/// Exact W-graph minimisation is limited to this many equilibria.
pub const MAX_EXACT_NODES: usize = 9;

/// Product graphs larger than this are refused outright.
pub const MAX_PRODUCT_NODES: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductEquilibrium<T> {
    pub well_ids: Vec<usize>,
    pub u_value: T,
}

impl<T> ProductEquilibrium<T> {
    pub fn sites(&self) -> Vec<Site> {
        self.well_ids.iter().map(|&m| Site::Min(m)).collect()
    }
}

/// A forest of in-trees rooted in `target`: every other node has exactly
/// one outgoing arrow and following arrows always reaches `target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WGraph {
    pub arrows: BTreeMap<usize, usize>,
    pub target: BTreeSet<usize>,
}

impl WGraph {
    pub fn is_valid(&self, n: usize) -> bool {
        for v in 0..n {
            let has = self.arrows.contains_key(&v);
            if has == self.target.contains(&v) {
                return false;
            }
        }
        for &start in self.arrows.keys() {
            let mut x = start;
            let mut steps = 0;
            while !self.target.contains(&x) {
                match self.arrows.get(&x) {
                    Some(&y) if y != x => x = y,
                    _ => return false,
                }
                steps += 1;
                if steps > n {
                    return false;
                }
            }
        }
        true
    }

    pub fn cost<T: Scalar>(&self, table: &CostTable<T>) -> Option<T> {
        let mut s = T::zero();
        for (&a, &b) in &self.arrows {
            s = s + table.get(a, b)?;
        }
        Some(s)
    }
}

/// Pairwise arrow costs; `None` marks an unreachable pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable<T> {
    pub cost: Vec<Vec<Option<T>>>,
}

impl<T: Scalar> CostTable<T> {
    pub fn new(cost: Vec<Vec<Option<T>>>) -> Self {
        CostTable { cost }
    }

    pub fn len(&self) -> usize {
        self.cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cost.is_empty()
    }

    pub fn get(&self, a: usize, b: usize) -> Option<T> {
        self.cost[a][b].clone()
    }
}

/// Orders scalars for the priority queue; values are never NaN here.
#[derive(Debug, Clone, PartialEq)]
struct Key<T>(T, usize);

impl<T: PartialOrd> Eq for Key<T> {}

impl<T: PartialOrd> PartialOrd for Key<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: PartialOrd> Ord for Key<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other
            .0
            .partial_cmp(&self.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.1.cmp(&self.1))
    }
}

/// Single-source shortest paths with non-negative weights.
pub(crate) fn dijkstra<T: Scalar>(adj: &[Vec<(usize, T)>], src: usize) -> Vec<Option<T>> {
    let mut dist: Vec<Option<T>> = vec![None; adj.len()];
    let mut done = vec![false; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[src] = Some(T::zero());
    heap.push(Key(T::zero(), src));
    while let Some(Key(d, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for (v, c) in &adj[u] {
            let nd = d.clone() + c.clone();
            let better = match &dist[*v] {
                None => true,
                Some(old) => nd < *old,
            };
            if better {
                dist[*v] = Some(nd.clone());
                heap.push(Key(nd, *v));
            }
        }
    }
    dist
}

fn site_values<T: Scalar>(lg: &LandscapeGraph<T>, sites: &[Site]) -> Vec<T> {
    sites.iter().map(|&s| lg.value(s)).collect()
}

fn adjacent(lg: &LandscapeGraph<impl Scalar>, m: usize, s: usize) -> bool {
    lg.edges.iter().any(|e| e.saddle == s && (e.a == m || e.b == m))
}

/// Cost of one single-coordinate move: the positive part of the rise of U
/// when the moving coordinate is lifted to the saddle it crosses.
///
/// Coordinates may sit at minima or saddles. A minimum-to-minimum move goes
/// over the cheapest saddle joining the two wells; leaving a saddle for an
/// adjacent minimum is free.
pub fn one_step_cost<T: Scalar>(
    from: &[Site],
    to: &[Site],
    lg: &LandscapeGraph<T>,
    ladder: &TemperatureLadder<T>,
) -> Result<T> {
    if from.len() != ladder.len() || to.len() != ladder.len() {
        return Err(Error::structural("configuration length differs from K"));
    }
    let diff: Vec<usize> = (0..from.len()).filter(|&k| from[k] != to[k]).collect();
    if diff.len() != 1 {
        return Err(Error::structural(format!(
            "a single step changes exactly one coordinate, these differ in {}",
            diff.len()
        )));
    }
    let k = diff[0];
    let base_vals = site_values(lg, from);
    let base = symmetrized_potential(&base_vals, ladder)?;
    let lifted = |s: usize| -> Result<T> {
        let mut v = base_vals.clone();
        v[k] = lg.saddles[s].value.clone();
        Ok(pos_part(symmetrized_potential(&v, ladder)? - base.clone()))
    };
    match (from[k], to[k]) {
        (Site::Min(a), Site::Min(b)) => {
            let mut best: Option<T> = None;
            for e in &lg.edges {
                if (e.a == a && e.b == b) || (e.a == b && e.b == a) {
                    let c = lifted(e.saddle)?;
                    best = Some(match best {
                        Some(x) => min2(x, c),
                        None => c,
                    });
                }
            }
            best.ok_or_else(|| {
                Error::structural(format!("wells {a} and {b} are not adjacent"))
            })
        }
        (Site::Min(a), Site::Saddle(s)) => {
            if !adjacent(lg, a, s) {
                return Err(Error::structural(format!("saddle {s} does not bound well {a}")));
            }
            lifted(s)
        }
        (Site::Saddle(s), Site::Min(a)) => {
            if !adjacent(lg, a, s) {
                return Err(Error::structural(format!("saddle {s} does not bound well {a}")));
            }
            Ok(T::zero())
        }
        (Site::Saddle(a), Site::Saddle(b)) => Err(Error::structural(format!(
            "saddles {a} and {b} are not adjacent"
        ))),
    }
}

/// Minima ordered with the global minimum first.
fn minima_order<T: Scalar>(lg: &LandscapeGraph<T>) -> Vec<usize> {
    let mut order = vec![lg.global_min_id];
    order.extend((0..lg.num_minima()).filter(|&m| m != lg.global_min_id));
    order
}

/// All of `{y₁, …, y_H}^K` in lexicographic order (global minimum first in
/// each coordinate), so index 0 is O₁.
pub fn product_equilibria<T: Scalar>(
    lg: &LandscapeGraph<T>,
    ladder: &TemperatureLadder<T>,
) -> Result<Vec<ProductEquilibrium<T>>> {
    let h = lg.num_minima();
    let k = ladder.len();
    let n = (h as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if n > MAX_PRODUCT_NODES as u128 {
        return Err(Error::Capacity {
            what: "product equilibria H^K",
            got: n.min(usize::MAX as u128) as usize,
            limit: MAX_PRODUCT_NODES,
        });
    }
    let order = minima_order(lg);
    let mut out = Vec::with_capacity(n as usize);
    let mut digits = vec![0usize; k];
    loop {
        let ids: Vec<usize> = digits.iter().map(|&d| order[d]).collect();
        let vals: Vec<T> = ids.iter().map(|&m| lg.minima[m].value.clone()).collect();
        out.push(ProductEquilibrium {
            u_value: symmetrized_potential(&vals, ladder)?,
            well_ids: ids,
        });
        let mut pos = k;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < h {
                break;
            }
            digits[pos] = 0;
        }
    }
}

/// Adjacency of single-coordinate well-to-well moves between product
/// equilibria, weighted by [`one_step_cost`].
fn product_moves<T: Scalar>(
    lg: &LandscapeGraph<T>,
    ladder: &TemperatureLadder<T>,
    eqs: &[ProductEquilibrium<T>],
) -> Result<Vec<Vec<(usize, T)>>> {
    let index: BTreeMap<Vec<usize>, usize> = eqs
        .iter()
        .enumerate()
        .map(|(i, e)| (e.well_ids.clone(), i))
        .collect();
    let mut adj = vec![Vec::new(); eqs.len()];
    for (u, e) in eqs.iter().enumerate() {
        let vals: Vec<T> = e.well_ids.iter().map(|&m| lg.minima[m].value.clone()).collect();
        for k in 0..e.well_ids.len() {
            for (s, other) in lg.exits(e.well_ids[k]) {
                if other == e.well_ids[k] {
                    continue;
                }
                let mut v = vals.clone();
                v[k] = lg.saddles[s].value.clone();
                let c = pos_part(symmetrized_potential(&v, ladder)? - e.u_value.clone());
                let mut ids = e.well_ids.clone();
                ids[k] = other;
                adj[u].push((index[&ids], c));
            }
        }
    }
    Ok(adj)
}

/// Product equilibria and the shortest-path arrow costs between them.
pub fn arrow_costs<T: Scalar>(
    lg: &LandscapeGraph<T>,
    ladder: &TemperatureLadder<T>,
) -> Result<(Vec<ProductEquilibrium<T>>, CostTable<T>)> {
    let eqs = product_equilibria(lg, ladder)?;
    let adj = product_moves(lg, ladder, &eqs)?;
    let cost = (0..eqs.len()).map(|s| dijkstra(&adj, s)).collect();
    Ok((eqs, CostTable::new(cost)))
}

fn check_target(n: usize, target: &BTreeSet<usize>) -> Result<()> {
    if target.is_empty() || target.iter().any(|&t| t >= n) {
        return Err(Error::structural(format!(
            "target set {target:?} must be a non-empty subset of 0..{n}"
        )));
    }
    Ok(())
}

/// Call `visit` with every W-graph on `n` nodes, as an arrow array
/// (`None` for target nodes).
pub fn for_each_wgraph(n: usize, target: &BTreeSet<usize>, mut visit: impl FnMut(&[Option<usize>])) {
    let free: Vec<usize> = (0..n).filter(|v| !target.contains(v)).collect();
    let mut arrows: Vec<Option<usize>> = vec![None; n];
    fn creates_cycle(arrows: &[Option<usize>], v: usize, u: usize) -> bool {
        let mut x = u;
        loop {
            if x == v {
                return true;
            }
            match arrows[x] {
                Some(y) => x = y,
                None => return false,
            }
        }
    }
    fn rec(
        depth: usize,
        free: &[usize],
        n: usize,
        arrows: &mut Vec<Option<usize>>,
        visit: &mut dyn FnMut(&[Option<usize>]),
    ) {
        if depth == free.len() {
            visit(arrows);
            return;
        }
        let v = free[depth];
        for u in 0..n {
            if u == v || creates_cycle(arrows, v, u) {
                continue;
            }
            arrows[v] = Some(u);
            rec(depth + 1, free, n, arrows, visit);
            arrows[v] = None;
        }
    }
    rec(0, &free, n, &mut arrows, &mut visit);
}

/// Every W-graph on nodes `0..n` rooted in `target`.
pub fn enumerate_wgraphs(n: usize, target: &BTreeSet<usize>) -> Result<Vec<WGraph>> {
    if n > MAX_EXACT_NODES {
        return Err(Error::Capacity {
            what: "W-graph nodes",
            got: n,
            limit: MAX_EXACT_NODES,
        });
    }
    check_target(n, target)?;
    let mut out = Vec::new();
    for_each_wgraph(n, target, |arrows| {
        out.push(WGraph {
            arrows: arrows
                .iter()
                .enumerate()
                .filter_map(|(v, a)| a.map(|u| (v, u)))
                .collect(),
            target: target.clone(),
        });
    });
    Ok(out)
}

/// Least total arrow cost over all W-graphs for `target`.
///
/// Depth-first search over arrow choices, cheapest first, pruned with the
/// sum of the remaining nodes' cheapest outgoing arrows.
pub fn w_of<T: Scalar>(target: &BTreeSet<usize>, cost: &CostTable<T>) -> Result<T> {
    let n = cost.len();
    if n > MAX_EXACT_NODES {
        return Err(Error::Capacity {
            what: "W-graph nodes",
            got: n,
            limit: MAX_EXACT_NODES,
        });
    }
    check_target(n, target)?;
    let free: Vec<usize> = (0..n).filter(|v| !target.contains(v)).collect();
    let mut choices: Vec<Vec<(usize, T)>> = Vec::with_capacity(free.len());
    for &v in &free {
        let mut c: Vec<(usize, T)> = (0..n)
            .filter(|&u| u != v)
            .filter_map(|u| cost.get(v, u).map(|c| (u, c)))
            .collect();
        if c.is_empty() {
            return Err(Error::structural(format!(
                "node {v} has no outgoing arrow: cost table is disconnected"
            )));
        }
        c.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal));
        choices.push(c);
    }
    // suffix lower bounds
    let mut lb = vec![T::zero(); free.len() + 1];
    for d in (0..free.len()).rev() {
        lb[d] = lb[d + 1].clone() + choices[d][0].1.clone();
    }

    struct Search<'a, T> {
        free: &'a [usize],
        choices: &'a [Vec<(usize, T)>],
        lb: &'a [T],
        arrows: Vec<Option<usize>>,
        best: Option<T>,
    }
    impl<T: Scalar> Search<'_, T> {
        fn cycle(&self, v: usize, u: usize) -> bool {
            let mut x = u;
            loop {
                if x == v {
                    return true;
                }
                match self.arrows[x] {
                    Some(y) => x = y,
                    None => return false,
                }
            }
        }
        fn run(&mut self, depth: usize, partial: T) {
            if let Some(b) = &self.best {
                if partial.clone() + self.lb[depth].clone() >= *b {
                    return;
                }
            }
            if depth == self.free.len() {
                self.best = Some(partial);
                return;
            }
            let v = self.free[depth];
            for (u, c) in self.choices[depth].iter() {
                if self.cycle(v, *u) {
                    continue;
                }
                self.arrows[v] = Some(*u);
                self.run(depth + 1, partial.clone() + c.clone());
                self.arrows[v] = None;
            }
        }
    }
    let mut s = Search {
        free: &free,
        choices: &choices,
        lb: &lb,
        arrows: vec![None; n],
        best: None,
    };
    s.run(0, T::zero());
    s.best.ok_or_else(|| {
        Error::structural("no W-graph reaches the target: cost table is disconnected")
    })
}

/// Unpruned minimum over [`for_each_wgraph`]; slow, used to cross-check
/// [`w_of`].
pub fn w_of_exhaustive<T: Scalar>(target: &BTreeSet<usize>, cost: &CostTable<T>) -> Result<T> {
    let n = cost.len();
    check_target(n, target)?;
    let mut best: Option<T> = None;
    for_each_wgraph(n, target, |arrows| {
        let mut s = T::zero();
        for (v, a) in arrows.iter().enumerate() {
            if let Some(u) = a {
                match cost.get(v, *u) {
                    Some(c) => s = s + c,
                    None => return,
                }
            }
        }
        best = Some(match best.take() {
            Some(b) => min2(b, s),
            None => s,
        });
    });
    best.ok_or_else(|| Error::structural("cost table is disconnected"))
}

/// Cost to leave the global well in the original landscape: the lowest
/// saddle adjacent to y₁.
pub fn compute_b1<T: Scalar>(lg: &LandscapeGraph<T>) -> Result<T> {
    lg.b1()
}

/// h = α_K · b₁.
pub fn compute_h<T: Scalar>(lg: &LandscapeGraph<T>, ladder: &TemperatureLadder<T>) -> Result<T> {
    lg.validate()?;
    Ok(ladder.last() * lg.b1()?)
}

/// h as the cheapest arrow out of O₁ in the product graph. `None` for a
/// single well, where O₁ is the only equilibrium.
pub fn h_by_paths<T: Scalar>(
    lg: &LandscapeGraph<T>,
    ladder: &TemperatureLadder<T>,
) -> Result<Option<T>> {
    lg.validate()?;
    let eqs = product_equilibria(lg, ladder)?;
    let adj = product_moves(lg, ladder, &eqs)?;
    let d = dijkstra(&adj, 0);
    Ok(d.into_iter().skip(1).flatten().reduce(min2))
}

/// Cheapest climbing cost from every minimum down to y₁ in the original
/// landscape (sum of barrier rises along the best route).
pub fn descent_costs<T: Scalar>(lg: &LandscapeGraph<T>) -> Vec<Option<T>> {
    let n = lg.num_minima();
    // reversed edges: arrow j → other costs V(s) − V(j)
    let mut rev = vec![Vec::new(); n];
    for j in 0..n {
        for (s, other) in lg.exits(j) {
            if other == j {
                continue;
            }
            let c = lg.saddles[s].value.clone() - lg.minima[j].value.clone();
            rev[other].push((j, c));
        }
    }
    dijkstra(&rev, lg.global_min_id)
}

/// min over graphs ending at y₁ (with free exits from saddles) of the
/// largest path cost from a starting point. A shortest-path tree towards y₁
/// attains it, so this is the largest shortest-path cost.
pub fn min_max_path_cost<T: Scalar>(lg: &LandscapeGraph<T>) -> Result<T> {
    let d = descent_costs(lg);
    let mut m = T::zero();
    for (j, c) in d.into_iter().enumerate() {
        match c {
            Some(c) => m = max2(m, c),
            None => return Err(Error::structural(format!("well {j} cannot reach y1"))),
        }
    }
    Ok(m)
}

/// B = b₁ ∨ (K · min_ĝ max_k C_ĝ(k)).
#[allow(non_snake_case)]
pub fn compute_B<T: Scalar>(lg: &LandscapeGraph<T>, k: usize) -> Result<T> {
    lg.validate()?;
    Ok(max2(lg.b1()?, T::from_count(k) * min_max_path_cost(lg)?))
}

fn check_exact(n: usize) -> Result<()> {
    if n > MAX_EXACT_NODES {
        return Err(Error::Capacity {
            what: "product equilibria for exact W-graphs",
            got: n,
            limit: MAX_EXACT_NODES,
        });
    }
    Ok(())
}

/// W(O_j) for every j and W(O₁ ∪ O_j) for j ≠ 1 (index 0 holds `None`).
pub fn w_values<T: Scalar>(cost: &CostTable<T>) -> Result<(Vec<T>, Vec<Option<T>>)> {
    let n = cost.len();
    check_exact(n)?;
    let single = (0..n)
        .map(|j| w_of(&BTreeSet::from([j]), cost))
        .collect::<Result<Vec<_>>>()?;
    let mut pair = vec![None];
    for j in 1..n {
        pair.push(Some(w_of(&BTreeSet::from([0, j]), cost)?));
    }
    Ok((single, pair))
}

/// w = W(O₁) − min_{i≠1} W(O₁ ∪ O_i) (0 when O₁ is the only equilibrium).
pub fn w_from_values<T: Scalar>(single: &[T], pair: &[Option<T>]) -> T {
    match pair.iter().flatten().cloned().reduce(min2) {
        Some(m) => single[0].clone() - m,
        None => T::zero(),
    }
}

/// Exact `w` together with its upper bound K · α_K · min_ĝ max_k C_ĝ(k).
pub fn compute_w_and_bound<T: Scalar>(
    lg: &LandscapeGraph<T>,
    ladder: &TemperatureLadder<T>,
) -> Result<(T, T)> {
    lg.validate()?;
    let h = lg.num_minima();
    let n = (h as u128).checked_pow(ladder.len() as u32).unwrap_or(u128::MAX);
    check_exact(n.min(usize::MAX as u128) as usize)?;
    let (_, cost) = arrow_costs(lg, ladder)?;
    let (single, pair) = w_values(&cost)?;
    let w = w_from_values(&single, &pair);
    let bound = T::from_count(ladder.len()) * ladder.last() * min_max_path_cost(lg)?;
    if w.clone() - bound.clone() > T::tolerance() {
        return Err(Error::Theory(format!("w = {w} exceeds its upper bound {bound}")));
    }
    Ok((w, bound))
}

/// Everything the rate formulas need from the landscape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRateData<T> {
    pub h: T,
    /// Exact `w`; `None` beyond the exact-mode capacity.
    pub w: Option<T>,
    pub w_upper_bound: T,
    pub b1: T,
    #[serde(rename = "B")]
    pub big_b: T,
    /// min_ĝ max_k C_ĝ(k)
    pub path_cost: T,
    /// W(O_j), index-aligned with `equilibria` (exact mode only).
    pub w_values: Vec<T>,
    /// W(O₁ ∪ O_j); entry 0 is unused.
    pub w_pair_values: Vec<Option<T>>,
    pub equilibria: Vec<ProductEquilibrium<T>>,
}

impl<T: Scalar> GraphRateData<T> {
    pub fn is_exact(&self) -> bool {
        self.w.is_some()
    }

    /// `w` if known, otherwise its upper bound.
    pub fn w_or_bound(&self) -> T {
        self.w.clone().unwrap_or_else(|| self.w_upper_bound.clone())
    }

    /// Smallest admissible horizon exponent: c must exceed h ∨ w.
    pub fn min_horizon_exponent(&self) -> T {
        max2(self.h.clone(), self.w_or_bound())
    }
}

pub fn graph_rate_data<T: Scalar>(
    lg: &LandscapeGraph<T>,
    ladder: &TemperatureLadder<T>,
) -> Result<GraphRateData<T>> {
    lg.validate()?;
    let b1 = lg.b1()?;
    let h = ladder.last() * b1.clone();
    let path_cost = min_max_path_cost(lg)?;
    let k = T::from_count(ladder.len());
    let w_upper_bound = k.clone() * ladder.last() * path_cost.clone();
    let big_b = max2(b1.clone(), k * path_cost.clone());
    let hn = (lg.num_minima() as u128).checked_pow(ladder.len() as u32);
    let mut data = GraphRateData {
        h,
        w: None,
        w_upper_bound,
        b1,
        big_b,
        path_cost,
        w_values: Vec::new(),
        w_pair_values: Vec::new(),
        equilibria: Vec::new(),
    };
    if matches!(hn, Some(n) if n <= MAX_EXACT_NODES as u128) {
        let (eqs, cost) = arrow_costs(lg, ladder)?;
        let (single, pair) = w_values(&cost)?;
        let w = w_from_values(&single, &pair);
        if w.clone() - data.w_upper_bound.clone() > T::tolerance() {
            return Err(Error::Theory(format!(
                "w = {w} exceeds its upper bound {}",
                data.w_upper_bound
            )));
        }
        data.w = Some(w);
        data.w_values = single;
        data.w_pair_values = pair;
        data.equilibria = eqs;
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    fn q(n: i64) -> Q {
        Ratio::from_integer(n)
    }

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn small_wgraph_counts() {
        // nodes 0,1 (=1,2), target {0}: the single graph 1→0
        let g = enumerate_wgraphs(2, &set(&[0])).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].arrows, BTreeMap::from([(1, 0)]));
        let g3 = enumerate_wgraphs(3, &set(&[0])).unwrap();
        assert_eq!(g3.len(), 3);
        let found: BTreeSet<Vec<(usize, usize)>> = g3
            .iter()
            .map(|g| g.arrows.iter().map(|(a, b)| (*a, *b)).collect())
            .collect();
        let expect: BTreeSet<Vec<(usize, usize)>> = [
            vec![(1, 0), (2, 0)],
            vec![(1, 0), (2, 1)],
            vec![(1, 2), (2, 0)],
        ]
        .into_iter()
        .collect();
        assert_eq!(found, expect);
        assert_eq!(enumerate_wgraphs(3, &set(&[0, 1])).unwrap().len(), 2);
        assert!(g3.iter().all(|g| g.is_valid(3)));
    }

    #[test]
    fn wgraph_capacity() {
        assert!(matches!(
            enumerate_wgraphs(10, &set(&[0])),
            Err(Error::Capacity { .. })
        ));
        assert!(enumerate_wgraphs(3, &set(&[])).is_err());
    }

    #[test]
    fn one_step_examples() {
        let lg = LandscapeGraph::from_circle_values(&[q(0), q(2)], &[q(4), q(9)]).unwrap();
        let k1 = TemperatureLadder::new(vec![q(1)]).unwrap();
        assert_eq!(
            one_step_cost(&[Site::Min(0)], &[Site::Min(1)], &lg, &k1).unwrap(),
            q(4)
        );
        let k2 = TemperatureLadder::new(vec![q(1), Ratio::new(1, 2)]).unwrap();
        let c = one_step_cost(
            &[Site::Min(0), Site::Min(0)],
            &[Site::Min(0), Site::Min(1)],
            &lg,
            &k2,
        )
        .unwrap();
        assert_eq!(c, q(2));
        let down = one_step_cost(
            &[Site::Saddle(0), Site::Min(0)],
            &[Site::Min(1), Site::Min(0)],
            &lg,
            &k2,
        )
        .unwrap();
        assert_eq!(down, q(0));
        assert!(one_step_cost(
            &[Site::Min(0), Site::Min(0)],
            &[Site::Min(1), Site::Min(1)],
            &lg,
            &k2
        )
        .is_err());
    }

    #[test]
    fn two_well_k1_w_values() {
        // wells (0, h_L − h_R) with barrier h_L = 4, h_R = 3
        let lg = LandscapeGraph::from_circle_values(&[q(0), q(1)], &[q(4), q(20)]).unwrap();
        let k1 = TemperatureLadder::new(vec![q(1)]).unwrap();
        let (_, cost) = arrow_costs(&lg, &k1).unwrap();
        assert_eq!(w_of(&set(&[0]), &cost).unwrap(), q(3));
        assert_eq!(w_of(&set(&[1]), &cost).unwrap(), q(4));
        assert_eq!(cost.get(1, 0), Some(q(3)));
    }

    #[test]
    fn pruned_search_matches_exhaustive() {
        let lg = LandscapeGraph::from_circle_values(&[q(0), q(2), q(1)], &[q(4), q(6), q(30)]).unwrap();
        let l = TemperatureLadder::new(vec![q(1), Ratio::new(1, 3)]).unwrap();
        let (_, cost) = arrow_costs(&lg, &l).unwrap();
        for j in 0..9 {
            let t = set(&[j]);
            assert_eq!(w_of(&t, &cost).unwrap(), w_of_exhaustive(&t, &cost).unwrap());
        }
    }

    #[test]
    fn h_examples() {
        let lg = LandscapeGraph::from_circle_values(&[q(0), q(1)], &[q(4), q(20)]).unwrap();
        let l = TemperatureLadder::new(vec![q(1), Ratio::new(1, 2)]).unwrap();
        assert_eq!(compute_h(&lg, &l).unwrap(), q(2));
        assert_eq!(h_by_paths(&lg, &l).unwrap(), Some(q(2)));
        let k1 = TemperatureLadder::new(vec![q(1)]).unwrap();
        assert_eq!(compute_h(&lg, &k1).unwrap(), q(4));
    }

    #[test]
    fn single_well() {
        let lg = LandscapeGraph::from_circle_values(&[q(0)], &[q(3)]).unwrap();
        let k1 = TemperatureLadder::new(vec![q(1)]).unwrap();
        let (w, bound) = compute_w_and_bound(&lg, &k1).unwrap();
        assert_eq!(w, q(0));
        assert_eq!(bound, q(0));
        assert_eq!(compute_B(&lg, 3).unwrap(), q(3));
        assert_eq!(h_by_paths(&lg, &k1).unwrap(), None);
    }

    #[test]
    fn b_for_two_wells() {
        // b1 = h_L = 4, one starting well with C = h_R = 3
        let lg = LandscapeGraph::from_circle_values(&[q(0), q(1)], &[q(4), q(20)]).unwrap();
        assert_eq!(compute_B(&lg, 2).unwrap(), q(6));
        assert_eq!(compute_B(&lg, 1).unwrap(), q(4));
    }
}
