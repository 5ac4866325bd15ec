//! Property tests against independent oracles.

use inswap::ensemble::{compute_weights, sorting_permutation, EnsembleState, TemperatureLadder};
use inswap::graphcalc::{
    arrow_costs, compute_B, compute_h, compute_w_and_bound, enumerate_wgraphs, for_each_wgraph, h_by_paths,
    min_max_path_cost, w_values,
};
use inswap::potential::{random_circle_landscape, CriticalPoint, Edge, LandscapeGraph, TwoWellSpec};
use inswap::rates::{
    multiwell_bound, optimal_two_well, r_of_alpha, r_of_alpha_grid, sup_r, sup_r_grid, two_well_rates, Side,
    TargetSet,
};
use inswap::{Exact, ExactLadder, ExactLandscape};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

fn landscape(seed: u64, wells: usize) -> ExactLandscape {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_circle_landscape(&mut rng, wells, 9).unwrap()
}

fn ladder_f64() -> impl Strategy<Value = TemperatureLadder<f64>> {
    prop::collection::vec(0.02f64..1.0, 0..5).prop_map(|mut r| {
        r.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut a = vec![1.0];
        a.extend(r);
        TemperatureLadder::new(a).unwrap()
    })
}

fn ladder_exact(max_k: usize) -> impl Strategy<Value = ExactLadder> {
    prop::collection::vec(1i64..=8, 0..max_k).prop_map(|mut r| {
        r.sort_by(|a, b| b.cmp(a));
        let mut a = vec![Exact::from_integer(1)];
        a.extend(r.into_iter().map(|n| Exact::new(n, 8)));
        ExactLadder::new(a).unwrap()
    })
}

fn two_well(h_l: f64, h_r: f64) -> TwoWellSpec<f64> {
    TwoWellSpec {
        h_l,
        h_r,
        x_l: -1.0,
        x_r: 1.0,
        barrier: 0.0,
        left_min: 0,
        right_min: 1,
        barrier_saddle: 0,
    }
}

/// Saddle cost of the cheapest direct step from well `j` to well `k`.
fn step_cost(lg: &ExactLandscape, j: usize, k: usize) -> Option<Exact> {
    lg.exits(j)
        .into_iter()
        .filter(|&(_, other)| other == k)
        .map(|(s, _)| lg.saddles[s].value - lg.minima[j].value)
        .min()
}

/// (min over graphs of the largest path cost, min over graphs of the total
/// cost) on the well graph, by enumeration.
fn well_graph_oracle(lg: &ExactLandscape) -> (Exact, Exact) {
    let n = lg.num_minima();
    let g = lg.global_min_id;
    let mut best_max: Option<Exact> = None;
    let mut best_sum: Option<Exact> = None;
    for_each_wgraph(n, &BTreeSet::from([g]), |arrows| {
        let mut cost = vec![Exact::from_integer(0); n];
        for j in 0..n {
            if let Some(k) = arrows[j] {
                match step_cost(lg, j, k) {
                    Some(c) => cost[j] = c,
                    None => return,
                }
            }
        }
        let mut worst = Exact::from_integer(0);
        for start in 0..n {
            let (mut at, mut c) = (start, Exact::from_integer(0));
            while let Some(next) = arrows[at] {
                c += cost[at];
                at = next;
            }
            worst = worst.max(c);
        }
        let total = cost.iter().copied().sum::<Exact>();
        best_max = Some(best_max.map_or(worst, |b| b.min(worst)));
        best_sum = Some(best_sum.map_or(total, |b| b.min(total)));
    });
    (best_max.unwrap(), best_sum.unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_are_a_distribution(
        ladder in ladder_f64(),
        vs in prop::collection::vec(0.0f64..4.0, 5),
        eps in 0.02f64..2.0,
    ) {
        let k = ladder.len();
        let state = EnsembleState::from_values(vec![0.0; k], vs[..k].to_vec()).unwrap();
        let t = compute_weights(&state, &ladder, eps).unwrap();
        let total: f64 = t.log_weights.iter().map(|w| w.exp()).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        for i in 0..k {
            let row: f64 = t.rho[i].iter().sum();
            let col: f64 = (0..k).map(|j| t.rho[j][i]).sum();
            prop_assert!((row - 1.0).abs() <= 1e-12);
            prop_assert!((col - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn halving_eps_concentrates_on_the_sorting_permutation(
        ladder in ladder_f64(),
        vs in prop::collection::vec(0.0f64..4.0, 5),
        eps in 0.05f64..2.0,
    ) {
        let k = ladder.len();
        let v = vs[..k].to_vec();
        let best: Vec<usize> = {
            // slot l holds the particle with the l-th smallest value
            sorting_permutation(&v)
        };
        let state = EnsembleState::from_values(vec![0.0; k], v).unwrap();
        let w = |e: f64| compute_weights(&state, &ladder, e).unwrap().weight(&best).unwrap();
        prop_assert!(w(eps / 2.0) >= w(eps) - 1e-15);
    }

    #[test]
    fn w_differences_equal_u_differences(seed in any::<u64>(), wells in 2usize..=3) {
        let lg = landscape(seed, wells);
        let ladder = ExactLadder::new(vec![Exact::from_integer(1), Exact::new(1, 2)]).unwrap();
        let (eqs, cost) = arrow_costs(&lg, &ladder).unwrap();
        let (single, _) = w_values(&cost).unwrap();
        for i in 0..eqs.len() {
            for j in 0..eqs.len() {
                prop_assert_eq!(single[i] - single[j], eqs[i].u_value - eqs[j].u_value);
            }
        }
    }

    #[test]
    fn h_closed_form_matches_path_search(seed in any::<u64>(), wells in 1usize..=4, ladder in ladder_exact(3)) {
        let lg = landscape(seed, wells);
        let h = compute_h(&lg, &ladder).unwrap();
        match h_by_paths(&lg, &ladder).unwrap() {
            Some(p) => prop_assert_eq!(h, p),
            None => prop_assert_eq!(wells, 1),
        }
    }

    #[test]
    fn w_respects_its_bound(seed in any::<u64>(), wells in 2usize..=3, ladder in ladder_exact(2)) {
        let lg = landscape(seed, wells);
        let (w, bound) = compute_w_and_bound(&lg, &ladder).unwrap();
        prop_assert!(w <= bound);
        prop_assert!(w >= Exact::from_integer(0));
    }

    #[test]
    fn path_cost_matches_enumeration(seed in any::<u64>(), wells in 1usize..=5) {
        let lg = landscape(seed, wells);
        let (oracle_max, oracle_sum) = well_graph_oracle(&lg);
        let m = min_max_path_cost(&lg).unwrap();
        prop_assert_eq!(m, oracle_max);
        prop_assert!(m <= oracle_sum);
    }

    #[test]
    fn r_alpha_matches_grid(ladder in ladder_f64(), v in 0.1f64..3.0) {
        let exact = r_of_alpha(v, &ladder);
        let grid = r_of_alpha_grid(v, &ladder, v, 12).unwrap();
        prop_assert!(exact <= grid + 1e-12);
        prop_assert!(grid - exact <= 1e-9 * (1.0 + v), "closed form {exact} vs grid {grid}");
    }

    #[test]
    fn r_alpha_never_exceeds_supremum(ladder in ladder_f64(), v in 0.1f64..3.0) {
        let (sup, _) = sup_r(v, ladder.len()).unwrap();
        prop_assert!(r_of_alpha(v, &ladder) <= sup + 1e-12);
    }

    #[test]
    fn supremum_matches_grid(k in 1usize..=3, v in 0.1f64..3.0) {
        let (exact, geo) = sup_r(v, k).unwrap();
        let (grid, _) = sup_r_grid(v, k, 64).unwrap();
        prop_assert!((exact - grid).abs() <= 2e-2);
        prop_assert!((exact - (2.0 - 0.5f64.powi(k as i32 - 1)) * v).abs() < 1e-12);
        prop_assert_eq!(geo, TemperatureLadder::geometric(k).unwrap());
    }

    #[test]
    fn left_optimum_dominates(
        h_l in 0.3f64..2.0,
        hr_frac in 0.05f64..0.95,
        v in 0.05f64..3.0,
        k in 2usize..=4,
        ladders in prop::collection::vec(ladder_f64(), 20),
    ) {
        let spec = two_well(h_l, hr_frac * h_l);
        let target = TargetSet::level(v, Side::LeftOfBarrier).unwrap();
        let opt = optimal_two_well(&spec, &target, k, 0.1).unwrap();
        let at = two_well_rates(&spec, &target, &opt.optimal_ladder).unwrap();
        prop_assert!((at.bound - opt.predicted_rate).abs() < 1e-9);
        for l in ladders.iter().filter(|l| l.len() == k) {
            let r = two_well_rates(&spec, &target, l).unwrap();
            prop_assert!(opt.predicted_rate - r.bound >= -1e-9);
        }
    }

    #[test]
    fn right_optimum_dominates(
        h_l in 0.3f64..2.0,
        hr_frac in 0.05f64..0.95,
        lift in 0.01f64..2.0,
        k in 2usize..=4,
        ladders in prop::collection::vec(ladder_f64(), 20),
    ) {
        let h_r = hr_frac * h_l;
        let v = h_l - h_r + lift;
        let spec = two_well(h_l, h_r);
        let target = TargetSet::level(v, Side::RightOfBarrier).unwrap();
        let opt = optimal_two_well(&spec, &target, k, 0.1).unwrap();
        let at = two_well_rates(&spec, &target, &opt.optimal_ladder).unwrap();
        prop_assert!((at.bound - opt.predicted_rate).abs() < 1e-9);
        for l in ladders.iter().filter(|l| l.len() == k) {
            let r = two_well_rates(&spec, &target, l).unwrap();
            prop_assert!(opt.predicted_rate - r.bound >= -1e-9);
        }
    }

    #[test]
    fn rates_stay_below_twice_the_level(
        h_l in 0.3f64..2.0,
        hr_frac in 0.05f64..0.95,
        v in 0.05f64..3.0,
        ladder in ladder_f64(),
        left in any::<bool>(),
    ) {
        let side = if left { Side::LeftOfBarrier } else { Side::RightOfBarrier };
        let target = TargetSet::level(v, side).unwrap();
        let r = two_well_rates(&two_well(h_l, hr_frac * h_l), &target, &ladder).unwrap();
        prop_assert!(r.bound <= 2.0 * v + 1e-12);
        prop_assert!(r.r1 <= 2.0 * v + 1e-12);
    }

    #[test]
    fn multiwell_rate_grows_with_k(seed in any::<u64>(), wells in 1usize..=4, v in 1i64..=6) {
        let lg = landscape(seed, wells);
        let target = TargetSet::level(Exact::from_integer(v), Side::General).unwrap();
        let mut prev: Option<Exact> = None;
        for k in 1..=7 {
            let rep = multiwell_bound(&lg, k, &target).unwrap();
            prop_assert!(rep.predicted_rate <= rep.benchmark);
            if let Some(p) = prev {
                prop_assert!(rep.predicted_rate >= p);
            }
            prev = Some(rep.predicted_rate);
        }
    }
}

#[test]
fn wgraph_counts_follow_cayley() {
    for n in 1..=4usize {
        let expect = if n == 1 { 1 } else { n.pow(n as u32 - 2) };
        for j in 0..n {
            let gs = enumerate_wgraphs(n, &BTreeSet::from([j])).unwrap();
            assert_eq!(gs.len(), expect);
            assert!(gs.iter().all(|g| g.is_valid(n)));
        }
    }
}

/// y₁ at the centre with `arms` identical chains y₁ – s – y₃ – s – y₅.
fn radial(arms: usize) -> ExactLandscape {
    let e = Exact::from_integer;
    let cp = |v: i64| CriticalPoint { location: e(0), value: e(v) };
    let mut minima = vec![cp(0)];
    let mut saddles = Vec::new();
    let mut edges = Vec::new();
    for _ in 0..arms {
        let (inner, outer) = (minima.len(), minima.len() + 1);
        minima.push(cp(2));
        minima.push(cp(1));
        saddles.push(cp(5));
        edges.push(Edge { a: 0, saddle: saddles.len() - 1, b: inner });
        saddles.push(cp(6));
        edges.push(Edge { a: inner, saddle: saddles.len() - 1, b: outer });
    }
    LandscapeGraph::new(minima, saddles, edges).unwrap()
}

#[test]
fn radial_collections_share_b() {
    let (two, four) = (radial(2), radial(4));
    two.validate().unwrap();
    four.validate().unwrap();
    for k in 1..=5 {
        assert_eq!(compute_B(&two, k).unwrap(), compute_B(&four, k).unwrap());
    }
    // one arm's descent cost: (6 − 1) + (5 − 2)
    assert_eq!(min_max_path_cost(&four).unwrap(), Exact::from_integer(8));
}
