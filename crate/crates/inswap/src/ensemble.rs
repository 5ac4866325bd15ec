//! Permutation weights, the ρ matrix and the symmetrized potential of a
//! K-particle INS state.
//!
//! Permutations map temperature slots to particles: `sigma[l]` is the
//! particle sitting at slot `l` (slot 0 is the coldest, α = 1). The weight of
//! `sigma` is proportional to `exp(−Σ_l α_l V(x_{σ(l)}) / ε)` and
//! `rho[i][j]` is the total weight of permutations that put particle `i` at
//! slot `j`.

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::scalar::{convert, Real, Scalar};
use itertools::Itertools;
use serde::{Deserialize, Serialize};

/// Largest ensemble for which all K! permutations are enumerated.
pub const MAX_K: usize = 8;

/// Temperature multipliers 1 = α₁ ≥ α₂ ≥ … ≥ α_K > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct TemperatureLadder<T> {
    alphas: Vec<T>,
}

impl<T: Scalar> TemperatureLadder<T> {
    pub fn new(alphas: Vec<T>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::Ladder("a ladder needs at least one temperature".into()));
        }
        if alphas[0] != T::one() {
            return Err(Error::Ladder(format!(
                "the first multiplier must be 1, got {}",
                alphas[0]
            )));
        }
        for (l, w) in alphas.windows(2).enumerate() {
            if w[1] > w[0] {
                return Err(Error::Ladder(format!(
                    "multipliers must be non-increasing: alpha[{}] = {} > alpha[{}] = {}",
                    l + 2,
                    w[1],
                    l + 1,
                    w[0]
                )));
            }
        }
        let last = alphas.last().unwrap();
        if !(*last > T::zero()) {
            return Err(Error::Ladder(format!(
                "the smallest multiplier must be positive, got {last}"
            )));
        }
        Ok(TemperatureLadder { alphas })
    }

    /// (1, 1/2, …, (1/2)^{K−1})
    pub fn geometric(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Ladder("K must be at least 1".into()));
        }
        Self::new((0..k as u32).map(T::half_pow).collect())
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn alphas(&self) -> &[T] {
        &self.alphas
    }

    /// α_{l+1} (zero-based).
    pub fn alpha(&self, l: usize) -> T {
        self.alphas[l].clone()
    }

    /// α_K, the hottest multiplier.
    pub fn last(&self) -> T {
        self.alphas[self.alphas.len() - 1].clone()
    }

    pub fn convert<S: Scalar>(&self) -> TemperatureLadder<S> {
        TemperatureLadder {
            alphas: self.alphas.iter().map(convert).collect(),
        }
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for TemperatureLadder<T> {
    type Error = Error;
    fn try_from(v: Vec<T>) -> Result<Self> {
        Self::new(v)
    }
}

impl<T: Scalar> From<TemperatureLadder<T>> for Vec<T> {
    fn from(l: TemperatureLadder<T>) -> Vec<T> {
        l.alphas
    }
}

/// Positions of the K particles and the potential at each of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState<T> {
    pub positions: Vec<T>,
    pub v_values: Vec<T>,
}

impl<T: Real> EnsembleState<T> {
    pub fn new<P: Potential<T> + ?Sized>(positions: Vec<T>, p: &P) -> Self {
        let v_values = positions.iter().map(|&x| p.value(x)).collect();
        EnsembleState { positions, v_values }
    }
}

impl<T: Scalar> EnsembleState<T> {
    pub fn from_values(positions: Vec<T>, v_values: Vec<T>) -> Result<Self> {
        if positions.len() != v_values.len() {
            return Err(Error::structural("positions and values differ in length"));
        }
        Ok(EnsembleState { positions, v_values })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable<T> {
    /// All K! permutations, `perm[l]` = particle at slot `l`.
    pub perms: Vec<Vec<usize>>,
    /// log w^ε for each permutation, same order as `perms`.
    pub log_weights: Vec<T>,
    /// `rho[i][j]`: weight of particle `i` sitting at slot `j`.
    pub rho: Vec<Vec<T>>,
    /// U(x) = min_σ Σ α_l V(x_{σ(l)}).
    pub u_value: T,
}

impl<T: Real> WeightTable<T> {
    pub fn weight(&self, perm: &[usize]) -> Option<T> {
        self.perms
            .iter()
            .position(|p| p == perm)
            .map(|i| self.log_weights[i].exp())
    }
}

/// Reusable permutation table and scratch space for repeated weight
/// evaluation inside a sampler loop.
#[derive(Debug, Clone)]
pub struct WeightEngine<T> {
    alphas: Vec<T>,
    perms: Vec<Vec<usize>>,
    energies: Vec<T>,
}

impl<T: Real> WeightEngine<T> {
    pub fn new(ladder: &TemperatureLadder<T>) -> Result<Self> {
        let k = ladder.len();
        if k > MAX_K {
            return Err(Error::Capacity {
                what: "ensemble size K",
                got: k,
                limit: MAX_K,
            });
        }
        let perms: Vec<Vec<usize>> = (0..k).permutations(k).collect();
        let n = perms.len();
        Ok(WeightEngine {
            alphas: ladder.alphas().to_vec(),
            perms,
            energies: vec![T::zero(); n],
        })
    }

    pub fn k(&self) -> usize {
        self.alphas.len()
    }

    pub fn perms(&self) -> &[Vec<usize>] {
        &self.perms
    }

    /// Fill the row-major K×K matrix `rho` and return `(e_min, log Σ)` where
    /// `log w_σ = −(e_σ − e_min)/ε − log Σ`.
    pub fn rho_into(&mut self, v: &[T], eps: T, rho: &mut [T]) -> (T, T) {
        let k = self.alphas.len();
        debug_assert_eq!(v.len(), k);
        debug_assert_eq!(rho.len(), k * k);
        if k == 1 {
            rho[0] = T::one();
            return (self.alphas[0] * v[0], T::zero());
        }
        let mut emin = T::infinity();
        for (e, perm) in self.energies.iter_mut().zip(&self.perms) {
            let mut s = T::zero();
            for (l, &i) in perm.iter().enumerate() {
                s = s + self.alphas[l] * v[i];
            }
            *e = s;
            emin = emin.min(s);
        }
        let mut total = T::zero();
        for e in self.energies.iter_mut() {
            *e = (-(*e - emin) / eps).exp();
            total = total + *e;
        }
        for r in rho.iter_mut() {
            *r = T::zero();
        }
        for (z, perm) in self.energies.iter().zip(&self.perms) {
            let w = *z / total;
            for (l, &i) in perm.iter().enumerate() {
                rho[i * k + l] = rho[i * k + l] + w;
            }
        }
        (emin, total.ln())
    }

    pub fn alphas(&self) -> &[T] {
        &self.alphas
    }
}

fn check_eps<T: Scalar>(eps: &T) -> Result<()> {
    if !(*eps > T::zero()) {
        return Err(Error::domain(format!("temperature must be positive, got {eps}")));
    }
    Ok(())
}

/// Full weight table for one state.
pub fn compute_weights<T: Real>(
    state: &EnsembleState<T>,
    ladder: &TemperatureLadder<T>,
    eps: T,
) -> Result<WeightTable<T>> {
    check_eps(&eps)?;
    let k = ladder.len();
    if state.len() != k {
        return Err(Error::structural(format!(
            "state has {} particles but the ladder has {k} temperatures",
            state.len()
        )));
    }
    let mut engine = WeightEngine::new(ladder)?;
    let mut flat = vec![T::zero(); k * k];
    let (emin, log_total) = engine.rho_into(&state.v_values, eps, &mut flat);
    let log_weights = engine
        .perms
        .iter()
        .map(|perm| {
            let e = perm
                .iter()
                .enumerate()
                .fold(T::zero(), |s, (l, &i)| s + ladder.alpha(l) * state.v_values[i]);
            -(e - emin) / eps - log_total
        })
        .collect();
    let rho = flat.chunks(k).map(|r| r.to_vec()).collect();
    Ok(WeightTable {
        perms: engine.perms,
        log_weights,
        rho,
        u_value: symmetrized_potential(&state.v_values, ladder)?,
    })
}

/// Particle indices ordered by increasing V (ties by index). Assigning them
/// to slots 1, 2, … gives the permutation attaining U.
pub fn sorting_permutation<T: Scalar>(values: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("comparable values"));
    idx
}

/// U = min_σ Σ α_l V_{σ(l)}, by pairing ascending values with the
/// descending multipliers.
pub fn symmetrized_potential<T: Scalar>(values: &[T], ladder: &TemperatureLadder<T>) -> Result<T> {
    if values.len() != ladder.len() {
        return Err(Error::structural(format!(
            "{} values for a ladder of length {}",
            values.len(),
            ladder.len()
        )));
    }
    Ok(sorting_permutation(values)
        .into_iter()
        .enumerate()
        .fold(T::zero(), |s, (l, i)| s + ladder.alpha(l) * values[i].clone()))
}

/// f(x, α) = Σ α_l V(x_l) − U(x) ≥ 0.
pub fn swap_excess<T: Scalar>(values: &[T], ladder: &TemperatureLadder<T>) -> Result<T> {
    let u = symmetrized_potential(values, ladder)?;
    let direct = values
        .iter()
        .zip(ladder.alphas())
        .fold(T::zero(), |s, (v, a)| s + a.clone() * v.clone());
    Ok(direct - u)
}

/// Drift −V'(x_i) and diffusion sqrt(2ε Σ_j ρ_ij/α_j) for each particle.
pub fn ins_coefficients<T: Real, P: Potential<T> + ?Sized>(
    state: &EnsembleState<T>,
    ladder: &TemperatureLadder<T>,
    eps: T,
    potential: &P,
) -> Result<(Vec<T>, Vec<T>)> {
    let table = compute_weights(state, ladder, eps)?;
    let two = T::from_ratio(2, 1);
    let drift = state.positions.iter().map(|&x| -potential.gradient(x)).collect();
    let diffusion = table
        .rho
        .iter()
        .map(|row| {
            let s = row
                .iter()
                .zip(ladder.alphas())
                .fold(T::zero(), |acc, (&r, &a)| acc + r / a);
            (two * eps * s).sqrt()
        })
        .collect();
    Ok((drift, diffusion))
}
