//! The decreasing size chain shared by the tree and the occupancy scheme.
//!
//! Two labelings of the same chain are exposed:
//!
//! * **tree view** (`start = n`, absorbed at 1): from size `m` the chain
//!   drops by `k ∈ 1..m-1` with probability `1 / (k h_{m-1})` after an
//!   exponential hold of mean `1 / h_{m-1}`;
//! * **occupancy view** (`start = n`, absorbed at 0): from `m` remaining
//!   marks it drops by `k ∈ 1..m` with probability `1 / (k h_m)` after a
//!   hold of mean `1 / h_m`.
//!
//! The tree view started at `n + 1` is the occupancy view started at `n`
//! with every state shifted by one.

use std::collections::BTreeMap;

use num_bigint::BigInt;
pub use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::special_fn::{harmonic_exact, HarmonicTable, EULER_GAMMA};
use crate::tree_sim::LeafStat;

/// Largest start state accepted by [`exact_law`].
pub const MAX_EXACT_N: usize = 14;

/// Draws `k ∈ 1..=m` with probability `1 / (k h_m)` by inverting the CDF
/// `h_k / h_m`, starting the search near `exp(U h_m - γ)`.
pub fn sample_jump<R: Rng + ?Sized>(m: usize, rng: &mut R) -> usize {
    debug_assert!(m >= 1);
    if m <= 1 {
        return 1;
    }
    let table = HarmonicTable::global();
    let target = rng.random::<f64>() * table.get(m);
    let guess = (target - EULER_GAMMA).exp().round();
    let mut k = if guess >= m as f64 { m } else { (guess as usize).max(1) };
    while k > 1 && table.get(k - 1) >= target {
        k -= 1;
    }
    while k < m && table.get(k) < target {
        k += 1;
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainView {
    Tree,
    Occupancy,
}

impl ChainView {
    pub fn terminal(self) -> usize {
        match self {
            ChainView::Tree => 1,
            ChainView::Occupancy => 0,
        }
    }

    /// Index of the harmonic number governing state `m`.
    #[inline]
    fn harmonic_index(self, m: usize) -> usize {
        match self {
            ChainView::Tree => m - 1,
            ChainView::Occupancy => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub state_before: usize,
    pub jump: usize,
    /// Zero when holds were not requested.
    pub hold: f64,
}

/// One absorbed path of the size chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub start: usize,
    pub view: ChainView,
    pub steps: Vec<ChainStep>,
}

impl ChainTrace {
    pub fn final_state(&self) -> usize {
        self.start - self.steps.iter().map(|s| s.jump).sum::<usize>()
    }

    pub fn total_hold(&self) -> f64 {
        self.steps.iter().map(|s| s.hold).sum()
    }

    /// Reads the trace as a leaf path (meaningful for the tree view).
    pub fn leaf_stat(&self, j: usize) -> LeafStat {
        let mut stat = LeafStat::empty(self.start, j);
        for s in &self.steps {
            stat.record(s.jump, s.hold);
        }
        stat
    }

    /// Reads the trace as gap occupancy (meaningful for the occupancy view).
    pub fn occupancy_stat(&self, j: usize) -> OccupancyStat {
        let mut stat = OccupancyStat::empty(self.start, j);
        for s in &self.steps {
            stat.record(s.jump);
        }
        stat.absorption_time = self.total_hold();
        stat
    }
}

pub fn run_chain<R: Rng + ?Sized>(start: usize, view: ChainView, with_holds: bool, rng: &mut R) -> ChainTrace {
    let table = HarmonicTable::global();
    let terminal = view.terminal();
    let mut steps = Vec::new();
    let mut m = start;
    while m > terminal {
        let hm = view.harmonic_index(m);
        let jump = sample_jump(hm, rng);
        let hold = if with_holds {
            rng.sample::<f64, _>(Exp1) / table.get(hm)
        } else {
            0.0
        };
        steps.push(ChainStep {
            state_before: m,
            jump,
            hold,
        });
        m -= jump;
    }
    ChainTrace { start, view, steps }
}

/// Tree-view chain started at `n` leaves.
pub fn run_tree_chain<R: Rng + ?Sized>(n: usize, with_holds: bool, rng: &mut R) -> ChainTrace {
    run_chain(n, ChainView::Tree, with_holds, rng)
}

/// Occupancy-view chain started at `n` marks.
pub fn run_occupancy_chain<R: Rng + ?Sized>(n: usize, with_holds: bool, rng: &mut R) -> ChainTrace {
    run_chain(n, ChainView::Occupancy, with_holds, rng)
}

/// `(L_{n,1..j}, L_n, D_n)` of a uniformly chosen leaf, by running the
/// tree-view chain without storing the trace.
pub fn leaf_stat_from_chain<R: Rng + ?Sized>(n: usize, j: usize, rng: &mut R) -> Result<LeafStat> {
    if n == 0 {
        return domain("leaf_stat_from_chain", "n must be at least 1");
    }
    let table = HarmonicTable::global();
    let mut stat = LeafStat::empty(n, j);
    let mut m = n;
    while m > 1 {
        let h = m - 1;
        let jump = sample_jump(h, rng);
        let hold = rng.sample::<f64, _>(Exp1) / table.get(h);
        stat.record(jump, hold);
        m -= jump;
    }
    Ok(stat)
}

/// Occupancy counts `K_{n,r}`, `K_n` and the absorption time `S^←(E_{n,n})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyStat {
    pub n: usize,
    pub occupied: u64,
    /// `counts[r - 1] = K_{n,r}`
    pub counts: Vec<u64>,
    pub overflow_count: u64,
    pub overflow_mass: u64,
    pub absorption_time: f64,
}

impl OccupancyStat {
    pub fn empty(n: usize, j: usize) -> Self {
        Self {
            n,
            occupied: 0,
            counts: vec![0; j],
            overflow_count: 0,
            overflow_mass: 0,
            absorption_time: 0.0,
        }
    }

    pub fn count(&self, r: usize) -> Option<u64> {
        if r == 0 {
            return None;
        }
        self.counts.get(r - 1).copied()
    }

    /// Registers one occupied gap holding `size` marks.
    #[inline]
    pub(crate) fn record(&mut self, size: usize) {
        self.occupied += 1;
        match self.counts.get_mut(size.wrapping_sub(1)) {
            Some(c) => *c += 1,
            None => {
                self.overflow_count += 1;
                self.overflow_mass += size as u64;
            }
        }
    }

    /// `Σ_r K_{n,r} = K_n` and `Σ_r r K_{n,r} = n`.
    pub fn is_consistent(&self) -> bool {
        let count = self.counts.iter().sum::<u64>() + self.overflow_count;
        let mass = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, c)| (i as u64 + 1) * c)
            .sum::<u64>()
            + self.overflow_mass;
        count == self.occupied && mass == self.n as u64
    }
}

pub fn occupancy_stat_from_chain<R: Rng + ?Sized>(n: usize, j: usize, rng: &mut R) -> Result<OccupancyStat> {
    if n == 0 {
        return domain("occupancy_stat_from_chain", "n must be at least 1");
    }
    let table = HarmonicTable::global();
    let mut stat = OccupancyStat::empty(n, j);
    let mut m = n;
    while m > 0 {
        let jump = sample_jump(m, rng);
        stat.absorption_time += rng.sample::<f64, _>(Exp1) / table.get(m);
        stat.record(jump);
        m -= jump;
    }
    Ok(stat)
}

/// Exact joint law of `((jump counts of sizes 1..=j), number of steps)` for
/// the chain started at `n`, with the exact mean and variance of the total
/// holding time.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactLaw {
    pub n: usize,
    pub view: ChainView,
    pub j: usize,
    /// Key: `[c_1, ..., c_j, steps]`.
    pub support: BTreeMap<Vec<u32>, BigRational>,
    pub mean_hold: BigRational,
    pub second_moment_hold: BigRational,
}

impl ExactLaw {
    pub fn total_probability(&self) -> BigRational {
        self.support.values().fold(BigRational::zero(), |a, p| a + p)
    }

    /// Law of the step count (`L_n` or `K_n`).
    pub fn steps_marginal(&self) -> BTreeMap<u32, BigRational> {
        let mut out = BTreeMap::new();
        for (key, p) in &self.support {
            *out.entry(key[self.j]).or_insert_with(BigRational::zero) += p;
        }
        out
    }

    /// Law of the number of size-`r` jumps, `1 ≤ r ≤ j`.
    pub fn count_marginal(&self, r: usize) -> Option<BTreeMap<u32, BigRational>> {
        if r == 0 || r > self.j {
            return None;
        }
        let mut out = BTreeMap::new();
        for (key, p) in &self.support {
            *out.entry(key[r - 1]).or_insert_with(BigRational::zero) += p;
        }
        Some(out)
    }

    pub fn mean_steps(&self) -> BigRational {
        self.support
            .iter()
            .fold(BigRational::zero(), |a, (k, p)| a + p * BigRational::from_integer(BigInt::from(k[self.j])))
    }

    pub fn variance_hold(&self) -> BigRational {
        &self.second_moment_hold - &self.mean_hold * &self.mean_hold
    }

    /// Probability of one specific decrement sequence (path), in order.
    pub fn path_probability(&self, decrements: &[usize]) -> Option<BigRational> {
        let mut m = self.n;
        let mut p = BigRational::one();
        for &k in decrements {
            if m <= self.view.terminal() {
                return None;
            }
            let hm = self.view.harmonic_index(m);
            if k == 0 || k > hm {
                return None;
            }
            let h = harmonic_exact(hm).ok()?;
            p /= BigRational::from_integer(BigInt::from(k)) * h;
            m -= k;
        }
        (m == self.view.terminal()).then_some(p)
    }
}

/// Exact law of the chain started at `n` by dynamic programming over
/// states, in rational arithmetic.
pub fn exact_chain_law(n: usize, view: ChainView, j: usize) -> Result<ExactLaw> {
    if n > MAX_EXACT_N {
        return domain("exact_law", format!("n = {n} exceeds the exact limit {MAX_EXACT_N}"));
    }
    let terminal = view.terminal();
    if n < terminal.max(1) {
        return domain("exact_law", format!("n = {n} below the absorbing state"));
    }
    let zero_key = vec![0u32; j + 1];
    let mut laws: Vec<BTreeMap<Vec<u32>, BigRational>> = Vec::with_capacity(n + 1);
    let mut mean: Vec<BigRational> = Vec::with_capacity(n + 1);
    let mut second: Vec<BigRational> = Vec::with_capacity(n + 1);
    for m in 0..=n {
        if m <= terminal {
            laws.push(BTreeMap::from([(zero_key.clone(), BigRational::one())]));
            mean.push(BigRational::zero());
            second.push(BigRational::zero());
            continue;
        }
        let hm = view.harmonic_index(m);
        let h = harmonic_exact(hm)?;
        let mut law: BTreeMap<Vec<u32>, BigRational> = BTreeMap::new();
        let mut next_mean = BigRational::zero();
        let mut next_second = BigRational::zero();
        for k in 1..=hm {
            let p = (BigRational::from_integer(BigInt::from(k)) * &h).recip();
            for (key, q) in &laws[m - k] {
                let mut key = key.clone();
                if k <= j {
                    key[k - 1] += 1;
                }
                key[j] += 1;
                *law.entry(key).or_insert_with(BigRational::zero) += &p * q;
            }
            next_mean += &p * &mean[m - k];
            next_second += &p * &second[m - k];
        }
        // hold τ ~ Exp(rate h) independent of the remainder D'
        let inv = h.recip();
        let m1 = &inv + &next_mean;
        let m2 = BigRational::from_integer(BigInt::from(2)) * &inv * &inv
            + BigRational::from_integer(BigInt::from(2)) * &inv * &next_mean
            + next_second;
        laws.push(law);
        mean.push(m1);
        second.push(m2);
    }
    Ok(ExactLaw {
        n,
        view,
        j,
        support: laws.pop().expect("n + 1 entries"),
        mean_hold: mean.pop().expect("n + 1 entries"),
        second_moment_hold: second.pop().expect("n + 1 entries"),
    })
}

/// Exact law of `((L_{n,r})_{r ≤ j}, L_n)` and moments of `D_n` for a tree
/// with `n` leaves.
pub fn exact_law(n: usize, j: usize) -> Result<ExactLaw> {
    exact_chain_law(n, ChainView::Tree, j)
}

/// Exact law of `((K_{n,r})_{r ≤ j}, K_n)` and moments of `S^←(E_{n,n})`.
pub fn exact_occupancy_law(n: usize, j: usize) -> Result<ExactLaw> {
    exact_chain_law(n, ChainView::Occupancy, j)
}

/// Floating-point view of a rational, for reporting.
pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}
