//! Direct construction of beta-splitting trees.
//!
//! A tree on `n` leaves is grown by splitting each block of `m ≥ 2`
//! consecutive elements into a left block of size `i` and a right block of
//! size `m - i`, with `i` drawn from the split law `q^{(β)}(m, ·)`. In the
//! continuous version each internal node carries one exponential holding
//! time of mean `1 / h_{m-1}`, shared by the paths to both children.

use std::collections::HashMap;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, guard, Result};
use crate::special_fn::HarmonicTable;

/// Default cap on the number of leaves of an explicitly built tree.
pub const MAX_TREE_LEAVES: usize = 1_000_000;

/// Split laws for block sizes up to this bound are cached while growing.
const SPLIT_CACHE_LIMIT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Discrete,
    Continuous,
}

/// The split law `q^{(β)}(m, i)`, `1 ≤ i ≤ m - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDistribution {
    pub beta: f64,
    pub m: usize,
    /// `pmf[i - 1] = q(m, i)`
    pub pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl SplitDistribution {
    pub fn prob(&self, i: usize) -> f64 {
        if i == 0 || i >= self.m {
            0.0
        } else {
            self.pmf[i - 1]
        }
    }

    /// Inverse-CDF draw of the left block size.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("m >= 2");
        let u = rng.random::<f64>() * total;
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.m - 2) + 1
    }
}

pub fn split_pmf(beta: f64, m: usize) -> Result<SplitDistribution> {
    if !(beta > -2.0) || !beta.is_finite() {
        return domain("split_pmf", format!("beta = {beta} must exceed -2"));
    }
    if m < 2 {
        return domain("split_pmf", format!("m = {m} must be at least 2"));
    }
    let pmf = if beta == -1.0 {
        let h = HarmonicTable::global().get(m - 1);
        let c = m as f64 / (2.0 * h);
        (1..m).map(|i| c / (i as f64 * (m - i) as f64)).collect()
    } else {
        let log_w: Vec<f64> = (1..m)
            .map(|i| {
                let (a, b) = (i as f64, (m - i) as f64);
                (ln_gamma(beta + a + 1.0) + ln_gamma(beta + b + 1.0))
                    - (ln_gamma(a + 1.0) + ln_gamma(b + 1.0))
            })
            .collect();
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect::<Vec<_>>()
    };
    let mut acc = 0.0;
    let cdf = pmf
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    Ok(SplitDistribution { beta, m, pmf, cdf })
}

pub fn sample_split<R: Rng + ?Sized>(dist: &SplitDistribution, rng: &mut R) -> usize {
    dist.sample(rng)
}

/// Draws split sizes for one `β`, caching the split law of small blocks.
#[derive(Debug, Clone)]
pub struct SplitSampler {
    beta: f64,
    cache: HashMap<usize, SplitDistribution>,
}

impl SplitSampler {
    pub fn new(beta: f64) -> Result<Self> {
        split_pmf(beta, 2)?;
        Ok(Self {
            beta,
            cache: HashMap::new(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, m: usize, rng: &mut R) -> usize {
        debug_assert!(m >= 2);
        if m <= SPLIT_CACHE_LIMIT {
            let beta = self.beta;
            let dist = self
                .cache
                .entry(m)
                .or_insert_with(|| split_pmf(beta, m).expect("validated beta"));
            return dist.sample(rng);
        }
        if self.beta == -1.0 {
            // q(m, i) = (1/i + 1/(m-i)) / (2 h_{m-1}): a size-biased harmonic
            // draw, reflected with probability 1/2
            let k = crate::chain_sim::sample_jump(m - 1, rng);
            return if rng.random::<bool>() { k } else { m - k };
        }
        split_pmf(self.beta, m).expect("validated beta").sample(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeNode {
    pub size: usize,
    pub holding_time: f64,
    /// Arena indices of the (left, right) children; `None` for leaves.
    pub children: Option<(usize, usize)>,
}

/// A realized splitting tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitTree {
    pub mode: Mode,
    nodes: Vec<TreeNode>,
}

impl SplitTree {
    /// Grows a tree on `n` leaves in pre-order (left block before right),
    /// asking `choose(m)` for the left block size and holding time of every
    /// block of size `m ≥ 2`.
    pub fn grow<F>(n: usize, mode: Mode, mut choose: F) -> Result<Self>
    where
        F: FnMut(usize) -> (usize, f64),
    {
        if n == 0 {
            return domain("build_tree", "a tree needs at least one leaf");
        }
        let mut nodes = Vec::with_capacity(2 * n - 1);
        nodes.push(TreeNode {
            size: n,
            holding_time: 0.0,
            children: None,
        });
        let mut stack = vec![0usize];
        while let Some(idx) = stack.pop() {
            let m = nodes[idx].size;
            if m < 2 {
                continue;
            }
            let (left, hold) = choose(m);
            if left == 0 || left >= m {
                return domain("build_tree", format!("split {left} of block {m} is not proper"));
            }
            let l = nodes.len();
            nodes.push(TreeNode {
                size: left,
                holding_time: 0.0,
                children: None,
            });
            nodes.push(TreeNode {
                size: m - left,
                holding_time: 0.0,
                children: None,
            });
            nodes[idx].children = Some((l, l + 1));
            nodes[idx].holding_time = hold;
            stack.push(l + 1);
            stack.push(l);
        }
        Ok(Self { mode, nodes })
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, idx: usize) -> &TreeNode {
        &self.nodes[idx]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.children.is_none()).count()
    }

    /// Writes one `size,holding_time,depth` line per node in pre-order.
    pub fn dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "size,holding_time,depth")?;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((idx, depth)) = stack.pop() {
            let node = &self.nodes[idx];
            writeln!(out, "{},{},{}", node.size, node.holding_time, depth)?;
            if let Some((l, r)) = node.children {
                stack.push((r, depth + 1));
                stack.push((l, depth + 1));
            }
        }
        Ok(())
    }
}

pub fn build_tree<R: Rng + ?Sized>(beta: f64, n: usize, mode: Mode, rng: &mut R) -> Result<SplitTree> {
    build_tree_limited(beta, n, mode, MAX_TREE_LEAVES, rng)
}

pub fn build_tree_limited<R: Rng + ?Sized>(
    beta: f64,
    n: usize,
    mode: Mode,
    max_leaves: usize,
    rng: &mut R,
) -> Result<SplitTree> {
    if n > max_leaves {
        return guard(
            "build_tree",
            format!("{n} leaves exceeds the limit of {max_leaves}; use the size chain instead"),
        );
    }
    let mut sampler = SplitSampler::new(beta)?;
    let table = HarmonicTable::global();
    SplitTree::grow(n, mode, |m| {
        let left = sampler.sample(m, rng);
        let hold = match mode {
            Mode::Discrete => 1.0,
            Mode::Continuous => rng.sample::<f64, _>(Exp1) / table.get(m - 1),
        };
        (left, hold)
    })
}

/// Path statistics of one leaf: edge height `L_n`, time height `D_n` and
/// the number of size-`r` decrements `L_{n,r}` for `r ≤ j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafStat {
    pub n: usize,
    pub edge_height: u64,
    pub time_height: f64,
    /// `decrement_counts[r - 1] = L_{n,r}`
    pub decrement_counts: Vec<u64>,
    /// Decrements larger than the tracked order: how many, and their sum.
    pub overflow_count: u64,
    pub overflow_mass: u64,
}

impl LeafStat {
    pub fn empty(n: usize, j: usize) -> Self {
        Self {
            n,
            edge_height: 0,
            time_height: 0.0,
            decrement_counts: vec![0; j],
            overflow_count: 0,
            overflow_mass: 0,
        }
    }

    pub fn tracked_order(&self) -> usize {
        self.decrement_counts.len()
    }

    /// `L_{n,r}`, or `None` when `r` is not tracked.
    pub fn count(&self, r: usize) -> Option<u64> {
        if r == 0 {
            return None;
        }
        self.decrement_counts.get(r - 1).copied()
    }

    #[inline]
    pub(crate) fn record(&mut self, decrement: usize, hold: f64) {
        self.edge_height += 1;
        self.time_height += hold;
        match self.decrement_counts.get_mut(decrement.wrapping_sub(1)) {
            Some(c) => *c += 1,
            None => {
                self.overflow_count += 1;
                self.overflow_mass += decrement as u64;
            }
        }
    }

    /// `Σ_r L_{n,r} = L_n` and `Σ_r r L_{n,r} = n - 1`.
    pub fn is_consistent(&self) -> bool {
        let count: u64 = self.decrement_counts.iter().sum::<u64>() + self.overflow_count;
        let mass: u64 = self
            .decrement_counts
            .iter()
            .enumerate()
            .map(|(i, c)| (i as u64 + 1) * c)
            .sum::<u64>()
            + self.overflow_mass;
        count == self.edge_height && mass + 1 == self.n as u64
    }
}

/// Statistics of the leaf at 1-based position `leaf_index` in left-to-right order.
pub fn leaf_stats(tree: &SplitTree, leaf_index: usize, j: usize) -> Result<LeafStat> {
    let n = tree.root().size;
    if leaf_index == 0 || leaf_index > n {
        return domain("leaf_stats", format!("leaf {leaf_index} outside 1..={n}"));
    }
    let mut stat = LeafStat::empty(n, j);
    let mut idx = 0usize;
    let mut pos = leaf_index;
    while let Some((l, r)) = tree.nodes[idx].children {
        let node = &tree.nodes[idx];
        let left = &tree.nodes[l];
        let next = if pos <= left.size {
            l
        } else {
            pos -= left.size;
            r
        };
        stat.record(node.size - tree.nodes[next].size, node.holding_time);
        idx = next;
    }
    Ok(stat)
}

/// Builds a tree and reads off a uniformly chosen leaf.
pub fn sample_uniform_leaf_stat<R: Rng + ?Sized>(
    beta: f64,
    n: usize,
    mode: Mode,
    j: usize,
    rng: &mut R,
) -> Result<LeafStat> {
    let tree = build_tree(beta, n, mode, rng)?;
    let leaf = rng.random_range(1..=n);
    leaf_stats(&tree, leaf, j)
}
