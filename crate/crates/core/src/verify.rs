//! Verification suites. Each criterion returns its individual reports plus
//! a wall-clock budget check; all randomness comes from the seed argument.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::chain_sim::{exact_law, exact_occupancy_law, leaf_stat_from_chain, occupancy_stat_from_chain, to_f64};
use crate::error::{domain, Result};
use crate::limits::{
    critical_constants, limit_covariance, sample_limit_vector, standardize, LimitModel, Normalization, Statistic,
};
use crate::quad;
use crate::rng::{replicate, try_replicate};
use crate::special_fn::{phi, phi_deriv, PhiModel};
use crate::stat_tests::{
    chi2_discrete, compare_covariance, covariance, ks_against, ks_statistic, ks_two_sample, mean, normal_cdf,
    skewness, variance, TestReport,
};
use crate::subord_sim::SubordinatorScheme;
use crate::tree_sim::{sample_uniform_leaf_stat, Mode};

/// p-value floor shared by every randomized check.
pub const P_FLOOR: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Coupling,
    Clt,
    Phi,
    Occupancy,
}

impl Suite {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "coupling" => Ok(Suite::Coupling),
            "clt" => Ok(Suite::Clt),
            "phi" => Ok(Suite::Phi),
            "occupancy" => Ok(Suite::Occupancy),
            other => domain("Suite::parse", format!("unknown suite {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub title: String,
    pub reports: Vec<TestReport>,
    pub elapsed_secs: f64,
    pub pass: bool,
}

impl CriterionOutcome {
    fn finish(id: u32, title: &str, mut reports: Vec<TestReport>, started: Instant, budget_secs: f64) -> Self {
        let elapsed = started.elapsed().as_secs_f64();
        reports.push(TestReport::at_most("runtime seconds", elapsed, budget_secs));
        let pass = reports.iter().all(|r| r.pass);
        Self {
            id,
            title: title.to_string(),
            reports,
            elapsed_secs: elapsed,
            pass,
        }
    }

    pub fn one_line(&self) -> String {
        format!(
            "[{}] criterion {}: {} ({:.2}s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed_secs
        )
    }
}

/// Exact coupling of the tree chain at `n + 1` with the occupancy chain at
/// `n`, for `n = 2..=10`, `j = 3`.
pub fn exact_coupling() -> Result<CriterionOutcome> {
    let started = Instant::now();
    let mut reports = Vec::new();
    for n in 2..=10usize {
        let tree = exact_law(n + 1, 3)?;
        let occ = exact_occupancy_law(n, 3)?;
        let keys_differ = tree
            .support
            .iter()
            .filter(|(k, p)| occ.support.get(*k) != Some(*p))
            .count()
            + occ.support.keys().filter(|k| !tree.support.contains_key(*k)).count();
        let moments_differ = usize::from(tree.mean_hold != occ.mean_hold)
            + usize::from(tree.second_moment_hold != occ.second_moment_hold);
        reports.push(
            TestReport::at_most(format!("tree({}) vs occupancy({n}) mismatches", n + 1), (keys_differ + moments_differ) as f64, 0.0)
                .with_metadata(format!("{} support points, E[D] = {:.6}", tree.support.len(), to_f64(&tree.mean_hold))),
        );
    }
    Ok(CriterionOutcome::finish(1, "exact coupling of tree and occupancy chains", reports, started, 10.0))
}

/// Full tree simulation at `n = 8` against the exact law of `L_8` and the
/// chain sampler of `D_8`.
pub fn recurrence_check(seed: u64) -> Result<CriterionOutcome> {
    let started = Instant::now();
    let (n, reps) = (8usize, 100_000usize);
    let trees = try_replicate(seed, reps, |rng| sample_uniform_leaf_stat(-1.0, n, Mode::Continuous, 3, rng))?;
    let chains = try_replicate(seed ^ 0x5bd1_e995, reps, |rng| leaf_stat_from_chain(n, 3, rng))?;

    let law = exact_law(n, 3)?;
    let marg = law.steps_marginal();
    let mut observed = vec![0u64; n];
    for s in &trees {
        observed[s.edge_height as usize] += 1;
    }
    let pmf: Vec<f64> = (0..n).map(|l| marg.get(&(l as u32)).map(to_f64).unwrap_or(0.0)).collect();
    let chi = chi2_discrete(&observed, &pmf)?;
    let mut chi = chi;
    chi.name = "L_8 tree counts vs exact law (chi2)".into();

    let d_tree: Vec<f64> = trees.iter().map(|s| s.time_height).collect();
    let d_chain: Vec<f64> = chains.iter().map(|s| s.time_height).collect();
    let mut ks = ks_two_sample(&d_tree, &d_chain)?;
    ks.name = "D_8 tree vs chain (two-sample KS)".into();

    let se = (variance(&d_tree) / reps as f64).sqrt();
    let mean_d = TestReport::tolerance("E[D_8] tree vs exact", mean(&d_tree), to_f64(&law.mean_hold), 4.0 * se);
    Ok(CriterionOutcome::finish(2, "tree construction reproduces the size recurrence", vec![chi, ks, mean_d], started, 60.0))
}

/// Order-`r` central difference with `O(h²)` error.
fn central_difference<F: Fn(f64) -> f64>(f: &F, r: usize, t: f64, h: f64) -> f64 {
    match r {
        1 => (f(t + h) - f(t - h)) / (2.0 * h),
        2 => (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h),
        3 => (f(t + 2.0 * h) - 2.0 * f(t + h) + 2.0 * f(t - h) - f(t - 2.0 * h)) / (2.0 * h * h * h),
        4 => (f(t + 2.0 * h) - 4.0 * f(t + h) + 6.0 * f(t) - 4.0 * f(t - h) + f(t - 2.0 * h)) / (h * h * h * h),
        _ => unreachable!("orders 1..=4 only"),
    }
}

/// Step factor relative to `t` for each derivative order.
pub const FD_STEP: [f64; 4] = [1e-3, 5e-3, 1e-2, 2e-2];

/// `Φ^{(r)}(t)` from finite differences of quadrature values of Φ, one
/// Richardson extrapolation step on top of the central differences.
pub fn phi_deriv_by_differences(r: usize, t: f64) -> f64 {
    let f = |x: f64| quad::fixed_kronrod(|y: f64| if y == 0.0 { 1.0 } else { -(-y).exp_m1() / y }, 0.0, x, 16);
    let h = t * FD_STEP[r - 1];
    let coarse = central_difference(&f, r, t, h);
    let fine = central_difference(&f, r, t, h / 2.0);
    (4.0 * fine - coarse) / 3.0
}

/// `∫_0^1 x^{-1} (-ln(1-x))^r dx` by double-exponential quadrature.
pub fn hurwitz_moment_by_quadrature(r: f64) -> f64 {
    quad::tanh_sinh(|x: f64| (-(-x).ln_1p()).powf(r) / x, 0.0, 1.0, 1e-14)
}

pub fn special_functions() -> Result<CriterionOutcome> {
    let started = Instant::now();
    let mut reports = Vec::new();
    for t in [0.5, 1.0, 5.0, 20.0] {
        let q = quad::gauss_kronrod(|y: f64| if y == 0.0 { 1.0 } else { -(-y).exp_m1() / y }, 0.0, t, 0.0, 1e-15);
        let v = phi(t)?;
        reports.push(TestReport::at_most(format!("phi({t}) relative error vs quadrature"), ((v - q) / q).abs(), 1e-10));
    }
    for r in 1..=4usize {
        for t in [0.5, 1.0, 2.0, 5.0, 20.0] {
            let closed = phi_deriv(r, t)?;
            let fd = phi_deriv_by_differences(r, t);
            reports.push(TestReport::at_most(
                format!("phi_deriv({r}, {t}) relative error vs finite differences"),
                ((closed - fd) / closed).abs(),
                1e-5,
            ));
        }
    }
    let model = PhiModel::new();
    for r in 1..=3 {
        let closed = model.moment(r as f64)?;
        let q = hurwitz_moment_by_quadrature(r as f64);
        reports.push(TestReport::at_most(format!("moment({r}) relative error vs Hurwitz integral"), ((closed - q) / q).abs(), 1e-8));
    }
    Ok(CriterionOutcome::finish(3, "special functions against quadrature", reports, started, 5.0))
}

/// Raw chain output of the large-`n` runs: columns `L_1..L_3, L, D`.
#[derive(Debug, Clone)]
pub struct CltSample {
    pub n: usize,
    pub rows: Vec<[f64; 5]>,
    pub elapsed_secs: f64,
}

pub const CLT_N: usize = 1_000_000;
pub const CLT_REPS: usize = 200_000;

pub fn clt_sample(seed: u64, n: usize, reps: usize) -> Result<CltSample> {
    let started = Instant::now();
    let rows = try_replicate(seed, reps, |rng| {
        leaf_stat_from_chain(n, 3, rng).map(|s| {
            [
                s.decrement_counts[0] as f64,
                s.decrement_counts[1] as f64,
                s.decrement_counts[2] as f64,
                s.edge_height as f64,
                s.time_height,
            ]
        })
    })?;
    Ok(CltSample {
        n,
        rows,
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

fn column(sample: &CltSample, idx: usize) -> Vec<f64> {
    sample.rows.iter().map(|r| r[idx]).collect()
}

fn standardized(sample: &CltSample, idx: usize, stat: Statistic, norm: Normalization) -> Result<Vec<f64>> {
    let n = sample.n as f64;
    sample.rows.iter().map(|r| standardize(stat, n, r[idx], norm)).collect()
}

/// Marginal CLT for the time height.
pub fn clt_time_height(sample: &CltSample) -> Result<CriterionOutcome> {
    let started = Instant::now();
    let d = standardized(sample, 4, Statistic::TimeHeight, Normalization::Marginal)?;
    let m = mean(&d);
    let centered: Vec<f64> = d.iter().map(|x| x - m).collect();
    let ks = ks_statistic(&centered, |x| normal_cdf(x, 0.0, 1.0))?;
    let reports = vec![
        TestReport::tolerance("variance of standardized D", variance(&d), 1.0, 0.1),
        TestReport::at_most("|skewness| of standardized D", skewness(&d).abs(), 0.1),
        TestReport::at_most("KS distance to N(0,1) after recentering", ks, 0.02),
        TestReport::tolerance("mean of standardized D", m, 0.0, 0.35)
            .with_metadata("finite-size allowance for the O(1) term missing from the centering"),
    ];
    let elapsed_offset = sample.elapsed_secs;
    let mut out = CriterionOutcome::finish(4, "CLT for the time height", reports, started, f64::INFINITY);
    // the budget covers the shared sampling as well
    out.reports.pop();
    out.elapsed_secs += elapsed_offset;
    out.reports.push(TestReport::at_most("runtime seconds", out.elapsed_secs, 120.0));
    out.pass = out.reports.iter().all(|r| r.pass);
    Ok(out)
}

/// Joint limit of decrement counts and both heights.
pub fn clt_joint(sample: &CltSample) -> Result<CriterionOutcome> {
    let started = Instant::now();
    let c = critical_constants();
    let n = sample.n as f64;
    let log_n = n.ln();
    let stats = [
        Statistic::Decrement(1),
        Statistic::Decrement(2),
        Statistic::Decrement(3),
        Statistic::EdgeHeight,
        Statistic::TimeHeight,
    ];
    let cols: Vec<Vec<f64>> = stats
        .iter()
        .enumerate()
        .map(|(i, &s)| standardized(sample, i, s, Normalization::Joint))
        .collect::<Result<_>>()?;
    let model = LimitModel::new(3);
    let corr = covariance(&cols[3], &cols[4]) / (variance(&cols[3]) * variance(&cols[4])).sqrt();
    let mut reports = vec![TestReport::tolerance("corr(L, D)", corr, model.correlation_l_d(), 0.05)];
    let cmp = compare_covariance(&cols, &limit_covariance(3), 3.0, Some(0.15))?;
    let mut cov_report = cmp.report.clone();
    cov_report.name = "covariance of (L_1, L_2, L_3, L, D) vs limit".into();
    reports.push(cov_report);
    for r in 1..=3usize {
        let raw = column(sample, r - 1);
        let ratio = mean(&raw) * c.m1 * r as f64 / log_n;
        reports.push(TestReport::tolerance(format!("mean L_{r} * zeta(2) * {r} / log n"), ratio, 1.0, 0.1));
    }
    let elapsed_offset = sample.elapsed_secs;
    let mut out = CriterionOutcome::finish(5, "joint limit of decrement counts and heights", reports, started, f64::INFINITY);
    out.reports.pop();
    out.elapsed_secs += elapsed_offset;
    out.pass = out.reports.iter().all(|r| r.pass);
    Ok(out)
}

/// Gumbel distribution function.
pub fn gumbel_cdf(x: f64) -> f64 {
    (-(-x).exp()).exp()
}

pub fn subordinator_oracle(seed: u64) -> Result<CriterionOutcome> {
    let started = Instant::now();
    let (n, reps, eps) = (100usize, 20_000usize, 1e-4);
    let scheme = SubordinatorScheme::new(eps)?;
    let fine = SubordinatorScheme::new(eps / 10.0)?;
    let oracle = try_replicate(seed, reps, |rng| scheme.simulate(n, 3, rng))?;
    let finer = try_replicate(seed ^ 0x2545_f491, reps, |rng| fine.simulate(n, 3, rng))?;
    let chain = try_replicate(seed ^ 0x9e37_79b9, reps, |rng| occupancy_stat_from_chain(n, 3, rng))?;

    let k_oracle: Vec<f64> = oracle.iter().map(|d| d.stat.occupied as f64).collect();
    let k_finer: Vec<f64> = finer.iter().map(|d| d.stat.occupied as f64).collect();
    let k_chain: Vec<f64> = chain.iter().map(|s| s.occupied as f64).collect();
    let resamples: u64 = oracle.iter().map(|d| d.resamples as u64).sum();

    let mut vs_chain = ks_two_sample(&k_oracle, &k_chain)?;
    vs_chain.name = "K_100 subordinator vs chain (two-sample KS)".into();
    vs_chain.metadata.push_str(&format!("; {resamples} drift resamples over {reps} replicates"));
    let mut consistency = ks_two_sample(&k_oracle, &k_finer)?;
    consistency.name = "K_100 at eps vs eps/10 (two-sample KS)".into();
    let broken = oracle.iter().chain(&finer).filter(|d| !d.stat.is_consistent()).count();
    let identity = TestReport::at_most("samples violating sum r K_{n,r} = n", broken as f64, 0.0);

    // maximal marks of the occupancy scheme at n = 10^4
    let (gn, greps) = (10_000usize, 10_000usize);
    let gumbel_scheme = SubordinatorScheme::new(1e-6)?;
    let maxima = try_replicate(seed ^ 0x85eb_ca6b, greps, |rng| {
        gumbel_scheme.simulate(gn, 1, rng).map(|d| d.max_mark - (gn as f64).ln())
    })?;
    let gumbel = ks_against("E_{n,n} - log n vs Gumbel (KS), n = 10^4", &maxima, gumbel_cdf, P_FLOOR)?;

    Ok(CriterionOutcome::finish(
        6,
        "subordinator occupancy oracle",
        vec![vs_chain, identity, consistency, gumbel],
        started,
        180.0,
    ))
}

pub fn limit_sampler(seed: u64) -> Result<CriterionOutcome> {
    let started = Instant::now();
    let reps = 1_000_000usize;
    let draws = replicate(seed, reps, |rng| sample_limit_vector(3, rng));
    let cols: Vec<Vec<f64>> = (0..5).map(|i| draws.iter().map(|d| d[i]).collect()).collect();
    let cmp = compare_covariance(&cols, &limit_covariance(3), 3.0, None)?;
    let mut report = cmp.report;
    report.name = "sampler covariance vs limit covariance (3 SE)".into();
    Ok(CriterionOutcome::finish(7, "limit sampler self-consistency", vec![report], started, 30.0))
}

/// Runs a suite; criteria are reported in numeric order.
pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<CriterionOutcome>> {
    match suite {
        Suite::Coupling => Ok(vec![exact_coupling()?, recurrence_check(seed)?]),
        Suite::Phi => Ok(vec![special_functions()?]),
        Suite::Clt => {
            let sample = clt_sample(seed, CLT_N, CLT_REPS)?;
            Ok(vec![clt_time_height(&sample)?, clt_joint(&sample)?, limit_sampler(seed ^ 0xc2b2_ae35)?])
        }
        Suite::Occupancy => Ok(vec![subordinator_oracle(seed)?]),
    }
}
