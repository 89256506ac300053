//! Approximate simulation of the subordinator with Lévy measure
//! `ν(dx) = e^{-x} / (1 - e^{-x}) dx` and of the gaps-as-boxes occupancy
//! scheme built on its range.
//!
//! Jumps larger than `eps` form a compound Poisson stream of rate
//! `ν((eps, ∞))`; the small jumps are replaced by their mean drift. A mark
//! that lands in a drift stretch instead of a jump gap voids the replicate,
//! which is then redrawn and counted.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::chain_sim::OccupancyStat;
use crate::error::{domain, guard, Result};
use crate::quad;

pub const DEFAULT_EPS: f64 = 1e-4;
pub const MAX_EPS: f64 = 0.1;
const MAX_ATTEMPTS: u32 = 10_000;
const MAX_JUMPS: usize = 50_000_000;

/// `ν((y, ∞)) = -ln(1 - e^{-y})`. The map is an involution, so it is also
/// its own inverse.
#[inline]
fn log_tail(y: f64) -> f64 {
    if y > std::f64::consts::LN_2 {
        -(-(-y).exp()).ln_1p()
    } else {
        -(-(-y).exp_m1()).ln()
    }
}

pub fn tail(y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return domain("tail", format!("y = {y} must be positive"));
    }
    Ok(log_tail(y))
}

pub fn tail_inverse(v: f64) -> Result<f64> {
    if !(v > 0.0) {
        return domain("tail_inverse", format!("v = {v} must be positive"));
    }
    Ok(log_tail(v))
}

/// Truncation data for jumps above `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyTail {
    pub eps: f64,
    /// Intensity of jumps larger than `eps`.
    pub rate: f64,
    /// `∫_0^eps x ν(dx)`.
    pub small_jump_drift: f64,
}

impl LevyTail {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= MAX_EPS) {
            return domain("LevyTail", format!("eps = {eps} outside (0, {MAX_EPS}]"));
        }
        let small_jump_drift = quad::gauss_kronrod(
            |x: f64| if x == 0.0 { 1.0 } else { x / x.exp_m1() },
            0.0,
            eps,
            0.0,
            1e-14,
        );
        Ok(Self {
            eps,
            rate: log_tail(eps),
            small_jump_drift,
        })
    }

    /// A jump size conditioned to exceed `eps`.
    #[inline]
    pub fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // 1 - U lies in (0, 1], keeping the argument away from zero
        let v = (1.0 - rng.random::<f64>()) * self.rate;
        log_tail(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpInterval {
    pub time: f64,
    pub left: f64,
    pub right: f64,
}

/// The large jumps of one truncated path, in time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeApprox {
    pub eps: f64,
    pub drift: f64,
    pub jump_intervals: Vec<JumpInterval>,
}

impl RangeApprox {
    /// `S_ε(t)`: drift plus all jumps at times `≤ t`.
    pub fn path_value(&self, t: f64) -> f64 {
        let jumps: f64 = self
            .jump_intervals
            .iter()
            .take_while(|j| j.time <= t)
            .map(|j| j.right - j.left)
            .sum();
        self.drift * t + jumps
    }

    /// `inf { u : S_ε(u) > level }`, if the simulated path gets there.
    pub fn first_passage(&self, level: f64) -> Option<f64> {
        let mut prev_time = 0.0;
        let mut prev_right = 0.0;
        for j in &self.jump_intervals {
            if self.drift > 0.0 && level < j.left {
                // crossed during the drift stretch before this jump
                return Some(prev_time + (level - prev_right) / self.drift);
            }
            if level < j.right {
                return Some(j.time);
            }
            prev_time = j.time;
            prev_right = j.right;
        }
        None
    }
}

/// Simulator of the truncated subordinator and its gap occupancy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubordinatorScheme {
    pub tail: LevyTail,
    pub drift_on: bool,
}

/// One accepted replicate of the occupancy scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancySample {
    pub stat: OccupancyStat,
    pub max_mark: f64,
    /// Replicates discarded because a mark fell in a drift stretch.
    pub resamples: u32,
}

impl SubordinatorScheme {
    pub fn new(eps: f64) -> Result<Self> {
        Ok(Self {
            tail: LevyTail::new(eps)?,
            drift_on: true,
        })
    }

    pub fn with_drift(mut self, on: bool) -> Self {
        self.drift_on = on;
        self
    }

    fn drift(&self) -> f64 {
        if self.drift_on {
            self.tail.small_jump_drift
        } else {
            0.0
        }
    }

    /// Simulates jumps until the path first exceeds `level`.
    pub fn sample_range<R: Rng + ?Sized>(&self, level: f64, rng: &mut R) -> Result<RangeApprox> {
        let drift = self.drift();
        let mut jumps = Vec::new();
        let (mut time, mut pos) = (0.0f64, 0.0f64);
        while pos <= level {
            if jumps.len() >= MAX_JUMPS {
                return guard("sample_range", format!("path did not reach {level} within {MAX_JUMPS} jumps"));
            }
            let dt = rng.sample::<f64, _>(Exp1) / self.tail.rate;
            time += dt;
            let left = pos + drift * dt;
            let right = left + self.tail.sample_jump(rng);
            jumps.push(JumpInterval { time, left, right });
            pos = right;
        }
        Ok(RangeApprox {
            eps: self.tail.eps,
            drift,
            jump_intervals: jumps,
        })
    }

    /// Places `n` unit exponential marks on a fresh path and counts gap
    /// occupancy, redrawing the whole replicate while any mark lands in a
    /// drift stretch.
    pub fn simulate<R: Rng + ?Sized>(&self, n: usize, j: usize, rng: &mut R) -> Result<OccupancySample> {
        if n == 0 {
            return domain("simulate_occupancy", "n must be at least 1");
        }
        let mut marks = vec![0.0f64; n];
        for attempt in 0..MAX_ATTEMPTS {
            for m in marks.iter_mut() {
                *m = rng.sample(Exp1);
            }
            marks.sort_unstable_by(f64::total_cmp);
            let max_mark = marks[n - 1];
            let range = self.sample_range(max_mark, rng)?;
            if let Some((stat, absorption)) = assign_marks(&marks, &range, j) {
                let mut stat = stat;
                stat.absorption_time = absorption;
                return Ok(OccupancySample {
                    stat,
                    max_mark,
                    resamples: attempt,
                });
            }
        }
        guard(
            "simulate_occupancy",
            format!("every one of {MAX_ATTEMPTS} attempts put a mark in the drift; lower eps"),
        )
    }
}

/// Counts sorted marks per jump gap `(left, right]`. Returns `None` if some
/// mark lies outside every gap.
fn assign_marks(marks: &[f64], range: &RangeApprox, j: usize) -> Option<(OccupancyStat, f64)> {
    let mut stat = OccupancyStat::empty(marks.len(), j);
    let mut idx = 0usize;
    let mut absorption = 0.0;
    for gap in &range.jump_intervals {
        if idx == marks.len() {
            break;
        }
        if marks[idx] <= gap.left {
            return None;
        }
        let start = idx;
        while idx < marks.len() && marks[idx] <= gap.right {
            idx += 1;
        }
        if idx > start {
            stat.record(idx - start);
            absorption = gap.time;
        }
    }
    (idx == marks.len()).then_some((stat, absorption))
}

pub fn simulate_occupancy<R: Rng + ?Sized>(n: usize, j: usize, eps: f64, rng: &mut R) -> Result<OccupancySample> {
    SubordinatorScheme::new(eps)?.simulate(n, j, rng)
}

/// Gap counts `𝒦(t, r)` for a Poisson(t) number of marks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonizedCounts {
    pub t: f64,
    pub sample_size: usize,
    /// `counts[r - 1] = 𝒦(t, r)` for `r ≤ r_max`.
    pub counts: Vec<u64>,
    pub overflow_mass: u64,
}

impl PoissonizedCounts {
    pub fn mark_total(&self) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, c)| (i as u64 + 1) * c)
            .sum::<u64>()
            + self.overflow_mass
    }
}

pub fn poissonized_counts<R: Rng + ?Sized>(t: f64, r_max: usize, eps: f64, rng: &mut R) -> Result<PoissonizedCounts> {
    if !(t > 0.0) || !t.is_finite() {
        return domain("poissonized_counts", format!("t = {t} must be positive and finite"));
    }
    let scheme = SubordinatorScheme::new(eps)?;
    let poisson = Poisson::new(t).map_err(|e| crate::Error::Invalid(e.to_string()))?;
    let sample_size = poisson.sample(rng) as usize;
    if sample_size == 0 {
        return Ok(PoissonizedCounts {
            t,
            sample_size,
            counts: vec![0; r_max],
            overflow_mass: 0,
        });
    }
    let draw = scheme.simulate(sample_size, r_max, rng)?;
    Ok(PoissonizedCounts {
        t,
        sample_size,
        counts: draw.stat.counts,
        overflow_mass: draw.stat.overflow_mass,
    })
}
