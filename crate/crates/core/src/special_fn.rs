//! Deterministic numerics: harmonic numbers, zeta values, the occupancy
//! function `Φ(t) = ∫_0^t (1 - e^{-y}) / y dy`, its derivatives and the
//! functions `h_r(t) = F_r(e^t) / r` built from gamma distribution functions.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{domain, Result};
use crate::quad;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Largest `m` for which exact rational harmonic numbers are offered.
pub const EXACT_HARMONIC_CUTOFF: usize = 64;

/// Length of the shared floating-point harmonic table. Beyond it the
/// asymptotic expansion is accurate to machine precision.
pub const HARMONIC_TABLE_LEN: usize = 1 << 20;

/// Harmonic numbers `h_m = Σ_{j ≤ m} 1/j`.
///
/// `values[m]` holds `h_m` (with `values[0] = 0`), accumulated with Kahan
/// summation. Exact rational values are kept for `m ≤ exact_cutoff`.
#[derive(Debug, Clone)]
pub struct HarmonicTable {
    values: Vec<f64>,
    exact: Vec<BigRational>,
}

impl HarmonicTable {
    pub fn new(len: usize, exact_cutoff: usize) -> Self {
        let len = len.max(2);
        let mut values = Vec::with_capacity(len);
        values.push(0.0);
        let (mut sum, mut carry) = (0.0f64, 0.0f64);
        for j in 1..len {
            let y = 1.0 / j as f64 - carry;
            let t = sum + y;
            carry = (t - sum) - y;
            sum = t;
            values.push(sum);
        }
        let mut exact = Vec::with_capacity(exact_cutoff + 1);
        exact.push(BigRational::zero());
        let mut acc = BigRational::zero();
        for j in 1..=exact_cutoff {
            acc += BigRational::new(BigInt::one(), BigInt::from(j));
            exact.push(acc.clone());
        }
        Self { values, exact }
    }

    /// The process-wide table of length [`HARMONIC_TABLE_LEN`].
    pub fn global() -> &'static HarmonicTable {
        static TABLE: OnceLock<HarmonicTable> = OnceLock::new();
        TABLE.get_or_init(|| HarmonicTable::new(HARMONIC_TABLE_LEN, EXACT_HARMONIC_CUTOFF))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn exact_cutoff(&self) -> usize {
        self.exact.len() - 1
    }

    /// `h_m` for any `m ≥ 0` (`h_0 = 0`), without domain checks.
    #[inline]
    pub fn get(&self, m: usize) -> f64 {
        match self.values.get(m) {
            Some(&v) => v,
            None => harmonic_asymptotic(m as f64),
        }
    }

    pub fn exact(&self, m: usize) -> Option<&BigRational> {
        self.exact.get(m)
    }
}

fn harmonic_asymptotic(m: f64) -> f64 {
    let inv = 1.0 / m;
    let inv2 = inv * inv;
    m.ln() + EULER_GAMMA + 0.5 * inv - inv2 / 12.0 + inv2 * inv2 / 120.0
}

pub fn harmonic(m: usize) -> Result<f64> {
    if m == 0 {
        return domain("harmonic", "m must be at least 1");
    }
    Ok(HarmonicTable::global().get(m))
}

pub fn harmonic_exact(m: usize) -> Result<BigRational> {
    if m == 0 {
        return domain("harmonic_exact", "m must be at least 1");
    }
    if m <= EXACT_HARMONIC_CUTOFF {
        return Ok(HarmonicTable::global().exact(m).cloned().expect("within cutoff"));
    }
    let mut acc = BigRational::zero();
    for j in 1..=m {
        acc += BigRational::new(BigInt::one(), BigInt::from(j));
    }
    Ok(acc)
}

/// Riemann zeta for real `s > 1` by Euler–Maclaurin summation.
pub fn zeta(s: f64) -> Result<f64> {
    if !(s > 1.0) {
        return domain("zeta", format!("s = {s} must exceed 1"));
    }
    const N: usize = 12;
    // B_2k / (2k)!
    const B_OVER_FACT: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1_209_600.0,
        1.0 / 47_900_160.0,
        -691.0 / 1_307_674_368_000.0,
    ];
    let n = N as f64;
    let mut sum: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // rising product s(s+1)...(s+2k-2) times N^{-s-2k+1}
    let mut rising = s;
    let mut power = n.powf(-s - 1.0);
    for (k, c) in B_OVER_FACT.iter().enumerate() {
        sum += c * rising * power;
        let a = s + (2 * k + 1) as f64;
        rising *= a * (a + 1.0);
        power /= n * n;
    }
    Ok(sum)
}

/// `E_1(t) = ∫_t^∞ e^{-y}/y dy`.
pub fn exp_integral_e1(t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return domain("exp_integral_e1", format!("t = {t} must be positive and finite"));
    }
    if t <= 1.0 {
        Ok(-EULER_GAMMA - t.ln() + ein_series(t))
    } else {
        Ok(e1_continued_fraction(t))
    }
}

/// `Ein(t) = Σ_{k ≥ 1} (-1)^{k+1} t^k / (k · k!)`, convergent for all t but
/// only used for t ≤ 1 where there is no cancellation to speak of.
fn ein_series(t: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..60 {
        term *= -t / k as f64;
        let add = -term / k as f64;
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

// Modified Lentz evaluation of e^t E_1(t) as a continued fraction.
fn e1_continued_fraction(t: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = t + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-t).exp()
}

/// `Φ(t) = ∫_0^t (1 - e^{-y}) / y dy`, evaluated as `ln t + γ + E_1(t)` for
/// `t ≥ 1` and by its power series below.
pub fn phi(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain("phi", format!("t = {t} must be positive"));
    }
    if t == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    if t < 1.0 {
        Ok(ein_series(t))
    } else if t > 700.0 {
        Ok(t.ln() + EULER_GAMMA)
    } else {
        Ok(t.ln() + EULER_GAMMA + e1_continued_fraction(t))
    }
}

/// Distribution function of the Gamma(r, 1) law,
/// `F_r(t) = 1 - e^{-t} Σ_{k<r} t^k / k!`.
pub fn gamma_cdf(r: usize, t: f64) -> Result<f64> {
    if r == 0 {
        return domain("gamma_cdf", "shape r must be at least 1");
    }
    if !(t >= 0.0) {
        return domain("gamma_cdf", format!("t = {t} must be nonnegative"));
    }
    Ok(gamma_cdf_unchecked(r, t))
}

fn gamma_cdf_unchecked(r: usize, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    if t == f64::INFINITY {
        return 1.0;
    }
    if t < r as f64 {
        // lower tail directly: e^{-t} Σ_{k ≥ r} t^k / k!
        let log_first = r as f64 * t.ln() - t - ln_factorial(r);
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = r;
        loop {
            k += 1;
            term *= t / k as f64;
            sum += term;
            if term < 1e-17 * sum || k > r + 2000 {
                break;
            }
        }
        (log_first.exp() * sum).min(1.0)
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..r {
            term *= t / k as f64;
            sum += term;
        }
        1.0 - (-t + sum.ln()).exp()
    }
}

fn ln_factorial(r: usize) -> f64 {
    (2..=r).map(|k| (k as f64).ln()).sum()
}

fn factorial(r: usize) -> f64 {
    (2..=r).map(|k| k as f64).product()
}

/// Upper bound on the derivative order accepted by [`phi_deriv`].
pub const MAX_DERIV_ORDER: usize = 30;

/// `Φ^{(r)}(t) = (-1)^{r+1} (r-1)! t^{-r} F_r(t)`.
pub fn phi_deriv(r: usize, t: f64) -> Result<f64> {
    if r == 0 {
        return domain("phi_deriv", "order 0 is phi itself");
    }
    if r > MAX_DERIV_ORDER {
        return domain("phi_deriv", format!("order {r} exceeds {MAX_DERIV_ORDER}"));
    }
    if !(t > 0.0) {
        return domain("phi_deriv", format!("t = {t} must be positive"));
    }
    let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
    let log_mag = ln_factorial(r - 1) - r as f64 * t.ln();
    Ok(sign * log_mag.exp() * gamma_cdf_unchecked(r, t))
}

/// `h_r(t) = (-1)^{r+1} Φ^{(r)}(e^t) e^{rt} / r! = F_r(e^t) / r`.
pub fn h_r(r: usize, t: f64) -> Result<f64> {
    if r == 0 {
        return domain("h_r", "r must be at least 1");
    }
    if t.is_nan() {
        return domain("h_r", "t is NaN");
    }
    Ok(gamma_cdf_unchecked(r, t.exp()) / r as f64)
}

/// `∫_0^s h_r(y) dy` by adaptive quadrature, for `s ≥ 0`.
pub fn h_r_integral(r: usize, s: f64) -> Result<f64> {
    if r == 0 {
        return domain("h_r_integral", "r must be at least 1");
    }
    if !(s >= 0.0) {
        return domain("h_r_integral", format!("upper limit {s} must be nonnegative"));
    }
    // h_r is 1/r to machine precision once e^y exceeds ~r + 40 sqrt(r) + 40
    let flat = ((r as f64) + 40.0 * (r as f64).sqrt() + 40.0).ln();
    let curved_end = s.min(flat);
    let curved = quad::gauss_kronrod(
        |y| gamma_cdf_unchecked(r, y.exp()) / r as f64,
        0.0,
        curved_end,
        1e-14,
        1e-13,
    );
    Ok(curved + (s - curved_end) / r as f64)
}

/// `∫_1^n Φ(y) / y dy = ∫_0^{ln n} Φ(e^u) du`.
pub fn centering_integral(n: f64) -> Result<f64> {
    if !(n >= 1.0) {
        return domain("centering_integral", format!("n = {n} must be at least 1"));
    }
    let upper = n.ln();
    Ok(quad::gauss_kronrod(
        |u| phi(u.exp()).expect("positive argument"),
        0.0,
        upper,
        1e-12,
        1e-13,
    ))
}

/// Constants and derived quantities of the critical Lévy measure
/// `ν(dx) = e^{-x} / (1 - e^{-x}) dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiModel {
    pub gamma_const: f64,
    pub zeta2: f64,
    pub zeta3: f64,
    pub max_deriv_order: usize,
}

impl Default for PhiModel {
    fn default() -> Self {
        Self::new()
    }
}

impl PhiModel {
    pub fn new() -> Self {
        Self {
            gamma_const: EULER_GAMMA,
            zeta2: zeta(2.0).expect("s > 1"),
            zeta3: zeta(3.0).expect("s > 1"),
            max_deriv_order: MAX_DERIV_ORDER,
        }
    }

    /// `m_r = ∫ x^r ν(dx) = Γ(r+1) ζ(r+1)`.
    pub fn moment(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return domain("moment", format!("r = {r} must be positive"));
        }
        let gamma = if r.fract() == 0.0 && r <= 170.0 {
            factorial(r as usize)
        } else {
            statrs::function::gamma::gamma(r + 1.0)
        };
        Ok(gamma * zeta(r + 1.0)?)
    }

    pub fn phi(&self, t: f64) -> Result<f64> {
        phi(t)
    }

    pub fn phi_deriv(&self, r: usize, t: f64) -> Result<f64> {
        if r > self.max_deriv_order {
            return domain("phi_deriv", format!("order {r} exceeds {}", self.max_deriv_order));
        }
        phi_deriv(r, t)
    }

    pub fn h_r(&self, r: usize, t: f64) -> Result<f64> {
        h_r(r, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn harmonic_small_values() {
        assert_eq!(harmonic(1).unwrap(), 1.0);
        assert!((harmonic(2).unwrap() - 1.5).abs() < 1e-15);
        assert!((harmonic(3).unwrap() - 11.0 / 6.0).abs() < 1e-15);
        assert_eq!(
            harmonic_exact(3).unwrap(),
            BigRational::new(BigInt::from(11), BigInt::from(6))
        );
        assert!(harmonic(0).is_err());
        assert!(harmonic_exact(0).is_err());
    }

    #[test]
    fn harmonic_increments_and_bound() {
        let table = HarmonicTable::global();
        for m in 2..=10_000usize {
            let diff = table.get(m) - table.get(m - 1);
            assert!((diff - 1.0 / m as f64).abs() < 1e-14, "m = {m}");
        }
        for m in 1..=10_000usize {
            let gap = (table.get(m) - ((m as f64).ln() + EULER_GAMMA)).abs();
            assert!(gap <= 0.5 / m as f64, "m = {m}");
        }
    }

    #[test]
    fn harmonic_table_joins_asymptotic_smoothly() {
        let table = HarmonicTable::global();
        let last = table.len() - 1;
        let from_table = table.get(last);
        let from_series = harmonic_asymptotic(last as f64);
        assert!((from_table - from_series).abs() < 1e-13);
        let next = table.get(last + 1);
        assert!((next - from_table - 1.0 / (last + 1) as f64).abs() < 1e-13);
    }

    #[test]
    fn exact_harmonic_matches_float() {
        use num_traits::ToPrimitive;
        for m in [1usize, 5, 17, 64, 70] {
            let exact = harmonic_exact(m).unwrap().to_f64().unwrap();
            assert!((exact - harmonic(m).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn zeta_values() {
        let pi = std::f64::consts::PI;
        assert!(close(zeta(2.0).unwrap(), pi * pi / 6.0, 1e-15));
        assert!(close(zeta(3.0).unwrap(), 1.202_056_903_159_594_2, 1e-15));
        assert!(close(zeta(4.0).unwrap(), pi.powi(4) / 90.0, 1e-15));
        assert!(zeta(1.0).is_err());
    }

    #[test]
    fn e1_reference_values() {
        assert!(close(exp_integral_e1(1.0).unwrap(), 0.219_383_934_395_520_3, 1e-13));
        assert!((exp_integral_e1(10.0).unwrap() - 4.156_968_929_685_324e-6).abs() < 1e-17);
        for t in [1.0, 1.5, 2.0, 5.0, 10.0, 50.0] {
            let v = exp_integral_e1(t).unwrap();
            assert!(v > 0.0 && v < (-t).exp() / t, "t = {t}");
        }
        assert!(exp_integral_e1(0.0).is_err());
        assert!(exp_integral_e1(-1.0).is_err());
    }

    #[test]
    fn e1_continuous_across_split() {
        let below = -EULER_GAMMA - 1.0f64.ln() + ein_series(1.0);
        let above = e1_continued_fraction(1.0);
        assert!(close(below, above, 1e-13));
    }

    #[test]
    fn phi_reference_values() {
        assert!(close(phi(1.0).unwrap(), 0.796_599_599_297_053_1, 1e-13));
        let far = phi(20.0).unwrap();
        assert!((far - (20.0f64.ln() + EULER_GAMMA)).abs() < 1e-9);
        assert!(phi(1e-12).unwrap() < 1e-11);
        assert!(phi(0.0).is_err());
    }

    #[test]
    fn phi_gap_to_log_decreases() {
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let t = 1.0 + 0.25 * i as f64;
            let gap = phi(t).unwrap() - t.ln() - EULER_GAMMA;
            assert!(gap > 0.0 && gap <= prev);
            prev = gap;
        }
    }

    #[test]
    fn gamma_cdf_values() {
        for t in [0.0, 0.3, 1.0, 4.0] {
            assert!((gamma_cdf(1, t).unwrap() - (1.0 - (-t).exp())).abs() < 1e-15);
        }
        assert!((gamma_cdf(2, 1.0).unwrap() - (1.0 - 2.0 / std::f64::consts::E)).abs() < 1e-14);
        assert_eq!(gamma_cdf(5, 0.0).unwrap(), 0.0);
        assert!(gamma_cdf(0, 1.0).is_err());
        assert!(gamma_cdf(1, -1.0).is_err());
    }

    #[test]
    fn gamma_cdf_branches_agree() {
        // both formulas at t = r
        for r in 1..8usize {
            let t = r as f64;
            let direct = {
                let mut term = 1.0;
                let mut sum = 1.0;
                for k in 1..r {
                    term *= t / k as f64;
                    sum += term;
                }
                1.0 - (-t).exp() * sum
            };
            assert!(close(gamma_cdf(r, t).unwrap(), direct, 1e-13));
            assert!(close(gamma_cdf(r, t * (1.0 - 1e-12)).unwrap(), direct, 1e-10));
        }
    }

    #[test]
    fn phi_deriv_values() {
        for t in [0.1, 1.0, 3.0] {
            let first = phi_deriv(1, t).unwrap();
            assert!(close(first, (1.0 - (-t).exp()) / t, 1e-14));
        }
        assert!(close(phi_deriv(2, 1.0).unwrap(), -(1.0 - 2.0 / std::f64::consts::E), 1e-13));
        assert!(phi_deriv(0, 1.0).is_err());
        assert!(phi_deriv(MAX_DERIV_ORDER + 1, 1.0).is_err());
        // large-t behaviour (-1)^{r+1} (r-1)! t^{-r}
        for r in 1..=5usize {
            let t: f64 = 200.0;
            let expect = if r % 2 == 1 { 1.0 } else { -1.0 } * factorial(r - 1) / t.powi(r as i32);
            assert!(close(phi_deriv(r, t).unwrap(), expect, 1e-12));
        }
    }

    #[test]
    fn phi_deriv_signs_and_monotone_scaled() {
        for r in 1..=4usize {
            let mut prev = 0.0;
            for i in 1..=400 {
                let t = 0.05 * i as f64;
                let d = phi_deriv(r, t).unwrap();
                let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
                assert!(sign * d > 0.0);
                let scaled = sign * t.powi(r as i32) * d;
                assert!(scaled >= prev - 1e-15, "r = {r}, t = {t}");
                prev = scaled;
            }
        }
    }

    #[test]
    fn h_r_values() {
        assert!(close(h_r(1, 0.0).unwrap(), 1.0 - (-1.0f64).exp(), 1e-14));
        let a = h_r(2, 0.0).unwrap();
        let b = h_r(2, 2.0f64.ln()).unwrap();
        assert!((a - 0.132_120_558_8).abs() < 1e-9);
        assert!((b - 0.296_997_075_8).abs() < 1e-9);
        for r in 1..=5usize {
            assert!(close(h_r(r, 40.0).unwrap(), 1.0 / r as f64, 1e-14));
        }
        assert!(h_r(0, 1.0).is_err());
    }

    #[test]
    fn h_1_integral_closed_form() {
        // ∫_0^s h_1 = Φ(e^s) - Φ(1)
        for s in [0.5, 2.0, 10.0, 30.0] {
            let q = h_r_integral(1, s).unwrap();
            let exact = phi(s.exp()).unwrap() - phi(1.0).unwrap();
            assert!((q - exact).abs() < 1e-11, "s = {s}");
        }
    }

    #[test]
    fn h_integral_recursion() {
        // (s+1) h_{s+1} = s h_s - h_s', integrated over [0, t]
        for s in 1..=4usize {
            for t in [1.0, 5.0, 12.0] {
                let lhs = (s + 1) as f64 * h_r_integral(s + 1, t).unwrap();
                let rhs = s as f64 * h_r_integral(s, t).unwrap() - h_r(s, t).unwrap() + h_r(s, 0.0).unwrap();
                assert!((lhs - rhs).abs() < 1e-11, "s = {s}, t = {t}");
            }
        }
    }

    #[test]
    fn centering_integral_values() {
        assert_eq!(centering_integral(1.0).unwrap(), 0.0);
        let ten = centering_integral(10f64.exp()).unwrap();
        let c = ten - 50.0 - 10.0 * EULER_GAMMA;
        assert!(c.abs() <= 1.0 && c > 0.0, "{c}");
        let n = 1e6f64;
        let l = n.ln();
        assert!((centering_integral(n).unwrap() - (l * l / 2.0 + EULER_GAMMA * l)).abs() < 1.0);
        assert!(centering_integral(0.5).is_err());
    }

    #[test]
    fn model_moments() {
        let model = PhiModel::new();
        assert!(close(model.moment(1.0).unwrap(), model.zeta2, 1e-15));
        assert!(close(model.moment(2.0).unwrap(), 2.0 * model.zeta3, 1e-15));
        assert!(model.moment(0.0).is_err());
    }
}
