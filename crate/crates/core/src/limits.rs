//! Centering and scaling recipes for leaf-height and occupancy statistics,
//! the covariance of their joint Gaussian limit, and an exact sampler of
//! that limit.
//!
//! Coordinates of the joint limit are ordered `(X_1, …, X_j, L, D)` where
//! `X_r` is the limit of the size-`r` decrement count, `L` of the edge
//! height and `D` of the time height. With `a² = m₂ / m₁³`, `Z = W(1)` and
//! `∫₀¹ W = Z/2 + N(0, 1/12)`:
//!
//! ```text
//! X_r = a Z / r + Z_r / sqrt(m₁ r),   L = a ∫₀¹ W,   D = a Z.
//! ```

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::quad;
use crate::special_fn::{centering_integral, phi, zeta};

/// `(m₁, m₂, a²) = (ζ(2), 2ζ(3), 2ζ(3)/ζ(2)³)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalConstants {
    pub m1: f64,
    pub m2: f64,
    pub a2: f64,
}

pub fn critical_constants() -> CriticalConstants {
    let m1 = zeta(2.0).expect("s > 1");
    let m2 = 2.0 * zeta(3.0).expect("s > 1");
    CriticalConstants {
        m1,
        m2,
        a2: m2 / (m1 * m1 * m1),
    }
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// Symmetric permutation `P A Pᵀ` with `perm[k]` the old index of new row `k`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(perm[i], perm[j]))
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let n = self.dim;
        let mut a = self.clone();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a.get(i, j).powi(2))
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.get(p, q);
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Which statistic a raw value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// `L_n`
    EdgeHeight,
    /// `D_n`
    TimeHeight,
    /// `L_{n,r}`
    Decrement(usize),
    /// `K_n`
    Occupied,
    /// `K_{n,r}`
    OccupiedWith(usize),
    /// `S^←(E_{n,n})`
    Absorption,
}

impl Statistic {
    pub fn parse(tag: &str) -> Result<Self> {
        let tag = tag.trim();
        let order = |s: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(r) if r >= 1 => Ok(r),
                _ => domain("Statistic::parse", format!("bad order in {tag:?}")),
            }
        };
        match tag {
            "L" => Ok(Self::EdgeHeight),
            "D" => Ok(Self::TimeHeight),
            "K" => Ok(Self::Occupied),
            "absorption" => Ok(Self::Absorption),
            _ => {
                if let Some(r) = tag.strip_prefix("L_") {
                    Ok(Self::Decrement(order(r)?))
                } else if let Some(r) = tag.strip_prefix("K_") {
                    Ok(Self::OccupiedWith(order(r)?))
                } else {
                    domain("Statistic::parse", format!("unknown statistic {tag:?}"))
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::EdgeHeight => "L".into(),
            Self::TimeHeight => "D".into(),
            Self::Decrement(r) => format!("L_{r}"),
            Self::Occupied => "K".into(),
            Self::OccupiedWith(r) => format!("K_{r}"),
            Self::Absorption => "absorption".into(),
        }
    }
}

/// Normalization conventions.
///
/// * `Marginal`: every coordinate tends to a standard normal.
/// * `Brownian`: heights are scaled by `(a² (log n)^3)^{1/2}` and
///   `(a² log n)^{1/2}`, so the limit is `(∫₀¹W, W(1))`; `K_n` uses the
///   integral centering and `(a² log n)^{1/2} Φ(n)` scaling.
/// * `Joint`: powers of `log n` only (`(log n)^{3/2}` for heights and `K_n`,
///   `(log n)^{1/2}` otherwise); this is the scale of [`limit_covariance`].
///
/// Decrement counts are divided by `(log n)^{1/2}` except under `Marginal`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Marginal,
    Brownian,
    Joint,
}

/// `(raw - center) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub center: f64,
    pub scale: f64,
}

impl Affine {
    pub fn apply(&self, raw: f64) -> f64 {
        (raw - self.center) / self.scale
    }
}

/// The `(2 m₁)^{-1} (log n)²` centering of `K_n` and `L_n`.
pub fn occupied_centering_quadratic(n: f64) -> f64 {
    let l = n.ln();
    l * l / (2.0 * critical_constants().m1)
}

/// The `m₁^{-1} ∫_1^n Φ(y)/y dy` centering of `K_n`.
pub fn occupied_centering_integral(n: f64) -> Result<f64> {
    Ok(centering_integral(n)? / critical_constants().m1)
}

pub fn affine(stat: Statistic, n: f64, norm: Normalization) -> Result<Affine> {
    if !(n >= 2.0) || !n.is_finite() {
        return domain("standardize", format!("n = {n} must be at least 2"));
    }
    let c = critical_constants();
    let l = n.ln();
    let a = c.a2.sqrt();
    let out = match stat {
        Statistic::EdgeHeight => Affine {
            center: l * l / (2.0 * c.m1),
            scale: match norm {
                Normalization::Marginal => a * (l * l * l / 3.0).sqrt(),
                Normalization::Brownian => a * (l * l * l).sqrt(),
                Normalization::Joint => (l * l * l).sqrt(),
            },
        },
        Statistic::TimeHeight | Statistic::Absorption => Affine {
            center: l / c.m1,
            scale: match norm {
                Normalization::Marginal | Normalization::Brownian => a * l.sqrt(),
                Normalization::Joint => l.sqrt(),
            },
        },
        Statistic::Decrement(r) | Statistic::OccupiedWith(r) => {
            if r == 0 {
                return domain("standardize", "decrement order must be at least 1");
            }
            let r = r as f64;
            let var = c.a2 / (r * r) + 1.0 / (c.m1 * r);
            Affine {
                center: l / (c.m1 * r),
                scale: match norm {
                    Normalization::Marginal => (var * l).sqrt(),
                    Normalization::Brownian | Normalization::Joint => l.sqrt(),
                },
            }
        }
        Statistic::Occupied => match norm {
            Normalization::Joint => Affine {
                center: occupied_centering_quadratic(n),
                scale: (l * l * l).sqrt(),
            },
            Normalization::Brownian | Normalization::Marginal => {
                let base = (c.a2 * l).sqrt() * phi(n)?;
                Affine {
                    center: occupied_centering_integral(n)?,
                    scale: if norm == Normalization::Marginal {
                        base / 3f64.sqrt()
                    } else {
                        base
                    },
                }
            }
        },
    };
    Ok(out)
}

pub fn standardize(stat: Statistic, n: f64, raw: f64, norm: Normalization) -> Result<f64> {
    Ok(affine(stat, n, norm)?.apply(raw))
}

/// Covariance of the limit of `((L_{n,r})_{r ≤ j}, L_n, D_n)` under
/// [`Normalization::Joint`].
pub fn limit_covariance(j: usize) -> Matrix {
    let c = critical_constants();
    let a2 = c.a2;
    let (li, di) = (j, j + 1);
    Matrix::from_fn(j + 2, |p, q| {
        let (p, q) = if p <= q { (p, q) } else { (q, p) };
        match (p, q) {
            (p, q) if q < j => {
                let (r, s) = ((p + 1) as f64, (q + 1) as f64);
                a2 / (r * s) + if p == q { 1.0 / (c.m1 * r) } else { 0.0 }
            }
            (p, q) if p < j && q == li => a2 / (2.0 * (p + 1) as f64),
            (p, q) if p < j && q == di => a2 / (p + 1) as f64,
            (p, q) if p == li && q == li => a2 / 3.0,
            (p, q) if p == li && q == di => a2 / 2.0,
            _ => a2,
        }
    })
}

/// The joint Gaussian limit with its covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitModel {
    pub j: usize,
    pub constants: CriticalConstants,
    pub covariance: Matrix,
}

impl LimitModel {
    pub fn new(j: usize) -> Self {
        Self {
            j,
            constants: critical_constants(),
            covariance: limit_covariance(j),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        let mut v: Vec<String> = (1..=self.j).map(|r| format!("L_{r}")).collect();
        v.push("L".into());
        v.push("D".into());
        v
    }

    pub fn correlation_l_d(&self) -> f64 {
        let (l, d) = (self.j, self.j + 1);
        self.covariance.get(l, d) / (self.covariance.get(l, l) * self.covariance.get(d, d)).sqrt()
    }
}

/// One draw of `(X_1, …, X_j, L, D)` from the joint limit.
pub fn sample_limit_vector<R: Rng + ?Sized>(j: usize, rng: &mut R) -> Vec<f64> {
    let c = critical_constants();
    let a = c.a2.sqrt();
    let z: f64 = rng.sample(StandardNormal);
    let z_perp: f64 = rng.sample(StandardNormal);
    let mut out = Vec::with_capacity(j + 2);
    for r in 1..=j {
        let zr: f64 = rng.sample(StandardNormal);
        let r = r as f64;
        out.push(a * z / r + zr / (c.m1 * r).sqrt());
    }
    out.push(a * (0.5 * z + z_perp * (1.0 / 12.0f64).sqrt()));
    out.push(a * z);
    out
}

/// Covariance of `(β ∫₀¹ W(1-u) u^{β-1} du, W(1))` for a regular-variation
/// index `β > 0`, the first entry by double quadrature of
/// `β² ∫∫ min(1-u, 1-v) (uv)^{β-1} du dv`.
pub fn general_limit_covariance(beta: f64) -> Result<Matrix> {
    if !(beta > 0.0) || !beta.is_finite() {
        return domain("general_limit_covariance", format!("beta = {beta} must be positive"));
    }
    // inner integral over v for fixed u, split at v = u where min() kinks
    let inner = |u: f64| -> f64 {
        let below = quad::tanh_sinh(|v: f64| (1.0 - u) * v.powf(beta - 1.0), 0.0, u, 1e-12);
        let above = quad::tanh_sinh(|v: f64| (1.0 - v) * v.powf(beta - 1.0), u, 1.0, 1e-12);
        u.powf(beta - 1.0) * (below + above)
    };
    let var = beta * beta * quad::tanh_sinh(inner, 0.0, 1.0, 1e-10);
    let cov = beta * quad::tanh_sinh(|u: f64| (1.0 - u) * u.powf(beta - 1.0), 0.0, 1.0, 1e-12);
    Ok(Matrix::from_fn(2, |i, j| match (i, j) {
        (0, 0) => var,
        (1, 1) => 1.0,
        _ => cov,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn constants() {
        let c = critical_constants();
        assert!((c.m1 - 1.644_934_066_8).abs() < 1e-10);
        assert!((c.m2 - 2.404_113_806_3).abs() < 1e-10);
        assert!((c.a2 - 0.540_144).abs() < 1e-5);
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((c.m1 - pi2 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn centering_points_map_to_zero() {
        let n = 1e6;
        let l = f64::ln(n);
        let c = critical_constants();
        for norm in [Normalization::Marginal, Normalization::Brownian, Normalization::Joint] {
            let z = standardize(Statistic::EdgeHeight, n, l * l / (2.0 * c.m1), norm).unwrap();
            assert!(z.abs() < 1e-12);
            let z = standardize(Statistic::TimeHeight, n, l / c.m1, norm).unwrap();
            assert!(z.abs() < 1e-12);
            let z = standardize(Statistic::Decrement(2), n, l / (2.0 * c.m1), norm).unwrap();
            assert!(z.abs() < 1e-12);
        }
        assert!(standardize(Statistic::EdgeHeight, 1.5, 0.0, Normalization::Joint).is_err());
        assert!(standardize(Statistic::Decrement(0), 10.0, 0.0, Normalization::Joint).is_err());
    }

    #[test]
    fn marginal_and_brownian_edge_scalings_differ_by_root_three() {
        for n in [10.0, 1e3, 1e6] {
            let m = affine(Statistic::EdgeHeight, n, Normalization::Marginal).unwrap();
            let b = affine(Statistic::EdgeHeight, n, Normalization::Brownian).unwrap();
            assert!((b.scale / m.scale - 3f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn integral_centering_of_occupied() {
        let n = 1e6f64;
        let l = n.ln();
        let c = critical_constants();
        let a = affine(Statistic::Occupied, n, Normalization::Brownian).unwrap();
        let gamma = crate::special_fn::EULER_GAMMA;
        assert!((a.center * c.m1 - (l * l / 2.0 + gamma * l)).abs() < 1.0);
    }

    #[test]
    fn general_scaling_approaches_log_power() {
        // (a² log n)^{1/2} Φ(n) against a (log n)^{3/2}
        let c = critical_constants();
        let mut prev = f64::INFINITY;
        for k in [2, 4, 8, 16, 32, 64] {
            let n = 10f64.powi(k);
            let general = affine(Statistic::Occupied, n, Normalization::Brownian).unwrap().scale;
            let joint = c.a2.sqrt() * affine(Statistic::Occupied, n, Normalization::Joint).unwrap().scale;
            let gap = (general / joint - 1.0).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 0.01);
    }

    #[test]
    fn standardize_is_increasing_affine() {
        let stats = [
            Statistic::EdgeHeight,
            Statistic::TimeHeight,
            Statistic::Decrement(1),
            Statistic::Occupied,
            Statistic::OccupiedWith(3),
            Statistic::Absorption,
        ];
        for s in stats {
            for norm in [Normalization::Marginal, Normalization::Brownian, Normalization::Joint] {
                for n in [2.0, 50.0, 1e6] {
                    let f = |x| standardize(s, n, x, norm).unwrap();
                    let (a, b, c) = (f(0.0), f(1.0), f(2.0));
                    assert!(b > a);
                    assert!(((c - b) - (b - a)).abs() < 1e-9 * (b - a).abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn covariance_structure() {
        let c = critical_constants();
        let m0 = limit_covariance(0);
        assert_eq!(m0.dim, 2);
        assert!((m0.get(0, 0) - c.a2 / 3.0).abs() < 1e-15);
        assert!((m0.get(0, 1) - c.a2 / 2.0).abs() < 1e-15);
        assert!((m0.get(1, 1) - c.a2).abs() < 1e-15);
        let corr = LimitModel::new(0).correlation_l_d();
        assert!((corr - 0.866_025_4).abs() < 1e-7);

        let m3 = limit_covariance(3);
        assert!(m3.is_symmetric(0.0));
        for r in 1..=3 {
            let rf = r as f64;
            assert!((m3.get(r - 1, r - 1) - (c.a2 / (rf * rf) + 1.0 / (c.m1 * rf))).abs() < 1e-15);
            assert!((m3.get(r - 1, 3) - c.a2 / (2.0 * rf)).abs() < 1e-15);
            assert!((m3.get(4, r - 1) - c.a2 / rf).abs() < 1e-15);
        }
        for j in 0..8 {
            let ev = limit_covariance(j).symmetric_eigenvalues();
            assert!(ev.iter().all(|&e| e >= -1e-12), "j = {j}: {ev:?}");
        }
    }

    #[test]
    fn jacobi_eigenvalues() {
        let m = Matrix::from_fn(3, |i, j| match (i, j) {
            (0, 0) => 2.0,
            (1, 1) => 3.0,
            (2, 2) => 2.0,
            (0, 2) | (2, 0) => 1.0,
            _ => 0.0,
        });
        let ev = m.symmetric_eigenvalues();
        for (a, b) in ev.iter().zip([1.0, 3.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sampler_marginals() {
        let mut rng = substream(9, 0);
        let reps = 200_000;
        let c = critical_constants();
        let (mut sl, mut sd, mut sll, mut sdd) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..reps {
            let v = sample_limit_vector(0, &mut rng);
            sl += v[0];
            sd += v[1];
            sll += v[0] * v[0];
            sdd += v[1] * v[1];
        }
        let n = reps as f64;
        let var_l = sll / n - (sl / n).powi(2);
        let var_d = sdd / n - (sd / n).powi(2);
        assert!((var_d - c.a2).abs() < 4.0 * c.a2 * (2.0 / n).sqrt());
        assert!((var_l / var_d - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn general_covariance_matches_beta_integrals() {
        // Var = 1/(2β+1), Cov = 1/(β+1) from the Beta integrals
        for beta in [0.5, 1.0, 2.0, 3.5] {
            let m = general_limit_covariance(beta).unwrap();
            assert!((m.get(0, 0) - 1.0 / (2.0 * beta + 1.0)).abs() < 1e-8, "beta = {beta}");
            assert!((m.get(0, 1) - 1.0 / (beta + 1.0)).abs() < 1e-10);
        }
        let one = general_limit_covariance(1.0).unwrap();
        assert!((one.get(0, 0) - 1.0 / 3.0).abs() < 1e-8);
        assert!(general_limit_covariance(0.0).is_err());
    }

    #[test]
    fn statistic_tags_round_trip() {
        for s in [
            Statistic::EdgeHeight,
            Statistic::TimeHeight,
            Statistic::Decrement(4),
            Statistic::Occupied,
            Statistic::OccupiedWith(2),
            Statistic::Absorption,
        ] {
            assert_eq!(Statistic::parse(&s.label()).unwrap(), s);
        }
        assert!(Statistic::parse("Q").is_err());
        assert!(Statistic::parse("L_0").is_err());
    }
}
