//! Oracles kept independent of the library's own numerics.
#![allow(dead_code)]

/// Adaptive Simpson on `[a, b]`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `∫_0^t (1 - e^{-y}) / y dy`.
pub fn phi_oracle(t: f64) -> f64 {
    simpson(&|y: f64| if y == 0.0 { 1.0 } else { -(-y).exp_m1() / y }, 0.0, t, 1e-14)
}

/// `Σ_{i≤m} 1/i` summed from the small end.
pub fn harmonic_oracle(m: usize) -> f64 {
    (1..=m).rev().map(|i| 1.0 / i as f64).sum()
}

/// `E[D_n]` and `E[D_n²]` for the tree-view chain by the first-step
/// recursion, in floating point.
pub fn hold_moments_oracle(n_max: usize) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); n_max + 1];
    for n in 2..=n_max {
        let h = harmonic_oracle(n - 1);
        let (hold1, hold2) = (1.0 / h, 2.0 / (h * h));
        let (mut m1, mut m2) = (0.0, 0.0);
        for k in 1..n {
            let p = 1.0 / (k as f64 * h);
            let (r1, r2) = out[n - k];
            m1 += p * r1;
            m2 += p * r2;
        }
        out[n] = (hold1 + m1, hold2 + 2.0 * hold1 * m1 + m2);
    }
    out
}
