//! Lattice zeta sums.
//!
//! Every infinite Fourier series in this crate reduces to sums of the form
//!
//! ```text
//! Z(s, a, L, θ) = Σ_{n ≥ 0} (a + n L)^{-s} e^{i n θ},   s > 1, a > 0, L > 0.
//! ```
//!
//! For θ = 0 this is a scaled Hurwitz zeta value, evaluated by Euler–Maclaurin
//! summation. For θ ≠ 0 the Mellin representation
//!
//! ```text
//! Z = Γ(s)^{-1} ∫_0^∞ t^{s-1} e^{-a t} / (1 - e^{iθ} e^{-L t}) dt
//! ```
//! is integrated with the trapezoidal rule after the substitution t = e^u.
//! The poles of the integrand sit at Im u = ±π/2 no matter how close e^{iθ}
//! is to 1, so the rule converges geometrically with a θ-independent rate.

use num_complex::Complex64;

/// Bernoulli numbers B_2, B_4, ..., B_20.
const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Trapezoidal step in the logarithmic variable.
const QUAD_STEP: f64 = 0.125;
const QUAD_REL_EPS: f64 = 1e-18;
const QUAD_MAX_NODES: usize = 200_000;

/// Hurwitz zeta function ζ(s, a) = Σ_{n ≥ 0} (n + a)^{-s} for s > 1, a > 0.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    debug_assert!(s > 1.0 && a > 0.0);
    let order = BERNOULLI_EVEN.len();
    let shift = (2.0 * (s + 2.0 * order as f64)).max(24.0);
    let mut head = 0.0;
    let mut x = a;
    while x < shift {
        head += x.powf(-s);
        x += 1.0;
    }
    let xs = x.powf(-s);
    let mut tail = x * xs / (s - 1.0) + 0.5 * xs;
    // Σ_k B_{2k}/(2k)! · s(s+1)…(s+2k-2) · x^{-s-2k+1}
    let mut rising = s;
    let mut power = xs / x;
    let mut factorial = 2.0;
    let x2 = x * x;
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        let k = (k + 1) as f64;
        tail += b / factorial * rising * power;
        rising *= (s + 2.0 * k - 1.0) * (s + 2.0 * k);
        power /= x2;
        factorial *= (2.0 * k + 1.0) * (2.0 * k + 2.0);
    }
    head + tail
}

/// Riemann zeta function for s > 1.
pub fn riemann_zeta(s: f64) -> f64 {
    hurwitz_zeta(s, 1.0)
}

/// Σ_{n ≥ 0} (a + n·step)^{-s}.
pub fn lattice_zeta(s: f64, a: f64, step: f64) -> f64 {
    step.powf(-s) * hurwitz_zeta(s, a / step)
}

/// Σ_{n ≥ 0} (a + n·step)^{-s} e^{i n θ} for s > 1, a > 0, step > 0.
pub fn periodic_zeta(s: f64, a: f64, step: f64, theta: f64) -> Complex64 {
    debug_assert!(s > 1.0 && a > 0.0 && step > 0.0);
    if theta == 0.0 {
        return Complex64::new(lattice_zeta(s, a, step), 0.0);
    }
    let (sin_t, cos_t) = theta.sin_cos();
    let z = Complex64::new(cos_t, sin_t);
    let half = (0.5 * theta).sin();
    let one_minus_z = Complex64::new(2.0 * half * half, -sin_t);

    let integrand = |u: f64| -> Complex64 {
        let t = u.exp();
        let num = (u * s - a * t).exp();
        let den = one_minus_z - z * (-step * t).exp_m1();
        num / den
    };

    let peak = (s / a).ln();
    // Below this abscissa the denominator is essentially 1 - z.
    let transition = (one_minus_z.norm() / step).ln().min(peak) - 2.0;

    let mut sum = Complex64::new(0.0, 0.0);
    let mut count = 0usize;
    // Right of the peak: double-exponential decay.
    let mut k = 0usize;
    loop {
        let u = peak + QUAD_STEP * k as f64;
        let v = integrand(u);
        sum += v;
        count += 1;
        if k >= 8 && v.norm() < QUAD_REL_EPS * sum.norm() {
            break;
        }
        if count > QUAD_MAX_NODES {
            break;
        }
        k += 1;
    }
    // Left of the peak: geometric decay at rate s once past the transition.
    let geometric = 1.0 / (1.0 - (-s * QUAD_STEP).exp());
    let mut k = 1usize;
    loop {
        let u = peak - QUAD_STEP * k as f64;
        let v = integrand(u);
        sum += v;
        count += 1;
        if u < transition && v.norm() * geometric < QUAD_REL_EPS * sum.norm() {
            break;
        }
        if count > QUAD_MAX_NODES {
            break;
        }
        k += 1;
    }
    sum / gamma_trapezoid(s)
}

/// Γ(s) / QUAD_STEP computed on the same logarithmic trapezoidal grid as
/// [`periodic_zeta`], so the step factor cancels.
fn gamma_trapezoid(s: f64) -> f64 {
    let peak = s.ln();
    let f = |u: f64| (u * s - u.exp()).exp();
    let mut sum = 0.0;
    let mut k = 0usize;
    loop {
        let v = f(peak + QUAD_STEP * k as f64);
        sum += v;
        if k >= 8 && v < QUAD_REL_EPS * sum {
            break;
        }
        k += 1;
    }
    let geometric = 1.0 / (1.0 - (-s * QUAD_STEP).exp());
    let mut k = 1usize;
    loop {
        let v = f(peak - QUAD_STEP * k as f64);
        sum += v;
        if v * geometric < QUAD_REL_EPS * sum {
            break;
        }
        k += 1;
    }
    sum
}

/// Bernoulli polynomial B_n(t) for n ∈ {2, 4, 6, 8}.
pub fn bernoulli_polynomial(n: u32, t: f64) -> Option<f64> {
    // Coefficients from t^n down to t^0.
    let coeffs: &[f64] = match n {
        2 => &[1.0, -1.0, 1.0 / 6.0],
        4 => &[1.0, -2.0, 1.0, 0.0, -1.0 / 30.0],
        6 => &[1.0, -3.0, 2.5, 0.0, -0.5, 0.0, 1.0 / 42.0],
        8 => &[
            1.0,
            -4.0,
            14.0 / 3.0,
            0.0,
            -7.0 / 3.0,
            0.0,
            2.0 / 3.0,
            0.0,
            -1.0 / 30.0,
        ],
        _ => return None,
    };
    Some(coeffs.iter().fold(0.0, |acc, c| acc * t + c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn brute(s: f64, a: f64, step: f64, theta: f64, n: usize) -> Complex64 {
        (0..n)
            .map(|k| Complex64::from_polar((a + k as f64 * step).powf(-s), k as f64 * theta))
            .sum()
    }

    #[test]
    fn zeta_closed_forms() {
        assert!((riemann_zeta(2.0) - PI * PI / 6.0).abs() < 1e-15);
        assert!((riemann_zeta(4.0) - PI.powi(4) / 90.0).abs() < 1e-15);
        // ζ(2, 1/2) = 3ζ(2)
        assert!((hurwitz_zeta(2.0, 0.5) - PI * PI / 2.0).abs() < 1e-14);
        // Σ (1 + 2n)^{-2} = π²/8
        assert!((lattice_zeta(2.0, 1.0, 2.0) - PI * PI / 8.0).abs() < 1e-15);
    }

    #[test]
    fn hurwitz_near_one() {
        // ζ(s) ~ 1/(s-1) + γ
        let s = 1.0 + 1e-6;
        let v = riemann_zeta(s);
        assert!((v - 1.0 / (s - 1.0) - 0.577_215_664_901_532_9).abs() < 1e-6);
    }

    #[test]
    fn periodic_matches_brute_force_for_fast_decay() {
        for &(s, a, step) in &[(6.0, 1.0, 1.0), (5.5, 2.0, 3.0), (8.0, 0.3, 7.0)] {
            for &theta in &[0.3, -1.7, 2.9, 1e-3, 1e-7, 6.0] {
                let expect = brute(s, a, step, theta, 200_000);
                let got = periodic_zeta(s, a, step, theta);
                assert!(
                    (got - expect).norm() < 1e-13 * expect.norm().max(1.0),
                    "s={s} a={a} step={step} θ={theta}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn periodic_matches_bernoulli_series() {
        // Σ_{j≥1} cos(jx)/j² = π²/6 - πx/2 + x²/4 on [0, 2π]
        // Σ_{j≥1} cos(jx)/j⁴ from B_4.
        for i in 1..50 {
            let x = 2.0 * PI * i as f64 / 50.0;
            let v = (Complex64::from_polar(1.0, x) * periodic_zeta(2.0, 1.0, 1.0, x)).re;
            let expect = PI * PI / 6.0 - PI * x / 2.0 + x * x / 4.0;
            assert!((v - expect).abs() < 1e-13, "x={x}: {v} vs {expect}");
            let v4 = (Complex64::from_polar(1.0, x) * periodic_zeta(4.0, 1.0, 1.0, x)).re;
            let t = x / (2.0 * PI);
            let expect4 = -(2.0 * PI).powi(4) * bernoulli_polynomial(4, t).unwrap() / 48.0;
            assert!((v4 - expect4).abs() < 1e-13, "x={x}: {v4} vs {expect4}");
        }
    }

    #[test]
    fn periodic_continuous_at_zero() {
        let at_zero = periodic_zeta(1.5, 1.0, 1.0, 0.0);
        let near = periodic_zeta(1.5, 1.0, 1.0, 1e-12);
        // slope of Li_{3/2}(e^{iθ}) blows up like θ^{1/2}
        assert!((at_zero - near).norm() < 1e-5);
    }

    #[test]
    fn bernoulli_values() {
        assert_eq!(bernoulli_polynomial(2, 0.0), Some(1.0 / 6.0));
        assert!((bernoulli_polynomial(8, 0.5).unwrap() - 127.0 / 3840.0).abs() < 1e-16);
        assert!((bernoulli_polynomial(6, 1.0).unwrap() - 1.0 / 42.0).abs() < 1e-15);
        assert_eq!(bernoulli_polynomial(3, 0.2), None);
    }
}
