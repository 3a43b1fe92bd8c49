//! Marcum Q against direct quadrature of the Rician integral.

use umac_core::marcum::{marcum_p1, marcum_q1};

/// `I0(z) exp(-z) = (1/pi) int_0^pi exp(z (cos th - 1)) dth`; the trapezoid
/// rule is spectrally accurate for this periodic integrand.
fn i0_scaled(z: f64) -> f64 {
    let n = 400;
    let h = std::f64::consts::PI / n as f64;
    let f = |th: f64| (z * (th.cos() - 1.0)).exp();
    let mut s = 0.5 * (f(0.0) + f(std::f64::consts::PI));
    for i in 1..n {
        s += f(i as f64 * h);
    }
    s * h / std::f64::consts::PI
}

fn density(a: f64, t: f64) -> f64 {
    t * (-0.5 * (t - a) * (t - a)).exp() * i0_scaled(a * t)
}

/// Composite Simpson rule with step close to `h`.
fn simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, h: f64) -> f64 {
    let n = (((hi - lo) / h).ceil() as usize).max(1) * 2;
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `int_b^inf` of the Rician density, truncated where it is negligible.
fn q1_quadrature(a: f64, b: f64) -> f64 {
    let hi = a + 40.0;
    let lo = b.max(a - 40.0);
    if lo >= hi {
        return 0.0;
    }
    simpson(&|t| density(a, t), lo, hi, 2.5e-3)
}

#[test]
fn q1_two_three_matches_quadrature() {
    let q = marcum_q1(2.0, 3.0).unwrap();
    let r = q1_quadrature(2.0, 3.0);
    assert!((q - r).abs() < 1e-10, "{q} vs {r}");
}

#[test]
fn grid_matches_quadrature() {
    for a in [0.1, 0.5, 1.0, 3.0, 7.5, 12.0, 25.0, 50.0] {
        for b in [0.2, 1.0, 2.5, 6.0, 11.0, 24.0, 49.0] {
            let q = marcum_q1(a, b).unwrap();
            let r = q1_quadrature(a, b);
            assert!((q - r).abs() < 1e-10, "Q1({a},{b}) = {q}, quadrature {r}");
            let p = marcum_p1(a, b).unwrap();
            assert!((p - (1.0 - r)).abs() < 1e-10, "P1({a},{b}) = {p}, quadrature {}", 1.0 - r);
        }
    }
}

#[test]
fn lower_tail_matches_quadrature_of_cdf() {
    // Small lower tails are checked relative to a direct integral from 0.
    for (a, b) in [(8.0, 2.0), (15.0, 6.0), (30.0, 20.0)] {
        let direct = simpson(&|t| density(a, t), 0.0, b, 5e-4);
        let p = marcum_p1(a, b).unwrap();
        assert!((p / direct - 1.0).abs() < 1e-7, "P1({a},{b}) = {p}, quadrature {direct}");
    }
}
