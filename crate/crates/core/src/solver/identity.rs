//! Self-test of the quadrature stack on
//! `∫₀^∞ (1 − e^{−a n e^{−cs}}) ds = c⁻¹ ∫₀^{a n} (1 − e^{−z}) z⁻¹ dz`.

use crate::error::{Error, Result};
use crate::quadrature::adaptive;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `Ein(x) = ∫₀ˣ (1 − e^{−z})/z dz`: alternating series for `x ≤ 4`,
/// `ln x + γ + E₁(x)` with a continued fraction for `E₁` beyond.
pub fn ein(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x <= 4.0 {
        let mut term = x; // x^k / k!
        let mut sum = 0.0;
        let mut k = 1.0;
        loop {
            let add = term / k;
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                return sum;
            }
            term *= -x / (k + 1.0);
            k += 1.0;
        }
    }
    x.ln() + EULER_GAMMA + e1_continued_fraction(x)
}

/// `E₁(x)` for `x > 1` by modified Lentz on the even contraction.
fn e1_continued_fraction(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
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
    h * (-x).exp()
}

/// Returns `(lhs, rhs)`, both by adaptive Gauss–Kronrod quadrature.
pub fn elementary_identity_check(a: f64, c: f64, group_mass: u64) -> Result<(f64, f64)> {
    for (what, v) in [("a", a), ("c", c)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain {
                what,
                value: v,
                domain: "(0, inf)",
            });
        }
    }
    if group_mass == 0 {
        return Err(Error::Domain {
            what: "group mass",
            value: 0.0,
            domain: "{1, 2, ...}",
        });
    }
    let an = a * group_mass as f64;
    // beyond s_max the integrand is below 1e-20; its tail integral is added exactly to first order
    let s_max = ((an * 1e20).ln() / c).max(0.0);
    let lhs_f = |s: f64| -(-an * (-c * s).exp()).exp_m1();
    let (body, _) = adaptive(&lhs_f, 0.0, s_max, 1e-14);
    let lhs = body + an * (-c * s_max).exp() / c;
    let rhs_f = |z: f64| if z == 0.0 { 1.0 } else { -(-z).exp_m1() / z };
    let (rhs_int, _) = adaptive(&rhs_f, 0.0, an, 1e-14);
    Ok((lhs, rhs_int / c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ein_reference_values() {
        assert!((ein(1.0) - 0.796_599_599_297_053_1).abs() < 1e-15);
        // continuity across the switch point
        assert!((ein(4.0) - ein(4.0 + 1e-12)).abs() < 1e-11);
        let (q, _) = adaptive(&|z: f64| -(-z).exp_m1() / z, 0.0, 10.0, 1e-14);
        assert!((ein(10.0) - q).abs() < 1e-12);
    }

    #[test]
    fn unit_parameters() {
        let (l, r) = elementary_identity_check(1.0, 1.0, 1).unwrap();
        assert!((l - 0.796_600).abs() < 1e-6);
        assert!((l - r).abs() < 1e-12);
    }

    #[test]
    fn small_a_and_rate_scaling() {
        let (l, r) = elementary_identity_check(1e-9, 1.0, 1).unwrap();
        assert!(l < 1e-8 && r < 1e-8);
        let (l1, _) = elementary_identity_check(0.5, 1.0, 4).unwrap();
        let (l2, _) = elementary_identity_check(0.5, 2.0, 4).unwrap();
        assert!((l2 - l1 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(elementary_identity_check(0.0, 1.0, 1).is_err());
        assert!(elementary_identity_check(1.0, -1.0, 1).is_err());
        assert!(elementary_identity_check(1.0, 1.0, 0).is_err());
    }
}
