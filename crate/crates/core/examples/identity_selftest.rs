//! Quadrature self-test on
//! `∫₀^∞ (1 − e^{−a n e^{−cs}}) ds = c⁻¹ ∫₀^{a n} (1 − e^{−z}) z⁻¹ dz`.
//!
//! `cargo run --example identity_selftest`

use agebranch::solver::{ein, elementary_identity_check};

fn main() -> agebranch::Result<()> {
    let mut worst: f64 = 0.0;
    for a in [0.1, 1.0, 10.0] {
        for c in [0.5, 1.0, 2.0] {
            for n in [1, 10, 100] {
                let (lhs, rhs) = elementary_identity_check(a, c, n)?;
                worst = worst.max((lhs - rhs).abs());
                println!("a = {a:>4}, c = {c}, n = {n:>3}: {lhs:.12} {rhs:.12}  Ein/c = {:.12}", ein(a * n as f64) / c);
            }
        }
    }
    println!("largest difference {worst:.2e}");
    Ok(())
}
