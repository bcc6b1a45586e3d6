//! Age measures: aging, the α-weighted inverse used to pick the dying particle, and
//! the metric `ρ(ν₁, ν₂) = ∫ e^{-x} |ν₁(x) − ν₂(x)| dx`.
//!
//! `cargo run --example metric_and_measures`

use agebranch::{AgeMeasure, ScalarField};

fn main() -> agebranch::Result<()> {
    let nu = AgeMeasure::from_ages(vec![0.5, 0.0, 2.0, 0.5])?;
    println!("ages {:?}, mass {}", nu.ages(), nu.total_mass());
    println!("ν[0, 0.5] = {}", nu.dist_fn(0.5));

    let alpha = ScalarField::ramp(0.0, 2.0, 1.0, 3.0);
    let total = nu.integrate(&alpha);
    for y in [0.0, 0.3, 0.6, 0.9] {
        println!("α-weighted inverse at {y}: age {}", nu.alpha_weighted_inverse(&alpha, y)?);
    }
    println!("⟨ν, α⟩ = {total}, ∫_[0,0.5] α dν = {}", nu.alpha_dist_fn(&alpha, 0.5));

    let older = nu.shift(1.0)?;
    println!("after one time unit: {:?}", older.ages());
    println!("ρ(ν, ν shifted by 1) = {:.6}", nu.rho_distance(&older));
    println!("ρ(δ_0, ∅) = {:.6}", AgeMeasure::repeated(0.0, 1)?.rho_distance(&AgeMeasure::empty()));
    Ok(())
}
