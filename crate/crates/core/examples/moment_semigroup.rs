//! First moments `π_t f`: the pure-death closed form and an age-dependent model
//! checked against simulation.
//!
//! `cargo run --release --example moment_semigroup`

use agebranch::validation::{compare_mean, Runner};
use agebranch::{solve_pi, AgeMeasure, BranchingModel, OffspringLaw, ScalarField, SimConfig, SolverGrid};

fn main() -> agebranch::Result<()> {
    let grid = SolverGrid::new(1e-3, 1.0)?;
    let one = ScalarField::constant(1.0);

    let death = BranchingModel::constant_rate(1.0, OffspringLaw::pure_death())?;
    let pi = solve_pi(&death, &one, &grid)?;
    println!("pure death: π_1 1 = {:.12}, e^-1 = {:.12}", pi.eval(1.0, 0.0)?, (-1.0f64).exp());

    // hazard rising with age, offspring law switching at age 1
    let alpha = ScalarField::ramp(0.0, 2.0, 0.5, 2.0);
    let offspring = OffspringLaw::Regimes {
        thresholds: vec![1.0],
        laws: vec![
            OffspringLaw::finite(vec![0.3, 0.2, 0.5]),
            OffspringLaw::finite(vec![0.6, 0.1, 0.3]),
        ],
    };
    let model = BranchingModel::new(alpha, offspring)?;
    let sigma = AgeMeasure::from_ages(vec![0.0, 0.5, 1.5])?;
    let pi = solve_pi(&model, &one, &grid)?;
    println!("age dependent: ⟨σ, π_1 1⟩ = {:.6}", pi.integrate(&sigma, 1.0)?);

    let cfg = SimConfig::new(model, sigma, 1.0).with_seed(3);
    let report = compare_mean(&cfg, &one, 1.0, 20_000, &grid, &Runner::default())?;
    println!(
        "Monte Carlo {:.4} ± {:.4}, z = {:.2} -> {}",
        report.mc.value,
        report.mc.std_error,
        report.z,
        report.verdict()
    );
    Ok(())
}
