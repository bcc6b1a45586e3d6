//! Pure death with Poisson immigration (an M/M/∞ queue): the Laplace functional
//! over time, its stationary limit and a long-run simulation.
//!
//! `cargo run --release --example immigration_stationary`

use agebranch::solver::{psi_integral, stationary_laplace};
use agebranch::validation::{estimate_laplace, estimate_mass_mean, Runner};
use agebranch::{AgeMeasure, BranchingModel, ImmigrationMechanism, OffspringLaw, ScalarField, SimConfig, SolverGrid};

fn main() -> agebranch::Result<()> {
    let model = BranchingModel::constant_rate(1.0, OffspringLaw::pure_death())?;
    let imm = ImmigrationMechanism::single_immigrants(3.0, 0.0)?;
    let f = ScalarField::constant(1.0);
    let grid = SolverGrid::new(0.01, 20.0)?;

    for t in [1.0, 2.0, 5.0, 20.0] {
        let psi = psi_integral(&model, &imm, &f, t, &grid)?;
        println!("t = {t:>4}: E e^(-X_t(1)) = {:.8}", (-psi).exp());
    }
    let st = stationary_laplace(&model, &imm, &f, 1e-9)?;
    let exact = (-3.0 * (1.0 - (-1.0f64).exp())).exp();
    println!(
        "stationary {:.10} (exact {:.10}), tail bound {:.1e}, horizon {}",
        st.value, exact, st.tail_bound, st.horizon
    );

    let cfg = SimConfig::new(model, AgeMeasure::empty(), 20.0)
        .with_immigration(imm)
        .with_seed(9);
    let runner = Runner::default();
    let mc = estimate_laplace(&cfg, &f, 20.0, 10_000, &runner)?;
    let mass = estimate_mass_mean(&cfg, &f, 20.0, 10_000, &runner)?;
    println!("simulated at t = 20: {:.4} ± {:.4}", mc.value, mc.std_error);
    println!("mean population {:.3} ± {:.3} (stationary mean 3)", mass.value, mass.std_error);
    Ok(())
}
