//! The cumulant `u_t f` for the critical binary process against its closed form, and
//! the semigroup property `u_{t+s} f = u_t(u_s f)`.
//!
//! `cargo run --release --example cumulant_semigroup`

use agebranch::solver::{solve_u_with, Quadrature};
use agebranch::{solve_u, BranchingModel, OffspringLaw, ScalarField, SolverGrid};

/// `e^{−u_t θ}` when `α ≡ 1` and offspring are 0 or 2 with probability 1/2.
fn exact(theta: f64, t: f64) -> f64 {
    1.0 - 1.0 / (1.0 / -(-theta).exp_m1() + t / 2.0)
}

fn main() -> agebranch::Result<()> {
    let model = BranchingModel::constant_rate(1.0, OffspringLaw::binary(0.5))?;
    let f = ScalarField::constant(1.0);

    for q in [Quadrature::Rectangle, Quadrature::Trapezoid] {
        let mut errs = Vec::new();
        for dt in [4e-3, 2e-3, 1e-3] {
            let sol = solve_u(&model, &f, &SolverGrid::new(dt, 1.0)?.with_quadrature(q))?;
            errs.push((sol.laplace(1.0, 0.0)? - exact(1.0, 1.0)).abs());
        }
        let order = (errs[1] / errs[2]).log2();
        println!("{q:?}: errors {:.3e} {:.3e} {:.3e}, observed order {order:.3}", errs[0], errs[1], errs[2]);
    }

    let grid = SolverGrid::new(1e-3, 1.0)?;
    let half = solve_u(&model, &f, &SolverGrid::new(1e-3, 0.5)?)?;
    let composed = solve_u_with(&model, move |x| half.eval(0.5, x).expect("within horizon"), &SolverGrid::new(1e-3, 0.5)?)?;
    let direct = solve_u(&model, &f, &grid)?;
    for x in [0.0, 0.7, 2.0] {
        println!(
            "x = {x}: u_1 f = {:.10}, u_0.5(u_0.5 f) = {:.10}",
            direct.eval(1.0, x)?,
            composed.eval(0.5, x)?
        );
    }
    println!("u_1 1 = {:.8} (exact {:.8})", direct.eval(1.0, 0.0)?, -exact(1.0, 1.0).ln());
    Ok(())
}
