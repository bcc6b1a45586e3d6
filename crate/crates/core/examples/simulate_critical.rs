//! Exact simulation of the critical binary process: extinction frequency, mean mass
//! and the event log of one trajectory.
//!
//! `cargo run --release --example simulate_critical`

use agebranch::sim::{replay_statistics, simulate_replicate, write_event_csv, Termination};
use agebranch::{AgeMeasure, BranchingModel, OffspringLaw, ScalarField, SimConfig};

fn main() -> agebranch::Result<()> {
    let model = BranchingModel::constant_rate(1.0, OffspringLaw::binary(0.5))?;
    let cfg = SimConfig::new(model, AgeMeasure::repeated(0.0, 1)?, 2.0)
        .with_uniform_snapshots(4)
        .with_seed(42);
    cfg.validate()?;

    let n = 20_000;
    let (mut extinct, mut mass) = (0usize, 0.0);
    for r in 0..n {
        let tr = simulate_replicate(&cfg, r)?;
        extinct += (tr.terminated_by == Termination::Extinction) as usize;
        mass += tr.final_state.total_mass() as f64;
    }
    println!("P(X_2 = 0) ≈ {:.4}  (exact 0.5)", extinct as f64 / n as f64);
    println!("E X_2(∞)  ≈ {:.4}  (exact 1)", mass / n as f64);

    let tr = simulate_replicate(&cfg.clone().recording_events(), 7)?;
    let stats = replay_statistics(&tr, &ScalarField::constant(1.0));
    for (t, (m, k)) in stats.times.iter().zip(stats.values.iter().zip(&stats.branch_counts)) {
        println!("t = {t:.1}: mass {m}, events so far {k}");
    }
    let mut csv = Vec::new();
    write_event_csv(&tr, &mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}
