//! Runs the validation suite of a JSON config and prints the report table.
//!
//! `cargo run --release --example validation_suite -- configs/bench_critical.json [replicates]`

use std::path::PathBuf;

use agebranch::cli::validation_suite;
use agebranch::config::RunConfig;
use agebranch::report::{write_reports_csv, Summary};
use agebranch::validation::Runner;

fn main() -> agebranch::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/bench_critical.json")
    });
    let mut cfg = RunConfig::load(&path)?;
    if let Some(n) = args.next() {
        cfg.replicates = n.parse().expect("replicates must be an integer");
    }
    let reports = validation_suite(&cfg, &Runner::default())?;
    write_reports_csv(&reports, std::io::stdout())?;
    let s = Summary::new(&reports);
    println!("{}/{} passed, controls ok: {}, all as expected: {}", s.passed, s.total, s.controls_ok, s.all_ok);
    Ok(())
}
