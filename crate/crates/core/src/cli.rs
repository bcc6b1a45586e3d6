//! Command-line front end. Every command computes its outputs in memory first and
//! writes them only once the whole run has succeeded.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{CheckName, RunConfig};
use crate::error::{Error, Result};
use crate::report::{write_json, write_reports_csv, Summary};
use crate::sim::{simulate_replicate, write_event_csv, Termination};
use crate::solver::{
    check_bounds, elementary_identity_check, ergodicity_check, immigration_mean_of, psi_integral_of,
    solve_pi, solve_u, stationary_laplace, Ergodicity, ErgodicityReport, StationaryValue,
};
use crate::validation::{
    bound_suite, compare_extinction, compare_laplace, compare_mean, ergodic_convergence,
    martingale_residual_with, ComparisonReport, ErgodicStudy, McEstimate, Runner,
};

/// Tolerance of the quadrature self-test.
pub const IDENTITY_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "agebranch", version, about = "Age-structured branching processes: simulation, renewal-equation solvers and validation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate replicates; write snapshot statistics and the event log of replicate 0.
    Simulate(RunArgs),
    /// Solve for the cumulant u_t f; write the boundary trace and a table.
    SolveU(RunArgs),
    /// Solve for the first moment π_t f; write the boundary trace and a table.
    SolvePi(RunArgs),
    /// Run the Monte Carlo validation suite against the solvers.
    Validate(RunArgs),
    /// Classify ergodicity and, when ergodic, run the convergence study.
    Ergodic(RunArgs),
    /// Stationary Laplace functional for every configured test function.
    Stationary(RunArgs),
    /// Quadrature self-test on a 3×3×3 parameter grid.
    IdentityCheck(IdentityArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long = "t-end", visible_alias = "t")]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub parallelism: usize,
    /// Exit nonzero if any check fails.
    #[arg(long)]
    pub ci: bool,
}

#[derive(Debug, Args)]
pub struct IdentityArgs {
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub ci: bool,
}

/// Output files, kept in memory until the run is complete.
struct Outputs {
    dir: PathBuf,
    files: Vec<(&'static str, Vec<u8>)>,
}

impl Outputs {
    fn new(dir: PathBuf) -> Self {
        Self { dir, files: Vec::new() }
    }

    fn add(&mut self, name: &'static str, bytes: Vec<u8>) {
        self.files.push((name, bytes));
    }

    fn json<T: Serialize>(&mut self, name: &'static str, value: &T) -> Result<()> {
        let mut buf = Vec::new();
        write_json(value, &mut buf)?;
        self.add(name, buf);
        Ok(())
    }

    fn reports(&mut self, reports: &[ComparisonReport]) -> Result<()> {
        let mut buf = Vec::new();
        write_reports_csv(reports, &mut buf)?;
        self.add("reports.csv", buf);
        Ok(())
    }

    fn commit(self) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(self.dir.join(name), bytes)?;
        }
        Ok(self.dir)
    }
}

/// Outcome of a successful run: whether every check came out as expected.
struct Outcome {
    outputs: Outputs,
    ok: bool,
    message: String,
}

/// Parses `argv` and runs; returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let ci = match &cli.command {
        Command::IdentityCheck(a) => a.ci,
        Command::Simulate(a)
        | Command::SolveU(a)
        | Command::SolvePi(a)
        | Command::Validate(a)
        | Command::Ergodic(a)
        | Command::Stationary(a) => a.ci,
    };
    match execute(cli.command).and_then(|o| {
        let dir = o.outputs.commit()?;
        Ok((dir, o.ok, o.message))
    }) {
        Ok((dir, ok, message)) => {
            println!("{message}");
            println!("outputs written to {}", dir.display());
            if ci && !ok {
                eprintln!("error: at least one check failed");
                1
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn execute(command: Command) -> Result<Outcome> {
    match command {
        Command::IdentityCheck(a) => identity_check(&a.out),
        Command::Simulate(a) => with_config(&a, simulate),
        Command::SolveU(a) => with_config(&a, |c, o, _| solve(c, o, false)),
        Command::SolvePi(a) => with_config(&a, |c, o, _| solve(c, o, true)),
        Command::Validate(a) => with_config(&a, validate),
        Command::Ergodic(a) => with_config(&a, ergodic),
        Command::Stationary(a) => with_config(&a, |c, o, _| stationary(c, o)),
    }
}

fn with_config(
    args: &RunArgs,
    body: impl FnOnce(&RunConfig, &mut Outputs, &Runner) -> Result<(bool, String)>,
) -> Result<Outcome> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.replicates {
        cfg.replicates = n;
    }
    if let Some(t) = args.t_end {
        cfg.t_end = t;
    }
    if let Some(dt) = args.dt {
        cfg.solver.dt = dt;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    let runner = Runner::new(args.parallelism)?;
    let mut outputs = Outputs::new(cfg.output_dir.clone());
    let (ok, message) = body(&cfg, &mut outputs, &runner)?;
    outputs.json("config.json", &cfg)?;
    Ok(Outcome { outputs, ok, message })
}

#[derive(Serialize)]
struct SnapshotStats {
    time: f64,
    mass: McEstimate,
    f_integral: McEstimate,
}

#[derive(Serialize)]
struct SimulateSummary {
    replicates: usize,
    seed: u64,
    ended_at_t_end: usize,
    extinct: usize,
    event_capped: usize,
    snapshots: Vec<SnapshotStats>,
}

fn simulate(cfg: &RunConfig, out: &mut Outputs, runner: &Runner) -> Result<(bool, String)> {
    let sim = cfg.sim_config();
    let f = cfg.f();
    let rows = runner.map(cfg.replicates, |r| {
        let tr = simulate_replicate(&sim, r)?;
        let mut csv = String::new();
        let stats: Vec<(f64, f64)> = tr
            .snapshots
            .iter()
            .map(|s| {
                let (m, fi) = (s.state.total_mass() as f64, s.state.integrate(f));
                let _ = writeln!(
                    csv,
                    "{r},{},{m},{fi},{},{},{}",
                    s.time, s.branch_events, s.immigration_events, s.running_max
                );
                (m, fi)
            })
            .collect();
        Ok((tr.terminated_by, csv, stats))
    })?;
    let mut csv = String::from("replicate,time,mass,f_integral,branch_events,immigration_events,running_max\n");
    for (_, part, _) in &rows {
        csv.push_str(part);
    }
    out.add("snapshots.csv", csv.into_bytes());

    let mut events = Vec::new();
    let first = simulate_replicate(&sim.clone().recording_events(), 0)?;
    write_event_csv(&first, &mut events)?;
    out.add("events.csv", events);

    let count = |t: Termination| rows.iter().filter(|r| r.0 == t).count();
    let complete: Vec<&Vec<(f64, f64)>> = rows
        .iter()
        .filter(|r| r.0 != Termination::EventCap)
        .map(|r| &r.2)
        .collect();
    let mut snapshots = Vec::new();
    for (i, &time) in sim.snapshot_times.iter().enumerate() {
        let col = |k: usize| -> Vec<f64> {
            complete
                .iter()
                .map(|s| if k == 0 { s[i].0 } else { s[i].1 })
                .collect()
        };
        let excluded = cfg.replicates - complete.len();
        if complete.len() >= 2 {
            snapshots.push(SnapshotStats {
                time,
                mass: McEstimate::from_samples(&col(0), cfg.seed, excluded)?,
                f_integral: McEstimate::from_samples(&col(1), cfg.seed, excluded)?,
            });
        }
    }
    let summary = SimulateSummary {
        replicates: cfg.replicates,
        seed: cfg.seed,
        ended_at_t_end: count(Termination::TEnd),
        extinct: count(Termination::Extinction),
        event_capped: count(Termination::EventCap),
        snapshots,
    };
    out.json("summary.json", &summary)?;
    let message = format!(
        "simulated {} replicates: {} extinct, {} hit the event cap",
        summary.replicates, summary.extinct, summary.event_capped
    );
    Ok((summary.event_capped == 0, message))
}

#[derive(Serialize)]
struct SolveSummary {
    quantity: &'static str,
    dt: f64,
    steps: usize,
    horizon: f64,
    order: u32,
    boundary_at_horizon: f64,
    /// `⟨σ, value at the horizon⟩`.
    initial_integral: f64,
    /// Immigration contribution over `[0, horizon]`, when immigration is configured.
    immigration_term: Option<f64>,
    /// `E e^{−⟨X_t,f⟩}` (cumulant) or `E ⟨X_t,f⟩` (moment) at the horizon.
    functional: f64,
    bounds_ok: Option<bool>,
}

fn solve(cfg: &RunConfig, out: &mut Outputs, moment: bool) -> Result<(bool, String)> {
    let grid = cfg.grid()?;
    let f = cfg.f();
    let t = grid.t_max;
    let times: Vec<f64> = (0..=10).map(|i| t * i as f64 / 10.0).collect();
    let imm = cfg.immigration.as_ref().filter(|m| m.is_active());
    let (mut boundary, mut table) = (Vec::new(), Vec::new());
    let summary = if moment {
        let sol = solve_pi(&cfg.model, f, &grid)?;
        sol.write_boundary_csv(&mut boundary)?;
        sol.write_table_csv(&mut table, &times, &cfg.table_ages)?;
        let initial_integral = sol.integrate(&cfg.initial, t)?;
        let immigration_term = imm.map(|m| immigration_mean_of(&sol, m)).transpose()?;
        SolveSummary {
            quantity: "moment",
            dt: grid.dt,
            steps: grid.steps(),
            horizon: t,
            order: grid.order(),
            boundary_at_horizon: sol.eval(t, 0.0)?,
            initial_integral,
            immigration_term,
            functional: initial_integral + immigration_term.unwrap_or(0.0),
            bounds_ok: None,
        }
    } else {
        let sol = solve_u(&cfg.model, f, &grid)?;
        sol.write_boundary_csv(&mut boundary)?;
        sol.write_table_csv(&mut table, &times, &cfg.table_ages)?;
        let initial_integral = sol.integrate(&cfg.initial, t)?;
        let immigration_term = imm.map(|m| psi_integral_of(&sol, m)).transpose()?;
        let bounds = check_bounds(&cfg.model, f, &grid, &cfg.table_ages)?;
        SolveSummary {
            quantity: "cumulant",
            dt: grid.dt,
            steps: grid.steps(),
            horizon: t,
            order: grid.order(),
            boundary_at_horizon: sol.eval(t, 0.0)?,
            initial_integral,
            immigration_term,
            functional: (-(initial_integral + immigration_term.unwrap_or(0.0))).exp(),
            bounds_ok: Some(bounds.passed()),
        }
    };
    out.add("boundary.csv", boundary);
    out.add("table.csv", table);
    out.json("summary.json", &summary)?;
    let message = format!(
        "{} solved on {} steps of {}: boundary value {} at t = {}",
        summary.quantity, summary.steps, summary.dt, summary.boundary_at_horizon, t
    );
    Ok((summary.bounds_ok.unwrap_or(true), message))
}

/// The configured validation suite, in a fixed order. Each Laplace check and the
/// martingale check are followed by their negative controls.
pub fn validation_suite(cfg: &RunConfig, runner: &Runner) -> Result<Vec<ComparisonReport>> {
    let sim = cfg.sim_config();
    let grid = cfg.grid()?;
    let (t, n) = (cfg.t_end, cfg.replicates);
    let v = &cfg.validate;
    let has_immigration = cfg.immigration.as_ref().is_some_and(|m| m.is_active());
    let mut reports = Vec::new();
    for check in CheckName::ALL.iter().filter(|c| v.checks.contains(c)) {
        match check {
            CheckName::Laplace => {
                for (i, f) in cfg.test_functions.iter().enumerate() {
                    let mut r = compare_laplace(&sim, f, t, n, &grid, runner)?;
                    r.name = format!("laplace_f{i}");
                    let control = r.perturbed(v.control_shift);
                    reports.extend([r, control]);
                }
            }
            CheckName::Mean => {
                for (i, f) in cfg.test_functions.iter().enumerate() {
                    let mut r = compare_mean(&sim, f, t, n, &grid, runner)?;
                    r.name = format!("mean_f{i}");
                    reports.push(r);
                }
            }
            CheckName::Extinction => reports.push(compare_extinction(&sim, t, n, &grid, runner)?),
            CheckName::Bounds if !has_immigration => reports.extend(bound_suite(&sim, t, n, runner)?),
            CheckName::Bounds => {}
            CheckName::Martingale => {
                let finite_law = !has_immigration
                    || cfg
                        .immigration
                        .as_ref()
                        .is_some_and(|m| m.integrate_groups(|_| 0.0).is_ok());
                let f = cfg.test_functions.iter().find(|f| f.has_derivative());
                if let (true, Some(f)) = (finite_law, f) {
                    let k = cfg.snapshot_intervals;
                    for scale in [1.0, v.control_scale] {
                        reports.push(martingale_residual_with(&sim, v.generator, f, t, n, k, scale, runner)?);
                    }
                }
            }
        }
    }
    Ok(reports)
}

fn validate(cfg: &RunConfig, out: &mut Outputs, runner: &Runner) -> Result<(bool, String)> {
    let reports = validation_suite(cfg, runner)?;
    out.reports(&reports)?;
    let summary = Summary::new(&reports);
    out.json("summary.json", &summary)?;
    let message = format!(
        "{} checks: {} passed, {} failed ({} controls, controls {})",
        summary.total,
        summary.passed,
        summary.failed,
        summary.controls,
        if summary.controls_ok { "ok" } else { "NOT ok" }
    );
    Ok((summary.all_ok, message))
}

#[derive(Serialize)]
struct ErgodicOutput {
    check: ErgodicityReport,
    study: Option<ErgodicStudy>,
}

fn ergodic(cfg: &RunConfig, out: &mut Outputs, runner: &Runner) -> Result<(bool, String)> {
    let imm = cfg.immigration_or_none();
    let check = ergodicity_check(&cfg.model, &imm);
    let study = if check.verdict == Ergodicity::Ergodic {
        let grid = cfg.grid()?;
        Some(ergodic_convergence(
            &cfg.sim_config(),
            cfg.f(),
            &cfg.ergodic_horizons,
            cfg.replicates,
            &grid,
            runner,
        )?)
    } else {
        None
    };
    let reports = study.as_ref().map(|s| s.reports.clone()).unwrap_or_default();
    out.reports(&reports)?;
    let ok = study
        .as_ref()
        .is_none_or(|s| s.gaps_decreasing && s.reports.iter().all(|r| r.as_expected()));
    let message = match &study {
        Some(s) => format!(
            "ergodic; stationary value {} (tail bound {:e}); gaps {:?}",
            s.stationary.value, s.stationary.tail_bound, s.gaps
        ),
        None => format!("{:?}: {}", check.verdict, check.reason),
    };
    out.json("ergodic.json", &ErgodicOutput { check, study })?;
    Ok((ok, message))
}

#[derive(Serialize)]
struct StationaryRow {
    index: usize,
    #[serde(flatten)]
    value: StationaryValue,
}

fn stationary(cfg: &RunConfig, out: &mut Outputs) -> Result<(bool, String)> {
    let imm = cfg.immigration_or_none();
    let mut csv = String::from("index,value,tail_bound,quadrature_error,horizon,dt\n");
    let mut rows = Vec::new();
    for (index, f) in cfg.test_functions.iter().enumerate() {
        let v = stationary_laplace(&cfg.model, &imm, f, cfg.stationary_tol)?;
        let _ = writeln!(
            csv,
            "{index},{},{},{},{},{}",
            v.value, v.tail_bound, v.quadrature_error, v.horizon, v.dt
        );
        rows.push(StationaryRow { index, value: v });
    }
    out.add("stationary.csv", csv.into_bytes());
    out.json("stationary.json", &rows)?;
    let message = rows
        .iter()
        .map(|r| format!("f{}: {}", r.index, r.value.value))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((true, message))
}

#[derive(Serialize)]
struct IdentitySummary {
    tol: f64,
    total: usize,
    passed: usize,
    max_abs_diff: f64,
}

fn identity_check(dir: &Path) -> Result<Outcome> {
    let mut csv = String::from("a,c,group_mass,lhs,rhs,abs_diff,verdict\n");
    let (mut passed, mut total, mut worst) = (0, 0, 0.0f64);
    for a in [0.1, 1.0, 10.0] {
        for c in [0.5, 1.0, 2.0] {
            for n in [1u64, 10, 100] {
                let (lhs, rhs) = elementary_identity_check(a, c, n)?;
                let diff = (lhs - rhs).abs();
                let ok = diff <= IDENTITY_TOL;
                total += 1;
                passed += ok as usize;
                worst = worst.max(diff);
                let _ = writeln!(
                    csv,
                    "{a},{c},{n},{lhs},{rhs},{diff},{}",
                    if ok { "pass" } else { "fail" }
                );
            }
        }
    }
    let mut outputs = Outputs::new(dir.to_path_buf());
    outputs.add("identity.csv", csv.into_bytes());
    outputs.json(
        "summary.json",
        &IdentitySummary {
            tol: IDENTITY_TOL,
            total,
            passed,
            max_abs_diff: worst,
        },
    )?;
    if total == 0 {
        return Err(Error::Unsupported("empty parameter grid".into()));
    }
    Ok(Outcome {
        outputs,
        ok: passed == total,
        message: format!("{passed}/{total} parameter points agree (max |lhs − rhs| = {worst:e})"),
    })
}
