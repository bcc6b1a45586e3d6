//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits nonzero if
//! any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use agebranch::model::{GroupSizeLaw, MemberAgeLaw, WeightedGroup};
use agebranch::solver::{
    check_bounds, elementary_identity_check, ergodicity_check, stationary_laplace, Ergodicity, Quadrature,
};
use agebranch::validation::{
    bound_suite, compare_extinction, compare_laplace, compare_mean, estimate_laplace, estimate_mass_mean,
    martingale_residual, martingale_residual_scaled, ComparisonReport, McEstimate, Runner, TestFunction,
};
use agebranch::{
    solve_pi, solve_u, AgeMeasure, BranchingModel, ImmigrationMechanism, OffspringLaw, ScalarField, SimConfig,
    SolverGrid,
};

type Outcome = Result<String, String>;

fn critical() -> BranchingModel {
    BranchingModel::constant_rate(1.0, OffspringLaw::binary(0.5)).unwrap()
}

fn subcritical() -> BranchingModel {
    BranchingModel::constant_rate(1.0, OffspringLaw::finite(vec![0.6, 0.0, 0.4])).unwrap()
}

fn pure_death() -> BranchingModel {
    BranchingModel::constant_rate(1.0, OffspringLaw::pure_death()).unwrap()
}

/// `e^{−u_t θ}` for the critical binary process with unit rate.
fn critical_laplace(theta: f64, t: f64) -> f64 {
    let inv = if theta.is_infinite() { 1.0 } else { 1.0 / -(-theta).exp_m1() };
    1.0 - 1.0 / (inv + t / 2.0)
}

fn z_against(mc: &McEstimate, exact: f64) -> f64 {
    (mc.value - exact) / mc.std_error
}

fn line(r: &ComparisonReport) -> String {
    format!("{} mc {:.6} ± {:.6} vs {:.6}, z {:+.2}", r.name, r.mc.value, r.mc.std_error, r.analytic, r.z)
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn laplace_identity(runner: &Runner) -> Outcome {
    let start = Instant::now();
    let cfg = SimConfig::new(critical(), AgeMeasure::repeated(0.0, 1).unwrap(), 1.0).with_seed(101);
    let grid = SolverGrid::new(1e-3, 1.0).unwrap();
    let r = compare_laplace(&cfg, &ScalarField::constant(1.0), 1.0, 100_000, &grid, runner).map_err(|e| e.to_string())?;
    let exact = critical_laplace(1.0, 1.0);
    let elapsed = start.elapsed();
    let closed = (r.analytic - exact).abs();
    ensure(
        r.passed && closed < 1e-8 && (exact - 0.5197).abs() < 5e-5 && elapsed < Duration::from_secs(60),
        format!("{}; solver vs closed form {closed:.1e}; {elapsed:.1?}", line(&r)),
    )
}

fn extinction(runner: &Runner) -> Outcome {
    let start = Instant::now();
    let cfg = SimConfig::new(critical(), AgeMeasure::repeated(0.0, 1).unwrap(), 2.0).with_seed(202);
    let grid = SolverGrid::new(1e-3, 2.0).unwrap();
    let r = compare_extinction(&cfg, 2.0, 100_000, &grid, runner).map_err(|e| e.to_string())?;
    let exact = 2.0 / (2.0 + 2.0);
    let z = z_against(&r.mc, exact);
    let elapsed = start.elapsed();
    ensure(
        z.abs() <= 3.0 && r.passed && (r.analytic - exact).abs() < 1e-8 && elapsed < Duration::from_secs(60),
        format!("frequency {:.5} ± {:.5} vs t/(t+2) = 0.5, z {z:+.2}; solver {:.9}; {elapsed:.1?}", r.mc.value, r.mc.std_error, r.analytic),
    )
}

fn moment_identity(runner: &Runner) -> Outcome {
    let grid = SolverGrid::new(1e-3, 1.0).unwrap().with_quadrature(Quadrature::Trapezoid);
    let one = ScalarField::constant(1.0);
    let pi = solve_pi(&pure_death(), &one, &grid).map_err(|e| e.to_string())?;
    let worst = (0..=grid.steps())
        .flat_map(|j| [0.0, 0.5, 3.0].map(move |x| (grid.time(j), x)))
        .map(|(t, x)| (pi.eval(t, x).unwrap() - (-t).exp()).abs())
        .fold(0.0f64, f64::max);
    let cfg = SimConfig::new(pure_death(), AgeMeasure::repeated(0.0, 100).unwrap(), 1.0).with_seed(303);
    let r = compare_mean(&cfg, &one, 1.0, 10_000, &grid, runner).map_err(|e| e.to_string())?;
    let exact = 100.0 * (-1.0f64).exp();
    let z = z_against(&r.mc, exact);
    ensure(
        worst < 1e-8 && z.abs() <= 3.0 && r.passed,
        format!("mean mass {:.4} ± {:.4} vs 100/e = {exact:.6}, z {z:+.2}; max |π_t 1 − e^-t| {worst:.1e}", r.mc.value, r.mc.std_error),
    )
}

fn bound_suite_criterion(runner: &Runner) -> Outcome {
    let catalog = [
        ("critical binary", critical(), ScalarField::constant(1.0)),
        ("subcritical", subcritical(), ScalarField::exp_decay(1.0, 0.5, 0.2)),
        (
            "pure death, rate 2",
            BranchingModel::constant_rate(2.0, OffspringLaw::pure_death()).unwrap(),
            ScalarField::constant(3.0),
        ),
        (
            "age-dependent ramp, two regimes",
            BranchingModel::new(
                ScalarField::ramp(0.0, 2.0, 0.5, 2.0),
                OffspringLaw::Regimes {
                    thresholds: vec![1.0],
                    laws: vec![OffspringLaw::finite(vec![0.3, 0.2, 0.5]), OffspringLaw::finite(vec![0.6, 0.1, 0.3])],
                },
            )
            .unwrap(),
            ScalarField::rational(1.0, 0.1),
        ),
        (
            "supercritical geometric, decaying rate",
            BranchingModel::new(ScalarField::exp_decay(1.0, 1.0, 0.5), OffspringLaw::Geometric { ratio: 0.6 }).unwrap(),
            ScalarField::ramp(0.0, 3.0, 0.2, 1.0),
        ),
    ];
    let grid = SolverGrid::new(0.01, 2.0).unwrap();
    let ages: Vec<f64> = (0..=200).map(|i| i as f64 * 0.01).collect();
    let mut nodes = 0;
    let mut failures = Vec::new();
    for (name, model, f) in &catalog {
        let check = check_bounds(model, f, &grid, &ages).map_err(|e| e.to_string())?;
        nodes += check.nodes;
        if !check.passed() {
            failures.push(format!("{name}: {:?}", check.violations[0]));
        }
    }
    let cfg = SimConfig::new(critical(), AgeMeasure::repeated(0.0, 1).unwrap(), 1.0).with_seed(404);
    let mc = bound_suite(&cfg, 1.0, 100_000, runner).map_err(|e| e.to_string())?;
    for r in mc.iter().filter(|r| !r.passed) {
        failures.push(line(r));
    }
    let sup = &mc[0];
    ensure(
        failures.is_empty(),
        format!(
            "{nodes} solver nodes over {} models; E sup mass {:.4} ≤ e, E n(1) {:.4} ≤ e − 1{}",
            catalog.len(),
            sup.mc.value,
            mc[1].mc.value,
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn convergence_order(_: &Runner) -> Outcome {
    let model = critical();
    let f = ScalarField::constant(1.0);
    let mut detail = Vec::new();
    let mut ok = true;
    for (q, nominal) in [(Quadrature::Rectangle, 1.0), (Quadrature::Trapezoid, 2.0)] {
        let mut errs = Vec::new();
        for dt in [4e-3, 2e-3, 1e-3] {
            let sol = solve_u(&model, &f, &SolverGrid::new(dt, 1.0).unwrap().with_quadrature(q)).map_err(|e| e.to_string())?;
            let mut err: f64 = 0.0;
            for k in 0..=10 {
                let t = k as f64 / 10.0;
                for x in [0.0, 0.7] {
                    err = err.max((sol.laplace(t, x).unwrap() - critical_laplace(1.0, t)).abs());
                }
            }
            errs.push(err);
        }
        let orders = [(errs[0] / errs[1]).log2(), (errs[1] / errs[2]).log2()];
        ok &= orders.iter().all(|p| (p - nominal).abs() <= 0.3);
        detail.push(format!("{q:?} orders {:.3}/{:.3}", orders[0], orders[1]));
    }
    ensure(ok, detail.join(", "))
}

fn martingale(runner: &Runner) -> Outcome {
    let cfg = SimConfig::new(critical(), AgeMeasure::repeated(0.0, 1).unwrap(), 1.0).with_seed(606);
    let f = ScalarField::constant(1.0);
    let r = martingale_residual(&cfg, TestFunction::NegExp, &f, 1.0, 100_000, runner).map_err(|e| e.to_string())?;
    let c = martingale_residual_scaled(&cfg, TestFunction::NegExp, &f, 1.0, 100_000, 1.05, runner).map_err(|e| e.to_string())?;
    ensure(r.passed && !c.passed, format!("{}; {}", line(&r), line(&c)))
}

fn ergodicity(runner: &Runner) -> Outcome {
    let imm = ImmigrationMechanism::single_immigrants(3.0, 0.0).unwrap();
    let f = ScalarField::constant(1.0);
    let st = stationary_laplace(&pure_death(), &imm, &f, 1e-7).map_err(|e| e.to_string())?;
    let exact = (-3.0 * (1.0 - (-1.0f64).exp())).exp();
    let cfg = SimConfig::new(pure_death(), AgeMeasure::empty(), 20.0).with_immigration(imm).with_seed(707);
    let mc = estimate_laplace(&cfg, &f, 20.0, 10_000, runner).map_err(|e| e.to_string())?;
    let z1 = z_against(&mc, st.value);

    let sub = SimConfig::new(subcritical(), AgeMeasure::empty(), 50.0)
        .with_immigration(ImmigrationMechanism::single_immigrants(1.0, 0.0).unwrap())
        .with_seed(708);
    let mass = estimate_mass_mean(&sub, &f, 50.0, 10_000, runner).map_err(|e| e.to_string())?;
    let z2 = z_against(&mass, 5.0);
    ensure(
        (st.value - exact).abs() <= 1e-6 && z1.abs() <= 3.0 && z2.abs() <= 3.0,
        format!(
            "stationary {:.9} vs {exact:.9} (|Δ| {:.1e}); MC at T=20 {:.4} ± {:.4}, z {z1:+.2}; mean mass at T=50 {:.3} ± {:.3}, z {z2:+.2}",
            st.value,
            (st.value - exact).abs(),
            mc.value,
            mc.std_error,
            mass.value,
            mass.std_error
        ),
    )
}

fn dichotomy(_: &Runner) -> Outcome {
    let newborn = MemberAgeLaw::Point { age: 0.0 };
    let heavy = ImmigrationMechanism::parametric(1.0, GroupSizeLaw::LogPower { power: 2.0 }, newborn).unwrap();
    let finite_laws = [
        ImmigrationMechanism::single_immigrants(1.0, 0.0).unwrap(),
        ImmigrationMechanism::single_immigrants(0.3, 5.0).unwrap(),
        ImmigrationMechanism::finite(vec![
            WeightedGroup { weight: 0.5, ages: AgeMeasure::repeated(0.0, 3).unwrap() },
            WeightedGroup { weight: 2.0, ages: AgeMeasure::from_ages(vec![1.0, 4.0]).unwrap() },
        ])
        .unwrap(),
        ImmigrationMechanism::finite(vec![WeightedGroup { weight: 1.0, ages: AgeMeasure::repeated(0.5, 1000).unwrap() }]).unwrap(),
    ];
    let subcritical_models = [
        subcritical(),
        pure_death(),
        BranchingModel::new(ScalarField::ramp(0.0, 2.0, 0.5, 2.0), OffspringLaw::finite(vec![0.5, 0.3, 0.2])).unwrap(),
    ];
    let mut bad = Vec::new();
    if ergodicity_check(&subcritical(), &heavy).verdict != Ergodicity::NotErgodic {
        bad.push("log-squared tail not classified not_ergodic".to_string());
    }
    let mut count = 0;
    for m in &subcritical_models {
        for l in &finite_laws {
            count += 1;
            let v = ergodicity_check(m, l).verdict;
            if v != Ergodicity::Ergodic {
                bad.push(format!("finite law classified {v:?}"));
            }
        }
    }
    for l in finite_laws.iter().chain([&heavy]) {
        let v = ergodicity_check(&critical(), l).verdict;
        if v != Ergodicity::Unknown {
            bad.push(format!("critical model classified {v:?}"));
        }
    }
    ensure(
        bad.is_empty(),
        format!("1 divergent tail, {count} finite-support cases, {} critical cases{}", finite_laws.len() + 1, if bad.is_empty() { String::new() } else { format!(": {}", bad.join("; ")) }),
    )
}

fn identity(_: &Runner) -> Outcome {
    let mut worst: f64 = 0.0;
    for a in [0.1, 1.0, 10.0] {
        for c in [0.5, 1.0, 2.0] {
            for n in [1, 10, 100] {
                let (l, r) = elementary_identity_check(a, c, n).map_err(|e| e.to_string())?;
                worst = worst.max((l - r).abs());
            }
        }
    }
    ensure(worst <= 1e-8, format!("27 points, max |lhs − rhs| {worst:.1e}"))
}

fn determinism(_: &Runner) -> Outcome {
    let exe = env!("CARGO_BIN_EXE_agebranch");
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/bench_critical.json");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for threads in ["1", "4", "1"] {
        let out = dir.path().join(format!("run{}", outputs.len()));
        let status = Command::new(exe)
            .args(["validate", "--config"])
            .arg(&config)
            .args(["--seed", "7", "--replicates", "20000", "--parallelism", threads, "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("validate failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        let read = |name: &str| std::fs::read(out.join(name)).map_err(|e| e.to_string());
        outputs.push((read("reports.csv")?, read("summary.json")?));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    let rows = outputs[0].0.iter().filter(|b| **b == b'\n').count() - 1;
    ensure(same, format!("3 runs (1, 4, 1 threads), {rows} report rows, identical bytes: {same}"))
}

fn main() {
    let runner = Runner::default();
    let criteria: [(&str, fn(&Runner) -> Outcome); 10] = [
        ("Laplace identity, critical binary, t = 1", laplace_identity),
        ("extinction probability, t = 2", extinction),
        ("moment identity, pure death", moment_identity),
        ("bound suite", bound_suite_criterion),
        ("solver convergence order", convergence_order),
        ("generator martingale residual", martingale),
        ("ergodicity and stationary limit", ergodicity),
        ("ergodicity criterion dichotomy", dichotomy),
        ("quadrature identity self-test", identity),
        ("determinism across parallelism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (verdict, detail) = match check(&runner) {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {verdict}: {name}: {detail} [{:.1?}]", i + 1, start.elapsed());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
