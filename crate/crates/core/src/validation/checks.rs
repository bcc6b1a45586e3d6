use serde::Serialize;

use super::{ComparisonReport, McEstimate, Runner};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::model::ImmigrationMechanism;
use crate::sim::{simulate_replicate, SimConfig, Termination, Trajectory};
use crate::solver::{
    ergodicity_check, immigration_mean_of, psi_integral_of, solve_pi, solve_u, stationary_laplace,
    Ergodicity, SolverGrid, StationaryValue,
};

/// Extinction is read off the Laplace transform at this constant level.
const EXTINCTION_LEVEL: f64 = 40.0;

/// Tolerance for the stationary reference in convergence studies.
const STATIONARY_TOL: f64 = 1e-7;

fn at_time(cfg: &SimConfig, t: f64) -> Result<SimConfig> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain {
            what: "t",
            value: t,
            domain: "(0, inf)",
        });
    }
    let mut c = cfg.clone();
    c.t_end = t;
    c.snapshot_times = vec![t];
    c.record_events = false;
    Ok(c)
}

/// `grid`'s scheme with the step shrunk so that `t` is a whole number of steps.
pub(crate) fn fit_grid(grid: &SolverGrid, t: f64) -> SolverGrid {
    let n = (t / grid.dt - 1e-9).ceil().max(1.0);
    SolverGrid {
        dt: t / n,
        t_max: t,
        ..*grid
    }
}

/// Value at `dt/2` and its error estimate from the `dt` value.
fn with_error(grid: &SolverGrid, eval: impl Fn(&SolverGrid) -> Result<f64>) -> Result<(f64, f64)> {
    let coarse = eval(grid)?;
    let fine_grid = SolverGrid {
        dt: grid.dt / 2.0,
        ..*grid
    };
    let fine = eval(&fine_grid)?;
    let denom = ((1u32 << grid.order()) - 1) as f64;
    Ok((fine, (fine - coarse).abs() / denom))
}

fn estimate(
    cfg: &SimConfig,
    t: f64,
    n: usize,
    runner: &Runner,
    stat: impl Fn(&Trajectory) -> f64 + Sync,
) -> Result<McEstimate> {
    let c = at_time(cfg, t)?;
    let values = runner.map(n, |r| {
        let tr = simulate_replicate(&c, r)?;
        Ok((tr.terminated_by != Termination::EventCap).then(|| stat(&tr)))
    })?;
    McEstimate::from_optional(values, cfg.seed)
}

/// Mean and standard error of `e^{−⟨X_t, f⟩}` over `n` replicates.
pub fn estimate_laplace(cfg: &SimConfig, f: &ScalarField, t: f64, n: usize, runner: &Runner) -> Result<McEstimate> {
    estimate(cfg, t, n, runner, |tr| (-tr.final_state.integrate(f)).exp())
}

/// Frequency of `X_t = 0`.
pub fn estimate_extinction(cfg: &SimConfig, t: f64, n: usize, runner: &Runner) -> Result<McEstimate> {
    estimate(cfg, t, n, runner, |tr| {
        if tr.final_state.is_empty() {
            1.0
        } else {
            0.0
        }
    })
}

/// Mean of `⟨X_t, f⟩`.
pub fn estimate_mass_mean(cfg: &SimConfig, f: &ScalarField, t: f64, n: usize, runner: &Runner) -> Result<McEstimate> {
    estimate(cfg, t, n, runner, |tr| tr.final_state.integrate(f))
}

fn immigration(cfg: &SimConfig) -> Option<&ImmigrationMechanism> {
    cfg.immigration.as_ref().filter(|m| m.is_active())
}

/// `exp{−⟨σ, u_t f⟩ − ∫₀ᵗ ψ(u_s f) ds}`.
fn analytic_laplace(cfg: &SimConfig, f: &ScalarField, grid: &SolverGrid) -> Result<f64> {
    let sol = solve_u(&cfg.model, f, grid)?;
    let mut exponent = sol.integrate(&cfg.initial, grid.t_max)?;
    if let Some(imm) = immigration(cfg) {
        exponent += psi_integral_of(&sol, imm)?;
    }
    Ok((-exponent).exp())
}

/// Analytic Laplace functional at `t` with its discretisation error estimate.
pub(crate) fn laplace_reference(cfg: &SimConfig, f: &ScalarField, t: f64, grid: &SolverGrid) -> Result<(f64, f64)> {
    with_error(&fit_grid(grid, t), |g| analytic_laplace(cfg, f, g))
}

pub fn compare_laplace(
    cfg: &SimConfig,
    f: &ScalarField,
    t: f64,
    n: usize,
    grid: &SolverGrid,
    runner: &Runner,
) -> Result<ComparisonReport> {
    let mc = estimate_laplace(cfg, f, t, n, runner)?;
    let (analytic, tol) = laplace_reference(cfg, f, t, grid)?;
    Ok(ComparisonReport::two_sided("laplace", mc, analytic, tol))
}

/// Extinction frequency against the Laplace functional at a large constant level.
pub fn compare_extinction(
    cfg: &SimConfig,
    t: f64,
    n: usize,
    grid: &SolverGrid,
    runner: &Runner,
) -> Result<ComparisonReport> {
    let mc = estimate_extinction(cfg, t, n, runner)?;
    let (analytic, tol) = laplace_reference(cfg, &ScalarField::constant(EXTINCTION_LEVEL), t, grid)?;
    Ok(ComparisonReport::two_sided("extinction", mc, analytic, tol))
}

/// Mean of `⟨X_t, f⟩` against `⟨σ, π_t f⟩ + ∫₀ᵗ ∫⟨ν, π_s f⟩ L(dν) ds`.
pub fn compare_mean(
    cfg: &SimConfig,
    f: &ScalarField,
    t: f64,
    n: usize,
    grid: &SolverGrid,
    runner: &Runner,
) -> Result<ComparisonReport> {
    let mc = estimate_mass_mean(cfg, f, t, n, runner)?;
    let (analytic, tol) = with_error(&fit_grid(grid, t), |g| {
        let sol = solve_pi(&cfg.model, f, g)?;
        let mut v = sol.integrate(&cfg.initial, g.t_max)?;
        if let Some(imm) = immigration(cfg) {
            v += immigration_mean_of(&sol, imm)?;
        }
        Ok(v)
    })?;
    Ok(ComparisonReport::two_sided("mean", mc, analytic, tol))
}

/// One-sided checks, for the process without immigration, of
/// `E sup_{s≤t} X_s(∞) ≤ e^{βt} X₀(∞)`, `E n(t) ≤ ‖α‖ X₀(∞) ∫₀ᵗ e^{βs} ds` and
/// `E X_t(∞) ≤ e^{c₀t} X₀(∞)`.
pub fn bound_suite(cfg: &SimConfig, t: f64, n: usize, runner: &Runner) -> Result<Vec<ComparisonReport>> {
    if immigration(cfg).is_some() {
        return Err(Error::Unsupported(
            "the growth bounds are stated for the process without immigration".into(),
        ));
    }
    let c = at_time(cfg, t)?;
    let rows = runner.map(n, |r| {
        let tr = simulate_replicate(&c, r)?;
        Ok((tr.terminated_by != Termination::EventCap).then(|| {
            let s = tr.snapshots.last().expect("snapshot at t");
            [
                s.running_max as f64,
                s.branch_events as f64,
                s.state.total_mass() as f64,
            ]
        }))
    })?;
    let k = cfg.model.constants();
    let x0 = cfg.initial.total_mass() as f64;
    let growth_integral = if k.beta == 0.0 {
        t
    } else {
        (k.beta * t).exp_m1() / k.beta
    };
    let bounds = [
        ("sup_mass_bound", (k.beta * t).exp() * x0),
        ("event_count_bound", k.c1 * x0 * growth_integral),
        ("mean_mass_bound", (k.c0 * t).exp() * x0),
    ];
    bounds
        .iter()
        .enumerate()
        .map(|(i, (name, bound))| {
            let col = rows.iter().map(|r| r.map(|r| r[i])).collect();
            let mc = McEstimate::from_optional(col, cfg.seed)?;
            Ok(ComparisonReport::upper_bound(*name, mc, *bound, 0.0))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicStudy {
    pub stationary: StationaryValue,
    pub horizons: Vec<f64>,
    /// MC against the finite-horizon functional at every horizon, then against the
    /// stationary value at the last one.
    pub reports: Vec<ComparisonReport>,
    /// `|finite-horizon functional − stationary value|` per horizon.
    pub gaps: Vec<f64>,
    pub gaps_decreasing: bool,
}

/// Laplace functional at each horizon against the finite-horizon prediction, and at the
/// last horizon against the stationary limit. Refuses configs that are not certified ergodic.
pub fn ergodic_convergence(
    cfg: &SimConfig,
    f: &ScalarField,
    horizons: &[f64],
    n: usize,
    grid: &SolverGrid,
    runner: &Runner,
) -> Result<ErgodicStudy> {
    let none = ImmigrationMechanism::none();
    let imm = cfg.immigration.as_ref().unwrap_or(&none);
    let check = ergodicity_check(&cfg.model, imm);
    if check.verdict != Ergodicity::Ergodic {
        return Err(Error::NotCertifiedErgodic(check.reason));
    }
    let stationary = stationary_laplace(&cfg.model, imm, f, STATIONARY_TOL)?;
    let stationary_tol = stationary.tail_bound + stationary.quadrature_error;
    let mut reports = Vec::new();
    let mut gaps = Vec::new();
    for (i, &t) in horizons.iter().enumerate() {
        let mc = estimate_laplace(cfg, f, t, n, runner)?;
        let (analytic, tol) = laplace_reference(cfg, f, t, grid)?;
        reports.push(ComparisonReport::two_sided(format!("laplace_at_t{t}"), mc.clone(), analytic, tol));
        if i + 1 == horizons.len() {
            reports.push(ComparisonReport::two_sided(
                format!("stationary_at_t{t}"),
                mc,
                stationary.value,
                stationary_tol,
            ));
        }
        gaps.push((analytic - stationary.value).abs());
    }
    let gaps_decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    Ok(ErgodicStudy {
        stationary,
        horizons: horizons.to_vec(),
        reports,
        gaps,
        gaps_decreasing,
    })
}
