use serde::{Deserialize, Serialize};

use super::{ComparisonReport, McEstimate, Runner, CONTROL_PREFIX};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::measure::AgeMeasure;
use crate::model::{BranchingModel, ImmigrationMechanism};
use crate::quadrature::trapezoid_sum;
use crate::sim::{simulate_replicate, Termination};
use crate::sim::SimConfig;

/// Snapshot intervals for the time integral of the generator term.
pub const DEFAULT_QUADRATURE_INTERVALS: usize = 50;

/// Smooth outer functions `G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// `G(z) = z`
    Identity,
    /// `G(z) = e^{−z}`
    NegExp,
    /// `G(z) = z²`
    Square,
}

impl TestFunction {
    pub fn name(self) -> &'static str {
        match self {
            TestFunction::Identity => "identity",
            TestFunction::NegExp => "neg_exp",
            TestFunction::Square => "square",
        }
    }

    pub fn value(self, z: f64) -> f64 {
        match self {
            TestFunction::Identity => z,
            TestFunction::NegExp => (-z).exp(),
            TestFunction::Square => z * z,
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            TestFunction::Identity => 1.0,
            TestFunction::NegExp => -(-z).exp(),
            TestFunction::Square => 2.0 * z,
        }
    }
}

/// `LG_f(μ) = ⟨μ,f'⟩G'(m) − ∫ α(y) Σ_z p(y,z)[G(m) − G(m + z f(0) − f(y))] μ(dy)
///            + ∫ [G(m + ⟨ν,f⟩) − G(m)] L(dν)` with `m = ⟨μ,f⟩`.
pub fn generator(
    model: &BranchingModel,
    immigration: Option<&ImmigrationMechanism>,
    g: TestFunction,
    f: &ScalarField,
    mu: &AgeMeasure,
) -> Result<f64> {
    if !f.has_derivative() {
        return Err(Error::Unsupported(
            "the generator needs a test function with an almost-everywhere derivative".into(),
        ));
    }
    let m = mu.integrate(f);
    let transport = mu.integrate_with(|y| f.derivative(y).unwrap_or(0.0)) * g.derivative(m);
    let f0 = f.eval(0.0);
    let gm = g.value(m);
    let branching = mu.integrate_with(|y| {
        let fy = f.eval(y);
        model.alpha().eval(y)
            * model
                .offspring()
                .expect(y, |z| gm - g.value(m + z as f64 * f0 - fy))
    });
    let arrivals = match immigration.filter(|i| i.is_active()) {
        Some(imm) => imm.integrate_groups(|nu| g.value(m + nu.integrate(f)) - gm)?,
        None => 0.0,
    };
    Ok(transport - branching + arrivals)
}

/// `G(⟨X_t,f⟩) − G(⟨X₀,f⟩) − ∫₀ᵗ LG_f(X_s) ds` against zero, with the time
/// integral by the trapezoid rule over the default snapshot grid.
pub fn martingale_residual(
    cfg: &SimConfig,
    g: TestFunction,
    f: &ScalarField,
    t: f64,
    n: usize,
    runner: &Runner,
) -> Result<ComparisonReport> {
    martingale_residual_with(cfg, g, f, t, n, DEFAULT_QUADRATURE_INTERVALS, 1.0, runner)
}

/// Negative control: the generator term is multiplied by `scale`.
pub fn martingale_residual_scaled(
    cfg: &SimConfig,
    g: TestFunction,
    f: &ScalarField,
    t: f64,
    n: usize,
    scale: f64,
    runner: &Runner,
) -> Result<ComparisonReport> {
    martingale_residual_with(cfg, g, f, t, n, DEFAULT_QUADRATURE_INTERVALS, scale, runner)
}

/// General form. `intervals` is rounded up to an even number; the mean difference
/// between the full and the every-other-snapshot quadrature, divided by 3, is the
/// reported tolerance.
#[allow(clippy::too_many_arguments)]
pub fn martingale_residual_with(
    cfg: &SimConfig,
    g: TestFunction,
    f: &ScalarField,
    t: f64,
    n: usize,
    intervals: usize,
    scale: f64,
    runner: &Runner,
) -> Result<ComparisonReport> {
    let name = if scale == 1.0 {
        format!("martingale_{}", g.name())
    } else {
        format!("{CONTROL_PREFIX}martingale_{}_scaled", g.name())
    };
    if t == 0.0 {
        let mc = McEstimate::from_samples(&vec![0.0; n.max(2)], cfg.seed, 0)?;
        return Ok(ComparisonReport::two_sided(name, mc, 0.0, 0.0));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain {
            what: "t",
            value: t,
            domain: "[0, inf)",
        });
    }
    let intervals = intervals.max(2).div_ceil(2) * 2;
    let mut c = cfg.clone();
    c.t_end = t;
    c.record_events = false;
    let c = c.with_uniform_snapshots(intervals);
    let imm = cfg.immigration.as_ref();
    let h = t / intervals as f64;
    let g0 = g.value(cfg.initial.integrate(f));
    let rows = runner.map(n, |r| {
        let tr = simulate_replicate(&c, r)?;
        if tr.terminated_by == Termination::EventCap {
            return Ok(None);
        }
        let lg = tr
            .snapshots
            .iter()
            .map(|s| generator(&cfg.model, imm, g, f, &s.state))
            .collect::<Result<Vec<f64>>>()?;
        let fine = trapezoid_sum(&lg, h);
        let coarse: Vec<f64> = lg.iter().step_by(2).copied().collect();
        let coarse = trapezoid_sum(&coarse, 2.0 * h);
        let gt = g.value(tr.final_state.integrate(f));
        Ok(Some((gt - g0 - scale * fine, fine - coarse)))
    })?;
    let residuals = rows.iter().map(|r| r.map(|r| r.0)).collect();
    let diffs: Vec<f64> = rows.iter().flatten().map(|r| r.1).collect();
    let tol = if diffs.is_empty() {
        0.0
    } else {
        (super::pairwise_sum(&diffs) / diffs.len() as f64).abs() / 3.0
    };
    let mc = McEstimate::from_optional(residuals, cfg.seed)?;
    Ok(ComparisonReport::two_sided(name, mc, 0.0, tol))
}
