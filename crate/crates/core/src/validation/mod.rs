//! Monte Carlo estimators and their comparison against the analytic side.
//!
//! Every estimator draws replicate `r` from the counter-based stream `(seed, r)`, runs
//! replicates on a [`Runner`] and reduces them in replicate order with pairwise
//! summation, so results do not depend on the degree of parallelism.

mod checks;
mod martingale;

pub use checks::{
    bound_suite, compare_extinction, compare_laplace, compare_mean, ergodic_convergence,
    estimate_extinction, estimate_laplace, estimate_mass_mean, ErgodicStudy,
};
pub use martingale::{
    generator, martingale_residual, martingale_residual_scaled, martingale_residual_with, TestFunction,
    DEFAULT_QUADRATURE_INTERVALS,
};

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Acceptance threshold on `|z|` (two-sided) or `z` (one-sided).
pub const Z_THRESHOLD: f64 = 3.0;

/// Name prefix marking a negative control, a check that must fail.
pub const CONTROL_PREFIX: &str = "control:";

/// Fixed-size worker pool for replicates.
pub struct Runner {
    pool: rayon::ThreadPool,
}

impl Runner {
    /// `parallelism = 0` uses one thread per available core.
    pub fn new(parallelism: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| Error::Unsupported(format!("cannot start worker pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// `f(0), …, f(n−1)` evaluated in parallel, returned in index order.
    pub fn map<T: Send>(&self, n: usize, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
        self.pool
            .install(|| (0..n as u64).into_par_iter().map(&f).collect())
    }
}

impl Default for Runner {
    fn default() -> Self {
        Self::new(0).expect("default worker pool")
    }
}

/// Sum by recursive halving; the association order depends only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().fold(0.0, |acc, x| acc + x);
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub replicates: usize,
    pub seed: u64,
    /// Replicates dropped because they hit the event cap.
    pub excluded: usize,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64], seed: u64, excluded: usize) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::Unsupported(format!(
                "an estimate needs at least 2 usable replicates, got {n}"
            )));
        }
        let mean = pairwise_sum(samples) / n as f64;
        let sq: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&sq) / (n - 1) as f64;
        Ok(Self {
            value: mean,
            std_error: (var / n as f64).sqrt(),
            replicates: n,
            seed,
            excluded,
        })
    }

    /// Sample mean and standard error from per-replicate values, `None` marking excluded ones.
    pub(crate) fn from_optional(values: Vec<Option<f64>>, seed: u64) -> Result<Self> {
        let excluded = values.iter().filter(|v| v.is_none()).count();
        let kept: Vec<f64> = values.into_iter().flatten().collect();
        Self::from_samples(&kept, seed, excluded)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Identity: pass iff `|z| ≤ 3`.
    TwoSided,
    /// Inequality `mc ≤ analytic`: pass iff `z ≤ 3`.
    UpperBound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub name: String,
    pub mc: McEstimate,
    pub analytic: f64,
    /// Numerical tolerance of the analytic value, added to the standard error in quadrature.
    pub tol: f64,
    pub z: f64,
    pub p_value: f64,
    pub kind: CheckKind,
    pub passed: bool,
}

impl ComparisonReport {
    pub fn new(name: impl Into<String>, mc: McEstimate, analytic: f64, tol: f64, kind: CheckKind) -> Self {
        let scale = (mc.std_error * mc.std_error + tol * tol).sqrt();
        let diff = mc.value - analytic;
        let z = if scale > 0.0 {
            diff / scale
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        let normal = Normal::standard();
        let (p_value, passed) = match kind {
            CheckKind::TwoSided => (2.0 * normal.sf(z.abs()), z.abs() <= Z_THRESHOLD),
            CheckKind::UpperBound => (normal.sf(z), z <= Z_THRESHOLD),
        };
        Self {
            name: name.into(),
            mc,
            analytic,
            tol,
            z,
            p_value,
            kind,
            passed,
        }
    }

    pub fn two_sided(name: impl Into<String>, mc: McEstimate, analytic: f64, tol: f64) -> Self {
        Self::new(name, mc, analytic, tol, CheckKind::TwoSided)
    }

    pub fn upper_bound(name: impl Into<String>, mc: McEstimate, bound: f64, tol: f64) -> Self {
        Self::new(name, mc, bound, tol, CheckKind::UpperBound)
    }

    /// Negative control: the same estimate against an analytic value shifted by `delta`.
    pub fn perturbed(&self, delta: f64) -> Self {
        Self::new(
            format!("{CONTROL_PREFIX}{}_shifted", self.name),
            self.mc.clone(),
            self.analytic + delta,
            self.tol,
            self.kind,
        )
    }

    pub fn is_control(&self) -> bool {
        self.name.starts_with(CONTROL_PREFIX)
    }

    pub fn verdict(&self) -> &'static str {
        if self.passed {
            "pass"
        } else {
            "fail"
        }
    }

    /// A regular check must pass; a control must fail.
    pub fn as_expected(&self) -> bool {
        self.passed != self.is_control()
    }
}
