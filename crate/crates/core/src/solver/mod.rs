//! Deterministic numerics along characteristics.
//!
//! Both the cumulant `u_t f` and the first moment `π_t f` couple values only along
//! rays `x + t = const` and through the trace at age zero. The trace is marched
//! forward once; every other `(t, x)` is a one-dimensional march along its own ray.

mod bounds;
mod characteristics;
mod identity;
mod stationary;

pub use bounds::{check_bounds, survival_lower_bound, BoundCheck, BoundViolation};
pub use characteristics::{solve_pi, solve_u, solve_u_with, CumulantSolution, MomentSolution};
pub use identity::{ein, elementary_identity_check};
pub use stationary::{
    ergodicity_check, immigration_mean, immigration_mean_of, psi_integral, psi_integral_of,
    stationary_laplace, Ergodicity, ErgodicityReport, StationaryValue,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quadrature for the source term over one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// Left-point rule, first order, explicit.
    Rectangle,
    /// End-point average, second order, implicit at the boundary.
    #[default]
    Trapezoid,
}

/// How the decay term `−α V` is discretised along a ray.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    /// Decay integrated exactly through the factor `exp(−∫α)`; only the source is
    /// approximated.
    #[default]
    Renewal,
    /// Decay and source both handled by the chosen quadrature.
    Transport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverGrid {
    pub dt: f64,
    pub t_max: f64,
    #[serde(default)]
    pub quadrature: Quadrature,
    #[serde(default)]
    pub form: Form,
}

impl SolverGrid {
    /// Trapezoid, renewal form.
    pub fn new(dt: f64, t_max: f64) -> Result<Self> {
        let g = Self {
            dt,
            t_max,
            quadrature: Quadrature::Trapezoid,
            form: Form::Renewal,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_quadrature(mut self, q: Quadrature) -> Self {
        self.quadrature = q;
        self
    }

    pub fn with_form(mut self, form: Form) -> Self {
        self.form = form;
        self
    }

    /// Same scheme on a different horizon; the horizon is rounded up to a whole step.
    pub fn with_horizon(mut self, t_max: f64) -> Self {
        self.t_max = (t_max / self.dt - 1e-9).ceil().max(1.0) * self.dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Domain {
                what: "dt",
                value: self.dt,
                domain: "(0, inf)",
            });
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::Domain {
                what: "horizon",
                value: self.t_max,
                domain: "(0, inf)",
            });
        }
        let n = (self.t_max / self.dt).round();
        if n < 1.0 || (n * self.dt - self.t_max).abs() > 1e-9 * self.t_max {
            return Err(Error::Domain {
                what: "horizon / dt",
                value: self.t_max / self.dt,
                domain: "positive integers",
            });
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn order(&self) -> u32 {
        match self.quadrature {
            Quadrature::Rectangle => 1,
            Quadrature::Trapezoid => 2,
        }
    }
}
