//! Versioned JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::measure::AgeMeasure;
use crate::model::{BranchingModel, ImmigrationMechanism};
use crate::sim::{SimConfig, DEFAULT_MAX_EVENTS};
use crate::solver::{Form, Quadrature, SolverGrid};
use crate::validation::{TestFunction, DEFAULT_QUADRATURE_INTERVALS};

pub const SCHEMA_VERSION: u32 = 1;

/// Checks run by the `validate` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Laplace,
    Mean,
    Extinction,
    Bounds,
    Martingale,
}

impl CheckName {
    pub const ALL: [CheckName; 5] = [
        CheckName::Laplace,
        CheckName::Mean,
        CheckName::Extinction,
        CheckName::Bounds,
        CheckName::Martingale,
    ];
}

fn default_checks() -> Vec<CheckName> {
    CheckName::ALL.to_vec()
}

fn default_test_functions() -> Vec<ScalarField> {
    vec![ScalarField::constant(1.0)]
}

fn default_replicates() -> usize {
    10_000
}

fn default_max_events() -> u64 {
    DEFAULT_MAX_EVENTS
}

fn default_snapshot_intervals() -> usize {
    DEFAULT_QUADRATURE_INTERVALS
}

fn default_table_ages() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 2.0]
}

fn default_horizons() -> Vec<f64> {
    vec![5.0, 10.0, 20.0]
}

fn default_stationary_tol() -> f64 {
    1e-7
}

fn default_dt() -> f64 {
    1e-3
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_control_shift() -> f64 {
    0.05
}

fn default_control_scale() -> f64 {
    1.05
}

fn default_generator() -> TestFunction {
    TestFunction::NegExp
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub quadrature: Quadrature,
    #[serde(default)]
    pub form: Form,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            quadrature: Quadrature::default(),
            form: Form::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSettings {
    #[serde(default = "default_checks")]
    pub checks: Vec<CheckName>,
    /// Outer function for the martingale check.
    #[serde(default = "default_generator")]
    pub generator: TestFunction,
    /// Shift applied to the analytic Laplace value in the negative control.
    #[serde(default = "default_control_shift")]
    pub control_shift: f64,
    /// Factor applied to the generator term in the martingale negative control.
    #[serde(default = "default_control_scale")]
    pub control_scale: f64,
}

impl Default for ValidateSettings {
    fn default() -> Self {
        Self {
            checks: default_checks(),
            generator: default_generator(),
            control_shift: default_control_shift(),
            control_scale: default_control_scale(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub model: BranchingModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub immigration: Option<ImmigrationMechanism>,
    /// Explicit ages of the initial population.
    pub initial: AgeMeasure,
    pub t_end: f64,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_events")]
    pub max_events: u64,
    /// Snapshot intervals for simulation output and the martingale time integral.
    #[serde(default = "default_snapshot_intervals")]
    pub snapshot_intervals: usize,
    /// Test functions `f`; the first one drives single-function commands.
    #[serde(default = "default_test_functions")]
    pub test_functions: Vec<ScalarField>,
    /// Ages at which solver tables are written.
    #[serde(default = "default_table_ages")]
    pub table_ages: Vec<f64>,
    /// Horizons of the ergodic convergence study.
    #[serde(default = "default_horizons")]
    pub ergodic_horizons: Vec<f64>,
    #[serde(default = "default_stationary_tol")]
    pub stationary_tol: f64,
    #[serde(default)]
    pub validate: ValidateSettings,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Configuration with defaults for everything but the model, initial state and horizon.
    pub fn new(model: BranchingModel, initial: AgeMeasure, t_end: f64) -> Self {
        Self {
            version: SCHEMA_VERSION,
            model,
            immigration: None,
            initial,
            t_end,
            solver: SolverSettings::default(),
            replicates: default_replicates(),
            seed: 0,
            max_events: default_max_events(),
            snapshot_intervals: default_snapshot_intervals(),
            test_functions: default_test_functions(),
            table_ages: default_table_ages(),
            ergodic_horizons: default_horizons(),
            stationary_tol: default_stationary_tol(),
            validate: ValidateSettings::default(),
            output_dir: default_output_dir(),
        }
    }

    /// Parses and validates; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<root>".into() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::config(
                "version",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.version),
            ));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::config("t_end", "must be positive and finite"));
        }
        if !(self.solver.dt.is_finite() && self.solver.dt > 0.0) {
            return Err(Error::config("solver.dt", "must be positive and finite"));
        }
        if self.replicates < 2 {
            return Err(Error::config("replicates", "need at least 2"));
        }
        if self.max_events == 0 {
            return Err(Error::config("max_events", "must be positive"));
        }
        if self.snapshot_intervals == 0 {
            return Err(Error::config("snapshot_intervals", "must be positive"));
        }
        if self.test_functions.is_empty() {
            return Err(Error::config("test_functions", "need at least one function"));
        }
        for (i, f) in self.test_functions.iter().enumerate() {
            f.validate()
                .map_err(|e| Error::config(format!("test_functions[{i}]"), e.to_string()))?;
            if f.inf() < 0.0 {
                return Err(Error::config(format!("test_functions[{i}]"), "must be nonnegative"));
            }
        }
        if let Some(i) = self.table_ages.iter().position(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::config(format!("table_ages[{i}]"), "ages must be finite and nonnegative"));
        }
        if let Some(i) = self
            .ergodic_horizons
            .iter()
            .position(|a| !(a.is_finite() && *a > 0.0))
        {
            return Err(Error::config(format!("ergodic_horizons[{i}]"), "must be positive and finite"));
        }
        if !(self.stationary_tol > 0.0 && self.stationary_tol.is_finite()) {
            return Err(Error::config("stationary_tol", "must be positive"));
        }
        if !(self.validate.control_shift.is_finite() && self.validate.control_shift != 0.0) {
            return Err(Error::config("validate.control_shift", "must be finite and nonzero"));
        }
        if !(self.validate.control_scale.is_finite() && self.validate.control_scale != 1.0) {
            return Err(Error::config("validate.control_scale", "must be finite and different from 1"));
        }
        if let Some(imm) = &self.immigration {
            imm.validate()
                .map_err(|e| Error::config("immigration", e.to_string()))?;
        }
        Ok(())
    }

    /// Primary test function.
    pub fn f(&self) -> &ScalarField {
        &self.test_functions[0]
    }

    /// Simulation config on `[0, t_end]` with `snapshot_intervals + 1` uniform snapshots.
    pub fn sim_config(&self) -> SimConfig {
        let mut c = SimConfig::new(self.model.clone(), self.initial.clone(), self.t_end)
            .with_seed(self.seed)
            .with_max_events(self.max_events)
            .with_uniform_snapshots(self.snapshot_intervals);
        c.immigration = self.immigration.clone();
        c
    }

    /// Solver grid on `[0, t_end]`, the step shrunk if needed so that it divides `t_end`.
    pub fn grid(&self) -> Result<SolverGrid> {
        let n = (self.t_end / self.solver.dt - 1e-9).ceil().max(1.0);
        SolverGrid::new(self.t_end / n, self.t_end)
            .map(|g| g.with_quadrature(self.solver.quadrature).with_form(self.solver.form))
    }

    pub fn immigration_or_none(&self) -> ImmigrationMechanism {
        self.immigration.clone().unwrap_or_else(ImmigrationMechanism::none)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OffspringLaw;

    const MINIMAL: &str = r#"{
        "version": 1,
        "model": {"alpha": {"kind": "constant", "value": 1.0},
                  "offspring": {"kind": "finite", "pmf": [0.5, 0.0, 0.5]}},
        "initial": [0.0],
        "t_end": 1.0
    }"#;

    #[test]
    fn minimal_parses_with_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.replicates, 10_000);
        assert_eq!(c.validate.checks.len(), 5);
        assert_eq!(c.f(), &ScalarField::constant(1.0));
        assert_eq!(c.grid().unwrap().steps(), 1000);
    }

    #[test]
    fn round_trip() {
        let m = BranchingModel::constant_rate(1.0, OffspringLaw::binary(0.5)).unwrap();
        let mut c = RunConfig::new(m, AgeMeasure::from_ages(vec![0.0, 1.5]).unwrap(), 2.0);
        c.immigration = Some(ImmigrationMechanism::single_immigrants(3.0, 0.0).unwrap());
        c.test_functions.push(ScalarField::exp_decay(1.0, 0.5, 0.1));
        let back = RunConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn field_level_errors() {
        let unknown = MINIMAL.replace("\"t_end\"", "\"t_ned\"");
        let e = RunConfig::from_json(&unknown).unwrap_err().to_string();
        assert!(e.contains("t_ned"), "{e}");
        let bad_pmf = MINIMAL.replace("[0.5, 0.0, 0.5]", "[0.5, 0.0, 0.6]");
        let e = RunConfig::from_json(&bad_pmf).unwrap_err().to_string();
        assert!(e.contains("`model`"), "{e}");
        let neg = MINIMAL.replace("\"t_end\": 1.0", "\"t_end\": -1.0");
        assert!(RunConfig::from_json(&neg).unwrap_err().to_string().contains("`t_end`"));
        let version = MINIMAL.replace("\"version\": 1", "\"version\": 7");
        assert!(RunConfig::from_json(&version).unwrap_err().to_string().contains("`version`"));
        let ages = MINIMAL.replace("\"initial\": [0.0]", "\"initial\": [-1.0]");
        assert!(RunConfig::from_json(&ages).unwrap_err().to_string().contains("`initial`"));
    }

    #[test]
    fn grid_fits_horizon() {
        let m = BranchingModel::constant_rate(1.0, OffspringLaw::binary(0.5)).unwrap();
        let mut c = RunConfig::new(m, AgeMeasure::empty(), 1.0);
        c.solver.dt = 0.3;
        let g = c.grid().unwrap();
        assert_eq!(g.steps(), 4);
    }
}
