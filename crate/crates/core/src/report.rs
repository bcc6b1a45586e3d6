//! CSV tables and JSON summaries for comparison reports.
//!
//! CSVs are UTF-8 with LF line endings and `.` as decimal separator. Numbers are
//! printed in Rust's shortest round-trip form, so identical values give identical bytes.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::validation::{CheckKind, ComparisonReport};

pub const REPORT_HEADER: &str = "name,mc,se,analytic,tol,z,verdict";

pub fn write_reports_csv<W: Write>(reports: &[ComparisonReport], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.name,
            r.mc.value,
            r.mc.std_error,
            r.analytic,
            r.tol,
            r.z,
            r.verdict()
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub name: String,
    pub mc: f64,
    pub se: f64,
    pub analytic: f64,
    pub tol: f64,
    /// `null` when infinite.
    pub z: f64,
    pub p_value: f64,
    pub kind: CheckKind,
    pub verdict: &'static str,
    pub control: bool,
    pub replicates: usize,
    pub excluded: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    /// Regular checks that failed.
    pub failed_checks: usize,
    pub controls: usize,
    /// Every control failed, as it should.
    pub controls_ok: bool,
    /// Every regular check passed and every control failed.
    pub all_ok: bool,
    pub checks: Vec<CheckSummary>,
}

impl Summary {
    pub fn new(reports: &[ComparisonReport]) -> Self {
        let passed = reports.iter().filter(|r| r.passed).count();
        let controls = reports.iter().filter(|r| r.is_control()).count();
        let failed_checks = reports.iter().filter(|r| !r.is_control() && !r.passed).count();
        let controls_ok = reports.iter().filter(|r| r.is_control()).all(|r| !r.passed);
        Self {
            total: reports.len(),
            passed,
            failed: reports.len() - passed,
            failed_checks,
            controls,
            controls_ok,
            all_ok: reports.iter().all(|r| r.as_expected()),
            checks: reports
                .iter()
                .map(|r| CheckSummary {
                    name: r.name.clone(),
                    mc: r.mc.value,
                    se: r.mc.std_error,
                    analytic: r.analytic,
                    tol: r.tol,
                    z: r.z,
                    p_value: r.p_value,
                    kind: r.kind,
                    verdict: r.verdict(),
                    control: r.is_control(),
                    replicates: r.mc.replicates,
                    excluded: r.mc.excluded,
                    seed: r.mc.seed,
                })
                .collect(),
        }
    }
}

pub fn write_json<W: Write, T: Serialize>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}
