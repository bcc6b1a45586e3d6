//! Immigration functionals of the semigroups, the ergodicity decision and the
//! certified stationary Laplace transform.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::Serialize;

use super::{solve_pi, solve_u, CumulantSolution, MomentSolution, Quadrature, SolverGrid};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::model::{BranchingModel, ImmigrationMechanism, LogMoment};
use crate::quadrature::trapezoid_sum;

const PSI_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Ergodicity {
    Ergodic,
    NotErgodic,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicityReport {
    pub verdict: Ergodicity,
    pub c0: f64,
    pub log_moment: LogMoment,
    pub reason: String,
}

/// Ergodic iff `c₀ < 0` and `∫ log⁺⟨ν,1⟩ L(dν) < ∞`; not ergodic when `c₀ < 0` and
/// the log moment diverges; unknown otherwise.
pub fn ergodicity_check(model: &BranchingModel, imm: &ImmigrationMechanism) -> ErgodicityReport {
    let c0 = model.constants().c0;
    let log_moment = imm.log_moment_criterion();
    let (verdict, reason) = match (c0 < 0.0, log_moment) {
        (false, _) => (
            Ergodicity::Unknown,
            format!("c0 = {c0} is not negative; the criterion does not apply"),
        ),
        (true, LogMoment::Finite(v)) => (
            Ergodicity::Ergodic,
            format!("c0 = {c0} < 0 and the log moment is finite ({v})"),
        ),
        (true, LogMoment::Infinite) => (
            Ergodicity::NotErgodic,
            format!("c0 = {c0} < 0 but the log moment of the group size diverges"),
        ),
        (true, LogMoment::Unknown) => (
            Ergodicity::Unknown,
            "the log moment of the group law is not certified".to_string(),
        ),
    };
    ErgodicityReport {
        verdict,
        c0,
        log_moment,
        reason,
    }
}

/// Lazily computed rows `s_j ↦ value(s_j, a)` keyed by age.
struct Rows<'a> {
    row: Box<dyn Fn(f64) -> Vec<f64> + 'a>,
    cache: RefCell<HashMap<u64, Vec<f64>>>,
}

impl<'a> Rows<'a> {
    fn new(row: impl Fn(f64) -> Vec<f64> + 'a) -> Self {
        Self {
            row: Box::new(row),
            cache: RefCell::new(HashMap::new()),
        }
    }

    fn at(&self, age: f64, j: usize) -> f64 {
        let key = age.to_bits();
        if let Some(r) = self.cache.borrow().get(&key) {
            return r[j];
        }
        let r = (self.row)(age);
        let v = r[j];
        self.cache.borrow_mut().insert(key, r);
        v
    }
}

fn integrate_grid(values: &[f64], grid: &SolverGrid) -> f64 {
    match grid.quadrature {
        Quadrature::Trapezoid => trapezoid_sum(values, grid.dt),
        Quadrature::Rectangle => grid.dt * values[..values.len() - 1].iter().sum::<f64>(),
    }
}

/// `∫₀^T ψ(u_s f) ds` over the whole horizon of `sol`.
pub fn psi_integral_of(sol: &CumulantSolution, imm: &ImmigrationMechanism) -> Result<f64> {
    if !imm.is_active() {
        return Ok(0.0);
    }
    let rows = Rows::new(|a| sol.row_at_age(a));
    let n = sol.grid().steps();
    let values = (0..=n)
        .map(|j| imm.psi_of(&|a| rows.at(a, j), PSI_TOL))
        .collect::<Result<Vec<_>>>()?;
    Ok(integrate_grid(&values, sol.grid()))
}

/// `∫₀ᵗ ψ(u_s f) ds`; `t` must be a whole number of steps of `grid.dt`.
pub fn psi_integral(
    model: &BranchingModel,
    imm: &ImmigrationMechanism,
    f: &ScalarField,
    t: f64,
    grid: &SolverGrid,
) -> Result<f64> {
    if !imm.is_active() {
        return Ok(0.0);
    }
    let g = SolverGrid { t_max: t, ..*grid };
    psi_integral_of(&solve_u(model, f, &g)?, imm)
}

/// `∫₀^T ∫⟨ν, π_s f⟩ L(dν) ds` over the whole horizon of `sol`: the mean mass
/// contributed by immigrants.
pub fn immigration_mean_of(sol: &MomentSolution, imm: &ImmigrationMechanism) -> Result<f64> {
    if !imm.is_active() {
        return Ok(0.0);
    }
    let rows = Rows::new(|a| sol.row_at_age(a));
    let n = sol.grid().steps();
    let values = (0..=n)
        .map(|j| imm.linear_functional(&|a| rows.at(a, j)))
        .collect::<Result<Vec<_>>>()?;
    Ok(integrate_grid(&values, sol.grid()))
}

/// `∫₀ᵗ ∫⟨ν, π_s f⟩ L(dν) ds`.
pub fn immigration_mean(
    model: &BranchingModel,
    imm: &ImmigrationMechanism,
    f: &ScalarField,
    t: f64,
    grid: &SolverGrid,
) -> Result<f64> {
    if !imm.is_active() {
        return Ok(0.0);
    }
    let g = SolverGrid { t_max: t, ..*grid };
    immigration_mean_of(&solve_pi(model, f, &g)?, imm)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryValue {
    /// `exp{−∫₀^∞ ψ(u_s f) ds}`.
    pub value: f64,
    /// Upper bound on the neglected `∫_T^∞ ψ(u_s f) ds`.
    pub tail_bound: f64,
    /// Richardson estimate of the quadrature error on `[0, T]`.
    pub quadrature_error: f64,
    pub horizon: f64,
    pub dt: f64,
}

const MAX_LEVELS: usize = 8;

/// Certified `exp{−∫₀^∞ ψ(u_s f) ds}`. The horizon `T` is chosen so that
/// `Λ₁ ‖f‖ e^{c₀T}/|c₀| < tol/2` with `Λ₁ = ∫⟨ν,1⟩L(dν)`, and `dt` is halved until
/// successive Richardson extrapolants differ by less than `tol/2`.
pub fn stationary_laplace(
    model: &BranchingModel,
    imm: &ImmigrationMechanism,
    f: &ScalarField,
    tol: f64,
) -> Result<StationaryValue> {
    let report = ergodicity_check(model, imm);
    if report.verdict != Ergodicity::Ergodic {
        return Err(Error::NotCertifiedErgodic(report.reason));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain {
            what: "tolerance",
            value: tol,
            domain: "(0, inf)",
        });
    }
    f.validate()?;
    let f_sup = f.sup();
    if !imm.is_active() || f_sup == 0.0 {
        return Ok(StationaryValue {
            value: 1.0,
            tail_bound: 0.0,
            quadrature_error: 0.0,
            horizon: 0.0,
            dt: 0.0,
        });
    }
    let lambda1 = imm.mass_intensity().ok_or_else(|| {
        Error::Unsupported("the tail bound needs a finite mean immigrant mass".into())
    })?;
    let c = model.constants();
    let rate = -c.c0;
    let dt0 = 0.05f64.min(0.25 / c.c1);
    let t_raw = ((2.0 * lambda1 * f_sup / (rate * tol)).ln() / rate).max(1.0);
    let base = SolverGrid::new(dt0, dt0).expect("positive step").with_horizon(t_raw);
    let horizon = base.t_max;
    let tail_bound = lambda1 * f_sup * (c.c0 * horizon).exp() / rate;

    let order_factor = (1u32 << base.order()) as f64;
    let mut integrals = Vec::new();
    let mut extrapolants: Vec<f64> = Vec::new();
    let mut dt = dt0;
    for _ in 0..MAX_LEVELS {
        let grid = SolverGrid { dt, ..base };
        integrals.push(psi_integral(model, imm, f, horizon, &grid)?);
        if let [.., coarse, fine] = integrals[..] {
            extrapolants.push((order_factor * fine - coarse) / (order_factor - 1.0));
        }
        if let [.., prev, last] = extrapolants[..] {
            let err = (last - prev).abs();
            if err < tol / 2.0 {
                return Ok(StationaryValue {
                    value: (-last).exp(),
                    tail_bound,
                    quadrature_error: err,
                    horizon,
                    dt,
                });
            }
        }
        dt /= 2.0;
    }
    Err(Error::Truncation(format!(
        "stationary quadrature did not reach tolerance {tol:e} after {MAX_LEVELS} halvings"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GroupSizeLaw, MemberAgeLaw, OffspringLaw};

    fn death() -> BranchingModel {
        BranchingModel::constant_rate(1.0, OffspringLaw::pure_death()).unwrap()
    }

    #[test]
    fn ergodicity_examples() {
        let sub = BranchingModel::constant_rate(1.0, OffspringLaw::binary(0.6)).unwrap();
        let crit = BranchingModel::constant_rate(1.0, OffspringLaw::binary(0.5)).unwrap();
        let single = ImmigrationMechanism::single_immigrants(1.0, 0.0).unwrap();
        assert_eq!(ergodicity_check(&sub, &single).verdict, Ergodicity::Ergodic);
        assert_eq!(ergodicity_check(&crit, &single).verdict, Ergodicity::Unknown);
        let heavy = ImmigrationMechanism::parametric(
            1.0,
            GroupSizeLaw::LogPower { power: 2.0 },
            MemberAgeLaw::Point { age: 0.0 },
        )
        .unwrap();
        assert_eq!(ergodicity_check(&sub, &heavy).verdict, Ergodicity::NotErgodic);
    }

    #[test]
    fn psi_integral_pure_death() {
        let imm = ImmigrationMechanism::single_immigrants(1.0, 0.0).unwrap();
        let grid = SolverGrid::new(1e-3, 3.0).unwrap();
        let theta = 0.8;
        let v = psi_integral(&death(), &imm, &ScalarField::constant(theta), 3.0, &grid).unwrap();
        let want = (1.0 - (-theta).exp()) * (1.0 - (-3.0f64).exp());
        assert!((v - want).abs() < 1e-7, "{v} {want}");
        assert_eq!(psi_integral(&death(), &imm, &ScalarField::constant(0.0), 3.0, &grid).unwrap(), 0.0);
        let none = ImmigrationMechanism::none();
        assert_eq!(psi_integral(&death(), &none, &ScalarField::constant(1.0), 3.0, &grid).unwrap(), 0.0);
    }

    #[test]
    fn psi_integral_aged_immigrants() {
        // immigrants of age 2 in pure death: u_s f(2) is constant-data, same closed form
        let imm = ImmigrationMechanism::single_immigrants(1.0, 2.0).unwrap();
        let grid = SolverGrid::new(1e-2, 2.0).unwrap();
        let v = psi_integral(&death(), &imm, &ScalarField::constant(1.0), 2.0, &grid).unwrap();
        let want = (1.0 - (-1f64).exp()) * (1.0 - (-2.0f64).exp());
        assert!((v - want).abs() < 1e-5);
    }

    #[test]
    fn stationary_mm_infinity() {
        let imm = ImmigrationMechanism::single_immigrants(3.0, 0.0).unwrap();
        let s = stationary_laplace(&death(), &imm, &ScalarField::constant(1.0), 1e-7).unwrap();
        let want = (-3.0 * (1.0 - (-1f64).exp())).exp();
        assert!((s.value - want).abs() < 1e-7, "{} {want}", s.value);
        assert!(s.tail_bound < 5e-8);
        let zero = stationary_laplace(&death(), &imm, &ScalarField::constant(0.0), 1e-7).unwrap();
        assert_eq!(zero.value, 1.0);
    }

    #[test]
    fn stationary_refuses_uncertified() {
        let crit = BranchingModel::constant_rate(1.0, OffspringLaw::binary(0.5)).unwrap();
        let imm = ImmigrationMechanism::single_immigrants(1.0, 0.0).unwrap();
        assert!(matches!(
            stationary_laplace(&crit, &imm, &ScalarField::constant(1.0), 1e-6),
            Err(Error::NotCertifiedErgodic(_))
        ));
    }

    #[test]
    fn immigration_mean_subcritical() {
        // E X_t(∞) from unit immigration at rate 1 = ∫₀ᵗ e^{-0.2 s} ds
        let sub = BranchingModel::constant_rate(1.0, OffspringLaw::binary(0.6)).unwrap();
        let imm = ImmigrationMechanism::single_immigrants(1.0, 0.0).unwrap();
        let grid = SolverGrid::new(1e-2, 5.0).unwrap();
        let v = immigration_mean(&sub, &imm, &ScalarField::constant(1.0), 5.0, &grid).unwrap();
        let want = (1.0 - (-1.0f64).exp()) / 0.2;
        assert!((v - want).abs() < 1e-5, "{v} {want}");
    }
}
