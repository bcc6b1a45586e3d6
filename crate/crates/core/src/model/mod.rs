//! The branching model: death-rate field, offspring law, immigration, and the
//! constants `c₀`, `c₁`, `β` that drive every growth bound.

mod immigration;
mod offspring;
mod series;

pub use immigration::{
    GroupLaw, GroupSampler, GroupSizeLaw, ImmigrationMechanism, LogMoment, MemberAgeLaw,
    WeightedGroup,
};
pub use offspring::OffspringLaw;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Death rate `α` together with the offspring law `p(x, ·)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct BranchingModel {
    alpha: ScalarField,
    offspring: OffspringLaw,
    constants: ModelConstants,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRepr {
    alpha: ScalarField,
    offspring: OffspringLaw,
}

impl TryFrom<ModelRepr> for BranchingModel {
    type Error = Error;

    fn try_from(r: ModelRepr) -> Result<Self> {
        BranchingModel::new(r.alpha, r.offspring)
    }
}

impl From<BranchingModel> for ModelRepr {
    fn from(m: BranchingModel) -> Self {
        ModelRepr {
            alpha: m.alpha,
            offspring: m.offspring,
        }
    }
}

/// `c₀ = sup α(m−1)`, `c₁ = sup α`, `β = sup α·m`, plus `inf α` for reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub c0: f64,
    pub c1: f64,
    pub beta: f64,
    pub alpha_inf: f64,
}

impl BranchingModel {
    pub fn new(alpha: ScalarField, offspring: OffspringLaw) -> Result<Self> {
        alpha.validate()?;
        offspring.validate()?;
        let (alpha_inf, c1) = alpha.range_on(0.0, f64::INFINITY);
        if alpha_inf <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "death rate must be bounded away from zero, inf alpha = {alpha_inf}"
            )));
        }
        let mut c0 = f64::NEG_INFINITY;
        let mut beta = f64::NEG_INFINITY;
        for (a, b, law) in offspring.regimes() {
            let m = law.mean(a);
            if !m.is_finite() {
                return Err(Error::InvalidModel("offspring mean must be finite".into()));
            }
            let (lo, hi) = alpha.range_on(a, b);
            c0 = c0.max(if m >= 1.0 { (m - 1.0) * hi } else { (m - 1.0) * lo });
            beta = beta.max(m * hi);
        }
        Ok(Self {
            alpha,
            offspring,
            constants: ModelConstants {
                c0,
                c1,
                beta,
                alpha_inf,
            },
        })
    }

    /// Constant rate `rate` with the age-independent `offspring` law.
    pub fn constant_rate(rate: f64, offspring: OffspringLaw) -> Result<Self> {
        Self::new(ScalarField::constant(rate), offspring)
    }

    pub fn alpha(&self) -> &ScalarField {
        &self.alpha
    }

    pub fn offspring(&self) -> &OffspringLaw {
        &self.offspring
    }

    pub fn constants(&self) -> ModelConstants {
        self.constants
    }

    pub fn g_eval(&self, x: f64, z: f64) -> Result<f64> {
        self.offspring.pgf(x, z)
    }

    pub fn mean_eval(&self, x: f64) -> f64 {
        self.offspring.mean(x)
    }

    /// Whether `α` is constant and the offspring law ignores age.
    pub fn is_age_independent(&self) -> bool {
        self.alpha.as_constant().is_some()
            && !matches!(self.offspring, OffspringLaw::Regimes { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_examples() {
        let crit = BranchingModel::constant_rate(1.0, OffspringLaw::binary(0.5)).unwrap();
        let c = crit.constants();
        assert_eq!((c.c0, c.c1, c.beta), (0.0, 1.0, 1.0));

        let sub = BranchingModel::constant_rate(1.0, OffspringLaw::binary(0.6)).unwrap();
        let c = sub.constants();
        assert!((c.c0 + 0.2).abs() < 1e-15 && c.c1 == 1.0 && (c.beta - 0.8).abs() < 1e-15);

        let death = BranchingModel::constant_rate(2.0, OffspringLaw::pure_death()).unwrap();
        let c = death.constants();
        assert_eq!((c.c0, c.c1, c.beta), (-2.0, 2.0, 0.0));
    }

    #[test]
    fn constants_over_regimes() {
        // alpha ramps 2 -> 1 on [0,1]; offspring mean 1.4 before age 1, 0 after
        let model = BranchingModel::new(
            ScalarField::ramp(0.0, 1.0, 2.0, 1.0),
            OffspringLaw::Regimes {
                thresholds: vec![1.0],
                laws: vec![OffspringLaw::binary(0.3), OffspringLaw::pure_death()],
            },
        )
        .unwrap();
        let c = model.constants();
        assert!((c.c0 - 0.4 * 2.0).abs() < 1e-15);
        assert!((c.beta - 1.4 * 2.0).abs() < 1e-15);
        assert_eq!(c.c1, 2.0);
        assert!(c.c0 <= c.beta && c.c1 >= c.alpha_inf && c.alpha_inf > 0.0);
    }

    #[test]
    fn subcritical_regime_uses_inf_alpha() {
        // mean < 1 everywhere: sup of alpha·(m−1) sits where alpha is smallest
        let model = BranchingModel::new(
            ScalarField::exp_decay(1.0, 1.0, 0.5),
            OffspringLaw::binary(0.6),
        )
        .unwrap();
        assert!((model.constants().c0 - (-0.2 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn alpha_must_be_bounded_away_from_zero() {
        let err = BranchingModel::new(ScalarField::exp_decay(1.0, 1.0, 0.0), OffspringLaw::pure_death());
        assert!(matches!(err, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn serde_round_trip_recomputes_constants() {
        let json = r#"{"alpha":{"kind":"constant","value":1.0},"offspring":{"kind":"finite","pmf":[0.6,0.0,0.4]}}"#;
        let m: BranchingModel = serde_json::from_str(json).unwrap();
        assert!((m.constants().c0 + 0.2).abs() < 1e-15);
        let back: BranchingModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
