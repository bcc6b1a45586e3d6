use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tail mass below which infinite-support sums are truncated.
const TAIL_EPS: f64 = 1e-17;

/// Age-dependent offspring law `p(x, ·)` from a catalog with closed-form
/// generating functions and means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OffspringLaw {
    /// `pmf[k]` = probability of `k` offspring.
    Finite { pmf: Vec<f64> },
    /// `P(k) = (1 − ratio)·ratio^k`, `k ≥ 0`.
    Geometric { ratio: f64 },
    Poisson { mean: f64 },
    /// `laws[i]` applies to parents dying with age in `[thresholds[i-1], thresholds[i])`.
    Regimes {
        thresholds: Vec<f64>,
        laws: Vec<OffspringLaw>,
    },
}

impl OffspringLaw {
    pub fn finite(pmf: Vec<f64>) -> Self {
        OffspringLaw::Finite { pmf }
    }

    /// `{0: 1}`.
    pub fn pure_death() -> Self {
        OffspringLaw::Finite { pmf: vec![1.0] }
    }

    /// `{0: q0, 2: 1 − q0}`.
    pub fn binary(q0: f64) -> Self {
        OffspringLaw::Finite {
            pmf: vec![q0, 0.0, 1.0 - q0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(m));
        match self {
            OffspringLaw::Finite { pmf } => {
                if pmf.is_empty() || pmf.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return bad("finite pmf needs nonnegative finite entries".into());
                }
                let total: f64 = pmf.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("finite pmf sums to {total}, expected 1"));
                }
                Ok(())
            }
            OffspringLaw::Geometric { ratio } => {
                if (0.0..1.0).contains(ratio) {
                    Ok(())
                } else {
                    bad(format!("geometric ratio must lie in [0, 1), got {ratio}"))
                }
            }
            OffspringLaw::Poisson { mean } => {
                if mean.is_finite() && *mean >= 0.0 {
                    Ok(())
                } else {
                    bad(format!("poisson mean must be finite and nonnegative, got {mean}"))
                }
            }
            OffspringLaw::Regimes { thresholds, laws } => {
                if laws.len() != thresholds.len() + 1 {
                    return bad("regimes need one more law than thresholds".into());
                }
                if thresholds.iter().any(|t| !(t.is_finite() && *t > 0.0))
                    || thresholds.windows(2).any(|w| w[0] >= w[1])
                {
                    return bad("regime thresholds must be positive and strictly increasing".into());
                }
                for law in laws {
                    if matches!(law, OffspringLaw::Regimes { .. }) {
                        return bad("regimes cannot be nested".into());
                    }
                    law.validate()?;
                }
                Ok(())
            }
        }
    }

    /// The age-independent law in force at age `x`.
    pub fn law_at(&self, x: f64) -> &OffspringLaw {
        match self {
            OffspringLaw::Regimes { thresholds, laws } => {
                &laws[thresholds.partition_point(|t| *t <= x)]
            }
            other => other,
        }
    }

    /// Age intervals `[a, b)` on which the law is constant, with that law.
    pub fn regimes(&self) -> Vec<(f64, f64, &OffspringLaw)> {
        match self {
            OffspringLaw::Regimes { thresholds, laws } => {
                let mut edges = Vec::with_capacity(thresholds.len() + 2);
                edges.push(0.0);
                edges.extend_from_slice(thresholds);
                edges.push(f64::INFINITY);
                edges
                    .windows(2)
                    .zip(laws)
                    .map(|(w, law)| (w[0], w[1], law))
                    .collect()
            }
            other => vec![(0.0, f64::INFINITY, other)],
        }
    }

    /// Generating function `g(x, z) = Σ p(x,k) z^k` for `z ∈ [0, 1]`.
    pub fn pgf(&self, x: f64, z: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::Domain {
                what: "z",
                value: z,
                domain: "[0, 1]",
            });
        }
        Ok(self.pgf_unchecked(x, z))
    }

    pub(crate) fn pgf_unchecked(&self, x: f64, z: f64) -> f64 {
        match self.law_at(x) {
            OffspringLaw::Finite { pmf } => pmf.iter().rev().fold(0.0, |acc, p| acc * z + p),
            OffspringLaw::Geometric { ratio } => (1.0 - ratio) / (1.0 - ratio * z),
            OffspringLaw::Poisson { mean } => (mean * (z - 1.0)).exp(),
            OffspringLaw::Regimes { .. } => unreachable!("validated: regimes are not nested"),
        }
    }

    /// Mean offspring number `g'(x, 1−)`.
    pub fn mean(&self, x: f64) -> f64 {
        match self.law_at(x) {
            OffspringLaw::Finite { pmf } => {
                pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
            }
            OffspringLaw::Geometric { ratio } => ratio / (1.0 - ratio),
            OffspringLaw::Poisson { mean } => *mean,
            OffspringLaw::Regimes { .. } => unreachable!("validated: regimes are not nested"),
        }
    }

    pub fn pmf(&self, x: f64, k: u64) -> f64 {
        match self.law_at(x) {
            OffspringLaw::Finite { pmf } => pmf.get(k as usize).copied().unwrap_or(0.0),
            OffspringLaw::Geometric { ratio } => (1.0 - ratio) * ratio.powi(k as i32),
            OffspringLaw::Poisson { mean } => poisson_pmf(*mean, k),
            OffspringLaw::Regimes { .. } => unreachable!("validated: regimes are not nested"),
        }
    }

    /// `Σ_k p(x,k)·h(k)`, truncating infinite supports once the remaining mass is below 1e-17.
    pub fn expect(&self, x: f64, mut h: impl FnMut(u64) -> f64) -> f64 {
        match self.law_at(x) {
            OffspringLaw::Finite { pmf } => pmf
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(k, p)| p * h(k as u64))
                .sum(),
            law => {
                let mut acc = 0.0;
                let mut cum = 0.0;
                let mean = law.mean(x);
                let mut k = 0u64;
                loop {
                    let p = law.pmf(x, k);
                    acc += p * h(k);
                    cum += p;
                    if 1.0 - cum < TAIL_EPS && k as f64 > mean || p == 0.0 && k as f64 > mean {
                        break;
                    }
                    k += 1;
                }
                acc
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> u64 {
        match self.law_at(x) {
            OffspringLaw::Finite { pmf } => {
                let u: f64 = rng.random();
                let mut cum = 0.0;
                for (k, p) in pmf.iter().enumerate() {
                    cum += p;
                    if u < cum {
                        return k as u64;
                    }
                }
                // rounding: fall back to the last charged atom
                pmf.iter().rposition(|p| *p > 0.0).unwrap_or(0) as u64
            }
            OffspringLaw::Geometric { ratio } => {
                if *ratio == 0.0 {
                    return 0;
                }
                let u: f64 = 1.0 - rng.random::<f64>();
                (u.ln() / ratio.ln()).floor() as u64
            }
            OffspringLaw::Poisson { mean } => {
                if *mean == 0.0 {
                    0
                } else {
                    Poisson::new(*mean).expect("validated mean").sample(rng) as u64
                }
            }
            OffspringLaw::Regimes { .. } => unreachable!("validated: regimes are not nested"),
        }
    }
}

fn poisson_pmf(mean: f64, k: u64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    (kf * mean.ln() - mean - ln_factorial(k)).exp()
}

fn ln_factorial(k: u64) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}
