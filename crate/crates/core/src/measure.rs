//! Finite integer-valued measures on the half line, stored as sorted particle ages.
//!
//! A measure `ν` is identified with its right-continuous distribution function
//! `x ↦ ν[0, x]`. All operations here are exact finite sums over atoms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// A finite multiset of nonnegative ages, kept sorted non-decreasing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AgeMeasure {
    ages: Vec<f64>,
}

impl TryFrom<Vec<f64>> for AgeMeasure {
    type Error = Error;

    fn try_from(ages: Vec<f64>) -> Result<Self> {
        AgeMeasure::from_ages(ages)
    }
}

impl From<AgeMeasure> for Vec<f64> {
    fn from(m: AgeMeasure) -> Self {
        m.ages
    }
}

impl AgeMeasure {
    /// The null measure.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a measure from unsorted ages. Rejects negative or non-finite ages.
    pub fn from_ages(mut ages: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = ages.iter().find(|a| !a.is_finite() || **a < 0.0) {
            return Err(Error::Domain {
                what: "age",
                value: bad,
                domain: "[0, inf)",
            });
        }
        ages.sort_by(f64::total_cmp);
        Ok(Self { ages })
    }

    /// `n` particles all of age `age`.
    pub fn repeated(age: f64, n: usize) -> Result<Self> {
        Self::from_ages(vec![age; n])
    }

    /// Builds from ages the caller guarantees are sorted, finite and nonnegative.
    pub(crate) fn from_sorted_unchecked(ages: Vec<f64>) -> Self {
        debug_assert!(ages.windows(2).all(|w| w[0] <= w[1]));
        debug_assert!(ages.iter().all(|a| *a >= 0.0));
        Self { ages }
    }

    pub fn ages(&self) -> &[f64] {
        &self.ages
    }

    pub fn total_mass(&self) -> usize {
        self.ages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ages.is_empty()
    }

    /// Inserts one particle, keeping the ages sorted.
    pub fn insert(&mut self, age: f64) -> Result<()> {
        if !age.is_finite() || age < 0.0 {
            return Err(Error::Domain {
                what: "age",
                value: age,
                domain: "[0, inf)",
            });
        }
        let at = self.ages.partition_point(|a| *a <= age);
        self.ages.insert(at, age);
        Ok(())
    }

    /// Removes one particle of exactly this age. Returns whether one was found.
    pub fn remove_one(&mut self, age: f64) -> bool {
        match self.ages.binary_search_by(|a| a.total_cmp(&age)) {
            Ok(i) => {
                self.ages.remove(i);
                true
            }
            Err(_) => false,
        }
    }

    /// Adds all atoms of `other` to `self`.
    pub fn add(&mut self, other: &AgeMeasure) {
        self.ages.extend_from_slice(&other.ages);
        self.ages.sort_by(f64::total_cmp);
    }

    /// `⟨ν, f⟩ = Σ f(age)`.
    pub fn integrate(&self, f: &ScalarField) -> f64 {
        self.ages.iter().fold(0.0, |acc, &a| acc + f.eval(a))
    }

    /// `⟨ν, h⟩` for an arbitrary function of age.
    pub fn integrate_with(&self, h: impl Fn(f64) -> f64) -> f64 {
        self.ages.iter().fold(0.0, |acc, &a| acc + h(a))
    }

    /// Distribution function `ν[0, x]`; zero for `x < 0`.
    pub fn dist_fn(&self, x: f64) -> usize {
        if x < 0.0 {
            return 0;
        }
        self.ages.partition_point(|a| *a <= x)
    }

    /// The α-weighted distribution function `∫_{[0,x]} α dν`.
    pub fn alpha_dist_fn(&self, alpha: &ScalarField, x: f64) -> f64 {
        self.ages
            .iter()
            .take_while(|a| **a <= x)
            .fold(0.0, |acc, &a| acc + alpha.eval(a))
    }

    /// `inf{z ≥ 0 : ⟨ν,α⟩⁻¹ ∫_{[0,z]} α dν > y}` for `y ∈ [0, 1)`.
    ///
    /// With `y` uniform, the returned atom `a` has probability `α(a)·mult(a)/⟨ν,α⟩`.
    pub fn alpha_weighted_inverse(&self, alpha: &ScalarField, y: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        if !(0.0..1.0).contains(&y) {
            return Err(Error::Domain {
                what: "y",
                value: y,
                domain: "[0, 1)",
            });
        }
        let total = self.integrate(alpha);
        let (_, age) = weighted_pick(self.ages.iter().copied(), alpha, y * total)
            .unwrap_or((self.ages.len() - 1, *self.ages.last().unwrap()));
        Ok(age)
    }

    /// Ages every particle by `t`.
    pub fn shift(&self, t: f64) -> Result<AgeMeasure> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Domain {
                what: "shift",
                value: t,
                domain: "[0, inf)",
            });
        }
        Ok(Self {
            ages: self.ages.iter().map(|a| a + t).collect(),
        })
    }

    /// `ρ(ν₁, ν₂) = ∫₀^∞ e^{-x} |ν₁(x) − ν₂(x)| dx`, evaluated in closed form.
    pub fn rho_distance(&self, other: &AgeMeasure) -> f64 {
        // Both distribution functions are constant on [p_i, p_{i+1}) between merged atoms.
        let (a, b) = (&self.ages, &other.ages);
        let (mut i, mut j) = (0usize, 0usize);
        let mut acc = 0.0;
        let mut prev: Option<f64> = None;
        let mut diff: i64 = 0;
        while i < a.len() || j < b.len() {
            let next = match (a.get(i), b.get(j)) {
                (Some(&x), Some(&y)) => x.min(y),
                (Some(&x), None) => x,
                (None, Some(&y)) => y,
                (None, None) => unreachable!(),
            };
            if let Some(p) = prev {
                if diff != 0 && next > p {
                    acc += diff.unsigned_abs() as f64 * ((-p).exp() - (-next).exp());
                }
            }
            while i < a.len() && a[i] == next {
                diff += 1;
                i += 1;
            }
            while j < b.len() && b[j] == next {
                diff -= 1;
                j += 1;
            }
            prev = Some(next);
        }
        if let Some(p) = prev {
            acc += diff.unsigned_abs() as f64 * (-p).exp();
        }
        acc
    }
}

/// Walks `ages` in order accumulating `α(age)` and returns the index and age of the
/// first particle at which the running sum exceeds `target`; `None` if it never does.
pub(crate) fn weighted_pick(
    ages: impl Iterator<Item = f64>,
    alpha: &ScalarField,
    target: f64,
) -> Option<(usize, f64)> {
    let mut cum = 0.0;
    for (i, a) in ages.enumerate() {
        cum += alpha.eval(a);
        if cum > target {
            return Some((i, a));
        }
    }
    None
}
