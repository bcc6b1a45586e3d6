//! Immigration mechanisms: a finite measure `L` on nonempty populations, held both
//! analytically (for `ψ` and the log-moment criterion) and generatively (for sampling).

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Zeta};
use serde::{Deserialize, Serialize};

use super::series::Summand;
use crate::error::{Error, Result};
use crate::measure::AgeMeasure;
use crate::quadrature::gauss_legendre;

/// Largest group the sampler will materialise.
pub const MAX_GROUP_SIZE: u64 = 10_000_000;

/// Status of `∫ 1{⟨ν,1⟩ ≥ 1} log⟨ν,1⟩ L(dν)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum LogMoment {
    Finite(f64),
    Infinite,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGroup {
    pub weight: f64,
    pub ages: AgeMeasure,
}

/// Law of the number of members in a group, on `k ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupSizeLaw {
    /// `pmf[i]` = probability of `i + 1` members.
    Finite { pmf: Vec<f64> },
    /// `∝ k^{-exponent}` on `k ≥ 1`, `exponent > 1`.
    Zeta { exponent: f64 },
    /// `∝ 1/(k (ln k)^power)` on `k ≥ 2`, `power > 1`.
    LogPower { power: f64 },
}

/// Law of each member's age; members are i.i.d. given the group size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MemberAgeLaw {
    Point { age: f64 },
    Uniform { low: f64, high: f64 },
}

/// User-supplied group law. Without analytic descriptors the criterion stays unknown.
pub trait GroupSampler: Send + Sync + fmt::Debug {
    fn sample(&self, rng: &mut dyn RngCore) -> Result<AgeMeasure>;

    /// `E[1 − e^{−⟨ν,h⟩}]` under the normalised group law, if known.
    fn laplace_complement(&self, _h: &dyn Fn(f64) -> f64) -> Option<f64> {
        None
    }

    /// `E[⟨ν,1⟩]`, if known.
    fn mean_mass(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone)]
pub enum GroupLaw {
    Finite(Vec<WeightedGroup>),
    Parametric {
        sizes: GroupSizeLaw,
        ages: MemberAgeLaw,
    },
    Custom(Arc<dyn GroupSampler>),
}

impl PartialEq for GroupLaw {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (GroupLaw::Finite(a), GroupLaw::Finite(b)) => a == b,
            (
                GroupLaw::Parametric { sizes, ages },
                GroupLaw::Parametric {
                    sizes: s2,
                    ages: a2,
                },
            ) => sizes == s2 && ages == a2,
            (GroupLaw::Custom(a), GroupLaw::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// `L = total_rate × (law of one group)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmigrationMechanism {
    total_rate: f64,
    groups: GroupLaw,
}

impl GroupSizeLaw {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidImmigration(m));
        match self {
            GroupSizeLaw::Finite { pmf } => {
                if pmf.is_empty() || pmf.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return bad("group size pmf needs nonnegative finite entries".into());
                }
                let s: f64 = pmf.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return bad(format!("group size pmf sums to {s}, expected 1"));
                }
                Ok(())
            }
            GroupSizeLaw::Zeta { exponent } if exponent.is_finite() && *exponent > 1.0 => Ok(()),
            GroupSizeLaw::Zeta { exponent } => bad(format!("zeta exponent must exceed 1, got {exponent}")),
            GroupSizeLaw::LogPower { power } if power.is_finite() && *power > 1.0 => Ok(()),
            GroupSizeLaw::LogPower { power } => {
                bad(format!("log-power exponent must exceed 1, got {power}"))
            }
        }
    }

    fn first(&self) -> u64 {
        match self {
            GroupSizeLaw::LogPower { .. } => 2,
            _ => 1,
        }
    }

    /// Unnormalised weight of size `k`.
    fn weight(&self, k: f64) -> f64 {
        match self {
            GroupSizeLaw::Finite { pmf } => pmf.get(k as usize - 1).copied().unwrap_or(0.0),
            GroupSizeLaw::Zeta { exponent } => k.powf(-exponent),
            GroupSizeLaw::LogPower { power } => 1.0 / (k * k.ln().powf(*power)),
        }
    }

    /// `Σ_{k ≥ from} weight(k) · k^moment` for tails; `moment` 0 (mass), 1 (mean) or the log moment.
    fn tail(&self, from: u64, kind: Moment) -> f64 {
        match (self, kind) {
            (GroupSizeLaw::Finite { pmf }, _) => pmf
                .iter()
                .enumerate()
                .skip(from.saturating_sub(1) as usize)
                .map(|(i, p)| {
                    let k = (i + 1) as f64;
                    p * match kind {
                        Moment::Mass => 1.0,
                        Moment::Mean => k,
                        Moment::Log => k.ln(),
                    }
                })
                .sum(),
            (GroupSizeLaw::Zeta { exponent: s }, kind) => {
                let s = *s;
                let from = from.max(1);
                match kind {
                    Moment::Mass => Summand {
                        term: &|x| x.powf(-s),
                        dterm: &|x| -s * x.powf(-s - 1.0),
                        tail_integral: &|a| a.powf(1.0 - s) / (s - 1.0),
                    }
                    .sum_from(from),
                    Moment::Mean if s > 2.0 => Summand {
                        term: &|x| x.powf(1.0 - s),
                        dterm: &|x| (1.0 - s) * x.powf(-s),
                        tail_integral: &|a| a.powf(2.0 - s) / (s - 2.0),
                    }
                    .sum_from(from),
                    Moment::Mean => f64::INFINITY,
                    Moment::Log => Summand {
                        term: &|x| x.ln() * x.powf(-s),
                        dterm: &|x| x.powf(-s - 1.0) * (1.0 - s * x.ln()),
                        tail_integral: &|a| {
                            a.powf(1.0 - s) * (a.ln() / (s - 1.0) + 1.0 / ((s - 1.0) * (s - 1.0)))
                        },
                    }
                    .sum_from(from),
                }
            }
            (GroupSizeLaw::LogPower { power: r }, kind) => {
                let r = *r;
                let from = from.max(2);
                match kind {
                    Moment::Mass => Summand {
                        term: &|x| 1.0 / (x * x.ln().powf(r)),
                        dterm: &|x| -(1.0 + r / x.ln()) / (x * x * x.ln().powf(r)),
                        tail_integral: &|a| a.ln().powf(1.0 - r) / (r - 1.0),
                    }
                    .sum_from(from),
                    Moment::Mean => f64::INFINITY,
                    Moment::Log if r > 2.0 => Summand {
                        term: &|x| 1.0 / (x * x.ln().powf(r - 1.0)),
                        dterm: &|x| -(1.0 + (r - 1.0) / x.ln()) / (x * x * x.ln().powf(r - 1.0)),
                        tail_integral: &|a| a.ln().powf(2.0 - r) / (r - 2.0),
                    }
                    .sum_from(from),
                    Moment::Log => f64::INFINITY,
                }
            }
        }
    }

    fn normalizer(&self) -> f64 {
        self.tail(self.first(), Moment::Mass)
    }

    pub fn pmf(&self, k: u64) -> f64 {
        if k < self.first() {
            return 0.0;
        }
        match self {
            GroupSizeLaw::Finite { .. } => self.weight(k as f64),
            _ => self.weight(k as f64) / self.normalizer(),
        }
    }

    /// `E[size]`, `None` when infinite.
    pub fn mean(&self) -> Option<f64> {
        let m = self.tail(self.first(), Moment::Mean) / self.normalizer();
        m.is_finite().then_some(m)
    }

    /// `E[log size]` with its convergence status. The zeta and log-power families
    /// are classified by the Bertrand series `Σ 1/(k^s (ln k)^r)`.
    pub fn log_moment(&self) -> LogMoment {
        let v = self.tail(self.first(), Moment::Log);
        if v.is_finite() {
            LogMoment::Finite(v / self.normalizer())
        } else {
            LogMoment::Infinite
        }
    }

    /// `E[1 − φ^size]` for `φ ∈ [0, 1]`, with the truncated tail bracketed between
    /// `P(size > K)(1 − φ^{K+1})` and `min(P(size > K), (1 − φ) E[size; size > K])`.
    fn one_minus_pgf(&self, phi: f64, tol: f64) -> Result<f64> {
        if let GroupSizeLaw::Finite { pmf } = self {
            return Ok(pmf
                .iter()
                .enumerate()
                .map(|(i, p)| p * (1.0 - phi.powi(i as i32 + 1)))
                .sum());
        }
        if phi >= 1.0 {
            return Ok(0.0);
        }
        let norm = self.normalizer();
        let mut head = 0.0;
        let mut pw = phi.powi(self.first() as i32 - 1);
        let mut k = self.first();
        let mut upto = 64u64;
        loop {
            while k <= upto {
                pw *= phi;
                head += self.weight(k as f64) * (1.0 - pw);
                k += 1;
            }
            let mass = self.tail(upto + 1, Moment::Mass);
            let mean = self.tail(upto + 1, Moment::Mean);
            let lo = mass * (1.0 - pw * phi);
            let hi = mass.min((1.0 - phi) * mean);
            if (hi - lo) / norm <= 2.0 * tol {
                return Ok((head + 0.5 * (lo + hi)) / norm);
            }
            if upto >= 1 << 24 {
                return Err(Error::Truncation(format!(
                    "group-size generating function at phi = {phi} needs more than 2^24 terms for tolerance {tol:e}"
                )));
            }
            upto *= 2;
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64> {
        let k = match self {
            GroupSizeLaw::Finite { pmf } => {
                let u: f64 = rng.random();
                let mut cum = 0.0;
                let mut pick = pmf.iter().rposition(|p| *p > 0.0).unwrap_or(0);
                for (i, p) in pmf.iter().enumerate() {
                    cum += p;
                    if u < cum {
                        pick = i;
                        break;
                    }
                }
                (pick + 1) as f64
            }
            GroupSizeLaw::Zeta { exponent } => {
                Zeta::new(*exponent).expect("validated exponent").sample(rng)
            }
            GroupSizeLaw::LogPower { power } => sample_log_power(*power, rng),
        };
        if !(k <= MAX_GROUP_SIZE as f64) {
            return Err(Error::Unsupported(format!(
                "sampled group of size {k:e} exceeds the {MAX_GROUP_SIZE} particle cap"
            )));
        }
        Ok(k as u64)
    }
}

/// Rejection from the continuous density `∝ 1/(x (ln x)^r)` on `[2, ∞)`: propose
/// `k = ⌊X⌋`, accept with `h(k) / (M ∫_k^{k+1} h)` where `M = h(2)/h(3)` bounds
/// `h(k)/h(k+1) ≥ h(k)/∫_k^{k+1} h` for all `k ≥ 2`.
fn sample_log_power<R: Rng + ?Sized>(r: f64, rng: &mut R) -> f64 {
    let h = |x: f64| 1.0 / (x * x.ln().powf(r));
    let big_h = |x: f64| x.ln().powf(1.0 - r) / (r - 1.0);
    let bound = h(2.0) / h(3.0);
    let ln2 = 2f64.ln();
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let x = (ln2 * u.powf(-1.0 / (r - 1.0))).exp();
        if !x.is_finite() || x > 1e15 {
            // the cell mass equals h(k) to within 1e-15 here
            if rng.random::<f64>() * bound < 1.0 {
                return x;
            }
            continue;
        }
        let k = x.floor();
        let cell = big_h(k) - big_h(k + 1.0);
        if rng.random::<f64>() * bound * cell < h(k) {
            return k;
        }
    }
}

#[derive(Clone, Copy)]
enum Moment {
    Mass,
    Mean,
    Log,
}

impl MemberAgeLaw {
    fn validate(&self) -> Result<()> {
        match self {
            MemberAgeLaw::Point { age } if age.is_finite() && *age >= 0.0 => Ok(()),
            MemberAgeLaw::Uniform { low, high }
                if low.is_finite() && high.is_finite() && *low >= 0.0 && high > low =>
            {
                Ok(())
            }
            other => Err(Error::InvalidImmigration(format!("invalid member age law {other:?}"))),
        }
    }

    /// `E[h(A)]`; 32-point Gauss–Legendre for uniform ages.
    fn expect(&self, h: &dyn Fn(f64) -> f64) -> f64 {
        match self {
            MemberAgeLaw::Point { age } => h(*age),
            MemberAgeLaw::Uniform { low, high } => {
                let (x, w) = gauss_legendre(32);
                let (c, r) = (0.5 * (low + high), 0.5 * (high - low));
                x.iter().zip(&w).map(|(x, w)| 0.5 * w * h(c + r * x)).sum()
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MemberAgeLaw::Point { age } => *age,
            MemberAgeLaw::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
        }
    }
}

impl ImmigrationMechanism {
    /// No immigration (`L = 0`).
    pub fn none() -> Self {
        Self {
            total_rate: 0.0,
            groups: GroupLaw::Finite(Vec::new()),
        }
    }

    /// Single immigrants of age `age` arriving at rate `rate`.
    pub fn single_immigrants(rate: f64, age: f64) -> Result<Self> {
        if rate == 0.0 {
            return Ok(Self::none());
        }
        Self::finite(vec![WeightedGroup {
            weight: rate,
            ages: AgeMeasure::from_ages(vec![age])?,
        }])
    }

    /// `L = Σ weight_j δ_{ν_j}`.
    pub fn finite(groups: Vec<WeightedGroup>) -> Result<Self> {
        let total_rate = groups.iter().map(|g| g.weight).sum();
        let m = Self {
            total_rate,
            groups: GroupLaw::Finite(groups),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn parametric(rate: f64, sizes: GroupSizeLaw, ages: MemberAgeLaw) -> Result<Self> {
        let m = Self {
            total_rate: rate,
            groups: GroupLaw::Parametric { sizes, ages },
        };
        m.validate()?;
        Ok(m)
    }

    pub fn custom(rate: f64, sampler: Arc<dyn GroupSampler>) -> Result<Self> {
        let m = Self {
            total_rate: rate,
            groups: GroupLaw::Custom(sampler),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_rate.is_finite() && self.total_rate >= 0.0) {
            return Err(Error::InvalidImmigration(format!(
                "total rate must be finite and nonnegative, got {}",
                self.total_rate
            )));
        }
        match &self.groups {
            GroupLaw::Finite(groups) => {
                for g in groups {
                    if !(g.weight.is_finite() && g.weight > 0.0) {
                        return Err(Error::InvalidImmigration(format!(
                            "group weights must be positive, got {}",
                            g.weight
                        )));
                    }
                    if g.ages.is_empty() {
                        return Err(Error::InvalidImmigration(
                            "immigrant groups must be nonempty".into(),
                        ));
                    }
                }
                let s: f64 = groups.iter().map(|g| g.weight).sum();
                if (s - self.total_rate).abs() > 1e-12 * s.max(1.0) {
                    return Err(Error::InvalidImmigration(format!(
                        "group weights sum to {s} but total rate is {}",
                        self.total_rate
                    )));
                }
                Ok(())
            }
            GroupLaw::Parametric { sizes, ages } => {
                sizes.validate()?;
                ages.validate()
            }
            GroupLaw::Custom(_) => Ok(()),
        }
    }

    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    pub fn groups(&self) -> &GroupLaw {
        &self.groups
    }

    pub fn is_active(&self) -> bool {
        self.total_rate > 0.0
    }

    /// `ψ(h) = ∫ (1 − e^{−⟨ν,h⟩}) L(dν)`, with truncation error below `tol` for infinite supports.
    pub fn psi_of(&self, h: &dyn Fn(f64) -> f64, tol: f64) -> Result<f64> {
        if self.total_rate == 0.0 {
            return Ok(0.0);
        }
        match &self.groups {
            GroupLaw::Finite(groups) => Ok(groups
                .iter()
                .map(|g| g.weight * -(-g.ages.integrate_with(h)).exp_m1())
                .sum()),
            GroupLaw::Parametric { sizes, ages } => {
                let phi = ages.expect(&|a| (-h(a)).exp());
                Ok(self.total_rate * sizes.one_minus_pgf(phi, tol / self.total_rate)?)
            }
            GroupLaw::Custom(s) => s
                .laplace_complement(h)
                .map(|v| self.total_rate * v)
                .ok_or_else(|| Error::Unsupported("custom group law has no Laplace descriptor".into())),
        }
    }

    /// `∫ ⟨ν,h⟩ L(dν)`.
    pub fn linear_functional(&self, h: &dyn Fn(f64) -> f64) -> Result<f64> {
        if self.total_rate == 0.0 {
            return Ok(0.0);
        }
        match &self.groups {
            GroupLaw::Finite(groups) => Ok(groups
                .iter()
                .map(|g| g.weight * g.ages.integrate_with(h))
                .sum()),
            GroupLaw::Parametric { sizes, ages } => match sizes.mean() {
                Some(m) => Ok(self.total_rate * m * ages.expect(h)),
                None => Err(Error::Unsupported("group size law has infinite mean".into())),
            },
            GroupLaw::Custom(_) => Err(Error::Unsupported(
                "linear functionals of a custom group law are unavailable".into(),
            )),
        }
    }

    /// `∫ ⟨ν,1⟩ L(dν)`, `None` when infinite or unknown.
    pub fn mass_intensity(&self) -> Option<f64> {
        if self.total_rate == 0.0 {
            return Some(0.0);
        }
        match &self.groups {
            GroupLaw::Custom(s) => s.mean_mass().map(|m| m * self.total_rate),
            _ => self.linear_functional(&|_| 1.0).ok(),
        }
    }

    /// `∫ F(ν) L(dν)` for finitely supported `L`.
    pub fn integrate_groups(&self, f: impl Fn(&AgeMeasure) -> f64) -> Result<f64> {
        match &self.groups {
            GroupLaw::Finite(groups) => Ok(groups.iter().fold(0.0, |acc, g| acc + g.weight * f(&g.ages))),
            _ if self.total_rate == 0.0 => Ok(0.0),
            _ => Err(Error::Unsupported(
                "exact group integrals need a finitely supported immigration law".into(),
            )),
        }
    }

    pub fn log_moment_criterion(&self) -> LogMoment {
        if self.total_rate == 0.0 {
            return LogMoment::Finite(0.0);
        }
        match &self.groups {
            GroupLaw::Finite(groups) => LogMoment::Finite(
                groups
                    .iter()
                    .map(|g| g.weight * (g.ages.total_mass() as f64).ln())
                    .sum(),
            ),
            GroupLaw::Parametric { sizes, .. } => match sizes.log_moment() {
                LogMoment::Finite(v) => LogMoment::Finite(self.total_rate * v),
                other => other,
            },
            GroupLaw::Custom(_) => LogMoment::Unknown,
        }
    }

    /// Draws one group from `L / total_rate`.
    pub fn sample_group<R: Rng>(&self, rng: &mut R) -> Result<AgeMeasure> {
        match &self.groups {
            GroupLaw::Finite(groups) => {
                let u = rng.random::<f64>() * self.total_rate;
                let mut cum = 0.0;
                for g in groups {
                    cum += g.weight;
                    if u < cum {
                        return Ok(g.ages.clone());
                    }
                }
                groups
                    .last()
                    .map(|g| g.ages.clone())
                    .ok_or_else(|| Error::InvalidImmigration("no groups to sample".into()))
            }
            GroupLaw::Parametric { sizes, ages } => {
                let k = sizes.sample(rng)?;
                let members = (0..k).map(|_| ages.sample(rng)).collect();
                AgeMeasure::from_ages(members)
            }
            GroupLaw::Custom(s) => {
                let g = s.sample(rng)?;
                if g.is_empty() {
                    return Err(Error::InvalidImmigration("custom sampler produced an empty group".into()));
                }
                Ok(g)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ImmigrationRepr {
    Finite {
        groups: Vec<WeightedGroup>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rate: Option<f64>,
    },
    Parametric {
        rate: f64,
        sizes: GroupSizeLaw,
        ages: MemberAgeLaw,
    },
}

impl Serialize for ImmigrationMechanism {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match &self.groups {
            GroupLaw::Finite(groups) => ImmigrationRepr::Finite {
                groups: groups.clone(),
                rate: None,
            },
            GroupLaw::Parametric { sizes, ages } => ImmigrationRepr::Parametric {
                rate: self.total_rate,
                sizes: sizes.clone(),
                ages: ages.clone(),
            },
            GroupLaw::Custom(_) => {
                return Err(serde::ser::Error::custom("custom group laws cannot be serialized"))
            }
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ImmigrationMechanism {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = match ImmigrationRepr::deserialize(d)? {
            ImmigrationRepr::Finite { groups, rate } => {
                let m = ImmigrationMechanism {
                    total_rate: rate.unwrap_or_else(|| groups.iter().map(|g| g.weight).sum()),
                    groups: GroupLaw::Finite(groups),
                };
                m.validate().map(|_| m)
            }
            ImmigrationRepr::Parametric { rate, sizes, ages } => {
                ImmigrationMechanism::parametric(rate, sizes, ages)
            }
        };
        m.map_err(serde::de::Error::custom)
    }
}
