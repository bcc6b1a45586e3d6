//! Bounded nonnegative functions on the half line, from a declarative catalog.
//!
//! Every catalog entry knows its exact infimum and supremum on any interval,
//! which is what the thinning simulator and the model constants rely on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarField {
    Constant {
        value: f64,
    },
    /// Right-continuous step function: `values[i]` on `[breaks[i-1], breaks[i])`.
    Step {
        breaks: Vec<f64>,
        values: Vec<f64>,
    },
    /// `from` up to `start`, linear to `to` at `end`, constant afterwards.
    Ramp {
        start: f64,
        end: f64,
        from: f64,
        to: f64,
    },
    /// `floor + scale·e^{-rate·x}`.
    ExpDecay {
        scale: f64,
        rate: f64,
        #[serde(default)]
        floor: f64,
    },
    /// `floor + scale/(1 + x)`.
    Rational {
        scale: f64,
        #[serde(default)]
        floor: f64,
    },
    /// Linear interpolation through `(xs[i], ys[i])`, constant beyond both end knots.
    #[serde(alias = "piecewise_linear")]
    Table {
        xs: Vec<f64>,
        ys: Vec<f64>,
    },
}

impl ScalarField {
    pub fn constant(value: f64) -> Self {
        ScalarField::Constant { value }
    }

    pub fn step(breaks: Vec<f64>, values: Vec<f64>) -> Self {
        ScalarField::Step { breaks, values }
    }

    pub fn ramp(start: f64, end: f64, from: f64, to: f64) -> Self {
        ScalarField::Ramp {
            start,
            end,
            from,
            to,
        }
    }

    pub fn exp_decay(scale: f64, rate: f64, floor: f64) -> Self {
        ScalarField::ExpDecay { scale, rate, floor }
    }

    pub fn rational(scale: f64, floor: f64) -> Self {
        ScalarField::Rational { scale, floor }
    }

    pub fn table(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        ScalarField::Table { xs, ys }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidField(msg));
        let nonneg = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidField(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )))
            }
        };
        match self {
            ScalarField::Constant { value } => nonneg("value", *value),
            ScalarField::Step { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    return bad(format!(
                        "step needs one more value than breaks ({} values, {} breaks)",
                        values.len(),
                        breaks.len()
                    ));
                }
                if breaks.iter().any(|b| !(b.is_finite() && *b > 0.0))
                    || breaks.windows(2).any(|w| w[0] >= w[1])
                {
                    return bad("step breaks must be positive and strictly increasing".into());
                }
                values.iter().try_for_each(|v| nonneg("step value", *v))
            }
            ScalarField::Ramp {
                start,
                end,
                from,
                to,
            } => {
                nonneg("start", *start)?;
                if !(end.is_finite() && end > start) {
                    return bad(format!("ramp needs start < end, got {start} and {end}"));
                }
                nonneg("from", *from)?;
                nonneg("to", *to)
            }
            ScalarField::ExpDecay { scale, rate, floor } => {
                nonneg("scale", *scale)?;
                nonneg("rate", *rate)?;
                nonneg("floor", *floor)
            }
            ScalarField::Rational { scale, floor } => {
                nonneg("scale", *scale)?;
                nonneg("floor", *floor)
            }
            ScalarField::Table { xs, ys } => {
                if xs.is_empty() || xs.len() != ys.len() {
                    return bad("table needs matching, nonempty xs and ys".into());
                }
                nonneg("xs[0]", xs[0])?;
                if xs.iter().any(|x| !x.is_finite()) || xs.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("table xs must be strictly increasing".into());
                }
                ys.iter().try_for_each(|y| nonneg("table y", *y))
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarField::Constant { value } => *value,
            ScalarField::Step { breaks, values } => values[breaks.partition_point(|b| *b <= x)],
            ScalarField::Ramp {
                start,
                end,
                from,
                to,
            } => {
                if x <= *start {
                    *from
                } else if x >= *end {
                    *to
                } else {
                    from + (to - from) * (x - start) / (end - start)
                }
            }
            ScalarField::ExpDecay { scale, rate, floor } => floor + scale * (-rate * x).exp(),
            ScalarField::Rational { scale, floor } => floor + scale / (1.0 + x),
            ScalarField::Table { xs, ys } => {
                let i = xs.partition_point(|k| *k <= x);
                if i == 0 {
                    ys[0]
                } else if i == xs.len() {
                    ys[xs.len() - 1]
                } else {
                    let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
                    ys[i - 1] + w * (ys[i] - ys[i - 1])
                }
            }
        }
    }

    /// Almost-everywhere derivative; `None` for fields with jumps.
    pub fn derivative(&self, x: f64) -> Option<f64> {
        match self {
            ScalarField::Constant { .. } => Some(0.0),
            ScalarField::Step { breaks, .. } if breaks.is_empty() => Some(0.0),
            ScalarField::Step { .. } => None,
            ScalarField::Ramp {
                start,
                end,
                from,
                to,
            } => Some(if x < *start || x >= *end {
                0.0
            } else {
                (to - from) / (end - start)
            }),
            ScalarField::ExpDecay { scale, rate, .. } => Some(-rate * scale * (-rate * x).exp()),
            ScalarField::Rational { scale, .. } => Some(-scale / ((1.0 + x) * (1.0 + x))),
            ScalarField::Table { xs, ys } => {
                let i = xs.partition_point(|k| *k <= x);
                Some(if i == 0 || i == xs.len() {
                    0.0
                } else {
                    (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1])
                })
            }
        }
    }

    pub fn has_derivative(&self) -> bool {
        self.derivative(0.0).is_some()
    }

    /// Exact `(inf, sup)` of the field over the half-open interval `[a, b)`; `b` may be infinite.
    pub fn range_on(&self, a: f64, b: f64) -> (f64, f64) {
        debug_assert!(a < b);
        let at_end = |f: &Self| {
            if b.is_finite() {
                f.eval(b)
            } else {
                f.limit_at_infinity()
            }
        };
        let fold = |vals: &mut dyn Iterator<Item = f64>| {
            vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
        };
        match self {
            ScalarField::Constant { value } => (*value, *value),
            ScalarField::Step { breaks, values } => {
                let first = breaks.partition_point(|x| *x <= a);
                let last = breaks.partition_point(|x| *x < b);
                fold(&mut values[first..=last].iter().copied())
            }
            ScalarField::ExpDecay { .. } | ScalarField::Rational { .. } => {
                // non-increasing
                (at_end(self), self.eval(a))
            }
            ScalarField::Ramp { start, end, .. } => {
                let kinks = [*start, *end];
                let mut it = [self.eval(a), at_end(self)]
                    .into_iter()
                    .chain(kinks.into_iter().filter(|k| *k > a && *k < b).map(|k| self.eval(k)));
                fold(&mut it)
            }
            ScalarField::Table { xs, .. } => {
                let mut it = [self.eval(a), at_end(self)]
                    .into_iter()
                    .chain(xs.iter().filter(|k| **k > a && **k < b).map(|&k| self.eval(k)));
                fold(&mut it)
            }
        }
    }

    pub fn sup(&self) -> f64 {
        self.range_on(0.0, f64::INFINITY).1
    }

    pub fn inf(&self) -> f64 {
        self.range_on(0.0, f64::INFINITY).0
    }

    fn limit_at_infinity(&self) -> f64 {
        match self {
            ScalarField::Constant { value } => *value,
            ScalarField::Step { values, .. } => *values.last().unwrap(),
            ScalarField::Ramp { to, .. } => *to,
            ScalarField::ExpDecay { floor, rate, scale } => {
                if *rate == 0.0 {
                    floor + scale
                } else {
                    *floor
                }
            }
            ScalarField::Rational { floor, .. } => *floor,
            ScalarField::Table { ys, .. } => *ys.last().unwrap(),
        }
    }

    /// Whether the field is the same constant everywhere.
    pub fn as_constant(&self) -> Option<f64> {
        let (lo, hi) = self.range_on(0.0, f64::INFINITY);
        (lo == hi).then_some(lo)
    }
}
