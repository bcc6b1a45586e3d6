//! Infinite positive series with decreasing terms, summed directly up to a cut
//! and closed with a two-term Euler–Maclaurin tail.

/// Index from which the Euler–Maclaurin tail replaces direct summation.
pub(crate) const CUT: u64 = 4096;

/// A decreasing summand on `[start, ∞)` with its derivative and tail integral.
pub(crate) struct Summand<'a> {
    pub term: &'a dyn Fn(f64) -> f64,
    pub dterm: &'a dyn Fn(f64) -> f64,
    /// `∫_a^∞ term(x) dx`.
    pub tail_integral: &'a dyn Fn(f64) -> f64,
}

impl Summand<'_> {
    /// `Σ_{k ≥ from} term(k)`.
    pub fn sum_from(&self, from: u64) -> f64 {
        let cut = from.max(CUT);
        let a = cut as f64;
        let tail = (self.tail_integral)(a) + 0.5 * (self.term)(a) - (self.dterm)(a) / 12.0;
        // small terms first
        (from..cut).rev().fold(tail, |acc, k| acc + (self.term)(k as f64))
    }
}
