//! Online regret minimizers: exponential weights on a simplex, its lift to
//! the dual set `D`, and EXP3.P for bandit feedback.

mod dual;
mod exp3p;
mod simplex;

pub use dual::DualOmd;
pub use exp3p::{Exp3P, Exp3PParams};
pub use simplex::SimplexOmd;

use crate::error::{Error, Result};

/// Slack allowed when checking a payoff against its declared range.
pub const RANGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimizerKind {
    SimplexOmd,
    DualOmd,
    Exp3P,
}

/// Declared closed interval of per-coordinate payoffs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffRange {
    pub lo: f64,
    pub hi: f64,
}

impl PayoffRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("payoff range [{lo}, {hi}] is empty or non-finite")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn check(&self, value: f64) -> Result<()> {
        if !(value >= self.lo - RANGE_TOL && value <= self.hi + RANGE_TOL) {
            return Err(Error::invalid(format!(
                "payoff {value} outside declared range [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// Learning-rate rule for the exponential-weights learners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `η_t = √(ln n / t) / width`, where `t` counts the iterate being formed.
    Anytime,
    Fixed(f64),
}

/// Column with the largest total utility over the rows of `utilities`.
/// Ties go to the lowest index.
pub fn hindsight_best(utilities: &[Vec<f64>]) -> Result<(usize, f64)> {
    let n = utilities
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::invalid("utility matrix has no rows"))?;
    if n == 0 {
        return Err(Error::invalid("utility matrix has no columns"));
    }
    let mut sums = vec![0.0; n];
    for (t, row) in utilities.iter().enumerate() {
        if row.len() != n {
            return Err(Error::invalid(format!("row {t} has {} columns, expected {n}", row.len())));
        }
        for (s, u) in sums.iter_mut().zip(row) {
            *s += u;
        }
    }
    let mut best = (0, sums[0]);
    for (i, &s) in sums.iter().enumerate().skip(1) {
        if s > best.1 {
            best = (i, s);
        }
    }
    Ok(best)
}

/// `softmax(η·s)`, stabilized by subtracting the maximum.
pub(crate) fn exp_weights(scores: &[f64], eta: f64) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = scores.iter().map(|s| (eta * (s - max)).exp()).collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}
