//! Numerical duality-gap example for a semi-infinite LP on `X = [0, 1]`.
//!
//! ```text
//! inf_ξ E_ξ[f(x)]  s.t.  E_ξ[x] ≤ 0,   f(0) = 1, f(x) = 0 for x > 0
//! ```
//!
//! Only `δ_0` is feasible, so the primal value is 1. The dual function
//! `g(λ) = inf_x f(x) + λx` equals `min(1, λ·x_min)` on a grid whose smallest
//! positive point is `x_min`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

fn f(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Evaluates the primal exactly and the dual by exhaustive grid search.
///
/// `λ` ranges over `[0, 1/s]` at step `s`. The inner infimum is taken over an
/// `x`-grid of step `s²`, which refines faster than the `λ` range grows; on
/// an `x`-grid of step `s` itself the top multiplier `1/s` would close the
/// gap (`g(1/s) = 1`).
pub fn semi_infinite_gap_demo(grid_step: f64) -> Result<GapReport> {
    if !grid_step.is_finite() || grid_step <= 0.0 || grid_step > 0.1 {
        return Err(Error::invalid(format!("grid step {grid_step} must lie in (0, 0.1]")));
    }
    let x_points = (1.0 / (grid_step * grid_step)).round() as usize;
    let lambda_points = (1.0 / (grid_step * grid_step)).round() as usize;
    let xs: Vec<f64> = (0..=x_points).map(|k| k as f64 / x_points as f64).collect();

    // Feasible mixtures put all mass on x with E[x] ≤ 0, i.e. on x = 0.
    let primal = xs
        .iter()
        .filter(|&&x| x <= 0.0)
        .map(|&x| f(x))
        .fold(f64::INFINITY, f64::min);

    let mut dual = f64::NEG_INFINITY;
    for j in 0..=lambda_points {
        let lambda = j as f64 * grid_step;
        let g = xs
            .iter()
            .map(|&x| f(x) + lambda * x)
            .fold(f64::INFINITY, f64::min);
        dual = dual.max(g);
    }
    Ok(GapReport {
        primal,
        dual,
        gap: primal - dual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_one_hundredth() {
        let r = semi_infinite_gap_demo(0.01).unwrap();
        assert_eq!(r.primal, 1.0);
        assert!(r.dual <= 0.02, "dual = {}", r.dual);
        assert!(r.gap >= 0.98);
    }

    #[test]
    fn gap_grows_as_grid_refines() {
        let coarse = semi_infinite_gap_demo(0.1).unwrap();
        let fine = semi_infinite_gap_demo(0.02).unwrap();
        assert!(fine.gap >= coarse.gap);
        assert!((coarse.dual - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_steps() {
        assert!(semi_infinite_gap_demo(0.0).is_err());
        assert!(semi_infinite_gap_demo(0.5).is_err());
        assert!(semi_infinite_gap_demo(f64::NAN).is_err());
    }
}
