use crate::error::{Error, Result};
use crate::types::{check_rho, DualVector};

use super::{MinimizerKind, PayoffRange, SimplexOmd, StepSchedule};

/// Exponential weights over `D = {λ ≥ 0 : ‖λ‖₁ ≤ 1/ρ}`.
///
/// `D` is the image of the `(m+1)`-simplex under `w ↦ (w_1, …, w_m)/ρ`, the
/// last coordinate being slack. A dual gradient `g = ĉ − ρ1` becomes the
/// lifted utility `(g_1, …, g_m, 0)/ρ`, whose range `[−1, 1/ρ − 1]` has width
/// `1/ρ`, so the anytime rate is `η_t = ρ√(ln(m+1)/t)`.
#[derive(Debug, Clone)]
pub struct DualOmd {
    rho: f64,
    inner: SimplexOmd,
}

impl DualOmd {
    pub fn new(m: usize, rho: f64) -> Result<Self> {
        Self::with_schedule(m, rho, StepSchedule::Anytime)
    }

    pub fn with_schedule(m: usize, rho: f64, schedule: StepSchedule) -> Result<Self> {
        check_rho(rho)?;
        if m == 0 {
            return Err(Error::invalid("dual learner needs at least one resource"));
        }
        let range = PayoffRange::new(-1.0, 1.0 / rho - 1.0)?;
        Ok(Self {
            rho,
            inner: SimplexOmd::new(m + 1, range, schedule)?,
        })
    }

    pub fn kind(&self) -> MinimizerKind {
        MinimizerKind::DualOmd
    }

    pub fn num_resources(&self) -> usize {
        self.inner.len() - 1
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn round(&self) -> usize {
        self.inner.round()
    }

    /// Lifted simplex weights, slack last.
    pub fn lifted_weights(&self) -> &[f64] {
        self.inner.weights()
    }

    pub fn next_element(&self) -> DualVector {
        let w = self.inner.weights();
        let m = w.len() - 1;
        let mut lambda: Vec<f64> = w[..m].iter().map(|x| x / self.rho).collect();
        // Rounding can push the norm a few ulps over 1/ρ; pull it back.
        let norm: f64 = lambda.iter().sum();
        let cap = 1.0 / self.rho;
        if norm > cap {
            for l in &mut lambda {
                *l *= cap / norm;
            }
        }
        DualVector::new(lambda, self.rho).expect("lifted iterate lies in D")
    }

    /// Observes the gradient `ĉ − ρ1` of `λ ↦ ⟨λ, ĉ − ρ1⟩`, which the dual
    /// player maximizes. Entries must lie in `[−ρ, 1 − ρ]`.
    pub fn observe(&mut self, gradient: &[f64]) -> Result<()> {
        if gradient.len() != self.num_resources() {
            return Err(Error::invalid(format!(
                "dual gradient has {} entries, expected {}",
                gradient.len(),
                self.num_resources()
            )));
        }
        let mut lifted: Vec<f64> = gradient.iter().map(|g| g / self.rho).collect();
        lifted.push(0.0);
        self.inner.observe(&lifted)
    }

    /// Convenience wrapper taking the round's consumption estimate `ĉ`.
    pub fn observe_cost(&mut self, cost: &[f64]) -> Result<()> {
        let g: Vec<f64> = cost.iter().map(|c| c - self.rho).collect();
        self.observe(&g)
    }
}
