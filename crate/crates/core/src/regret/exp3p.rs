use rand::Rng;

use crate::error::{Error, Result};
use crate::types::{check_rho, sample_index, Mixture};

use super::{MinimizerKind, PayoffRange};

/// Constants of the high-probability EXP3.P schedule for `K` arms, horizon
/// `T` and confidence `δ`:
///
/// ```text
/// α = 2√(ln(KT/δ))
/// γ = min{3/5, 2√(3K ln K / (5T))}
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exp3PParams {
    pub arms: usize,
    pub horizon: usize,
    pub delta: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl Exp3PParams {
    pub fn new(arms: usize, horizon: usize, delta: f64) -> Result<Self> {
        if arms < 2 {
            return Err(Error::invalid("EXP3.P needs at least two arms"));
        }
        if horizon == 0 {
            return Err(Error::invalid("EXP3.P needs a positive horizon"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!("confidence delta = {delta} must lie in (0, 1)")));
        }
        let k = arms as f64;
        let t = horizon as f64;
        let alpha = 2.0 * (k * t / delta).ln().sqrt();
        let gamma = (2.0 * (3.0 * k * k.ln() / (5.0 * t)).sqrt()).min(0.6);
        Ok(Self {
            arms,
            horizon,
            delta,
            alpha,
            gamma,
        })
    }
}

#[derive(Debug, Clone)]
struct Pending {
    arm: usize,
    probs: Vec<f64>,
}

/// EXP3.P over `K` arms with payoffs in `[−1/ρ, 1]`, rescaled to `[0, 1]`
/// through `g = (payoff + 1/ρ)/(1 + 1/ρ)`.
#[derive(Debug, Clone)]
pub struct Exp3P {
    params: Exp3PParams,
    range: PayoffRange,
    log_weights: Vec<f64>,
    pending: Option<Pending>,
    round: usize,
}

impl Exp3P {
    pub fn new(arms: usize, horizon: usize, delta: f64, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        let params = Exp3PParams::new(arms, horizon, delta)?;
        Ok(Self {
            params,
            range: PayoffRange::new(-1.0 / rho, 1.0)?,
            log_weights: vec![0.0; arms],
            pending: None,
            round: 0,
        })
    }

    pub fn kind(&self) -> MinimizerKind {
        MinimizerKind::Exp3P
    }

    pub fn params(&self) -> &Exp3PParams {
        &self.params
    }

    pub fn range(&self) -> PayoffRange {
        self.range
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn has_pending(&self) -> bool {
        self.pending.is_some()
    }

    /// Sampling distribution `p_i = (1−γ) w_i / Σw + γ/K`.
    pub fn distribution(&self) -> Vec<f64> {
        let k = self.params.arms as f64;
        let gamma = self.params.gamma;
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_weights.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut p: Vec<f64> = w.iter().map(|x| (1.0 - gamma) * x / total + gamma / k).collect();
        let s: f64 = p.iter().sum();
        for v in &mut p {
            *v /= s;
        }
        p
    }

    /// Draws an arm and holds it until the paired [`Exp3P::observe`].
    pub fn next_element<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(Mixture, usize)> {
        if self.pending.is_some() {
            return Err(Error::protocol("EXP3.P next_element called twice without observe"));
        }
        let probs = self.distribution();
        let arm = sample_index(&probs, rng);
        self.pending = Some(Pending {
            arm,
            probs: probs.clone(),
        });
        Ok((Mixture::new(probs)?, arm))
    }

    /// Affine map of `[−1/ρ, 1]` onto `[0, 1]`.
    pub fn rescale(&self, payoff: f64) -> f64 {
        let lo = self.range.lo;
        ((payoff - lo) / (self.range.hi - lo)).clamp(0.0, 1.0)
    }

    pub fn observe(&mut self, payoff: f64) -> Result<()> {
        self.range.check(payoff)?;
        let Pending { arm, probs } = self
            .pending
            .take()
            .ok_or_else(|| Error::protocol("EXP3.P observe called without a pending sample"))?;
        let x = self.rescale(payoff);
        let Exp3PParams {
            arms,
            horizon,
            alpha,
            gamma,
            ..
        } = self.params;
        let k = arms as f64;
        let bonus_scale = alpha / (k * horizon as f64).sqrt();
        for (j, (lw, p)) in self.log_weights.iter_mut().zip(&probs).enumerate() {
            let estimate = if j == arm { x / p } else { 0.0 };
            *lw += gamma / (3.0 * k) * (estimate + bonus_scale / p);
        }
        self.round += 1;
        Ok(())
    }

    /// Drops the pending sample without an update, for rounds in which the
    /// sampled arm was not played.
    pub fn forgo(&mut self) -> Result<()> {
        self.pending
            .take()
            .map(|_| ())
            .ok_or_else(|| Error::protocol("EXP3.P forgo called without a pending sample"))
    }
}
