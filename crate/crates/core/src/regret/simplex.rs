use crate::error::{Error, Result};
use crate::types::Mixture;

use super::{exp_weights, MinimizerKind, PayoffRange, StepSchedule};

/// Exponential weights (OMD with the negative-entropy regularizer) over an
/// `n`-simplex, in lazy form: the iterate is `softmax(η_t · S)` where `S` is
/// the cumulative utility vector.
#[derive(Debug, Clone)]
pub struct SimplexOmd {
    range: PayoffRange,
    schedule: StepSchedule,
    cumulative: Vec<f64>,
    weights: Vec<f64>,
    round: usize,
}

impl SimplexOmd {
    pub fn new(n: usize, range: PayoffRange, schedule: StepSchedule) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("simplex learner needs at least one coordinate"));
        }
        if let StepSchedule::Fixed(eta) = schedule {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(Error::invalid(format!("learning rate {eta} must be positive")));
            }
        }
        Ok(Self {
            range,
            schedule,
            cumulative: vec![0.0; n],
            weights: vec![1.0 / n as f64; n],
            round: 0,
        })
    }

    pub fn kind(&self) -> MinimizerKind {
        MinimizerKind::SimplexOmd
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn range(&self) -> PayoffRange {
        self.range
    }

    /// Number of completed `observe` calls.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn next_element(&self) -> Mixture {
        Mixture::new(self.weights.clone()).expect("exponential weights are normalized")
    }

    /// Learning rate used for the iterate after `t − 1` observations.
    pub fn eta(&self, t: usize) -> f64 {
        match self.schedule {
            StepSchedule::Fixed(eta) => eta,
            StepSchedule::Anytime => {
                let n = self.weights.len() as f64;
                (n.ln() / t as f64).sqrt() / self.range.width()
            }
        }
    }

    pub fn observe(&mut self, utility: &[f64]) -> Result<()> {
        if utility.len() != self.weights.len() {
            return Err(Error::invalid(format!(
                "utility vector has {} entries, learner has {}",
                utility.len(),
                self.weights.len()
            )));
        }
        for &u in utility {
            self.range.check(u)?;
        }
        for (s, u) in self.cumulative.iter_mut().zip(utility) {
            *s += u;
        }
        self.round += 1;
        let eta = self.eta(self.round + 1);
        self.weights = exp_weights(&self.cumulative, eta);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> PayoffRange {
        PayoffRange::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn fresh_iterate_is_uniform() {
        let omd = SimplexOmd::new(4, unit(), StepSchedule::Anytime).unwrap();
        assert_eq!(omd.next_element().weights(), &[0.25; 4]);
    }

    #[test]
    fn symmetric_utilities_keep_uniform() {
        let mut omd = SimplexOmd::new(3, unit(), StepSchedule::Anytime).unwrap();
        for _ in 0..50 {
            omd.observe(&[0.4, 0.4, 0.4]).unwrap();
        }
        for w in omd.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn concentrates_on_rewarded_coordinate() {
        let mut omd = SimplexOmd::new(2, unit(), StepSchedule::Fixed(0.1)).unwrap();
        for _ in 0..100 {
            omd.observe(&[0.0, 1.0]).unwrap();
        }
        // Closed form: e^{10} / (1 + e^{10}).
        let expected = 1.0 / (1.0 + (-10.0f64).exp());
        assert!((omd.weights()[1] - expected).abs() < 1e-12);
        assert!(omd.weights()[1] > 0.99);
    }

    #[test]
    fn rejects_out_of_range_and_bad_length() {
        let mut omd = SimplexOmd::new(2, unit(), StepSchedule::Anytime).unwrap();
        assert!(matches!(omd.observe(&[0.0, 1.5]), Err(Error::InvalidArgument(_))));
        assert!(omd.observe(&[0.0]).is_err());
        assert_eq!(omd.round(), 0);
    }

    #[test]
    fn round_counts_observations() {
        let mut omd = SimplexOmd::new(2, unit(), StepSchedule::Anytime).unwrap();
        omd.observe(&[0.1, 0.2]).unwrap();
        omd.observe(&[0.1, 0.2]).unwrap();
        assert_eq!(omd.round(), 2);
    }
}
