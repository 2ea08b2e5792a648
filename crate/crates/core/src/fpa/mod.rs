//! Budget pacing in repeated first-price auctions.
//!
//! A bid `b` against the highest competing bid `m` earns `(v − b)·1{b ≥ m}`
//! and spends `b·1{b ≥ m}`. The finite case learns one bid distribution per
//! grid valuation; the continuous case chains exponential-weights learners
//! over a tree of Lipschitz bidding policies.

mod chaining;
mod tree;

pub use chaining::{
    good_edge_check, node_regret_bound, ChainingPrimal, ChainingState, GoodEdgeReport, GoodEdgeViolation, NodeRegret,
};
pub use tree::{default_levels, Child, Node, PolicyTree, RateRule, TreeConfig, DEFAULT_NODE_CAP};

use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::env::Commit;
use crate::error::{Error, Result};
use crate::meta::{primal_range, primal_utilities, Decision, Feedback, Observable, PrimalLearner};
use crate::regret::{SimplexOmd, StepSchedule};
use crate::types::{check_rho, DualVector, Request};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuctionRound {
    pub valuation: f64,
    pub competing_bid: f64,
}

impl AuctionRound {
    pub fn new(valuation: f64, competing_bid: f64) -> Result<Self> {
        for (what, x) in [("valuation", valuation), ("competing bid", competing_bid)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::invalid(format!("{what} {x} is outside [0, 1]")));
            }
        }
        Ok(Self {
            valuation,
            competing_bid,
        })
    }
}

impl Observable for AuctionRound {
    type Context = f64;
    fn context(&self) -> f64 {
        self.valuation
    }
}

impl Commit for AuctionRound {
    fn absorb(&self, hasher: &mut Sha256) {
        hasher.update(self.valuation.to_bits().to_le_bytes());
        hasher.update(self.competing_bid.to_bits().to_le_bytes());
    }
}

/// `1{b ≥ m}·(v − (1+λ)b)`.
pub fn lagrangian_payoff(valuation: f64, lambda: f64, bid: f64, competing_bid: f64) -> f64 {
    if bid >= competing_bid {
        valuation - (1.0 + lambda) * bid
    } else {
        0.0
    }
}

/// `⌊x⌋_y` on the dyadic grid of step `2^{-levels}`, as an index.
pub fn dyadic_floor_index(x: f64, levels: u32) -> usize {
    let scale = (1u64 << levels) as f64;
    ((x * scale).floor().max(0.0) as usize).min(1usize << levels)
}

/// `min{π̂(⌊v⌋_ε) + 2ε, v/(1+λ)}` clamped to `[0, 1]`, where `policy_bid` is
/// `π̂(⌊v⌋_ε)`. The result is lowered by ulps if needed so that
/// `v − (1+λ)b ≥ 0` holds exactly in floating point.
pub fn threshold_bid(policy_bid: f64, valuation: f64, lambda: f64, eps: f64) -> f64 {
    let cap = valuation / (1.0 + lambda);
    let mut b = (policy_bid + 2.0 * eps).min(cap).clamp(0.0, 1.0);
    while b > 0.0 && valuation - (1.0 + lambda) * b < 0.0 {
        b = f64::from_bits(b.to_bits() - 1);
    }
    b
}

/// `1{b ≥ m}(v − (1+λ)b)` for every bid of a finite grid.
pub fn finite_payoffs(valuation: f64, lambda: f64, bids: &[f64], competing_bid: f64) -> Vec<f64> {
    bids.iter()
        .map(|&b| lagrangian_payoff(valuation, lambda, b, competing_bid))
        .collect()
}

/// `{0, step, 2·step, …, 1}`; `1/step` must be an integer.
pub fn uniform_grid(step: f64) -> Result<Vec<f64>> {
    let n = grid_points(step)?;
    Ok((0..=n).map(|k| k as f64 / n as f64).collect())
}

pub(crate) fn grid_points(step: f64) -> Result<usize> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::invalid(format!("grid step {step} must lie in (0, 1]")));
    }
    let n = (1.0 / step).round();
    if ((1.0 / step) - n).abs() > 1e-9 {
        return Err(Error::invalid(format!("grid step {step} does not divide 1")));
    }
    Ok(n as usize)
}

/// Primal learner for auctions with valuations on a finite grid: one
/// exponential-weights instance per valuation, over void and the bids not
/// above that valuation.
#[derive(Debug, Clone)]
pub struct FiniteFpaPrimal {
    valuations: Vec<f64>,
    bids: Vec<f64>,
    /// Per valuation: indices into `bids` of the bids `≤ v`.
    menus: Vec<Vec<usize>>,
    learners: Vec<SimplexOmd>,
    current: Option<usize>,
}

impl FiniteFpaPrimal {
    pub fn new(valuations: Vec<f64>, bids: Vec<f64>, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        if valuations.is_empty() || bids.is_empty() {
            return Err(Error::invalid("valuation and bid grids must be nonempty"));
        }
        if valuations.iter().chain(&bids).any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::invalid("grid points must lie in [0, 1]"));
        }
        let menus: Vec<Vec<usize>> = valuations
            .iter()
            .map(|&v| (0..bids.len()).filter(|&j| bids[j] <= v).collect())
            .collect();
        let learners = menus
            .iter()
            .map(|menu| SimplexOmd::new(menu.len() + 1, primal_range(rho)?, StepSchedule::Anytime))
            .collect::<Result<_>>()?;
        Ok(Self {
            valuations,
            bids,
            menus,
            learners,
            current: None,
        })
    }

    pub fn valuations(&self) -> &[f64] {
        &self.valuations
    }

    pub fn bids(&self) -> &[f64] {
        &self.bids
    }

    pub fn learner(&self, valuation_index: usize) -> &SimplexOmd {
        &self.learners[valuation_index]
    }

    pub fn valuation_index(&self, v: f64) -> Result<usize> {
        self.valuations
            .iter()
            .position(|&x| (x - v).abs() <= 1e-12)
            .ok_or_else(|| Error::invalid(format!("valuation {v} is not on the grid")))
    }

    /// Bid of action `a` (0 = void) in the menu of valuation `vi`.
    pub fn bid_of(&self, vi: usize, action: usize) -> Option<f64> {
        action.checked_sub(1).map(|k| self.bids[self.menus[vi][k]])
    }

    /// Per-bid payoffs over the whole grid for a valuation on the grid.
    pub fn payoffs(&self, v: f64, lambda: f64, competing_bid: f64) -> Result<Vec<f64>> {
        self.valuation_index(v)?;
        Ok(finite_payoffs(v, lambda, &self.bids, competing_bid))
    }
}

impl PrimalLearner for FiniteFpaPrimal {
    type Input = AuctionRound;

    fn feedback(&self) -> Feedback {
        Feedback::Full
    }

    fn decide(&mut self, v: &f64, _: Option<&DualVector>, rng: &mut ChaCha20Rng) -> Result<Decision> {
        let vi = self.valuation_index(*v)?;
        self.current = Some(vi);
        let mixture = self.learners[vi].next_element();
        let action = mixture.sample(rng);
        Ok(Decision { mixture, action })
    }

    fn request(&self, input: &AuctionRound, _: &DualVector) -> Result<Request> {
        let vi = self.valuation_index(input.valuation)?;
        let mut rewards = vec![0.0];
        let mut costs = vec![vec![0.0]];
        for &j in &self.menus[vi] {
            let b = self.bids[j];
            let win = b >= input.competing_bid;
            rewards.push(if win { input.valuation - b } else { 0.0 });
            costs.push(vec![if win { b } else { 0.0 }]);
        }
        Request::new(rewards, costs, 0)
    }

    fn observe_full(&mut self, input: &AuctionRound, req: &Request, lam: &DualVector) -> Result<()> {
        let vi = self
            .current
            .take()
            .ok_or_else(|| Error::protocol("observe without a preceding decision"))?;
        if self.valuation_index(input.valuation)? != vi {
            return Err(Error::protocol("observed valuation differs from the decided one"));
        }
        self.learners[vi].observe(&primal_utilities(req, lam))
    }

    fn observe_bandit(&mut self, _: usize, _: f64, _: &[f64], _: &DualVector) -> Result<()> {
        Err(Error::protocol("finite auction learner uses full feedback"))
    }

    fn forgo(&mut self) -> Result<()> {
        Err(Error::protocol("finite auction learner uses full feedback"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payoff_examples() {
        assert_eq!(lagrangian_payoff(0.8, 0.0, 0.3, 0.5), 0.0);
        assert!(lagrangian_payoff(0.6, 1.0, 0.3, 0.3).abs() < 1e-15);
        assert!((lagrangian_payoff(0.8, 0.0, 0.5, 0.4) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn threshold_examples() {
        // π̂(⌊0.6⌋_{0.1}) = 0.5, ε = 0.1, λ = 1 → min{0.7, 0.3} = 0.3.
        assert!((threshold_bid(0.5, 0.6, 1.0, 0.1) - 0.3).abs() < 1e-15);
        assert!((threshold_bid(0.0, 0.5, 0.0, 0.05) - 0.1).abs() < 1e-15);
        assert_eq!(threshold_bid(0.9, 1.0, 0.0, 0.25), 1.0);
        assert_eq!(threshold_bid(0.0, 0.0, 3.0, 0.25), 0.0);
    }

    #[test]
    fn threshold_payoff_is_nonnegative_exactly() {
        for i in 0..=200 {
            for k in 0..=40 {
                let v = i as f64 / 200.0;
                let lambda = k as f64 * 0.1;
                let b = threshold_bid(1.0, v, lambda, 0.125);
                let p = lagrangian_payoff(v, lambda, b, 0.0);
                assert!((0.0..=1.0).contains(&p), "v={v} λ={lambda} b={b} p={p}");
            }
        }
    }

    #[test]
    fn dyadic_floor() {
        assert_eq!(dyadic_floor_index(0.6, 2), 2);
        assert_eq!(dyadic_floor_index(1.0, 2), 4);
        assert_eq!(dyadic_floor_index(0.0, 3), 0);
    }

    #[test]
    fn grids() {
        assert_eq!(uniform_grid(0.25).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(uniform_grid(0.3).is_err());
        assert!(uniform_grid(0.0).is_err());
    }

    #[test]
    fn finite_primal_rejects_off_grid_valuation() {
        let p = FiniteFpaPrimal::new(vec![0.0, 0.5, 1.0], uniform_grid(0.25).unwrap(), 0.5).unwrap();
        assert!(matches!(p.payoffs(0.3, 0.0, 0.1), Err(Error::InvalidArgument(_))));
        let pay = p.payoffs(0.5, 1.0, 0.2).unwrap();
        assert_eq!(pay[0], 0.0);
        assert!((pay[1] - 0.0).abs() < 1e-15);
        assert!((pay[2] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn finite_request_menu() {
        let p = FiniteFpaPrimal::new(vec![0.5], uniform_grid(0.25).unwrap(), 0.5).unwrap();
        let lam = DualVector::zeros(1, 0.5).unwrap();
        let req = p.request(&AuctionRound::new(0.5, 0.2).unwrap(), &lam).unwrap();
        // void, 0 (loses), 0.25, 0.5
        assert_eq!(req.rewards(), &[0.0, 0.0, 0.25, 0.0]);
        assert_eq!(req.cost(2), &[0.25]);
        assert_eq!(p.bid_of(0, 3), Some(0.5));
        assert_eq!(p.bid_of(0, 0), None);
    }
}
