//! Domain types shared by every layer: action sets, requests, strategy
//! mixtures, dual vectors and budget accounting.

use rand::Rng;

use crate::error::{Error, Result};

/// Mixture weights must sum to one within this tolerance.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Slack allowed on `‖λ‖₁ ≤ 1/ρ`.
pub const DUAL_NORM_TOL: f64 = 1e-9;

fn check_unit(value: f64, what: &str) -> Result<()> {
    if !value.is_finite() || !(0.0..=1.0).contains(&value) {
        return Err(Error::invalid(format!("{what} = {value} is outside [0, 1]")));
    }
    Ok(())
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if !rho.is_finite() || rho <= 0.0 || rho > 1.0 {
        return Err(Error::invalid(format!("per-round budget rho = {rho} must lie in (0, 1]")));
    }
    Ok(())
}

/// A finite set of labelled actions with a designated void action.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    labels: Vec<String>,
    void_index: usize,
}

impl ActionSet {
    pub fn new(labels: Vec<String>, void_index: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("action set must contain at least one action"));
        }
        if void_index >= labels.len() {
            return Err(Error::invalid(format!(
                "void index {void_index} out of range for {} actions",
                labels.len()
            )));
        }
        Ok(Self { labels, void_index })
    }

    /// Actions labelled `a0..a{n-1}`.
    pub fn indexed(n: usize, void_index: usize) -> Result<Self> {
        Self::new((0..n).map(|i| format!("a{i}")).collect(), void_index)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn void_index(&self) -> usize {
        self.void_index
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Builds a request over this action set, validating dimensions.
    pub fn request(&self, rewards: Vec<f64>, costs: Vec<Vec<f64>>) -> Result<Request> {
        if rewards.len() != self.len() {
            return Err(Error::invalid(format!(
                "request has {} rewards, action set has {} actions",
                rewards.len(),
                self.len()
            )));
        }
        Request::new(rewards, costs, self.void_index)
    }
}

/// One round's reward function `f_t` and cost function `c_t` over a finite
/// action set. Costs are stored row-major (`n × m`).
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    rewards: Vec<f64>,
    costs: Vec<f64>,
    resources: usize,
    void_index: usize,
}

impl Request {
    pub fn new(rewards: Vec<f64>, costs: Vec<Vec<f64>>, void_index: usize) -> Result<Self> {
        if costs.len() != rewards.len() {
            return Err(Error::invalid(format!(
                "cost matrix has {} rows but there are {} actions",
                costs.len(),
                rewards.len()
            )));
        }
        let resources = costs.first().map_or(0, Vec::len);
        if costs.iter().any(|row| row.len() != resources) {
            return Err(Error::invalid("cost rows have inconsistent lengths"));
        }
        let flat = costs.into_iter().flatten().collect();
        Self::from_flat(rewards, flat, resources, void_index)
    }

    pub fn from_flat(
        rewards: Vec<f64>,
        costs: Vec<f64>,
        resources: usize,
        void_index: usize,
    ) -> Result<Self> {
        let n = rewards.len();
        if n == 0 {
            return Err(Error::invalid("request must cover at least one action"));
        }
        if resources == 0 {
            return Err(Error::invalid("request must have at least one resource"));
        }
        if costs.len() != n * resources {
            return Err(Error::invalid(format!(
                "flat cost vector has {} entries, expected {}",
                costs.len(),
                n * resources
            )));
        }
        if void_index >= n {
            return Err(Error::invalid(format!("void index {void_index} out of range for {n} actions")));
        }
        for (x, &r) in rewards.iter().enumerate() {
            check_unit(r, &format!("reward[{x}]"))?;
        }
        for (k, &c) in costs.iter().enumerate() {
            check_unit(c, &format!("cost[{}][{}]", k / resources, k % resources))?;
        }
        let req = Self {
            rewards,
            costs,
            resources,
            void_index,
        };
        if req.rewards[void_index] != 0.0 || req.cost(void_index).iter().any(|&c| c != 0.0) {
            return Err(Error::invalid("void action must have zero reward and zero cost"));
        }
        Ok(req)
    }

    pub fn num_actions(&self) -> usize {
        self.rewards.len()
    }

    pub fn num_resources(&self) -> usize {
        self.resources
    }

    pub fn void_index(&self) -> usize {
        self.void_index
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn reward(&self, action: usize) -> f64 {
        self.rewards[action]
    }

    pub fn cost(&self, action: usize) -> &[f64] {
        &self.costs[action * self.resources..(action + 1) * self.resources]
    }

    pub(crate) fn costs_flat(&self) -> &[f64] {
        &self.costs
    }

    pub(crate) fn check_mixture(&self, xi: &Mixture) -> Result<()> {
        if xi.len() != self.num_actions() {
            return Err(Error::invalid(format!(
                "mixture over {} actions, request over {}",
                xi.len(),
                self.num_actions()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_dual(&self, lam: &DualVector) -> Result<()> {
        if lam.len() != self.resources {
            return Err(Error::invalid(format!(
                "dual vector has {} coordinates, request has {} resources",
                lam.len(),
                self.resources
            )));
        }
        Ok(())
    }

    /// `E_{x∼ξ}[f(x)]`.
    pub fn expected_reward(&self, xi: &Mixture) -> Result<f64> {
        self.check_mixture(xi)?;
        Ok(xi.weights().iter().zip(&self.rewards).map(|(w, r)| w * r).sum())
    }

    /// `E_{x∼ξ}[c(x)]`, one entry per resource.
    pub fn expected_cost(&self, xi: &Mixture) -> Result<Vec<f64>> {
        self.check_mixture(xi)?;
        let mut out = vec![0.0; self.resources];
        for (x, &w) in xi.weights().iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, c) in out.iter_mut().zip(self.cost(x)) {
                *o += w * c;
            }
        }
        Ok(out)
    }

    /// Divides the consumption of resource `i` by `scales[i]`; used to bring
    /// unequal budgets down to a common per-resource budget.
    pub fn rescale_costs(&self, scales: &[f64]) -> Result<Self> {
        if scales.len() != self.resources {
            return Err(Error::invalid("one scale per resource is required"));
        }
        let costs = self
            .costs
            .iter()
            .enumerate()
            .map(|(k, c)| c / scales[k % self.resources])
            .collect();
        Self::from_flat(self.rewards.clone(), costs, self.resources, self.void_index)
    }
}

/// Finite-support probability weights over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    weights: Vec<f64>,
}

impl Mixture {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("mixture must have at least one weight"));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::invalid(format!("mixture weight {w} is negative or non-finite")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    /// Normalizes nonnegative scores into a mixture.
    pub fn from_unnormalized(scores: Vec<f64>) -> Result<Self> {
        let total: f64 = scores.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::invalid("cannot normalize scores with non-positive total"));
        }
        Self::new(scores.into_iter().map(|s| s / total).collect())
    }

    pub fn dirac(n: usize, index: usize) -> Result<Self> {
        if index >= n {
            return Err(Error::invalid(format!("Dirac index {index} out of range for {n} actions")));
        }
        let mut weights = vec![0.0; n];
        weights[index] = 1.0;
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("uniform mixture over zero actions"));
        }
        Ok(Self {
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Inverse-CDF draw using one uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.weights, rng)
    }
}

pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
            acc += w;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// A multiplier vector in `D = {λ ≥ 0 : ‖λ‖₁ ≤ 1/ρ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    lambda: Vec<f64>,
    rho: f64,
}

impl DualVector {
    pub fn new(lambda: Vec<f64>, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        if let Some(l) = lambda.iter().find(|l| !l.is_finite() || **l < 0.0) {
            return Err(Error::invalid(format!("dual coordinate {l} is negative or non-finite")));
        }
        let norm: f64 = lambda.iter().sum();
        if norm > 1.0 / rho + DUAL_NORM_TOL {
            return Err(Error::invalid(format!(
                "‖λ‖₁ = {norm} exceeds 1/ρ = {}",
                1.0 / rho
            )));
        }
        Ok(Self { lambda, rho })
    }

    pub fn zeros(m: usize, rho: f64) -> Result<Self> {
        Self::new(vec![0.0; m], rho)
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn l1(&self) -> f64 {
        self.lambda.iter().sum()
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.lambda.iter().zip(v).map(|(l, c)| l * c).sum()
    }
}

/// Remaining per-resource budgets for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetState {
    remaining: Vec<f64>,
    budget: f64,
    rho: f64,
    horizon: usize,
    depleted: bool,
}

impl BudgetState {
    /// `m` resources, each with budget `budget`, over `horizon` rounds.
    pub fn new(budget: f64, horizon: usize, m: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        if m == 0 {
            return Err(Error::invalid("at least one resource is required"));
        }
        if !budget.is_finite() || budget < 1.0 {
            return Err(Error::invalid(format!("budget {budget} must be at least 1")));
        }
        if budget > horizon as f64 {
            return Err(Error::invalid("budget exceeds horizon"));
        }
        let rho = budget / horizon as f64;
        let mut state = Self {
            remaining: vec![budget; m],
            budget,
            rho,
            horizon,
            depleted: false,
        };
        state.refresh();
        Ok(state)
    }

    /// Reduces unequal budgets `budgets[i]` to a common budget `min_j B_j`.
    /// Returns the state and the per-resource divisors to apply to costs.
    pub fn normalized(budgets: &[f64], horizon: usize) -> Result<(Self, Vec<f64>)> {
        let min = budgets.iter().copied().fold(f64::INFINITY, f64::min);
        if budgets.is_empty() || !min.is_finite() || min <= 0.0 {
            return Err(Error::invalid("budgets must be positive and nonempty"));
        }
        let scales = budgets.iter().map(|b| b / min).collect();
        Ok((Self::new(min, horizon, budgets.len())?, scales))
    }

    fn refresh(&mut self) {
        self.depleted = self.remaining.iter().any(|&r| r < 1.0);
    }

    pub fn remaining(&self) -> &[f64] {
        &self.remaining
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_resources(&self) -> usize {
        self.remaining.len()
    }

    pub fn is_depleted(&self) -> bool {
        self.depleted
    }

    /// Index of the first resource below one unit, if any.
    pub fn depleted_resource(&self) -> Option<usize> {
        self.remaining.iter().position(|&r| r < 1.0)
    }

    /// Subtracts one round's realized consumption.
    pub fn charge(&mut self, cost: &[f64]) -> Result<()> {
        if cost.len() != self.remaining.len() {
            return Err(Error::invalid("cost vector does not match the number of resources"));
        }
        for (i, (r, c)) in self.remaining.iter().zip(cost).enumerate() {
            if r - c < 0.0 {
                return Err(Error::Invariant(format!(
                    "resource {i} would underflow: remaining {r}, cost {c}"
                )));
            }
        }
        for (r, c) in self.remaining.iter_mut().zip(cost) {
            *r -= c;
        }
        self.refresh();
        Ok(())
    }
}

/// LP upper bounds on the offline baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReport {
    /// Per-round LP optimum on the averaged inputs.
    pub opt_lp_value: f64,
    pub opt_lp_mixture: Mixture,
    /// `T · opt_lp_value`, an upper bound on the best dynamic policy.
    pub opt_dp_upper: f64,
    /// `T · opt_lp_value`, an upper bound on the best fixed mixture.
    pub opt_fd_upper: f64,
}
