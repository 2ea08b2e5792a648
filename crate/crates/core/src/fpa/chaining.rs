//! Chained exponential weights over the policy tree.

use std::sync::Arc;

use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::meta::{Decision, Feedback, PrimalLearner};
use crate::regret::exp_weights;
use crate::types::{sample_index, DualVector, Mixture, Request};

use super::tree::{Child, PolicyTree};
use super::{dyadic_floor_index, lagrangian_payoff, threshold_bid, AuctionRound};

const CONSISTENCY_TOL: f64 = 1e-9;

/// Thresholded bid of every bid-grid index at valuation `v`.
fn bid_table(tree: &PolicyTree, v: f64, lambda: f64) -> Vec<f64> {
    let eps = PolicyTree::eps(tree.levels());
    let g = tree.grid();
    (0..=g).map(|j| threshold_bid(j as f64 / g as f64, v, lambda, eps)).collect()
}

/// Lagrangian payoff of every terminal policy.
fn terminal_payoffs(tree: &PolicyTree, bids: &[f64], v: f64, lambda: f64, competing_bid: f64) -> Vec<f64> {
    let i = dyadic_floor_index(v, tree.levels() as u32);
    let per_index: Vec<f64> = bids
        .iter()
        .map(|&b| lagrangian_payoff(v, lambda, b, competing_bid))
        .collect();
    tree.terminals().iter().map(|pol| per_index[pol[i] as usize]).collect()
}

/// `4√(TΔ ln|A|) + 32(4 + ln T) ln|A|`.
pub fn node_regret_bound(horizon: usize, delta: f64, arity: usize) -> f64 {
    let t = horizon as f64;
    let log_a = (arity as f64).ln();
    4.0 * (t * delta * log_a).sqrt() + 32.0 * (4.0 + t.ln()) * log_a
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRegret {
    pub node: usize,
    pub level: usize,
    pub arity: usize,
    pub regret: f64,
    pub bound: f64,
}

/// Learning state of every node: cumulative edge rewards `r_h`, the
/// current weights `q_h` and the induced terminal distribution `p_h`.
#[derive(Debug, Clone)]
pub struct ChainingState {
    round: usize,
    prepared: bool,
    r: Vec<Vec<f64>>,
    realized: Vec<f64>,
    q: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
}

impl ChainingState {
    pub fn new(tree: &PolicyTree) -> Self {
        let nodes = tree.nodes();
        Self {
            round: 0,
            prepared: false,
            r: nodes.iter().map(|n| vec![0.0; n.arity()]).collect(),
            realized: vec![0.0; nodes.len()],
            q: nodes.iter().map(|n| vec![1.0 / n.arity() as f64; n.arity()]).collect(),
            p: nodes.iter().map(|n| vec![0.0; n.terminals.len()]).collect(),
        }
    }

    /// Completed rounds.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn q(&self, node: usize) -> &[f64] {
        &self.q[node]
    }

    /// `p_h` over the terminal range of `h`.
    pub fn p(&self, node: usize) -> &[f64] {
        &self.p[node]
    }

    pub fn cumulative(&self, node: usize) -> &[f64] {
        &self.r[node]
    }

    pub fn realized(&self, node: usize) -> f64 {
        self.realized[node]
    }

    /// Recomputes every `q_h` and `p_h` bottom-up for the next round and
    /// returns `p_root`.
    pub fn prepare(&mut self, tree: &PolicyTree) -> Result<&[f64]> {
        if self.prepared {
            return Err(Error::protocol("tree weights already prepared this round"));
        }
        let t = self.round + 1;
        for id in (0..tree.nodes().len()).rev() {
            let node = tree.node(id);
            let eta = tree.eta(t, node.level, node.arity());
            self.q[id] = exp_weights(&self.r[id], eta);
            let mut p = Vec::with_capacity(node.terminals.len());
            for (slot, child) in node.children.iter().enumerate() {
                let w = self.q[id][slot];
                match *child {
                    Child::Node(c) => p.extend(self.p[c].iter().map(|x| w * x)),
                    Child::Terminal(_) => p.push(w),
                }
            }
            self.p[id] = p;
        }
        self.prepared = true;
        Ok(&self.p[tree.root()])
    }

    /// Accumulates the round's terminal payoffs and returns the expected
    /// payoff `V_t(h)` of every node under the prepared weights.
    pub fn observe(&mut self, tree: &PolicyTree, payoffs: &[f64]) -> Result<Vec<f64>> {
        if !self.prepared {
            return Err(Error::protocol("observe without prepared tree weights"));
        }
        if payoffs.len() != tree.num_terminals() {
            return Err(Error::invalid("one payoff per terminal policy is required"));
        }
        let mut values = vec![0.0; tree.nodes().len()];
        for id in (0..tree.nodes().len()).rev() {
            let node = tree.node(id);
            let mut v = 0.0;
            for (slot, child) in node.children.iter().enumerate() {
                let c = child_value(&values, payoffs, *child);
                self.r[id][slot] += c;
                v += self.q[id][slot] * c;
            }
            self.realized[id] += v;
            values[id] = v;
        }
        self.round += 1;
        self.prepared = false;
        Ok(values)
    }

    /// `max_c r_h[c] − Σ_t V_t(h)` for every node.
    pub fn node_regrets(&self, tree: &PolicyTree) -> Vec<NodeRegret> {
        tree.nodes()
            .iter()
            .enumerate()
            .map(|(id, node)| {
                let best = self.r[id].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                NodeRegret {
                    node: id,
                    level: node.level,
                    arity: node.arity(),
                    regret: best - self.realized[id],
                    bound: node_regret_bound(tree.horizon(), tree.delta(node.level), node.arity()),
                }
            })
            .collect()
    }

    /// Checks that every `q_h` and `p_h` is a distribution and that `p_h`
    /// equals the product of `q` along each path below `h`.
    pub fn check_consistency(&self, tree: &PolicyTree) -> Result<()> {
        for (id, node) in tree.nodes().iter().enumerate() {
            for (what, dist) in [("q", &self.q[id]), ("p", &self.p[id])] {
                let total: f64 = dist.iter().sum();
                if dist.iter().any(|&x| x < 0.0) || (total - 1.0).abs() > CONSISTENCY_TOL {
                    return Err(Error::Invariant(format!("{what} of node {id} is not a distribution")));
                }
            }
            for z in node.terminals.clone() {
                let (mut parent, slot) = tree.terminal_parent(z);
                let mut prob = self.q[parent][slot];
                while parent != id {
                    let (up, slot) = tree
                        .node_parent(parent)
                        .ok_or_else(|| Error::Invariant(format!("terminal {z} is not below node {id}")))?;
                    prob *= self.q[up][slot];
                    parent = up;
                }
                let stored = self.p[id][z - node.terminals.start];
                if (stored - prob).abs() > CONSISTENCY_TOL {
                    return Err(Error::Invariant(format!(
                        "p of node {id} at terminal {z} is {stored}, path product is {prob}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn child_value(values: &[f64], payoffs: &[f64], child: Child) -> f64 {
    match child {
        Child::Node(c) => values[c],
        Child::Terminal(z) => payoffs[z],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodEdgeViolation {
    pub round: usize,
    pub node: usize,
    pub slot: usize,
    /// `V_t(c) − Δ_m − V_t(ζ)`, positive when violated.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodEdgeReport {
    pub rounds: usize,
    pub checks: usize,
    pub violations: Vec<GoodEdgeViolation>,
    /// Smallest `V_t(ζ) − V_t(c) + Δ_m` over all checks.
    pub min_margin: f64,
    pub node_regrets: Vec<NodeRegret>,
}

impl GoodEdgeReport {
    /// Nodes whose measured regret exceeds the bound.
    pub fn regret_violations(&self) -> impl Iterator<Item = &NodeRegret> {
        self.node_regrets.iter().filter(|n| n.regret > n.bound)
    }
}

/// Compares the jump edge with every sibling at levels `1..M`.
fn check_round(
    tree: &PolicyTree,
    round: usize,
    values: &[f64],
    payoffs: &[f64],
    report: &mut GoodEdgeReport,
) {
    for (id, node) in tree.nodes().iter().enumerate() {
        if node.level == 0 {
            continue;
        }
        let delta = tree.delta(node.level);
        let zeta = payoffs[node.zeta_child()];
        for (slot, child) in node.children.iter().enumerate() {
            let margin = zeta - child_value(values, payoffs, *child) + delta;
            report.checks += 1;
            report.min_margin = report.min_margin.min(margin);
            if margin < 0.0 {
                report.violations.push(GoodEdgeViolation {
                    round,
                    node: id,
                    slot,
                    excess: -margin,
                });
            }
        }
    }
}

/// Replays `(v_t, λ_t, m_t)` through a fresh tree state, checking the
/// good-edge property at every round and measuring per-node regret.
pub fn good_edge_check(tree: &PolicyTree, rounds: &[(f64, f64, f64)]) -> Result<GoodEdgeReport> {
    let mut state = ChainingState::new(tree);
    let mut report = GoodEdgeReport {
        rounds: rounds.len(),
        checks: 0,
        violations: Vec::new(),
        min_margin: f64::INFINITY,
        node_regrets: Vec::new(),
    };
    for (t, &(v, lambda, m)) in rounds.iter().enumerate() {
        AuctionRound::new(v, m)?;
        state.prepare(tree)?;
        let bids = bid_table(tree, v, lambda);
        let payoffs = terminal_payoffs(tree, &bids, v, lambda, m);
        let values = state.observe(tree, &payoffs)?;
        check_round(tree, t + 1, &values, &payoffs, &mut report);
    }
    report.node_regrets = state.node_regrets(tree);
    Ok(report)
}

#[derive(Debug, Clone)]
struct Pending {
    valuation: f64,
    lambda: f64,
    bids: Vec<f64>,
}

/// Primal learner playing a sampled terminal policy, thresholded at the
/// round's multiplier. Requires dual-first order.
#[derive(Clone)]
pub struct ChainingPrimal {
    tree: Arc<PolicyTree>,
    state: ChainingState,
    pending: Option<Pending>,
    history: Vec<(f64, f64, f64)>,
    payoff_min: f64,
    payoff_max: f64,
    good_edge: GoodEdgeReport,
}

impl ChainingPrimal {
    pub fn new(tree: Arc<PolicyTree>) -> Self {
        let state = ChainingState::new(&tree);
        Self {
            tree,
            state,
            pending: None,
            history: Vec::new(),
            payoff_min: f64::INFINITY,
            payoff_max: f64::NEG_INFINITY,
            good_edge: GoodEdgeReport {
                rounds: 0,
                checks: 0,
                violations: Vec::new(),
                min_margin: f64::INFINITY,
                node_regrets: Vec::new(),
            },
        }
    }

    pub fn tree(&self) -> &PolicyTree {
        &self.tree
    }

    pub fn state(&self) -> &ChainingState {
        &self.state
    }

    /// Observed `(v_t, λ_t, m_t)`.
    pub fn history(&self) -> &[(f64, f64, f64)] {
        &self.history
    }

    /// Smallest and largest terminal payoff seen, if any round completed.
    pub fn payoff_range(&self) -> Option<(f64, f64)> {
        (self.payoff_min <= self.payoff_max).then_some((self.payoff_min, self.payoff_max))
    }

    /// Good-edge checks made online, with per-node regret so far.
    pub fn good_edge_report(&self) -> GoodEdgeReport {
        let mut report = self.good_edge.clone();
        report.node_regrets = self.state.node_regrets(&self.tree);
        report
    }

    /// Thresholded bid of terminal `z` in the current round.
    pub fn current_bid(&self, z: usize) -> Option<f64> {
        let pending = self.pending.as_ref()?;
        let i = dyadic_floor_index(pending.valuation, self.tree.levels() as u32);
        Some(pending.bids[self.tree.terminals()[z][i] as usize])
    }

    fn pending_for(&self, input: &AuctionRound) -> Result<&Pending> {
        let pending = self
            .pending
            .as_ref()
            .ok_or_else(|| Error::protocol("no bid was placed this round"))?;
        if pending.valuation != input.valuation {
            return Err(Error::protocol("observed valuation differs from the decided one"));
        }
        Ok(pending)
    }
}

fn scalar_lambda(lam: &DualVector) -> Result<f64> {
    match lam.lambda() {
        [l] => Ok(*l),
        _ => Err(Error::invalid("budget pacing uses a single resource")),
    }
}

impl PrimalLearner for ChainingPrimal {
    type Input = AuctionRound;

    fn feedback(&self) -> Feedback {
        Feedback::Full
    }

    fn decide(&mut self, v: &f64, lam: Option<&DualVector>, rng: &mut ChaCha20Rng) -> Result<Decision> {
        let lam = lam.ok_or_else(|| Error::protocol("the chaining bidder must see λ before bidding"))?;
        if self.pending.is_some() {
            return Err(Error::protocol("the chaining bidder was asked twice in one round"));
        }
        if !(0.0..=1.0).contains(v) {
            return Err(Error::invalid(format!("valuation {v} is outside [0, 1]")));
        }
        let lambda = scalar_lambda(lam)?;
        let p_root = self.state.prepare(&self.tree)?;
        let mut weights = Vec::with_capacity(p_root.len() + 1);
        weights.push(0.0);
        weights.extend_from_slice(p_root);
        let action = 1 + sample_index(p_root, rng);
        let mixture = Mixture::new(weights)?;
        self.pending = Some(Pending {
            valuation: *v,
            lambda,
            bids: bid_table(&self.tree, *v, lambda),
        });
        Ok(Decision { mixture, action })
    }

    fn request(&self, input: &AuctionRound, _: &DualVector) -> Result<Request> {
        let pending = self.pending_for(input)?;
        let i = dyadic_floor_index(input.valuation, self.tree.levels() as u32);
        let n = self.tree.num_terminals() + 1;
        let mut rewards = Vec::with_capacity(n);
        let mut costs = Vec::with_capacity(n);
        rewards.push(0.0);
        costs.push(0.0);
        for pol in self.tree.terminals() {
            let b = pending.bids[pol[i] as usize];
            let win = b >= input.competing_bid;
            rewards.push(if win { input.valuation - b } else { 0.0 });
            costs.push(if win { b } else { 0.0 });
        }
        Request::from_flat(rewards, costs, 1, 0)
    }

    fn observe_full(&mut self, input: &AuctionRound, _: &Request, lam: &DualVector) -> Result<()> {
        let pending = self.pending_for(input)?;
        if scalar_lambda(lam)? != pending.lambda {
            return Err(Error::protocol("observed multiplier differs from the decided one"));
        }
        let lambda = pending.lambda;
        let payoffs = terminal_payoffs(&self.tree, &pending.bids, input.valuation, lambda, input.competing_bid);
        self.pending = None;
        for &x in &payoffs {
            self.payoff_min = self.payoff_min.min(x);
            self.payoff_max = self.payoff_max.max(x);
        }
        let values = self.state.observe(&self.tree, &payoffs)?;
        let round = self.state.round();
        self.good_edge.rounds = round;
        check_round(&self.tree, round, &values, &payoffs, &mut self.good_edge);
        self.history.push((input.valuation, lambda, input.competing_bid));
        Ok(())
    }

    fn observe_bandit(&mut self, _: usize, _: f64, _: &[f64], _: &DualVector) -> Result<()> {
        Err(Error::protocol("the chaining bidder uses full feedback"))
    }

    fn forgo(&mut self) -> Result<()> {
        Err(Error::protocol("the chaining bidder uses full feedback"))
    }
}
