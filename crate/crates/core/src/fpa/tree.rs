//! The hierarchical tree of discretized bidding policies.
//!
//! Valuations at level `m` live on `V_{ε_m} = {0, ε_m, …, 1}` with
//! `ε_m = 2^{-m}`; bids on `{0, g, …, 1}`. Policies are stored as integer
//! bid indices `j ∈ 0..=G`, `G = 1/g`, one per valuation grid point.
//! `π̂ ∈ Π̂_{ε_m}` iff adjacent grid points satisfy `|Δj|·2^m ≤ 2G`, which on
//! a one-dimensional grid is equivalent to 2-Lipschitz continuity.
//!
//! The root has one child per policy in `Π̂_{ε_1}`. A node `h` at level
//! `m ∈ [1, M−1]` with parent policy `σ_h` has one child per refinement of
//! `σ_h` in `Π̂_{ε_{m+1}}`. Every non-terminal node also has a jump edge to
//! a terminal holding `ζ(h)`, where for `v` on `V_{ε_M}`
//! `ζ(h)(v) = σ_h(⌊v⌋_{ε_m}) + ⌊2(v − ⌊v⌋_{ε_m})⌋_g`, clamped to 1. At the
//! root `σ ≡ 1`, so `ζ(root) ≡ 1`.
//!
//! Terminals are numbered in depth-first order, so every subtree owns a
//! contiguous range of terminal indices.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::types::check_rho;

use super::grid_points;

/// Default limit on the total number of tree nodes, terminals included.
pub const DEFAULT_NODE_CAP: usize = 2_000_000;

/// Learning-rate rule of the per-node exponential-weights learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateRule {
    /// `η_t = min{1/4, √(ln|A(h)| / (t·Δ_m))}`.
    Gap,
    /// `η_t = min{1/4, √(ln|A(h)| / (t·Δ_m·ε_{m+1}))}`.
    GapTimesEps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    pub horizon: usize,
    pub levels: usize,
    pub bid_step: f64,
    pub rho: f64,
    pub node_cap: usize,
    pub rate: RateRule,
}

/// `⌊log₂ √T⌋`, the largest `M` with `4^M ≤ T`.
pub fn default_levels(horizon: usize) -> usize {
    let mut m = 0;
    while 4usize.saturating_pow(m as u32 + 1) <= horizon {
        m += 1;
    }
    m
}

impl TreeConfig {
    /// Default levels and bid step `1/T`.
    pub fn new(horizon: usize, rho: f64) -> Self {
        Self {
            horizon,
            levels: default_levels(horizon),
            bid_step: 1.0 / horizon.max(1) as f64,
            rho,
            node_cap: DEFAULT_NODE_CAP,
            rate: RateRule::Gap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Child {
    Node(usize),
    Terminal(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub level: usize,
    /// `σ_h` on `V_{ε_level}`; empty at the root.
    pub sigma: Vec<u32>,
    /// Edges `C(h)` followed by the jump edge `ζ(h)`, which is always last.
    pub children: Vec<Child>,
    pub terminals: Range<usize>,
}

impl Node {
    pub fn zeta_child(&self) -> usize {
        match self.children.last() {
            Some(Child::Terminal(z)) => *z,
            _ => unreachable!("every non-terminal node ends with its jump edge"),
        }
    }

    pub fn arity(&self) -> usize {
        self.children.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTree {
    levels: usize,
    grid: u32,
    rho: f64,
    horizon: usize,
    rate: RateRule,
    nodes: Vec<Node>,
    /// Terminal policies on `V_{ε_M}`, in depth-first order.
    terminals: Vec<Vec<u32>>,
    /// Node that owns each terminal as a direct child.
    terminal_parent: Vec<usize>,
    /// Position of each terminal among its parent's children.
    terminal_slot: Vec<usize>,
    node_parent: Vec<Option<(usize, usize)>>,
}

/// Whether `a, b` are admissible neighbours at spacing `2^{-level}`.
fn lipschitz_ok(a: u32, b: u32, level: usize, grid: u32) -> bool {
    (a.abs_diff(b) as u64) << level <= 2 * grid as u64
}

/// Every policy on `V_{ε_1} = {0, 1/2, 1}`.
fn first_level(grid: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for a in 0..=grid {
        for b in (0..=grid).filter(|&b| lipschitz_ok(a, b, 1, grid)) {
            for c in (0..=grid).filter(|&c| lipschitz_ok(b, c, 1, grid)) {
                out.push(vec![a, b, c]);
            }
        }
    }
    out
}

/// Admissible values at each odd point of `V_{ε_{level+1}}` when refining
/// `sigma` on `V_{ε_level}`.
fn refinement_choices(sigma: &[u32], level: usize, grid: u32) -> Vec<Vec<u32>> {
    sigma
        .windows(2)
        .map(|w| {
            (0..=grid)
                .filter(|&c| lipschitz_ok(w[0], c, level + 1, grid) && lipschitz_ok(c, w[1], level + 1, grid))
                .collect()
        })
        .collect()
}

fn refinement_count(sigma: &[u32], level: usize, grid: u32) -> usize {
    refinement_choices(sigma, level, grid)
        .iter()
        .map(Vec::len)
        .try_fold(1usize, |acc, n| acc.checked_mul(n))
        .unwrap_or(usize::MAX)
}

/// Calls `visit` on every refinement in lexicographic order.
fn for_each_refinement(sigma: &[u32], level: usize, grid: u32, mut visit: impl FnMut(Vec<u32>)) {
    let choices = refinement_choices(sigma, level, grid);
    if choices.iter().any(Vec::is_empty) {
        return;
    }
    let mut idx = vec![0usize; choices.len()];
    loop {
        let mut policy = Vec::with_capacity(2 * sigma.len() - 1);
        for (k, &s) in sigma.iter().enumerate() {
            policy.push(s);
            if k < choices.len() {
                policy.push(choices[k][idx[k]]);
            }
        }
        visit(policy);
        let mut k = choices.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < choices[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Repeats each point of a level-`level` policy onto `V_{ε_M}` (used only
/// to evaluate `σ_h(⌊v⌋_{ε_m})`).
fn zeta(sigma: &[u32], level: usize, levels: usize, grid: u32) -> Vec<u32> {
    let points = 1usize << levels;
    let s = 1usize << (levels - level);
    (0..=points)
        .map(|i| {
            let base = if level == 0 { grid } else { sigma[i / s] };
            let jump = (2 * (i % s) as u64 * grid as u64 / points as u64) as u32;
            (base + jump).min(grid)
        })
        .collect()
}

struct Builder {
    levels: usize,
    grid: u32,
    cap: usize,
    nodes: Vec<Node>,
    terminals: Vec<Vec<u32>>,
    terminal_parent: Vec<usize>,
    terminal_slot: Vec<usize>,
    per_level: Vec<usize>,
}

impl Builder {
    fn count(&mut self, level: usize) -> Result<()> {
        self.per_level[level] += 1;
        let total = self.nodes.len() + self.terminals.len() + 1;
        if total > self.cap {
            return Err(Error::Capacity {
                level,
                nodes: total,
                cap: self.cap,
            });
        }
        Ok(())
    }

    fn push_terminal(&mut self, policy: Vec<u32>, parent: usize, slot: usize) -> usize {
        let id = self.terminals.len();
        self.terminals.push(policy);
        self.terminal_parent.push(parent);
        self.terminal_slot.push(slot);
        id
    }

    /// Inserts the subtree of a node with parent policy `sigma` at `level`.
    fn node(&mut self, sigma: Vec<u32>, level: usize) -> Result<usize> {
        self.count(level)?;
        let id = self.nodes.len();
        let start = self.terminals.len();
        self.nodes.push(Node {
            level,
            sigma: Vec::new(),
            children: Vec::new(),
            terminals: start..start,
        });
        let mut children = Vec::new();
        let mut kids: Vec<Vec<u32>> = Vec::new();
        if level == 0 {
            kids = first_level(self.grid);
        } else {
            let room = self.cap.saturating_sub(self.nodes.len() + self.terminals.len());
            if refinement_count(&sigma, level, self.grid) > room {
                return Err(Error::Capacity {
                    level: level + 1,
                    nodes: self.nodes.len() + self.terminals.len() + refinement_count(&sigma, level, self.grid),
                    cap: self.cap,
                });
            }
            for_each_refinement(&sigma, level, self.grid, |p| kids.push(p));
        }
        for policy in kids {
            let child_level = level + 1;
            if child_level == self.levels {
                self.count(child_level)?;
                let slot = children.len();
                children.push(Child::Terminal(self.push_terminal(policy, id, slot)));
            } else {
                children.push(Child::Node(self.node(policy, child_level)?));
            }
        }
        self.count(self.levels)?;
        let z = zeta(&sigma, level, self.levels, self.grid);
        let slot = children.len();
        children.push(Child::Terminal(self.push_terminal(z, id, slot)));
        let end = self.terminals.len();
        let node = &mut self.nodes[id];
        node.sigma = sigma;
        node.children = children;
        node.terminals = start..end;
        Ok(id)
    }
}

impl PolicyTree {
    pub fn build(config: &TreeConfig) -> Result<Self> {
        check_rho(config.rho)?;
        if config.levels < 2 {
            return Err(Error::invalid(format!(
                "the policy tree needs at least 2 levels, got {}",
                config.levels
            )));
        }
        if config.levels > 20 {
            return Err(Error::invalid("at most 20 tree levels are supported"));
        }
        if config.horizon == 0 {
            return Err(Error::invalid("horizon must be positive"));
        }
        let grid = grid_points(config.bid_step)? as u32;
        let mut b = Builder {
            levels: config.levels,
            grid,
            cap: config.node_cap,
            nodes: Vec::new(),
            terminals: Vec::new(),
            terminal_parent: Vec::new(),
            terminal_slot: Vec::new(),
            per_level: vec![0; config.levels + 1],
        };
        b.node(Vec::new(), 0)?;
        let mut node_parent = vec![None; b.nodes.len()];
        for (id, node) in b.nodes.iter().enumerate() {
            for (slot, child) in node.children.iter().enumerate() {
                if let Child::Node(c) = *child {
                    node_parent[c] = Some((id, slot));
                }
            }
        }
        Ok(Self {
            levels: config.levels,
            grid,
            rho: config.rho,
            horizon: config.horizon,
            rate: config.rate,
            nodes: b.nodes,
            terminals: b.terminals,
            terminal_parent: b.terminal_parent,
            terminal_slot: b.terminal_slot,
            node_parent,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// `G = 1/g`.
    pub fn grid(&self) -> u32 {
        self.grid
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn rate(&self) -> RateRule {
        self.rate
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn terminals(&self) -> &[Vec<u32>] {
        &self.terminals
    }

    pub fn num_terminals(&self) -> usize {
        self.terminals.len()
    }

    pub fn terminal_parent(&self, z: usize) -> (usize, usize) {
        (self.terminal_parent[z], self.terminal_slot[z])
    }

    /// Parent node and slot of a non-root node.
    pub fn node_parent(&self, id: usize) -> Option<(usize, usize)> {
        self.node_parent[id]
    }

    /// `ε_m = 2^{-m}`.
    pub fn eps(level: usize) -> f64 {
        (-(level as f64)).exp2()
    }

    /// `Δ_m = 4(1 + 1/ρ)ε_m`.
    pub fn delta(&self, level: usize) -> f64 {
        4.0 * (1.0 + 1.0 / self.rho) * Self::eps(level)
    }

    /// `η_{t,h}` for a node with `arity` edges at `level`.
    pub fn eta(&self, t: usize, level: usize, arity: usize) -> f64 {
        let log_a = (arity as f64).ln();
        if log_a == 0.0 {
            return 0.0;
        }
        let mut denom = t as f64 * self.delta(level);
        if self.rate == RateRule::GapTimesEps {
            denom *= Self::eps(level + 1);
        }
        (log_a / denom).sqrt().min(0.25)
    }

    /// Nodes per level, root first; terminals are counted at level `M`.
    pub fn level_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.levels + 1];
        for n in &self.nodes {
            sizes[n.level] += 1;
        }
        sizes[self.levels] = self.terminals.len();
        sizes
    }

    /// Bid of terminal `z` at valuation grid index `i` of `V_{ε_M}`.
    pub fn terminal_bid(&self, z: usize, i: usize) -> f64 {
        self.terminals[z][i] as f64 / self.grid as f64
    }

    /// Checks, for every node `h` at level `m`, every terminal below `h` and
    /// every point of `V_{ε_M}`: `π̄ ≤ ζ(h) ≤ π̄ + 4ε_m` in bid units.
    pub fn check_zeta_dominance(&self) -> Result<()> {
        let points = 1usize << self.levels;
        for (id, node) in self.nodes.iter().enumerate() {
            let zeta = &self.terminals[node.zeta_child()];
            let slack = (4u64 * self.grid as u64) >> node.level;
            for z in node.terminals.clone() {
                let pol = &self.terminals[z];
                for i in 0..=points {
                    let (zb, pb) = (zeta[i] as u64, pol[i] as u64);
                    if zb < pb || zb > pb + slack {
                        return Err(Error::Invariant(format!(
                            "jump edge of node {id} does not dominate terminal {z} at point {i}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks that every edge policy below a node at level `m ≥ 1` agrees
    /// with `σ_h` on `V_{ε_m}` and is 2-Lipschitz on its own grid.
    pub fn check_structure(&self) -> Result<()> {
        for (id, node) in self.nodes.iter().enumerate() {
            for (slot, child) in node.children.iter().enumerate() {
                if slot + 1 == node.children.len() {
                    continue;
                }
                let policy: &[u32] = match *child {
                    Child::Node(c) => &self.nodes[c].sigma,
                    Child::Terminal(z) => &self.terminals[z],
                };
                let level = node.level + 1;
                if policy.len() != (1 << level) + 1 {
                    return Err(Error::Invariant(format!("edge {slot} of node {id} has the wrong length")));
                }
                if policy.windows(2).any(|w| !lipschitz_ok(w[0], w[1], level, self.grid)) {
                    return Err(Error::Invariant(format!("edge {slot} of node {id} is not 2-Lipschitz")));
                }
                if node.level >= 1 && policy.iter().step_by(2).ne(node.sigma.iter()) {
                    return Err(Error::Invariant(format!("edge {slot} of node {id} disagrees with its parent")));
                }
            }
        }
        Ok(())
    }
}
