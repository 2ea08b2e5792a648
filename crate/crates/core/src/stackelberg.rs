//! Repeated Stackelberg games with knapsacks. The leader commits to a mixed
//! strategy `x`; a follower of type `k_t` best-responds; the leader earns
//! `xᵀU_L y` and spends `xᵀC_t`.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use sha2::Sha256;

use crate::env::{absorb_f64s, Commit};
use crate::error::{Error, Result};
use crate::lp::{for_each_subset, solve_linear};
use crate::meta::{primal_range, primal_utilities, Decision, Feedback, Observable, PrimalLearner};
use crate::regret::{SimplexOmd, StepSchedule};
use crate::types::{DualVector, Mixture, Request};

/// Follower indifference band.
pub const INDIFFERENCE_TOL: f64 = 1e-9;
/// Vertices closer than this in ℓ∞ are merged.
pub const DEDUP_TOL: f64 = 1e-8;
/// Largest leader action count accepted by the vertex enumeration.
pub const MAX_LEADER_ACTIONS: usize = 6;

/// Row-major `rows × cols` matrix with entries in `[0, 1]`.
pub type Matrix = Vec<Vec<f64>>;

fn check_matrix(m: &Matrix, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid(format!("{what} must be {rows}×{cols}")));
    }
    if m.iter().flatten().any(|v| !v.is_finite() || !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid(format!("{what} has entries outside [0, 1]")));
    }
    Ok(())
}

/// Payoff structure shared by every round.
#[derive(Debug, Clone, PartialEq)]
pub struct StackelbergGame {
    leader: Matrix,
    types: Vec<Matrix>,
    void_index: usize,
}

impl StackelbergGame {
    pub fn new(leader: Matrix, types: Vec<Matrix>, void_index: usize) -> Result<Self> {
        let n_l = leader.len();
        let n_f = leader.first().map_or(0, Vec::len);
        if n_l == 0 || n_f == 0 {
            return Err(Error::invalid("leader payoff matrix is empty"));
        }
        check_matrix(&leader, n_l, n_f, "leader payoff matrix")?;
        if types.is_empty() {
            return Err(Error::invalid("at least one follower type is required"));
        }
        for (k, u) in types.iter().enumerate() {
            check_matrix(u, n_l, n_f, &format!("follower type {k}"))?;
        }
        if void_index >= n_l {
            return Err(Error::invalid("void leader action out of range"));
        }
        if leader[void_index].iter().any(|&v| v != 0.0) {
            return Err(Error::invalid("void leader row must have zero payoff"));
        }
        Ok(Self {
            leader,
            types,
            void_index,
        })
    }

    pub fn leader_actions(&self) -> usize {
        self.leader.len()
    }

    pub fn follower_actions(&self) -> usize {
        self.leader[0].len()
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn void_index(&self) -> usize {
        self.void_index
    }

    pub fn leader_matrix(&self) -> &Matrix {
        &self.leader
    }

    pub fn follower_types(&self) -> &[Matrix] {
        &self.types
    }

    pub fn follower_type(&self, k: usize) -> Result<&Matrix> {
        self.types
            .get(k)
            .ok_or_else(|| Error::invalid(format!("follower type {k} out of range")))
    }

    /// Random game with a zero void row at index 0.
    pub fn random<R: Rng + ?Sized>(n_l: usize, n_f: usize, num_types: usize, rng: &mut R) -> Result<Self> {
        let mut draw = |zero_first: bool| -> Matrix {
            (0..n_l)
                .map(|i| {
                    (0..n_f)
                        .map(|_| if zero_first && i == 0 { 0.0 } else { rng.random::<f64>() })
                        .collect()
                })
                .collect()
        };
        let leader = draw(true);
        let types = (0..num_types).map(|_| draw(false)).collect();
        Self::new(leader, types, 0)
    }
}

/// `xᵀ M e_a` for every column `a`.
fn bilinear(x: &[f64], m: &Matrix) -> Vec<f64> {
    let cols = m[0].len();
    let mut out = vec![0.0; cols];
    for (xj, row) in x.iter().zip(m) {
        if *xj != 0.0 {
            for (o, v) in out.iter_mut().zip(row) {
                *o += xj * v;
            }
        }
    }
    out
}

/// Follower best response to `x`: maximizers of `xᵀU_k e_a` within
/// [`INDIFFERENCE_TOL`], then the leader's favourite, then the lowest index.
pub fn follower_best_response(x: &Mixture, follower: &Matrix, leader: &Matrix) -> Result<usize> {
    if follower.len() != x.len() || leader.len() != x.len() {
        return Err(Error::invalid("mixture and payoff matrices disagree on leader actions"));
    }
    let uf = bilinear(x.weights(), follower);
    let ul = bilinear(x.weights(), leader);
    let best = uf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut choice: Option<usize> = None;
    for a in 0..uf.len() {
        if uf[a] >= best - INDIFFERENCE_TOL && choice.is_none_or(|c| ul[a] > ul[c]) {
            choice = Some(a);
        }
    }
    choice.ok_or_else(|| Error::invalid("follower has no actions"))
}

/// One round's follower type and leader cost matrix (`n_L × m`).
#[derive(Debug, Clone, PartialEq)]
pub struct StackelbergRound {
    pub follower_type: usize,
    pub costs: Matrix,
}

impl Observable for StackelbergRound {
    type Context = ();
    fn context(&self) {}
}

impl Commit for StackelbergRound {
    fn absorb(&self, hasher: &mut Sha256) {
        use sha2::Digest;
        hasher.update((self.follower_type as u64).to_le_bytes());
        for row in &self.costs {
            absorb_f64s(hasher, row);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderOutcome {
    pub follower_action: usize,
    pub reward: f64,
    pub cost: Vec<f64>,
    /// `f_t(x) − ⟨λ, xᵀC_t⟩`.
    pub payoff: f64,
}

/// Reward, cost and Lagrangian payoff of commitment `x` in one round.
pub fn leader_round(
    game: &StackelbergGame,
    x: &Mixture,
    round: &StackelbergRound,
    lam: &DualVector,
) -> Result<LeaderOutcome> {
    let follower = game.follower_type(round.follower_type)?;
    let m = lam.len();
    check_matrix(&round.costs, game.leader_actions(), m, "leader cost matrix")?;
    let y = follower_best_response(x, follower, &game.leader)?;
    let reward = bilinear(x.weights(), &game.leader)[y].clamp(0.0, 1.0);
    let cost: Vec<f64> = bilinear(x.weights(), &round.costs)
        .into_iter()
        .map(|c| c.clamp(0.0, 1.0))
        .collect();
    let payoff = reward - lam.dot(&cost);
    Ok(LeaderOutcome {
        follower_action: y,
        reward,
        cost,
        payoff,
    })
}

/// `(|K|·n_F²)^{n_L−1}`.
pub fn vertex_bound(num_types: usize, n_f: usize, n_l: usize) -> u128 {
    ((num_types * n_f * n_f) as u128).pow(n_l.saturating_sub(1) as u32)
}

/// Candidate commitments `X*`: every point of the simplex where `n_L − 1`
/// independent constraints from
/// `{xᵀU_k(e_a − e_a′) = 0 : k, a < a′} ∪ {x_j = 0}` hold together with
/// `Σx = 1`. Points near a simplex vertex are snapped onto it.
pub fn enumerate_restricted_vertices(types: &[Matrix], n_l: usize) -> Result<Vec<Mixture>> {
    if n_l == 0 || n_l > MAX_LEADER_ACTIONS {
        return Err(Error::invalid(format!(
            "vertex enumeration supports 1..={MAX_LEADER_ACTIONS} leader actions, got {n_l}"
        )));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, u) in types.iter().enumerate() {
        if u.len() != n_l {
            return Err(Error::invalid(format!("follower type {k} has {} rows, expected {n_l}", u.len())));
        }
        let n_f = u.first().map_or(0, Vec::len);
        for a in 0..n_f {
            for b in a + 1..n_f {
                rows.push((0..n_l).map(|j| u[j][a] - u[j][b]).collect());
            }
        }
    }
    for j in 0..n_l {
        let mut e = vec![0.0; n_l];
        e[j] = 1.0;
        rows.push(e);
    }

    let mut points: Vec<Vec<f64>> = Vec::new();
    for_each_subset(rows.len(), n_l - 1, |subset| {
        let mut a = vec![vec![1.0; n_l]];
        a.extend(subset.iter().map(|&r| rows[r].clone()));
        let mut b = vec![0.0; n_l];
        b[0] = 1.0;
        let Some(mut x) = solve_linear(a, b) else {
            return;
        };
        if x.iter().any(|&v| !v.is_finite() || v < -1e-9) {
            return;
        }
        for v in &mut x {
            *v = v.max(0.0);
        }
        let total: f64 = x.iter().sum();
        for v in &mut x {
            *v /= total;
        }
        if let Some(i) = (0..n_l).find(|&i| (x[i] - 1.0).abs() <= DEDUP_TOL) {
            x = vec![0.0; n_l];
            x[i] = 1.0;
        }
        let duplicate = points
            .iter()
            .any(|p| p.iter().zip(&x).all(|(u, v)| (u - v).abs() <= DEDUP_TOL));
        if !duplicate {
            points.push(x);
        }
    });
    points.into_iter().map(Mixture::new).collect()
}

/// Exponential weights over `X*` with full feedback.
#[derive(Debug, Clone)]
pub struct StackelbergPrimal {
    game: Arc<StackelbergGame>,
    vertices: Arc<Vec<Mixture>>,
    void_vertex: usize,
    omd: SimplexOmd,
}

impl StackelbergPrimal {
    pub fn new(game: Arc<StackelbergGame>, vertices: Arc<Vec<Mixture>>, rho: f64) -> Result<Self> {
        let void = game.void_index();
        let void_vertex = vertices
            .iter()
            .position(|x| x.weights()[void] == 1.0)
            .ok_or_else(|| Error::invalid("X* does not contain the void commitment"))?;
        let omd = SimplexOmd::new(vertices.len(), primal_range(rho)?, StepSchedule::Anytime)?;
        Ok(Self {
            game,
            vertices,
            void_vertex,
            omd,
        })
    }

    pub fn vertices(&self) -> &[Mixture] {
        &self.vertices
    }

    pub fn learner(&self) -> &SimplexOmd {
        &self.omd
    }
}

/// The round as a request over the commitments in `vertices`.
pub fn round_request(
    game: &StackelbergGame,
    vertices: &[Mixture],
    void_vertex: usize,
    round: &StackelbergRound,
) -> Result<Request> {
    let m = round.costs.first().map_or(0, Vec::len);
    let zero = DualVector::zeros(m, 1.0)?;
    let mut rewards = Vec::with_capacity(vertices.len());
    let mut costs = Vec::with_capacity(vertices.len());
    for x in vertices {
        let out = leader_round(game, x, round, &zero)?;
        rewards.push(out.reward);
        costs.push(out.cost);
    }
    Request::new(rewards, costs, void_vertex)
}

impl PrimalLearner for StackelbergPrimal {
    type Input = StackelbergRound;

    fn feedback(&self) -> Feedback {
        Feedback::Full
    }

    fn decide(&mut self, _: &(), _: Option<&DualVector>, rng: &mut ChaCha20Rng) -> Result<Decision> {
        let mixture = self.omd.next_element();
        let action = mixture.sample(rng);
        Ok(Decision { mixture, action })
    }

    fn request(&self, input: &StackelbergRound, _: &DualVector) -> Result<Request> {
        round_request(&self.game, &self.vertices, self.void_vertex, input)
    }

    fn observe_full(&mut self, _: &StackelbergRound, req: &Request, lam: &DualVector) -> Result<()> {
        self.omd.observe(&primal_utilities(req, lam))
    }

    fn observe_bandit(&mut self, _: usize, _: f64, _: &[f64], _: &DualVector) -> Result<()> {
        Err(Error::protocol("Stackelberg learner uses full feedback"))
    }

    fn forgo(&mut self) -> Result<()> {
        Err(Error::protocol("Stackelberg learner uses full feedback"))
    }
}

/// Random rounds: uniform types and uniform costs, zero on the void row.
pub fn random_rounds<R: Rng + ?Sized>(
    game: &StackelbergGame,
    m: usize,
    horizon: usize,
    rng: &mut R,
) -> Vec<StackelbergRound> {
    (0..horizon)
        .map(|_| StackelbergRound {
            follower_type: rng.random_range(0..game.num_types()),
            costs: (0..game.leader_actions())
                .map(|i| {
                    (0..m)
                        .map(|_| if i == game.void_index() { 0.0 } else { rng.random::<f64>() })
                        .collect()
                })
                .collect(),
        })
        .collect()
}

/// `Σ_t ℓ_{L,t}(x, λ_t)`.
pub fn cumulative_payoff(
    game: &StackelbergGame,
    x: &Mixture,
    rounds: &[StackelbergRound],
    lambdas: &[DualVector],
) -> Result<f64> {
    if rounds.len() != lambdas.len() {
        return Err(Error::invalid("one multiplier per round is required"));
    }
    rounds
        .iter()
        .zip(lambdas)
        .map(|(r, l)| leader_round(game, x, r, l).map(|o| o.payoff))
        .sum()
}
