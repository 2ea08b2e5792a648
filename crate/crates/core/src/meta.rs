//! The primal–dual driver: per-round decisions, the void-action guard,
//! budget accounting, feedback construction and trace recording.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::lagrangian::{baselines, evaluate_lagrangian};
use crate::lp::solve_opt_lp;
use crate::regret::{DualOmd, Exp3P, PayoffRange, SimplexOmd, StepSchedule};
use crate::types::{BudgetState, DualVector, Mixture, Request};

/// RNG stream carrying environment draws; the agent uses [`AGENT_STREAM`].
pub const ENV_STREAM: u64 = 0;
pub const AGENT_STREAM: u64 = 1;

/// Seeded generator on a fixed stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feedback {
    Full,
    Bandit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Simultaneous,
    /// The dual moves first and the primal sees `λ_t` before deciding.
    DualFirst,
}

/// The part of an input a learner may see before it decides.
pub trait Observable {
    type Context;
    fn context(&self) -> Self::Context;
}

impl Observable for Request {
    type Context = ();
    fn context(&self) {}
}

/// Source of the per-round inputs of one episode.
pub trait Environment {
    type Input: Observable;

    fn horizon(&self) -> usize;

    /// Input of round `t` (1-based). Draws use only `rng`.
    fn next_input(&mut self, t: usize, rng: &mut ChaCha20Rng) -> Result<Self::Input>;

    /// Hash of the pre-committed script, if there is one.
    fn commitment(&self) -> Option<String> {
        None
    }
}

/// A primal decision: a mixture over the current action set and the
/// sampled action.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub mixture: Mixture,
    pub action: usize,
}

/// Primal regret minimizer over a finite action set.
pub trait PrimalLearner {
    type Input: Observable;

    fn feedback(&self) -> Feedback;

    /// `lam` is `Some` exactly in dual-first order.
    fn decide(
        &mut self,
        ctx: &<Self::Input as Observable>::Context,
        lam: Option<&DualVector>,
        rng: &mut ChaCha20Rng,
    ) -> Result<Decision>;

    /// The round's request over the action set the decision refers to.
    fn request(&self, input: &Self::Input, lam: &DualVector) -> Result<Request>;

    fn observe_full(&mut self, input: &Self::Input, req: &Request, lam: &DualVector) -> Result<()>;

    /// Realized reward and cost of the played action.
    fn observe_bandit(&mut self, action: usize, reward: f64, cost: &[f64], lam: &DualVector) -> Result<()>;

    /// Called in bandit mode when the guard replaced the sampled action.
    fn forgo(&mut self) -> Result<()>;
}

/// Dual regret minimizer over `D`.
pub trait DualLearner {
    fn next_element(&mut self) -> Result<DualVector>;
    /// Observes `ĉ − ρ1`.
    fn observe(&mut self, gradient: &[f64]) -> Result<()>;
}

impl DualLearner for DualOmd {
    fn next_element(&mut self) -> Result<DualVector> {
        Ok(DualOmd::next_element(self))
    }

    fn observe(&mut self, gradient: &[f64]) -> Result<()> {
        DualOmd::observe(self, gradient)
    }
}

/// Dual stub emitting the same vector every round.
#[derive(Debug, Clone)]
pub struct FixedDual(pub DualVector);

impl DualLearner for FixedDual {
    fn next_element(&mut self) -> Result<DualVector> {
        Ok(self.0.clone())
    }

    fn observe(&mut self, gradient: &[f64]) -> Result<()> {
        if gradient.len() != self.0.len() {
            return Err(Error::invalid("dual gradient has the wrong length"));
        }
        Ok(())
    }
}

/// Primal stub that always plays one mixture over the request's actions.
#[derive(Debug, Clone)]
pub struct FixedPrimal {
    mixture: Mixture,
}

impl FixedPrimal {
    pub fn new(mixture: Mixture) -> Self {
        Self { mixture }
    }

    pub fn dirac(n: usize, action: usize) -> Result<Self> {
        Ok(Self::new(Mixture::dirac(n, action)?))
    }
}

impl PrimalLearner for FixedPrimal {
    type Input = Request;

    fn feedback(&self) -> Feedback {
        Feedback::Full
    }

    fn decide(&mut self, _: &(), _: Option<&DualVector>, rng: &mut ChaCha20Rng) -> Result<Decision> {
        Ok(Decision {
            mixture: self.mixture.clone(),
            action: self.mixture.sample(rng),
        })
    }

    fn request(&self, input: &Request, _: &DualVector) -> Result<Request> {
        Ok(input.clone())
    }

    fn observe_full(&mut self, _: &Request, _: &Request, _: &DualVector) -> Result<()> {
        Ok(())
    }

    fn observe_bandit(&mut self, _: usize, _: f64, _: &[f64], _: &DualVector) -> Result<()> {
        Ok(())
    }

    fn forgo(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Range of the per-action Lagrangian utility `f − ⟨λ, c⟩` when `λ ∈ D`.
pub fn primal_range(rho: f64) -> Result<PayoffRange> {
    PayoffRange::new(-1.0 / rho, 1.0)
}

/// `u(x) = f(x) − ⟨λ, c(x)⟩` for every action.
pub fn primal_utilities(req: &Request, lam: &DualVector) -> Vec<f64> {
    (0..req.num_actions())
        .map(|x| req.reward(x) - lam.dot(req.cost(x)))
        .collect()
}

/// Full-feedback exponential weights over the actions of a fixed request
/// shape.
#[derive(Debug, Clone)]
pub struct SimplexPrimal {
    omd: SimplexOmd,
}

impl SimplexPrimal {
    pub fn new(n: usize, rho: f64) -> Result<Self> {
        Self::with_schedule(n, rho, StepSchedule::Anytime)
    }

    pub fn with_schedule(n: usize, rho: f64, schedule: StepSchedule) -> Result<Self> {
        Ok(Self {
            omd: SimplexOmd::new(n, primal_range(rho)?, schedule)?,
        })
    }

    pub fn learner(&self) -> &SimplexOmd {
        &self.omd
    }
}

impl PrimalLearner for SimplexPrimal {
    type Input = Request;

    fn feedback(&self) -> Feedback {
        Feedback::Full
    }

    fn decide(&mut self, _: &(), _: Option<&DualVector>, rng: &mut ChaCha20Rng) -> Result<Decision> {
        let mixture = self.omd.next_element();
        let action = mixture.sample(rng);
        Ok(Decision { mixture, action })
    }

    fn request(&self, input: &Request, _: &DualVector) -> Result<Request> {
        Ok(input.clone())
    }

    fn observe_full(&mut self, _: &Request, req: &Request, lam: &DualVector) -> Result<()> {
        self.omd.observe(&primal_utilities(req, lam))
    }

    fn observe_bandit(&mut self, _: usize, _: f64, _: &[f64], _: &DualVector) -> Result<()> {
        Err(Error::protocol("full-feedback learner received bandit feedback"))
    }

    fn forgo(&mut self) -> Result<()> {
        Err(Error::protocol("full-feedback learner received bandit feedback"))
    }
}

/// Bandit-feedback primal: EXP3.P over every action of the request,
/// void included.
#[derive(Debug, Clone)]
pub struct Exp3PPrimal {
    exp3: Exp3P,
}

impl Exp3PPrimal {
    pub fn new(n: usize, horizon: usize, delta: f64, rho: f64) -> Result<Self> {
        Ok(Self {
            exp3: Exp3P::new(n, horizon, delta, rho)?,
        })
    }

    pub fn learner(&self) -> &Exp3P {
        &self.exp3
    }
}

impl PrimalLearner for Exp3PPrimal {
    type Input = Request;

    fn feedback(&self) -> Feedback {
        Feedback::Bandit
    }

    fn decide(&mut self, _: &(), _: Option<&DualVector>, rng: &mut ChaCha20Rng) -> Result<Decision> {
        let (mixture, action) = self.exp3.next_element(rng)?;
        Ok(Decision { mixture, action })
    }

    fn request(&self, input: &Request, _: &DualVector) -> Result<Request> {
        Ok(input.clone())
    }

    fn observe_full(&mut self, _: &Request, _: &Request, _: &DualVector) -> Result<()> {
        Err(Error::protocol("bandit learner received full feedback"))
    }

    fn observe_bandit(&mut self, _: usize, reward: f64, cost: &[f64], lam: &DualVector) -> Result<()> {
        self.exp3.observe(reward - lam.dot(cost))
    }

    fn forgo(&mut self) -> Result<()> {
        self.exp3.forgo()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    /// Omitted when the episode runs with `keep_mixtures = false`.
    pub mixture: Option<Mixture>,
    pub action: usize,
    pub lambda: DualVector,
    pub reward: f64,
    pub costs: Vec<f64>,
    /// Remaining budgets after this round's charge.
    pub remaining: Vec<f64>,
    pub void_forced: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rounds: Vec<RoundRecord>,
    /// First round after which some budget is below one, or `T`.
    pub tau: usize,
    /// Resource that triggered the stop, when `tau < T` or it ran out at `T`.
    pub depleted_resource: Option<usize>,
    pub total_reward: f64,
    pub seed: u64,
    pub commitment: Option<String>,
    pub order: Order,
    pub feedback: Feedback,
    pub budget: f64,
    pub rho: f64,
    pub num_resources: usize,
    /// Key/value echo of the configuration that produced the trace.
    pub config: Vec<(String, String)>,
    /// Per-round requests, kept when `keep_requests = true`.
    pub requests: Vec<Request>,
}

impl Trace {
    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    /// `Σ_t c_t(x_t)[i]` for each resource.
    pub fn total_costs(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_resources];
        for r in &self.rounds {
            for (o, c) in out.iter_mut().zip(&r.costs) {
                *o += c;
            }
        }
        out
    }

    /// `ξ̄_τ`, the mean of the recorded mixtures over the first `tau` rounds.
    pub fn average_mixture(&self, tau: usize) -> Result<Mixture> {
        if tau == 0 || tau > self.rounds.len() {
            return Err(Error::invalid(format!("tau = {tau} out of range")));
        }
        let mut acc: Vec<f64> = Vec::new();
        for (k, r) in self.rounds[..tau].iter().enumerate() {
            let xi = r
                .mixture
                .as_ref()
                .ok_or_else(|| Error::invalid("trace was recorded without mixtures"))?;
            if acc.is_empty() {
                acc = xi.weights().to_vec();
            } else {
                if xi.len() != acc.len() {
                    return Err(Error::invalid("mixtures change dimension across rounds"));
                }
                let count = (k + 1) as f64;
                for (a, w) in acc.iter_mut().zip(xi.weights()) {
                    *a += (w - *a) / count;
                }
            }
        }
        Mixture::from_unnormalized(acc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub order: Order,
    pub seed: u64,
    pub keep_mixtures: bool,
    pub keep_requests: bool,
}

impl RunOptions {
    pub fn new(order: Order, seed: u64) -> Self {
        Self {
            order,
            seed,
            keep_mixtures: true,
            keep_requests: true,
        }
    }
}

/// Runs one episode of `T = env.horizon()` rounds.
///
/// Each round: the dual emits `λ_t`; the primal decides, seeing `λ_t` only
/// in dual-first order; the sampled action is replaced by void while some
/// budget is below one; the budget is charged with the realized cost; the
/// primal observes `f − ⟨λ_t, c⟩` (the whole vector under full feedback, the
/// played coordinate under bandit feedback); the dual observes `ĉ − ρ1`,
/// with `ĉ` the expected cost under `ξ_t` (full) or the realized cost
/// (bandit).
pub fn run_episode<E, P, D>(
    env: &mut E,
    primal: &mut P,
    dual: &mut D,
    mut budget: BudgetState,
    opts: &RunOptions,
) -> Result<Trace>
where
    E: Environment,
    P: PrimalLearner<Input = E::Input>,
    D: DualLearner,
{
    let horizon = env.horizon();
    if horizon != budget.horizon() {
        return Err(Error::invalid(format!(
            "environment horizon {horizon} differs from budget horizon {}",
            budget.horizon()
        )));
    }
    let commitment = env.commitment();
    let mut env_rng = stream_rng(opts.seed, ENV_STREAM);
    let mut agent_rng = stream_rng(opts.seed, AGENT_STREAM);
    let rho = budget.rho();
    let m = budget.num_resources();
    let feedback = primal.feedback();

    let mut rounds = Vec::with_capacity(horizon);
    let mut requests = Vec::new();
    let mut total_reward = 0.0;
    let mut tau = None;
    for t in 1..=horizon {
        let input = env.next_input(t, &mut env_rng)?;
        let lam = dual.next_element()?;
        if lam.len() != m {
            return Err(Error::invalid("dual learner dimension differs from the budget"));
        }
        let ctx = input.context();
        let shown = match opts.order {
            Order::DualFirst => Some(&lam),
            Order::Simultaneous => None,
        };
        let decision = primal.decide(&ctx, shown, &mut agent_rng)?;
        let req = primal.request(&input, &lam)?;
        if req.num_resources() != m {
            return Err(Error::invalid("request dimension differs from the budget"));
        }
        if decision.mixture.len() != req.num_actions() || decision.action >= req.num_actions() {
            return Err(Error::invalid("decision does not match the request's action set"));
        }
        let void_forced = budget.is_depleted();
        let action = if void_forced { req.void_index() } else { decision.action };
        let reward = req.reward(action);
        let costs = req.cost(action).to_vec();
        budget.charge(&costs)?;
        total_reward += reward;
        if tau.is_none() && budget.is_depleted() {
            tau = Some(t);
        }

        let estimate = match feedback {
            Feedback::Full => {
                primal.observe_full(&input, &req, &lam)?;
                req.expected_cost(&decision.mixture)?
            }
            Feedback::Bandit => {
                if void_forced && decision.action != action {
                    primal.forgo()?;
                } else {
                    primal.observe_bandit(action, reward, &costs, &lam)?;
                }
                costs.clone()
            }
        };
        let gradient: Vec<f64> = estimate.iter().map(|c| c - rho).collect();
        dual.observe(&gradient)?;

        rounds.push(RoundRecord {
            t,
            mixture: opts.keep_mixtures.then_some(decision.mixture),
            action,
            lambda: lam,
            reward,
            costs,
            remaining: budget.remaining().to_vec(),
            void_forced,
        });
        if opts.keep_requests {
            requests.push(req);
        }
    }
    Ok(Trace {
        rounds,
        tau: tau.unwrap_or(horizon),
        depleted_resource: budget.depleted_resource(),
        total_reward,
        seed: opts.seed,
        commitment,
        order: opts.order,
        feedback,
        budget: budget.budget(),
        rho,
        num_resources: m,
        config: Vec::new(),
        requests,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialReport {
    pub opt_fd_upper: f64,
    pub alpha: f64,
    /// `opt_fd_upper − α·REW`.
    pub lhs: f64,
    /// `Σ_{t≤τ} c_t(x_t)[î] + 1 − ρT`, only when `τ < T`.
    pub stopping_slack: Option<f64>,
}

/// Competitive-ratio report against the LP bound on the best fixed mixture.
pub fn adversarial_report(trace: &Trace, seq: &[Request], rho: f64) -> Result<AdversarialReport> {
    let horizon = trace.horizon();
    let base = baselines(seq, rho, horizon)?;
    let alpha = 1.0 / rho;
    let stopping_slack = match (trace.tau < horizon, trace.depleted_resource) {
        (true, Some(i)) => {
            let spent: f64 = trace.rounds[..trace.tau].iter().map(|r| r.costs[i]).sum();
            Some(spent + 1.0 - rho * horizon as f64)
        }
        _ => None,
    };
    Ok(AdversarialReport {
        opt_fd_upper: base.opt_fd_upper,
        alpha,
        lhs: base.opt_fd_upper - alpha * trace.total_reward,
        stopping_slack,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticReport {
    pub opt_dp_upper: f64,
    pub regret_vs_upper: f64,
}

/// Regret against `T·OPT_LP(f̄, c̄)` for a known expected request.
pub fn stochastic_report(trace: &Trace, mean: &Request, rho: f64) -> Result<StochasticReport> {
    let lp = solve_opt_lp(mean, rho)?;
    let opt_dp_upper = trace.horizon() as f64 * lp.value;
    Ok(StochasticReport {
        opt_dp_upper,
        regret_vs_upper: opt_dp_upper - trace.total_reward,
    })
}

/// `min_λ L(ξ, λ)` over the grid `{λ ∈ D : λ_i ∈ step·ℕ}`.
pub fn min_lagrangian_on_grid(xi: &Mixture, req: &Request, rho: f64, step: f64) -> Result<f64> {
    let m = req.num_resources();
    let cap = 1.0 / rho;
    let points = (cap / step).floor() as usize;
    let mut idx = vec![0usize; m];
    let mut best = f64::INFINITY;
    loop {
        let lam: Vec<f64> = idx.iter().map(|&k| k as f64 * step).collect();
        if lam.iter().sum::<f64>() <= cap + 1e-12 {
            let v = evaluate_lagrangian(xi, &DualVector::new(lam, rho)?, req)?;
            best = best.min(v);
        }
        let mut i = 0;
        loop {
            if i == m {
                return Ok(best);
            }
            idx[i] += 1;
            if idx[i] <= points {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}
