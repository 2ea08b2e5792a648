//! Input generators: i.i.d. draws from a finite template distribution, a
//! pre-committed adversarial script, and per-round distributions that drift
//! from a reference within a total-variation budget.

use std::sync::Arc;

use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::meta::{Environment, Observable};
use crate::types::{sample_index, Request, NORMALIZATION_TOL};

/// Feeds a value into the pre-commitment hash.
pub trait Commit {
    fn absorb(&self, hasher: &mut Sha256);
}

pub(crate) fn absorb_f64s(hasher: &mut Sha256, values: &[f64]) {
    hasher.update((values.len() as u64).to_le_bytes());
    for v in values {
        hasher.update(v.to_bits().to_le_bytes());
    }
}

impl Commit for Request {
    fn absorb(&self, hasher: &mut Sha256) {
        hasher.update((self.void_index() as u64).to_le_bytes());
        hasher.update((self.num_resources() as u64).to_le_bytes());
        absorb_f64s(hasher, self.rewards());
        absorb_f64s(hasher, self.costs_flat());
    }
}

/// Finite-support distribution over input templates.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T> {
    templates: Arc<Vec<T>>,
    probs: Vec<f64>,
}

impl<T: PartialEq> Distribution<T> {
    pub fn new(templates: Vec<T>, probs: Vec<f64>) -> Result<Self> {
        Self::shared(Arc::new(templates), probs)
    }

    /// Builds a distribution over an existing template list, so several
    /// distributions can be compared by support.
    pub fn shared(templates: Arc<Vec<T>>, probs: Vec<f64>) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::invalid("distribution needs at least one template"));
        }
        if templates.len() != probs.len() {
            return Err(Error::invalid(format!(
                "{} templates but {} probabilities",
                templates.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("probabilities must be nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { templates, probs })
    }

    pub fn point(template: T) -> Self {
        Self {
            templates: Arc::new(vec![template]),
            probs: vec![1.0],
        }
    }

    pub fn uniform(templates: Vec<T>) -> Result<Self> {
        let n = templates.len();
        Self::new(templates, vec![1.0 / n.max(1) as f64; n])
    }

    /// Same templates, new weights.
    pub fn reweighted(&self, probs: Vec<f64>) -> Result<Self> {
        Self::shared(Arc::clone(&self.templates), probs)
    }

    pub fn templates(&self) -> &[T] {
        &self.templates
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn same_support(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.templates, &other.templates) || self.templates == other.templates
    }

    /// `(1/2)Σ|p_i − q_i|`.
    pub fn total_variation(&self, other: &Self) -> Result<f64> {
        if !self.same_support(other) {
            return Err(Error::invalid("distributions are over different templates"));
        }
        Ok(0.5 * self.probs.iter().zip(&other.probs).map(|(p, q)| (p - q).abs()).sum::<f64>())
    }

    pub fn sample(&self, rng: &mut ChaCha20Rng) -> &T {
        &self.templates[sample_index(&self.probs, rng)]
    }
}

impl Distribution<Request> {
    /// `(f̄, c̄)`, the expected request.
    pub fn mean(&self) -> Result<Request> {
        let first = &self.templates[0];
        let mut rewards = vec![0.0; first.num_actions()];
        let mut costs = vec![0.0; first.costs_flat().len()];
        for (req, &p) in self.templates.iter().zip(&self.probs) {
            if req.num_actions() != first.num_actions()
                || req.num_resources() != first.num_resources()
                || req.void_index() != first.void_index()
            {
                return Err(Error::invalid("templates have different dimensions"));
            }
            for (m, r) in rewards.iter_mut().zip(req.rewards()) {
                *m += p * r;
            }
            for (m, c) in costs.iter_mut().zip(req.costs_flat()) {
                *m += p * c;
            }
        }
        for v in rewards.iter_mut().chain(costs.iter_mut()) {
            *v = v.clamp(0.0, 1.0);
        }
        Request::from_flat(rewards, costs, first.num_resources(), first.void_index())
    }
}

impl<T: Commit> Commit for Distribution<T> {
    fn absorb(&self, hasher: &mut Sha256) {
        hasher.update((self.templates.len() as u64).to_le_bytes());
        for t in self.templates.iter() {
            t.absorb(hasher);
        }
        absorb_f64s(hasher, &self.probs);
    }
}

/// `MD = Σ_t ‖P_t − P‖_TV`.
pub fn mean_deviation<T: PartialEq>(dists: &[Distribution<T>], reference: &Distribution<T>) -> Result<f64> {
    dists.iter().map(|d| d.total_variation(reference)).sum()
}

/// Per-round distributions drifting from `reference` with declared budget
/// `E_NS ≥ MD`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonstationaryScript<T> {
    reference: Distribution<T>,
    per_round: Vec<Distribution<T>>,
    ns_budget: f64,
}

impl<T: PartialEq> NonstationaryScript<T> {
    pub fn new(reference: Distribution<T>, per_round: Vec<Distribution<T>>, ns_budget: f64) -> Result<Self> {
        if per_round.is_empty() {
            return Err(Error::invalid("nonstationary script needs at least one round"));
        }
        let md = mean_deviation(&per_round, &reference)?;
        if md > ns_budget + 1e-9 {
            return Err(Error::invalid(format!(
                "mean deviation {md} exceeds the declared budget {ns_budget}"
            )));
        }
        Ok(Self {
            reference,
            per_round,
            ns_budget,
        })
    }

    pub fn reference(&self) -> &Distribution<T> {
        &self.reference
    }

    pub fn per_round(&self) -> &[Distribution<T>] {
        &self.per_round
    }

    pub fn ns_budget(&self) -> f64 {
        self.ns_budget
    }

    pub fn horizon(&self) -> usize {
        self.per_round.len()
    }

    /// Uniform mixture `(1/T)Σ_t P_t` of the per-round distributions.
    pub fn uniform_mixture_reference(&self) -> Result<Distribution<T>> {
        let t = self.per_round.len() as f64;
        let mut probs = vec![0.0; self.reference.probs.len()];
        for d in &self.per_round {
            for (a, p) in probs.iter_mut().zip(&d.probs) {
                *a += p / t;
            }
        }
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        self.reference.reweighted(probs)
    }
}

/// Reference everywhere except at `rounds` (1-based), where `corrupt` is
/// used; the budget is the exact mean deviation.
pub fn make_corruption<T: PartialEq + Clone>(
    reference: &Distribution<T>,
    rounds: &[usize],
    corrupt: &Distribution<T>,
    horizon: usize,
) -> Result<NonstationaryScript<T>> {
    if !reference.same_support(corrupt) {
        return Err(Error::invalid("corruption uses different templates than the reference"));
    }
    let mut per_round = vec![reference.clone(); horizon];
    for &t in rounds {
        if t == 0 || t > horizon {
            return Err(Error::invalid(format!("corrupted round {t} outside 1..={horizon}")));
        }
        per_round[t - 1] = corrupt.clone();
    }
    let md = mean_deviation(&per_round, reference)?;
    NonstationaryScript::new(reference.clone(), per_round, md)
}

/// Oblivious input source for one episode.
#[derive(Debug, Clone)]
pub enum InputEnv<T> {
    Stochastic { dist: Distribution<T>, horizon: usize },
    Adversarial { script: Vec<T> },
    Nonstationary { script: NonstationaryScript<T> },
}

impl<T: Commit> InputEnv<T> {
    fn digest(&self) -> Option<String> {
        let mut h = Sha256::new();
        match self {
            InputEnv::Stochastic { .. } => return None,
            InputEnv::Adversarial { script } => {
                h.update(b"adversarial");
                h.update((script.len() as u64).to_le_bytes());
                for x in script {
                    x.absorb(&mut h);
                }
            }
            InputEnv::Nonstationary { script } => {
                h.update(b"nonstationary");
                script.reference.absorb(&mut h);
                h.update((script.per_round.len() as u64).to_le_bytes());
                for d in &script.per_round {
                    absorb_f64s(&mut h, &d.probs);
                }
            }
        }
        Some(hex::encode(h.finalize()))
    }
}

impl<T> Environment for InputEnv<T>
where
    T: Observable + Commit + Clone + PartialEq,
{
    type Input = T;

    fn horizon(&self) -> usize {
        match self {
            InputEnv::Stochastic { horizon, .. } => *horizon,
            InputEnv::Adversarial { script } => script.len(),
            InputEnv::Nonstationary { script } => script.horizon(),
        }
    }

    fn next_input(&mut self, t: usize, rng: &mut ChaCha20Rng) -> Result<T> {
        let horizon = self.horizon();
        if t == 0 || t > horizon {
            return Err(Error::protocol(format!("round {t} outside 1..={horizon}")));
        }
        Ok(match self {
            InputEnv::Stochastic { dist, .. } => dist.sample(rng).clone(),
            InputEnv::Adversarial { script } => script[t - 1].clone(),
            InputEnv::Nonstationary { script } => script.per_round[t - 1].sample(rng).clone(),
        })
    }

    fn commitment(&self) -> Option<String> {
        self.digest()
    }
}
