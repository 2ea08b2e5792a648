//! Experiment orchestration: instance construction, one episode per seed,
//! per-seed files and the aggregate report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::env::{make_corruption, Distribution, InputEnv};
use crate::error::{Error, Result};
use crate::fpa::{uniform_grid, AuctionRound, ChainingPrimal, FiniteFpaPrimal, PolicyTree, TreeConfig};
use crate::meta::{
    adversarial_report, run_episode, stochastic_report, stream_rng, DualLearner, Environment, Exp3PPrimal,
    FixedDual, PrimalLearner, RunOptions, SimplexPrimal, Trace,
};
use crate::regret::DualOmd;
use crate::stackelberg::{
    enumerate_restricted_vertices, random_rounds, round_request, StackelbergGame, StackelbergPrimal,
    StackelbergRound,
};
use crate::types::{BudgetState, DualVector, Mixture, Request};

use super::config::{Application, DualKind, EnvKind, ExperimentConfig, PrimalKind};
use super::trace_csv::{write_auction_csv, write_trace_csv, AuctionStream};

/// RNG stream for instance generation, distinct from the episode streams.
pub const INSTANCE_STREAM: u64 = 2;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestSpec {
    rewards: Vec<f64>,
    costs: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    #[serde(default)]
    void_index: usize,
    templates: Vec<RequestSpec>,
    probs: Option<Vec<f64>>,
}

/// Request templates and their reference probabilities from a JSON file.
pub fn load_templates(path: &Path) -> Result<(Vec<Request>, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: TemplateFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if file.templates.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "no templates".into(),
        });
    }
    let n = file.templates.len();
    let templates = file
        .templates
        .into_iter()
        .map(|t| Request::new(t.rewards, t.costs, file.void_index))
        .collect::<Result<Vec<_>>>()?;
    let probs = file.probs.unwrap_or_else(|| vec![1.0 / n as f64; n]);
    Ok((templates, probs))
}

/// The application-specific episode ingredients shared by every seed.
enum Prepared {
    Bwk {
        env: InputEnv<Request>,
        reference: Option<Request>,
    },
    Stackelberg {
        game: Arc<StackelbergGame>,
        vertices: Arc<Vec<Mixture>>,
        env: InputEnv<StackelbergRound>,
        reference: Option<Request>,
    },
    FpaFinite {
        valuations: Vec<f64>,
        bids: Vec<f64>,
        env: InputEnv<AuctionRound>,
    },
    FpaContinuous {
        tree: Arc<PolicyTree>,
        tree_config: TreeConfig,
        env: InputEnv<AuctionRound>,
    },
}

/// Rounds `⌊kT/E⌋`, `k = 1..=E`, spread over the horizon.
fn corrupted_rounds(horizon: usize, count: usize) -> Vec<usize> {
    (1..=count).map(|k| k * horizon / count).collect()
}

/// The environment for a template pool, and the reference distribution
/// when there is one.
fn build_env<T: Clone + PartialEq>(
    cfg: &ExperimentConfig,
    pool: Vec<T>,
    probs: Vec<f64>,
    script: impl FnOnce(&[T]) -> Result<Vec<T>>,
) -> Result<(InputEnv<T>, Option<Distribution<T>>)> {
    let horizon = cfg.horizon;
    match cfg.env.kind {
        EnvKind::Stochastic => {
            let dist = Distribution::new(pool, probs)?;
            Ok((
                InputEnv::Stochastic {
                    dist: dist.clone(),
                    horizon,
                },
                Some(dist),
            ))
        }
        EnvKind::Adversarial => Ok((InputEnv::Adversarial { script: script(&pool)? }, None)),
        EnvKind::Nonstationary => {
            let n = pool.len();
            let j = cfg.env.corrupt_template;
            if j >= n {
                return Err(Error::config("env.corrupt_template", format!("index {j} out of range for {n} templates")));
            }
            let reference = Distribution::new(pool, probs)?;
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let corrupt = reference.reweighted(e)?;
            let rounds = corrupted_rounds(horizon, cfg.env.corruption);
            let script = make_corruption(&reference, &rounds, &corrupt, horizon)?;
            Ok((InputEnv::Nonstationary { script }, Some(reference)))
        }
    }
}

fn bwk_script(cfg: &ExperimentConfig, pool: &[Request]) -> Result<Vec<Request>> {
    let order: Vec<usize> = cfg.env.script.clone().unwrap_or_else(|| (0..pool.len()).collect());
    if order.is_empty() {
        return Err(Error::config("env.script", "script is empty"));
    }
    if let Some(&k) = order.iter().find(|&&k| k >= pool.len()) {
        return Err(Error::config("env.script", format!("template {k} does not exist")));
    }
    let block = cfg.env.block.unwrap_or_else(|| cfg.horizon.div_ceil(order.len()));
    Ok((0..cfg.horizon)
        .map(|t| pool[order[(t / block) % order.len()]].clone())
        .collect())
}

fn random_auctions(n: usize, valuations: Option<&[f64]>, rng: &mut impl Rng) -> Result<Vec<AuctionRound>> {
    (0..n)
        .map(|_| {
            let v = match valuations {
                Some(grid) => grid[rng.random_range(0..grid.len())],
                None => rng.random(),
            };
            AuctionRound::new(v, rng.random())
        })
        .collect()
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let mut rng = stream_rng(cfg.env.seed, INSTANCE_STREAM);
    let pool_size = cfg.env.templates;
    Ok(match cfg.application {
        Application::Bwk => {
            let path = cfg.base_dir.join(cfg.env.instance.as_ref().expect("checked at parse time"));
            let (pool, probs) = load_templates(&path)?;
            if pool[0].num_resources() != cfg.app.resources {
                return Err(Error::config("app.resources", "differs from the template file"));
            }
            let pool = if cfg.budgets.len() > 1 {
                let (_, scales) = BudgetState::normalized(&cfg.budgets, cfg.horizon)?;
                pool.iter().map(|r| r.rescale_costs(&scales)).collect::<Result<Vec<_>>>()?
            } else {
                pool
            };
            let (env, reference) = build_env(cfg, pool, probs, |p| bwk_script(cfg, p))?;
            Prepared::Bwk {
                env,
                reference: reference.map(|d| d.mean()).transpose()?,
            }
        }
        Application::Stackelberg => {
            let a = &cfg.app;
            let game = Arc::new(StackelbergGame::random(
                a.leader_actions,
                a.follower_actions,
                a.follower_types,
                &mut rng,
            )?);
            let vertices = Arc::new(enumerate_restricted_vertices(game.follower_types(), game.leader_actions())?);
            let void_vertex = vertices
                .iter()
                .position(|x| x.weights()[game.void_index()] == 1.0)
                .ok_or_else(|| Error::Invariant("X* lacks the void commitment".into()))?;
            let pool = random_rounds(&game, a.resources, pool_size, &mut rng);
            let (env, reference) = build_env(cfg, pool, uniform(pool_size), |_| {
                Ok(random_rounds(&game, a.resources, cfg.horizon, &mut rng))
            })?;
            let reference = reference
                .map(|d| {
                    let reqs = d
                        .templates()
                        .iter()
                        .map(|r| round_request(&game, &vertices, void_vertex, r))
                        .collect::<Result<Vec<_>>>()?;
                    Distribution::new(reqs, d.probs().to_vec())?.mean()
                })
                .transpose()?;
            Prepared::Stackelberg {
                game,
                vertices,
                env,
                reference,
            }
        }
        Application::FpaFinite => {
            let valuations = uniform_grid(cfg.app.valuation_step).map_err(|e| Error::config("app.valuation_step", e.to_string()))?;
            let bids = uniform_grid(cfg.app.bid_step).map_err(|e| Error::config("app.bid_step", e.to_string()))?;
            let pool = random_auctions(pool_size, Some(&valuations), &mut rng)?;
            let (env, _) = build_env(cfg, pool, uniform(pool_size), |_| {
                random_auctions(cfg.horizon, Some(&valuations), &mut rng)
            })?;
            Prepared::FpaFinite { valuations, bids, env }
        }
        Application::FpaContinuous => {
            let tree_config = TreeConfig {
                horizon: cfg.horizon,
                levels: cfg.app.levels,
                bid_step: cfg.app.bid_step,
                rho: cfg.rho(),
                node_cap: cfg.app.node_cap,
                rate: cfg.app.rate,
            };
            let tree = PolicyTree::build(&tree_config)?;
            tree.check_zeta_dominance()?;
            let pool = random_auctions(pool_size, None, &mut rng)?;
            let (env, _) = build_env(cfg, pool, uniform(pool_size), |_| random_auctions(cfg.horizon, None, &mut rng))?;
            Prepared::FpaContinuous {
                tree: Arc::new(tree),
                tree_config,
                env,
            }
        }
    })
}

enum Dual {
    Omd(DualOmd),
    Fixed(FixedDual),
}

impl DualLearner for Dual {
    fn next_element(&mut self) -> Result<DualVector> {
        match self {
            Dual::Omd(d) => DualLearner::next_element(d),
            Dual::Fixed(d) => d.next_element(),
        }
    }

    fn observe(&mut self, gradient: &[f64]) -> Result<()> {
        match self {
            Dual::Omd(d) => DualLearner::observe(d, gradient),
            Dual::Fixed(d) => d.observe(gradient),
        }
    }
}

fn make_dual(cfg: &ExperimentConfig) -> Result<Dual> {
    let rho = cfg.rho();
    Ok(match &cfg.alg.dual {
        DualKind::Omd => Dual::Omd(DualOmd::with_schedule(cfg.app.resources, rho, cfg.alg.dual_eta)?),
        DualKind::Fixed(lam) => Dual::Fixed(FixedDual(
            DualVector::new(lam.clone(), rho).map_err(|e| Error::config("alg.dual_lambda", e.to_string()))?,
        )),
    })
}

fn episode<E, P>(cfg: &ExperimentConfig, env: &E, primal: &mut P, seed: u64, keep_requests: bool) -> Result<Trace>
where
    E: Environment + Clone,
    P: PrimalLearner<Input = E::Input>,
{
    let mut env = env.clone();
    let mut dual = make_dual(cfg)?;
    let budget = BudgetState::new(cfg.budget, cfg.horizon, cfg.app.resources)?;
    let mut opts = RunOptions::new(cfg.order, seed);
    opts.keep_mixtures = false;
    opts.keep_requests = keep_requests;
    let mut trace = run_episode(&mut env, primal, &mut dual, budget, &opts)?;
    trace.config = cfg.echo();
    Ok(trace)
}

/// Numbers reported for one seed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeedMetrics {
    pub total_reward: f64,
    pub tau: usize,
    pub total_costs: Vec<f64>,
    /// Stochastic and nonstationary: `T·OPT_LP` of the reference mean.
    pub opt_dp_upper: Option<f64>,
    pub regret_vs_upper: Option<f64>,
    /// Adversarial: `T·OPT_LP` of the averaged inputs.
    pub opt_fd_upper: Option<f64>,
    pub cr_lhs: Option<f64>,
    pub stopping_slack: Option<f64>,
    /// Continuous auctions: extreme terminal payoffs seen.
    pub payoff_min: Option<f64>,
    pub payoff_max: Option<f64>,
    pub good_edge_checks: Option<usize>,
    pub good_edge_violations: Option<usize>,
    pub node_regret_violations: Option<usize>,
}

impl SeedMetrics {
    fn from_trace(trace: &Trace) -> Self {
        Self {
            total_reward: trace.total_reward,
            tau: trace.tau,
            total_costs: trace.total_costs(),
            ..Self::default()
        }
    }

    fn lines(&self, seed: u64) -> Vec<(String, String)> {
        let mut out = vec![
            ("seed".to_string(), seed.to_string()),
            ("total_reward".into(), self.total_reward.to_string()),
            ("tau".into(), self.tau.to_string()),
        ];
        for (i, c) in self.total_costs.iter().enumerate() {
            out.push((format!("total_cost_{}", i + 1), c.to_string()));
        }
        let opt = |k: &str, v: Option<String>| v.map(|v| (k.to_string(), v));
        out.extend(
            [
                opt("opt_dp_upper", self.opt_dp_upper.map(|x| x.to_string())),
                opt("regret_vs_upper", self.regret_vs_upper.map(|x| x.to_string())),
                opt("opt_fd_upper", self.opt_fd_upper.map(|x| x.to_string())),
                opt("cr_lhs", self.cr_lhs.map(|x| x.to_string())),
                opt("stopping_slack", self.stopping_slack.map(|x| x.to_string())),
                opt("payoff_min", self.payoff_min.map(|x| x.to_string())),
                opt("payoff_max", self.payoff_max.map(|x| x.to_string())),
                opt("good_edge_checks", self.good_edge_checks.map(|x| x.to_string())),
                opt("good_edge_violations", self.good_edge_violations.map(|x| x.to_string())),
                opt("node_regret_violations", self.node_regret_violations.map(|x| x.to_string())),
            ]
            .into_iter()
            .flatten(),
        );
        out
    }
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub trace: Trace,
    pub metrics: SeedMetrics,
    pub auction: Option<AuctionStream>,
}

fn add_baselines(cfg: &ExperimentConfig, trace: &Trace, reference: Option<&Request>, m: &mut SeedMetrics) -> Result<()> {
    let rho = cfg.rho();
    match cfg.env.kind {
        EnvKind::Adversarial => {
            let rep = adversarial_report(trace, &trace.requests, rho)?;
            m.opt_fd_upper = Some(rep.opt_fd_upper);
            m.cr_lhs = Some(rep.lhs);
            m.stopping_slack = rep.stopping_slack;
        }
        EnvKind::Stochastic | EnvKind::Nonstationary => {
            let mean = reference.ok_or_else(|| Error::Invariant("missing reference mean".into()))?;
            let rep = stochastic_report(trace, mean, rho)?;
            m.opt_dp_upper = Some(rep.opt_dp_upper);
            m.regret_vs_upper = Some(rep.regret_vs_upper);
        }
    }
    Ok(())
}

fn run_prepared(cfg: &ExperimentConfig, prepared: &Prepared, seed: u64) -> Result<SeedRun> {
    let rho = cfg.rho();
    let keep_requests = cfg.env.kind == EnvKind::Adversarial;
    let (trace, metrics, auction) = match prepared {
        Prepared::Bwk { env, reference } => {
            let n = match env {
                InputEnv::Stochastic { dist, .. } => dist.templates()[0].num_actions(),
                InputEnv::Adversarial { script } => script[0].num_actions(),
                InputEnv::Nonstationary { script } => script.reference().templates()[0].num_actions(),
            };
            let trace = match cfg.alg.primal {
                PrimalKind::Omd => {
                    let mut p = SimplexPrimal::with_schedule(n, rho, cfg.alg.primal_eta)?;
                    episode(cfg, env, &mut p, seed, keep_requests)?
                }
                PrimalKind::Exp3P => {
                    let mut p = Exp3PPrimal::new(n, cfg.horizon, cfg.delta, rho)?;
                    episode(cfg, env, &mut p, seed, keep_requests)?
                }
            };
            let mut m = SeedMetrics::from_trace(&trace);
            add_baselines(cfg, &trace, reference.as_ref(), &mut m)?;
            (trace, m, None)
        }
        Prepared::Stackelberg {
            game,
            vertices,
            env,
            reference,
        } => {
            let mut p = StackelbergPrimal::new(game.clone(), vertices.clone(), rho)?;
            let trace = episode(cfg, env, &mut p, seed, keep_requests)?;
            let mut m = SeedMetrics::from_trace(&trace);
            add_baselines(cfg, &trace, reference.as_ref(), &mut m)?;
            (trace, m, None)
        }
        Prepared::FpaFinite { valuations, bids, env } => {
            let mut p = FiniteFpaPrimal::new(valuations.clone(), bids.clone(), rho)?;
            let trace = episode(cfg, env, &mut p, seed, false)?;
            let m = SeedMetrics::from_trace(&trace);
            (trace, m, None)
        }
        Prepared::FpaContinuous { tree, tree_config, env } => {
            let mut p = ChainingPrimal::new(tree.clone());
            let trace = episode(cfg, env, &mut p, seed, false)?;
            let mut m = SeedMetrics::from_trace(&trace);
            let report = p.good_edge_report();
            if let Some((lo, hi)) = p.payoff_range() {
                m.payoff_min = Some(lo);
                m.payoff_max = Some(hi);
            }
            m.good_edge_checks = Some(report.checks);
            m.good_edge_violations = Some(report.violations.len());
            m.node_regret_violations = Some(report.regret_violations().count());
            let auction = AuctionStream {
                tree: tree_config.clone(),
                rounds: p.history().to_vec(),
            };
            (trace, m, Some(auction))
        }
    };
    Ok(SeedRun {
        seed,
        trace,
        metrics,
        auction,
    })
}

/// Runs every seed in memory, in parallel, without writing files.
pub fn run_seeds(cfg: &ExperimentConfig) -> Result<Vec<SeedRun>> {
    let prepared = prepare(cfg)?;
    cfg.seeds.par_iter().map(|&s| run_prepared(cfg, &prepared, s)).collect()
}

/// Baselines of the configured instance without running any episode.
pub fn baseline_lines(cfg: &ExperimentConfig) -> Result<Vec<(String, String)>> {
    let prepared = prepare(cfg)?;
    let rho = cfg.rho();
    let t = cfg.horizon as f64;
    let (reference, sequence): (Option<&Request>, Option<Vec<Request>>) = match &prepared {
        Prepared::Bwk { env, reference } => (reference.as_ref(), adversarial_requests(env, |r| Ok(r.clone()))?),
        Prepared::Stackelberg {
            game,
            vertices,
            env,
            reference,
        } => {
            let void = vertices
                .iter()
                .position(|x| x.weights()[game.void_index()] == 1.0)
                .ok_or_else(|| Error::Invariant("X* lacks the void commitment".into()))?;
            let seq = adversarial_requests(env, |r| round_request(game, vertices, void, r))?;
            (reference.as_ref(), seq)
        }
        Prepared::FpaFinite { .. } | Prepared::FpaContinuous { .. } => {
            return Ok(vec![("baselines".into(), "n/a".into())]);
        }
    };
    let mut out = vec![("rho".to_string(), rho.to_string())];
    if let Some(mean) = reference {
        let lp = crate::lp::solve_opt_lp(mean, rho)?;
        out.push(("opt_lp_value".into(), lp.value.to_string()));
        out.push(("opt_lp_mixture".into(), join_f64(lp.mixture.weights())));
        out.push(("opt_dp_upper".into(), (t * lp.value).to_string()));
    }
    if let Some(seq) = sequence {
        let b = crate::lagrangian::baselines(&seq, rho, cfg.horizon)?;
        out.push(("opt_lp_value".into(), b.opt_lp_value.to_string()));
        out.push(("opt_lp_mixture".into(), join_f64(b.opt_lp_mixture.weights())));
        out.push(("opt_fd_upper".into(), b.opt_fd_upper.to_string()));
    }
    Ok(out)
}

fn adversarial_requests<T>(
    env: &InputEnv<T>,
    to_request: impl Fn(&T) -> Result<Request>,
) -> Result<Option<Vec<Request>>> {
    match env {
        InputEnv::Adversarial { script } => script.iter().map(to_request).collect::<Result<_>>().map(Some),
        _ => Ok(None),
    }
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub stdev: f64,
}

pub fn summarize(xs: &[f64]) -> Option<Summary> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some(Summary { mean, stdev: var.sqrt() })
}

/// Aggregate lines over seeds, in seed order.
pub fn aggregate_lines(runs: &[SeedRun]) -> Vec<(String, String)> {
    let mut out = vec![("seeds".to_string(), runs.len().to_string())];
    let stats: [(&str, Vec<f64>); 4] = [
        ("total_reward", runs.iter().map(|r| r.metrics.total_reward).collect()),
        ("tau", runs.iter().map(|r| r.metrics.tau as f64).collect()),
        ("regret_vs_upper", runs.iter().filter_map(|r| r.metrics.regret_vs_upper).collect()),
        ("cr_lhs", runs.iter().filter_map(|r| r.metrics.cr_lhs).collect()),
    ];
    for (name, xs) in stats {
        if let Some(s) = summarize(&xs) {
            out.push((format!("{name}_mean"), s.mean.to_string()));
            out.push((format!("{name}_stdev"), s.stdev.to_string()));
        }
    }
    out
}

fn render(lines: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in lines {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

pub fn trace_file_name(seed: u64) -> String {
    format!("trace-seed{seed}.csv")
}

pub fn report_file_name(seed: u64) -> String {
    format!("report-seed{seed}.txt")
}

pub fn auction_file_name(seed: u64) -> String {
    format!("auction-seed{seed}.csv")
}

pub const AGGREGATE_FILE: &str = "aggregate.txt";
pub const CONFIG_ECHO_FILE: &str = "config.txt";

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub dir: PathBuf,
    pub runs: Vec<SeedRun>,
    pub files: Vec<PathBuf>,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_outputs(cfg: &ExperimentConfig, dir: &Path, runs: &[SeedRun], files: &mut Vec<PathBuf>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut echo = format!("# rho = {}\n", cfg.rho());
    echo.push_str(
        &render(&cfg.echo())
            .lines()
            .filter(|l| !l.starts_with("rho ="))
            .map(|l| format!("{l}\n"))
            .collect::<String>(),
    );
    let path = dir.join(CONFIG_ECHO_FILE);
    files.push(path.clone());
    write_text(&path, &echo)?;
    for run in runs {
        let path = dir.join(trace_file_name(run.seed));
        files.push(path.clone());
        write_trace_csv(&run.trace, &path)?;
        let path = dir.join(report_file_name(run.seed));
        files.push(path.clone());
        write_text(&path, &render(&run.metrics.lines(run.seed)))?;
        if let Some(a) = &run.auction {
            let path = dir.join(auction_file_name(run.seed));
            files.push(path.clone());
            write_auction_csv(a, &path)?;
        }
    }
    let path = dir.join(AGGREGATE_FILE);
    files.push(path.clone());
    write_text(&path, &render(&aggregate_lines(runs)))
}

/// Runs every seed and writes per-seed traces and reports, the configuration
/// echo and the aggregate into `dir`. Files written so far are removed if
/// any step fails.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<ExperimentOutcome> {
    let runs = run_seeds(cfg)?;
    let mut files = Vec::new();
    if let Err(e) = write_outputs(cfg, dir, &runs, &mut files) {
        for f in &files {
            let _ = fs::remove_file(f);
        }
        return Err(e);
    }
    Ok(ExperimentOutcome {
        dir: dir.to_path_buf(),
        runs,
        files,
    })
}

/// Parses `key = value` lines as written by the harness.
pub fn parse_report(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}
