//! Flat `key = value` experiment configuration.
//!
//! Blank lines and text after `#` are ignored. Keys are top-level or carry
//! an `env.`, `alg.` or `app.` prefix. Unknown and repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fpa::{default_levels, RateRule, DEFAULT_NODE_CAP};
use crate::meta::{Feedback, Order};
use crate::regret::StepSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Application {
    Bwk,
    Stackelberg,
    FpaFinite,
    FpaContinuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Stochastic,
    Adversarial,
    Nonstationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimalKind {
    Omd,
    Exp3P,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DualKind {
    Omd,
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub kind: EnvKind,
    /// Seeds instance generation; independent of the episode seeds.
    pub seed: u64,
    /// Request templates for `bwk`, relative to the config file.
    pub instance: Option<PathBuf>,
    /// Size of generated template pools.
    pub templates: usize,
    /// Adversarial `bwk` script as template indices, each held for `block`
    /// rounds and repeated cyclically.
    pub script: Option<Vec<usize>>,
    pub block: Option<usize>,
    /// Number of rounds replaced by the corrupting template.
    pub corruption: usize,
    pub corrupt_template: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgConfig {
    pub primal: PrimalKind,
    pub dual: DualKind,
    pub primal_eta: StepSchedule,
    pub dual_eta: StepSchedule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    pub resources: usize,
    pub leader_actions: usize,
    pub follower_actions: usize,
    pub follower_types: usize,
    pub valuation_step: f64,
    pub bid_step: f64,
    pub levels: usize,
    pub node_cap: usize,
    pub rate: RateRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub application: Application,
    pub horizon: usize,
    /// Common per-resource budget `min_i B_i`.
    pub budget: f64,
    /// Budgets as configured: one entry, or one per resource.
    pub budgets: Vec<f64>,
    pub feedback: Feedback,
    pub order: Order,
    pub delta: f64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Directory that relative paths are resolved against.
    pub base_dir: PathBuf,
    pub env: EnvConfig,
    pub alg: AlgConfig,
    pub app: AppConfig,
}

const KEYS: &[&str] = &[
    "name",
    "application",
    "horizon",
    "budget",
    "feedback",
    "order",
    "delta",
    "seeds",
    "output_dir",
    "env.kind",
    "env.seed",
    "env.instance",
    "env.templates",
    "env.script",
    "env.block",
    "env.corruption",
    "env.corrupt_template",
    "alg.primal",
    "alg.dual",
    "alg.dual_lambda",
    "alg.primal_eta",
    "alg.dual_eta",
    "app.resources",
    "app.leader_actions",
    "app.follower_actions",
    "app.follower_types",
    "app.valuation_step",
    "app.bid_step",
    "app.levels",
    "app.node_cap",
    "app.rate",
];

struct Entries {
    map: BTreeMap<String, String>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", n + 1), "expected `key = value`"))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::config(key, "unknown key"));
            }
            if map.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::config(key, "key given more than once"));
            }
        }
        Ok(Self { map })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.raw(key).ok_or_else(|| Error::config(key, "missing required key"))
    }

    fn typed<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::config(key, format!("expected {what}, got `{v}`")))
            })
            .transpose()
    }

    fn typed_or<T: FromStr>(&self, key: &str, what: &str, default: T) -> Result<T> {
        Ok(self.typed(key, what)?.unwrap_or(default))
    }

    fn choice<T: Copy>(&self, key: &str, options: &[(&str, T)]) -> Result<Option<T>> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        options
            .iter()
            .find(|(name, _)| *name == v)
            .map(|(_, x)| Some(*x))
            .ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                Error::config(key, format!("expected one of {}, got `{v}`", names.join(", ")))
            })
    }

    fn list<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<Vec<T>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|_| Error::config(key, format!("expected a list of {what}, got `{v}`")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn schedule(&self, key: &str) -> Result<StepSchedule> {
        match self.raw(key) {
            None | Some("anytime") => Ok(StepSchedule::Anytime),
            Some(v) => match v.parse::<f64>() {
                Ok(eta) if eta > 0.0 && eta.is_finite() => Ok(StepSchedule::Fixed(eta)),
                _ => Err(Error::config(key, format!("expected `anytime` or a positive rate, got `{v}`"))),
            },
        }
    }
}

/// `a,b,c` or an inclusive range `a..b`.
fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    let bad = || Error::config("seeds", format!("expected a list or range of integers, got `{value}`"));
    let seeds: Vec<u64> = if let Some((a, b)) = value.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        value
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    Ok(seeds)
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("experiment");
        Self::parse(&text, &base, stem)
    }

    /// Parses `text`; `default_name` names the experiment when `name` is
    /// omitted.
    pub fn parse(text: &str, base_dir: &Path, default_name: &str) -> Result<Self> {
        let e = Entries::parse(text)?;
        let application = e
            .choice(
                "application",
                &[
                    ("bwk", Application::Bwk),
                    ("stackelberg", Application::Stackelberg),
                    ("fpa_finite", Application::FpaFinite),
                    ("fpa_continuous", Application::FpaContinuous),
                ],
            )?
            .ok_or_else(|| Error::config("application", "missing required key"))?;
        e.required("horizon")?;
        let horizon: usize = e.typed_or("horizon", "a positive integer", 0)?;
        if horizon == 0 {
            return Err(Error::config("horizon", "horizon must be positive"));
        }
        e.required("budget")?;
        let budgets: Vec<f64> = e.list("budget", "numbers")?.unwrap_or_default();
        if budgets.iter().any(|b| !(*b >= 1.0)) {
            return Err(Error::config("budget", "budget must be at least 1"));
        }
        if budgets.iter().any(|&b| b > horizon as f64) {
            return Err(Error::config("budget", "budget exceeds horizon"));
        }
        let budget = budgets.iter().copied().fold(f64::INFINITY, f64::min);
        let feedback = e
            .choice("feedback", &[("full", Feedback::Full), ("bandit", Feedback::Bandit)])?
            .unwrap_or(Feedback::Full);
        if feedback == Feedback::Bandit && application != Application::Bwk {
            return Err(Error::config("feedback", "bandit feedback is only available for bwk"));
        }
        let mut order = e
            .choice(
                "order",
                &[("simultaneous", Order::Simultaneous), ("dual_first", Order::DualFirst)],
            )?
            .unwrap_or(Order::Simultaneous);
        if application == Application::FpaContinuous {
            order = Order::DualFirst;
        }
        let delta = e.typed_or("delta", "a number", 0.05)?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::config("delta", "delta must lie in (0, 1)"));
        }
        let seeds = parse_seeds(e.required("seeds")?)?;
        let output_dir = PathBuf::from(e.raw("output_dir").unwrap_or("out"));
        let name = e.raw("name").unwrap_or(default_name).to_string();
        if name.is_empty() || name.contains(['/', '\\']) {
            return Err(Error::config("name", "name must be a nonempty file-name component"));
        }

        let kind = e
            .choice(
                "env.kind",
                &[
                    ("stochastic", EnvKind::Stochastic),
                    ("adversarial", EnvKind::Adversarial),
                    ("nonstationary", EnvKind::Nonstationary),
                ],
            )?
            .ok_or_else(|| Error::config("env.kind", "missing required key"))?;
        let instance = e.raw("env.instance").map(PathBuf::from);
        if application == Application::Bwk && instance.is_none() {
            return Err(Error::config("env.instance", "bwk needs a request-template file"));
        }
        if application != Application::Bwk && instance.is_some() {
            return Err(Error::config("env.instance", "only bwk reads a template file"));
        }
        let templates = e.typed_or("env.templates", "a positive integer", 8usize)?;
        if templates == 0 {
            return Err(Error::config("env.templates", "at least one template is required"));
        }
        let script = e.list("env.script", "template indices")?;
        if script.is_some() && (application != Application::Bwk || kind != EnvKind::Adversarial) {
            return Err(Error::config("env.script", "scripts apply to adversarial bwk only"));
        }
        let block = e.typed("env.block", "a positive integer")?;
        if block == Some(0) {
            return Err(Error::config("env.block", "block length must be positive"));
        }
        let corruption = e.typed_or("env.corruption", "a nonnegative integer", 0usize)?;
        if corruption > 0 && kind != EnvKind::Nonstationary {
            return Err(Error::config("env.corruption", "corruption applies to nonstationary environments"));
        }
        if corruption > horizon {
            return Err(Error::config("env.corruption", "more corrupted rounds than the horizon"));
        }
        let env = EnvConfig {
            kind,
            seed: e.typed_or("env.seed", "a nonnegative integer", 0)?,
            instance,
            templates,
            script,
            block,
            corruption,
            corrupt_template: e.typed_or("env.corrupt_template", "a template index", 0)?,
        };

        let resources = e.typed_or("app.resources", "a positive integer", 1usize)?;
        if resources == 0 {
            return Err(Error::config("app.resources", "at least one resource is required"));
        }
        if resources != 1 && matches!(application, Application::FpaFinite | Application::FpaContinuous) {
            return Err(Error::config("app.resources", "budget pacing uses a single resource"));
        }
        if budgets.len() > 1 {
            if application != Application::Bwk {
                return Err(Error::config("budget", "per-resource budgets are only available for bwk"));
            }
            if budgets.len() != resources {
                return Err(Error::config("budget", "one budget per resource is required"));
            }
        }
        let bid_default = match application {
            Application::FpaFinite => 0.125,
            _ => 1.0 / horizon as f64,
        };
        let app = AppConfig {
            resources,
            leader_actions: e.typed_or("app.leader_actions", "a positive integer", 3)?,
            follower_actions: e.typed_or("app.follower_actions", "a positive integer", 2)?,
            follower_types: e.typed_or("app.follower_types", "a positive integer", 2)?,
            valuation_step: e.typed_or("app.valuation_step", "a number", 0.25)?,
            bid_step: e.typed_or("app.bid_step", "a number", bid_default)?,
            levels: e.typed_or("app.levels", "a positive integer", default_levels(horizon))?,
            node_cap: e.typed_or("app.node_cap", "a positive integer", DEFAULT_NODE_CAP)?,
            rate: e
                .choice("app.rate", &[("gap", RateRule::Gap), ("gap_eps", RateRule::GapTimesEps)])?
                .unwrap_or(RateRule::Gap),
        };

        let primal = e
            .choice("alg.primal", &[("omd", PrimalKind::Omd), ("exp3p", PrimalKind::Exp3P)])?
            .unwrap_or(match feedback {
                Feedback::Full => PrimalKind::Omd,
                Feedback::Bandit => PrimalKind::Exp3P,
            });
        match (primal, feedback) {
            (PrimalKind::Omd, Feedback::Bandit) => {
                return Err(Error::config("alg.primal", "omd needs full feedback"));
            }
            (PrimalKind::Exp3P, Feedback::Full) => {
                return Err(Error::config("alg.primal", "exp3p needs bandit feedback"));
            }
            _ => {}
        }
        let dual = match e.raw("alg.dual").unwrap_or("omd") {
            "omd" => {
                if e.raw("alg.dual_lambda").is_some() {
                    return Err(Error::config("alg.dual_lambda", "only used with alg.dual = fixed"));
                }
                DualKind::Omd
            }
            "fixed" => {
                let lam: Vec<f64> = e
                    .list("alg.dual_lambda", "numbers")?
                    .ok_or_else(|| Error::config("alg.dual_lambda", "a fixed dual needs its multipliers"))?;
                if lam.len() != resources {
                    return Err(Error::config("alg.dual_lambda", "one multiplier per resource is required"));
                }
                DualKind::Fixed(lam)
            }
            v => return Err(Error::config("alg.dual", format!("expected one of omd, fixed, got `{v}`"))),
        };
        let alg = AlgConfig {
            primal,
            dual,
            primal_eta: e.schedule("alg.primal_eta")?,
            dual_eta: e.schedule("alg.dual_eta")?,
        };

        Ok(Self {
            name,
            application,
            horizon,
            budget,
            budgets,
            feedback,
            order,
            delta,
            seeds,
            output_dir,
            base_dir: base_dir.to_path_buf(),
            env,
            alg,
            app,
        })
    }

    /// `ρ = B/T`.
    pub fn rho(&self) -> f64 {
        self.budget / self.horizon as f64
    }

    /// Resolved `key = value` pairs, defaults included.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("name", self.name.clone());
        put("application", self.application.to_string());
        put("horizon", self.horizon.to_string());
        put("budget", join(&self.budgets));
        put("rho", self.rho().to_string());
        put("feedback", feedback_name(self.feedback).into());
        put("order", order_name(self.order).into());
        put("delta", self.delta.to_string());
        put("seeds", join(&self.seeds));
        put("output_dir", self.output_dir.display().to_string());
        put(
            "env.kind",
            match self.env.kind {
                EnvKind::Stochastic => "stochastic",
                EnvKind::Adversarial => "adversarial",
                EnvKind::Nonstationary => "nonstationary",
            }
            .into(),
        );
        put("env.seed", self.env.seed.to_string());
        if let Some(p) = &self.env.instance {
            put("env.instance", p.display().to_string());
        }
        put("env.templates", self.env.templates.to_string());
        if let Some(s) = &self.env.script {
            put("env.script", join(s));
        }
        if let Some(b) = self.env.block {
            put("env.block", b.to_string());
        }
        put("env.corruption", self.env.corruption.to_string());
        put("env.corrupt_template", self.env.corrupt_template.to_string());
        put(
            "alg.primal",
            match self.alg.primal {
                PrimalKind::Omd => "omd",
                PrimalKind::Exp3P => "exp3p",
            }
            .into(),
        );
        match &self.alg.dual {
            DualKind::Omd => put("alg.dual", "omd".into()),
            DualKind::Fixed(lam) => {
                put("alg.dual", "fixed".into());
                put("alg.dual_lambda", join(lam));
            }
        }
        put("alg.primal_eta", schedule_name(self.alg.primal_eta));
        put("alg.dual_eta", schedule_name(self.alg.dual_eta));
        let a = &self.app;
        put("app.resources", a.resources.to_string());
        match self.application {
            Application::Bwk => {}
            Application::Stackelberg => {
                put("app.leader_actions", a.leader_actions.to_string());
                put("app.follower_actions", a.follower_actions.to_string());
                put("app.follower_types", a.follower_types.to_string());
            }
            Application::FpaFinite => {
                put("app.valuation_step", a.valuation_step.to_string());
                put("app.bid_step", a.bid_step.to_string());
            }
            Application::FpaContinuous => {
                put("app.bid_step", a.bid_step.to_string());
                put("app.levels", a.levels.to_string());
                put("app.node_cap", a.node_cap.to_string());
                put("app.rate", rate_name(a.rate).into());
            }
        }
        out
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub(crate) fn feedback_name(f: Feedback) -> &'static str {
    match f {
        Feedback::Full => "full",
        Feedback::Bandit => "bandit",
    }
}

pub(crate) fn order_name(o: Order) -> &'static str {
    match o {
        Order::Simultaneous => "simultaneous",
        Order::DualFirst => "dual_first",
    }
}

pub(crate) fn rate_name(r: RateRule) -> &'static str {
    match r {
        RateRule::Gap => "gap",
        RateRule::GapTimesEps => "gap_eps",
    }
}

pub(crate) fn parse_rate(s: &str) -> Option<RateRule> {
    match s {
        "gap" => Some(RateRule::Gap),
        "gap_eps" => Some(RateRule::GapTimesEps),
        _ => None,
    }
}

fn schedule_name(s: StepSchedule) -> String {
    match s {
        StepSchedule::Anytime => "anytime".into(),
        StepSchedule::Fixed(eta) => eta.to_string(),
    }
}

impl fmt::Display for Application {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Application::Bwk => "bwk",
            Application::Stackelberg => "stackelberg",
            Application::FpaFinite => "fpa_finite",
            Application::FpaContinuous => "fpa_continuous",
        })
    }
}
