mod common;

use common::{i1, i2};
use mixknap::meta::{
    min_lagrangian_on_grid, run_episode, stochastic_report, stream_rng, Decision, Exp3PPrimal, Feedback, FixedDual,
    FixedPrimal, Order, PrimalLearner, RunOptions, SimplexPrimal, Trace,
};
use mixknap::regret::DualOmd;
use mixknap::{solve_opt_lp, BudgetState, Distribution, DualVector, InputEnv, Mixture, Request};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};

fn stochastic(req: Request, horizon: usize) -> InputEnv<Request> {
    InputEnv::Stochastic {
        dist: Distribution::point(req),
        horizon,
    }
}

fn omd_run(env: &mut InputEnv<Request>, budget: f64, horizon: usize, seed: u64) -> Trace {
    let n = match env {
        InputEnv::Stochastic { dist, .. } => dist.templates()[0].num_actions(),
        InputEnv::Adversarial { script } => script[0].num_actions(),
        InputEnv::Nonstationary { script } => script.reference().templates()[0].num_actions(),
    };
    let m = match env {
        InputEnv::Stochastic { dist, .. } => dist.templates()[0].num_resources(),
        InputEnv::Adversarial { script } => script[0].num_resources(),
        InputEnv::Nonstationary { script } => script.reference().templates()[0].num_resources(),
    };
    let b = BudgetState::new(budget, horizon, m).unwrap();
    let mut p = SimplexPrimal::new(n, b.rho()).unwrap();
    let mut d = DualOmd::new(m, b.rho()).unwrap();
    run_episode(env, &mut p, &mut d, b, &RunOptions::new(Order::Simultaneous, seed)).unwrap()
}

fn check_feasible(trace: &Trace) -> Result<(), TestCaseError> {
    for (i, spent) in trace.total_costs().into_iter().enumerate() {
        prop_assert!(spent <= trace.budget, "resource {i} spent {spent} of {}", trace.budget);
    }
    for r in &trace.rounds {
        prop_assert!(r.remaining.iter().all(|&x| x >= 0.0));
        if r.void_forced {
            prop_assert_eq!(r.reward, 0.0);
            prop_assert!(r.costs.iter().all(|&c| c == 0.0));
        }
    }
    Ok(())
}

fn random_templates(rng: &mut ChaCha8Rng, count: usize, n: usize, m: usize) -> Vec<Request> {
    (0..count).map(|_| common::random_request(rng, n, m)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn budgets_are_never_exceeded(
        seed in any::<u64>(),
        n in 2usize..=5,
        m in 1usize..=3,
        horizon in 5usize..300,
        frac in 0.0f64..1.0,
        kind in 0usize..3,
        bandit in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let budget = (1.0 + frac * (horizon as f64 - 1.0)).floor();
        let pool = random_templates(&mut rng, 3, n, m);
        let mut env = match kind {
            0 => InputEnv::Stochastic { dist: Distribution::uniform(pool).unwrap(), horizon },
            1 => InputEnv::Adversarial { script: (0..horizon).map(|t| pool[t % 3].clone()).collect() },
            _ => {
                let reference = Distribution::uniform(pool).unwrap();
                let corrupt = reference.reweighted(vec![1.0, 0.0, 0.0]).unwrap();
                let rounds: Vec<usize> = (1..=horizon).step_by(7).collect();
                InputEnv::Nonstationary {
                    script: mixknap::env::make_corruption(&reference, &rounds, &corrupt, horizon).unwrap(),
                }
            }
        };
        let b = BudgetState::new(budget, horizon, m).unwrap();
        let rho = b.rho();
        let mut d = DualOmd::new(m, rho).unwrap();
        let opts = RunOptions::new(Order::Simultaneous, seed);
        let trace = if bandit {
            let mut p = Exp3PPrimal::new(n, horizon, 0.05, rho).unwrap();
            run_episode(&mut env, &mut p, &mut d, b, &opts).unwrap()
        } else {
            let mut p = SimplexPrimal::new(n, rho).unwrap();
            run_episode(&mut env, &mut p, &mut d, b, &opts).unwrap()
        };
        prop_assert_eq!(trace.rounds.len(), horizon);
        check_feasible(&trace)?;
    }
}

#[test]
fn guard_switches_to_void_once_the_budget_is_spent() {
    // Dirac-at-arm stub on constant I2 with B = 3, T = 6.
    let mut env = stochastic(i2(), 6);
    let mut p = FixedPrimal::dirac(2, 1).unwrap();
    let mut d = FixedDual(DualVector::zeros(1, 0.5).unwrap());
    let b = BudgetState::new(3.0, 6, 1).unwrap();
    let trace = run_episode(&mut env, &mut p, &mut d, b, &RunOptions::new(Order::Simultaneous, 0)).unwrap();
    let actions: Vec<usize> = trace.rounds.iter().map(|r| r.action).collect();
    assert_eq!(actions, vec![1, 1, 1, 0, 0, 0]);
    let forced: Vec<bool> = trace.rounds.iter().map(|r| r.void_forced).collect();
    assert_eq!(forced, vec![false, false, false, true, true, true]);
    assert_eq!(trace.total_reward, 3.0);
    assert_eq!(trace.tau, 3);
    assert_eq!(trace.rounds[5].remaining, vec![0.0]);
}

#[test]
fn void_stub_leaves_budgets_untouched() {
    let mut env = stochastic(i1(), 10);
    let mut p = FixedPrimal::dirac(2, 0).unwrap();
    let mut d = FixedDual(DualVector::new(vec![1.0], 0.5).unwrap());
    let b = BudgetState::new(5.0, 10, 1).unwrap();
    let trace = run_episode(&mut env, &mut p, &mut d, b, &RunOptions::new(Order::Simultaneous, 4)).unwrap();
    assert_eq!(trace.total_reward, 0.0);
    assert_eq!(trace.tau, 10);
    assert!(trace.rounds.iter().all(|r| r.remaining == vec![5.0]));
}

#[test]
fn stub_episodes_replay_bit_for_bit() {
    let pool = random_templates(&mut ChaCha8Rng::seed_from_u64(1), 4, 4, 2);
    let run = |seed| {
        let mut env = InputEnv::Stochastic {
            dist: Distribution::uniform(pool.clone()).unwrap(),
            horizon: 200,
        };
        let mut p = FixedPrimal::new(Mixture::uniform(4).unwrap());
        let mut d = FixedDual(DualVector::new(vec![0.5, 0.25], 0.5).unwrap());
        let b = BudgetState::new(100.0, 200, 2).unwrap();
        run_episode(&mut env, &mut p, &mut d, b, &RunOptions::new(Order::Simultaneous, seed)).unwrap()
    };
    assert_eq!(run(17), run(17));
    assert_ne!(run(17).rounds, run(18).rounds);
}

/// Delegates to a simplex learner and records the multiplier it is shown.
struct Recording {
    inner: SimplexPrimal,
    seen: Vec<Option<DualVector>>,
}

impl PrimalLearner for Recording {
    type Input = Request;

    fn feedback(&self) -> Feedback {
        self.inner.feedback()
    }

    fn decide(&mut self, ctx: &(), lam: Option<&DualVector>, rng: &mut ChaCha20Rng) -> mixknap::Result<Decision> {
        self.seen.push(lam.cloned());
        self.inner.decide(ctx, lam, rng)
    }

    fn request(&self, input: &Request, lam: &DualVector) -> mixknap::Result<Request> {
        self.inner.request(input, lam)
    }

    fn observe_full(&mut self, input: &Request, req: &Request, lam: &DualVector) -> mixknap::Result<()> {
        self.inner.observe_full(input, req, lam)
    }

    fn observe_bandit(&mut self, a: usize, f: f64, c: &[f64], lam: &DualVector) -> mixknap::Result<()> {
        self.inner.observe_bandit(a, f, c, lam)
    }

    fn forgo(&mut self) -> mixknap::Result<()> {
        self.inner.forgo()
    }
}

#[test]
fn dual_first_shows_the_recorded_multiplier() {
    for order in [Order::DualFirst, Order::Simultaneous] {
        let mut env = stochastic(i1(), 50);
        let mut p = Recording {
            inner: SimplexPrimal::new(2, 0.2).unwrap(),
            seen: Vec::new(),
        };
        let mut d = DualOmd::new(1, 0.2).unwrap();
        let b = BudgetState::new(10.0, 50, 1).unwrap();
        let trace = run_episode(&mut env, &mut p, &mut d, b, &RunOptions::new(order, 2)).unwrap();
        for (r, seen) in trace.rounds.iter().zip(&p.seen) {
            match order {
                Order::DualFirst => assert_eq!(seen.as_ref(), Some(&r.lambda)),
                Order::Simultaneous => assert!(seen.is_none()),
            }
        }
    }
}

#[test]
fn stochastic_draws_match_the_analytic_mean() {
    let pool = random_templates(&mut ChaCha8Rng::seed_from_u64(8), 3, 3, 2);
    let dist = Distribution::new(pool.clone(), vec![0.5, 0.3, 0.2]).unwrap();
    let mean = dist.mean().unwrap();
    let mut rng = stream_rng(3, 0);
    let draws = 10_000;
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        let r = dist.sample(&mut rng);
        counts[pool.iter().position(|p| p == r).unwrap()] += 1;
    }
    for a in 0..3 {
        let coords: Vec<Box<dyn Fn(&Request) -> f64>> = vec![
            Box::new(move |r: &Request| r.reward(a)),
            Box::new(move |r: &Request| r.cost(a)[0]),
            Box::new(move |r: &Request| r.cost(a)[1]),
        ];
        let analytic = [mean.reward(a), mean.cost(a)[0], mean.cost(a)[1]];
        for (f, mu) in coords.iter().zip(analytic) {
            let empirical: f64 =
                pool.iter().zip(&counts).map(|(r, &c)| f(r) * c as f64).sum::<f64>() / draws as f64;
            let var: f64 = pool
                .iter()
                .zip(dist.probs())
                .map(|(r, p)| p * (f(r) - mu).powi(2))
                .sum();
            let sigma = (var / draws as f64).sqrt();
            assert!((empirical - mu).abs() <= 3.0 * sigma + 1e-12, "{empirical} vs {mu} (σ {sigma})");
        }
    }
}

#[test]
fn average_mixture_approaches_the_saddle_point() {
    // On I2 the Lagrangian of ξ̄ = (1 − p, p) against the λ-grid has minimum
    // 0.5 − |p − 0.5|. The constant C is fitted on the shortest horizon.
    let rho = 0.5;
    let opt = solve_opt_lp(&i2(), rho).unwrap().value;
    let deficits = |horizon: usize| -> Vec<(f64, usize)> {
        (0..20u64)
            .map(|seed| {
                let mut env = stochastic(i2(), horizon);
                let trace = omd_run(&mut env, rho * horizon as f64, horizon, seed);
                let xi = trace.average_mixture(trace.tau).unwrap();
                let low = min_lagrangian_on_grid(&xi, &i2(), rho, 0.1).unwrap();
                let p = xi.weights()[1];
                assert!((low - (0.5 - (p - 0.5).abs())).abs() < 1e-9);
                (opt - low, trace.tau)
            })
            .collect()
    };
    let base = deficits(1000);
    let c = base
        .iter()
        .map(|(d, tau)| d * (*tau as f64).sqrt())
        .fold(0.0f64, f64::max)
        .max(1e-9);
    for horizon in [4000usize, 16_000] {
        let runs = deficits(horizon);
        let ok = runs.iter().filter(|(d, tau)| *d <= c / (*tau as f64).sqrt()).count();
        assert!(ok >= 18, "T={horizon}: {ok}/20 runs within C/√τ with C = {c}");
    }
}

#[test]
fn stochastic_report_on_i2() {
    let mut env = stochastic(i2(), 4000);
    let trace = omd_run(&mut env, 2000.0, 4000, 0);
    let rep = stochastic_report(&trace, &i2(), 0.5).unwrap();
    assert!((rep.opt_dp_upper - 2000.0).abs() < 1e-6);
    assert_eq!(rep.regret_vs_upper, rep.opt_dp_upper - trace.total_reward);

    let zero = Request::new(vec![0.0, 0.0], vec![vec![0.0], vec![0.7]], 0).unwrap();
    let mut env = stochastic(zero.clone(), 100);
    let trace = omd_run(&mut env, 50.0, 100, 0);
    assert_eq!(stochastic_report(&trace, &zero, 0.5).unwrap().regret_vs_upper, 0.0);
}

#[test]
fn exhausted_script_is_a_protocol_error() {
    use mixknap::meta::Environment;
    let mut env = InputEnv::Adversarial { script: vec![i1(), i2()] };
    let mut rng = stream_rng(0, 0);
    assert_eq!(env.next_input(1, &mut rng).unwrap(), i1());
    assert_eq!(env.next_input(2, &mut rng).unwrap(), i2());
    assert!(matches!(env.next_input(3, &mut rng), Err(mixknap::Error::Protocol(_))));
}
