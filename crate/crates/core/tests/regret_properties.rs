use mixknap::regret::{hindsight_best, DualOmd, Exp3P, PayoffRange, SimplexOmd, StepSchedule};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn learner(n: usize, lo: f64, hi: f64) -> SimplexOmd {
    SimplexOmd::new(n, PayoffRange::new(lo, hi).unwrap(), StepSchedule::Anytime).unwrap()
}

/// Best column total minus the learner's expected total.
fn realized_regret(l: &mut SimplexOmd, rows: &[Vec<f64>]) -> f64 {
    let mut earned = 0.0;
    for u in rows {
        earned += l.weights().iter().zip(u).map(|(w, x)| w * x).sum::<f64>();
        l.observe(u).unwrap();
    }
    hindsight_best(rows).unwrap().1 - earned
}

fn sequences(kind: usize, t: usize, n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..t)
        .map(|s| match kind {
            // i.i.d. uniform
            0 => (0..n).map(|_| rng.random_range(lo..=hi)).collect(),
            // the leader alternates in blocks of growing length
            1 => {
                let block = (s as f64).sqrt() as usize;
                (0..n).map(|j| if block % n == j { hi } else { lo }).collect()
            }
            // one coordinate slightly better on average
            _ => (0..n)
                .map(|j| {
                    let bias = if j == 0 { 0.1 } else { 0.0 };
                    (rng.random_range(lo..=hi) * 0.8 + bias * (hi - lo)).clamp(lo, hi)
                })
                .collect(),
        })
        .collect()
}

#[test]
fn simplex_regret_stays_under_the_anytime_envelope() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for t in [100usize, 1000, 10_000] {
        for n in [2usize, 5] {
            for (lo, hi) in [(0.0, 1.0), (-2.0, 1.0)] {
                for kind in 0..3 {
                    let rows = sequences(kind, t, n, lo, hi, &mut rng);
                    let regret = realized_regret(&mut learner(n, lo, hi), &rows);
                    let bound = 2.0 * (t as f64 * (n as f64).ln()).sqrt() * (hi - lo);
                    assert!(regret <= bound, "T={t} n={n} kind={kind}: regret {regret} > {bound}");
                }
            }
        }
    }
}

#[test]
fn hindsight_best_matches_a_column_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<f64>> = (0..100).map(|_| (0..5).map(|_| rng.random::<f64>()).collect()).collect();
    let sums: Vec<f64> = (0..5).map(|j| rows.iter().map(|r| r[j]).sum()).collect();
    let (j, v) = hindsight_best(&rows).unwrap();
    let best = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(v, best);
    assert_eq!(sums[j], best);
    assert_eq!(hindsight_best(&[vec![3.0, 5.0]]).unwrap(), (1, 5.0));
}

#[test]
fn exp3p_two_arm_example() {
    // Deterministic payoffs: arm 0 earns 1, arm 1 earns 0 on the rescaled
    // [0, 1] scale, i.e. the range endpoints 1 and −1/ρ.
    let t = 2000;
    let mut e = Exp3P::new(2, t, 0.05, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut earned = 0.0;
    for _ in 0..t {
        let (_, arm) = e.next_element(&mut rng).unwrap();
        let payoff = if arm == 0 { 1.0 } else { -1.0 };
        assert_eq!(e.rescale(payoff), if arm == 0 { 1.0 } else { 0.0 });
        earned += e.rescale(payoff);
        e.observe(payoff).unwrap();
    }
    let regret = t as f64 - earned;
    assert!(regret <= t as f64 / 2.0, "regret {regret} not below uniform play");
    assert!(e.distribution()[0] >= 0.9, "final probability {}", e.distribution()[0]);
}

#[test]
fn exp3p_fresh_distribution_mixes_uniform_exploration() {
    let e = Exp3P::new(3, 1000, 0.05, 0.5).unwrap();
    let gamma = e.params().gamma;
    let want = (2.0 * (3.0 * 3.0 * 3f64.ln() / (5.0 * 1000.0)).sqrt()).min(0.6);
    assert!((gamma - want).abs() < 1e-12);
    for p in e.distribution() {
        assert!((p - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn iterates_are_deterministic() {
    let run = |seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = learner(4, -2.0, 1.0);
        let mut d = DualOmd::new(2, 0.5).unwrap();
        let mut e = Exp3P::new(4, 500, 0.05, 0.5).unwrap();
        let mut out = Vec::new();
        for _ in 0..500 {
            let u: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..=1.0)).collect();
            s.observe(&u).unwrap();
            let g: Vec<f64> = (0..2).map(|_| rng.random_range(-0.5..=0.5)).collect();
            d.observe(&g).unwrap();
            let (_, arm) = e.next_element(&mut rng).unwrap();
            e.observe(u[arm]).unwrap();
            out.extend_from_slice(s.weights());
            out.extend_from_slice(d.next_element().lambda());
            out.extend(e.distribution());
        }
        out
    };
    let a = run(9);
    let b = run(9);
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_ne!(a, run(10));
}

proptest! {
    #[test]
    fn simplex_iterates_are_shift_invariant(
        rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 1..60),
        shift in -1.0f64..1.0,
    ) {
        let mut a = learner(4, -1.0, 2.0);
        let mut b = learner(4, -1.0, 2.0);
        for u in &rows {
            a.observe(u).unwrap();
            let shifted: Vec<f64> = u.iter().map(|x| x + shift).collect();
            b.observe(&shifted).unwrap();
            for (x, y) in a.weights().iter().zip(b.weights()) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn simplex_weights_stay_normalized(rows in prop::collection::vec(prop::collection::vec(-2.0f64..1.0, 3), 1..80)) {
        let mut l = learner(3, -2.0, 1.0);
        for u in &rows {
            l.observe(u).unwrap();
            prop_assert!((l.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(l.weights().iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn dual_iterates_stay_in_the_feasible_set(
        rho in 0.05f64..=1.0,
        raw in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 3), 1..200),
    ) {
        let mut d = DualOmd::new(3, rho).unwrap();
        for c in &raw {
            d.observe_cost(c).unwrap();
            let lam = d.next_element();
            prop_assert!(lam.lambda().iter().all(|&l| l >= 0.0));
            prop_assert!(lam.l1() <= 1.0 / rho + 1e-9);
        }
    }

    #[test]
    fn exp3p_distribution_stays_normalized(seed in any::<u64>(), rho in 0.1f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = Exp3P::new(3, 200, 0.05, rho).unwrap();
        for _ in 0..200 {
            let (xi, _) = e.next_element(&mut rng).unwrap();
            prop_assert!((xi.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            e.observe(rng.random_range(-1.0 / rho..=1.0)).unwrap();
        }
    }
}
