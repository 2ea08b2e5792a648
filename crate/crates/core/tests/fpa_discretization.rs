use mixknap::fpa::{lagrangian_payoff, threshold_bid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One round `(v, λ, m)`.
type Round = (f64, f64, f64);

fn raw_payoff(v: f64, lam: f64, b: f64, m: f64) -> f64 {
    if b >= m {
        v - (1.0 + lam) * b
    } else {
        0.0
    }
}

fn thresholded(policy_bid: f64, v: f64, lam: f64, eps: f64) -> f64 {
    (policy_bid + 2.0 * eps).min(v / (1.0 + lam)).clamp(0.0, 1.0)
}

/// `table[i][j]`: total payoff of the rounds whose valuation floors to grid
/// point `i` when point `i` bids level `j`.
fn bucket_table(rounds: &[Round], points: usize, levels: usize, payoff: impl Fn(usize, &Round) -> f64) -> Vec<Vec<f64>> {
    let mut table = vec![vec![0.0; levels + 1]; points + 1];
    for r in rounds {
        let i = ((r.0 * points as f64) + 1e-12).floor() as usize;
        for (j, cell) in table[i].iter_mut().enumerate() {
            *cell += payoff(j, r);
        }
    }
    table
}

/// Best policy `grid point → level` whose consecutive levels differ by at
/// most `jump`.
fn best_lipschitz(table: &[Vec<f64>], jump: usize) -> f64 {
    let mut best = table[0].clone();
    for row in &table[1..] {
        best = (0..row.len())
            .map(|j| {
                let lo = j.saturating_sub(jump);
                let hi = (j + jump).min(row.len() - 1);
                row[j] + best[lo..=hi].iter().copied().fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
    }
    best.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Same maximum by listing every admissible policy.
fn best_by_enumeration(table: &[Vec<f64>], jump: usize) -> f64 {
    fn rec(table: &[Vec<f64>], jump: usize, i: usize, prev: usize, acc: f64, best: &mut f64) {
        if i == table.len() {
            *best = best.max(acc);
            return;
        }
        for j in 0..table[i].len() {
            if i == 0 || j.abs_diff(prev) <= jump {
                rec(table, jump, i + 1, j, acc + table[i][j], best);
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    rec(table, jump, 0, 0, 0.0, &mut best);
    best
}

fn random_rounds(rng: &mut ChaCha8Rng, t: usize, fine: usize, rho: f64) -> Vec<Round> {
    (0..t)
        .map(|_| {
            let v = rng.random_range(0..=fine) as f64 / fine as f64;
            (v, rng.random_range(0.0..=1.0 / rho), rng.random::<f64>())
        })
        .collect()
}

struct Classes {
    thresholded: f64,
    lipschitz: f64,
}

fn compare(rounds: &[Round], eps_points: usize, bid_levels: usize, fine: usize, enumerate: bool) -> Classes {
    let eps = 1.0 / eps_points as f64;
    let g = 1.0 / bid_levels as f64;
    let phi = bucket_table(rounds, eps_points, bid_levels, |j, &(v, lam, m)| {
        raw_payoff(v, lam, thresholded(j as f64 * g, v, lam, eps), m)
    });
    // 2-Lipschitz on V_ε with bids on B_g: neighbours differ by ≤ 2ε/g levels.
    let phi_jump = (2.0 * eps / g).round() as usize;
    let psi = bucket_table(rounds, fine, fine, |j, &(v, lam, m)| raw_payoff(v, lam, j as f64 / fine as f64, m));
    let out = Classes {
        thresholded: best_lipschitz(&phi, phi_jump),
        lipschitz: best_lipschitz(&psi, 1),
    };
    if enumerate {
        assert!((best_by_enumeration(&phi, phi_jump) - out.thresholded).abs() < 1e-9);
        assert!((best_by_enumeration(&psi, 1) - out.lipschitz).abs() < 1e-9);
    }
    out
}

#[test]
fn dynamic_program_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let rounds = random_rounds(&mut rng, 16, 4, 0.5);
        compare(&rounds, 4, 8, 4, true);
    }
}

#[test]
fn thresholding_loses_at_most_the_discretization_allowance() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for rho in [0.5, 1.0] {
        for (eps_points, bid_levels) in [(4usize, 8usize), (8, 8), (8, 32)] {
            for t in [8usize, 16, 32] {
                for _ in 0..20 {
                    let rounds = random_rounds(&mut rng, t, 32, rho);
                    let c = compare(&rounds, eps_points, bid_levels, 32, false);
                    let eps = 1.0 / eps_points as f64;
                    let allowance = 7.0 * eps * t as f64 / rho;
                    assert!(
                        c.thresholded >= c.lipschitz - allowance,
                        "ρ={rho} ε={eps} T={t}: {} < {} − {allowance}",
                        c.thresholded,
                        c.lipschitz
                    );
                }
            }
        }
    }
}

#[test]
fn thresholded_payoffs_lie_in_the_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100_000 {
        let (v, lam, m) = (rng.random::<f64>(), rng.random_range(0.0..=4.0), rng.random::<f64>());
        let eps = [0.5, 0.25, 0.125, 0.0625][rng.random_range(0..4)];
        let policy_bid = rng.random::<f64>();
        let b = threshold_bid(policy_bid, v, lam, eps);
        let want = thresholded(policy_bid, v, lam, eps);
        assert!(b <= want && want - b <= 1e-15, "bid {b} vs {want}");
        let r = lagrangian_payoff(v, lam, b, m);
        assert!((r - raw_payoff(v, lam, b, m)).abs() < 1e-15);
        assert!((0.0..=1.0).contains(&r), "payoff {r} at v={v} λ={lam} b={b} m={m}");
    }
}
