//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use mixknap::stackelberg::Matrix;
use mixknap::Request;
use rand::Rng;

pub fn i1() -> Request {
    Request::new(vec![0.0, 0.8], vec![vec![0.0], vec![0.5]], 0).unwrap()
}

pub fn i2() -> Request {
    Request::new(vec![0.0, 1.0], vec![vec![0.0], vec![1.0]], 0).unwrap()
}

/// Random request with `n` actions (void at 0) and `m` resources. About a
/// fifth of the entries are exact zeros to exercise degenerate vertices.
pub fn random_request<R: Rng>(rng: &mut R, n: usize, m: usize) -> Request {
    let draw = |rng: &mut R| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random::<f64>() };
    let mut rewards = vec![0.0];
    let mut costs = vec![vec![0.0; m]];
    for _ in 1..n {
        rewards.push(draw(rng));
        costs.push((0..m).map(|_| draw(rng)).collect());
    }
    Request::new(rewards, costs, 0).unwrap()
}

/// `max_x f(x) + Σ_i λ_i(ρ − c_i(x))`, computed from the raw entries.
pub fn dual_objective(req: &Request, lam: &[f64], rho: f64) -> f64 {
    (0..req.num_actions())
        .map(|x| {
            req.reward(x)
                + lam
                    .iter()
                    .zip(req.cost(x))
                    .map(|(l, c)| l * (rho - c))
                    .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Grid unit for multipliers.
pub const GRID_UNIT: f64 = 1e-3;

/// Smallest dual objective found on `{λ ∈ D : λ_i ∈ GRID_UNIT·ℕ}`.
///
/// Full enumeration at unit 50, then pattern search over the `{−1,0,1}^m`
/// neighbourhood at units 10, 5, 2 and 1 from the best coarse points. Every
/// visited point lies on the grid, so the result bounds the grid minimum
/// from above.
pub fn dual_grid_min(req: &Request, rho: f64) -> f64 {
    let m = req.num_resources();
    let cap = ((1.0 / rho) / GRID_UNIT + 1e-9).floor() as i64;
    let eval = |k: &[i64]| {
        let lam: Vec<f64> = k.iter().map(|&x| x as f64 * GRID_UNIT).collect();
        dual_objective(req, &lam, rho)
    };
    let feasible = |k: &[i64]| k.iter().all(|&x| x >= 0) && k.iter().sum::<i64>() <= cap;

    let coarse = 50;
    let mut scored: Vec<(f64, Vec<i64>)> = Vec::new();
    let mut idx = vec![0i64; m];
    loop {
        if feasible(&idx) {
            scored.push((eval(&idx), idx.clone()));
        }
        let mut i = 0;
        loop {
            if i == m {
                break;
            }
            idx[i] += coarse;
            if idx[i] <= cap {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
        if i == m {
            break;
        }
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    scored.truncate(8);

    let mut dirs: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..m {
        dirs = dirs
            .into_iter()
            .flat_map(|d| {
                (-1..=1).map(move |s| {
                    let mut e = d.clone();
                    e.push(s);
                    e
                })
            })
            .collect();
    }
    dirs.retain(|d| d.iter().any(|&s| s != 0));

    let mut best = f64::INFINITY;
    for (mut value, mut point) in scored {
        for step in [10, 5, 2, 1] {
            loop {
                let mut moved = false;
                for d in &dirs {
                    let cand: Vec<i64> = point.iter().zip(d).map(|(p, s)| p + s * step).collect();
                    if feasible(&cand) {
                        let v = eval(&cand);
                        if v < value {
                            value = v;
                            point = cand;
                            moved = true;
                        }
                    }
                }
                if !moved {
                    break;
                }
            }
        }
        best = best.min(value);
    }
    best
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// `xᵀ M` as a vector over columns.
pub fn row_times(x: &[f64], m: &Matrix) -> Vec<f64> {
    (0..m[0].len())
        .map(|a| x.iter().zip(m).map(|(xj, row)| xj * row[a]).sum())
        .collect()
}

/// Leader reward and cost for commitment `x` against follower `u_k`, with
/// ties inside `tol` broken toward the leader and then the lowest column.
pub fn leader_outcome(x: &[f64], u_k: &Matrix, u_l: &Matrix, costs: &Matrix, tol: f64) -> (f64, Vec<f64>) {
    let uf = row_times(x, u_k);
    let ul = row_times(x, u_l);
    let top = uf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut y = None;
    for a in 0..uf.len() {
        if uf[a] >= top - tol && y.is_none_or(|b: usize| ul[a] > ul[b]) {
            y = Some(a);
        }
    }
    (ul[y.unwrap()], row_times(x, costs))
}

/// Every point of the simplex in `R^n` whose coordinates are multiples of
/// `1/steps`.
pub fn simplex_grid(n: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(left: usize, slots: usize, steps: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if slots == 1 {
            cur.push(left);
            out.push(cur.iter().map(|&k| k as f64 / steps as f64).collect());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(left - k, slots - 1, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(steps, n, steps, &mut Vec::new(), &mut out);
    out
}
