//! Exact solver for the per-round packing LP
//!
//! ```text
//! max  Σ_x ξ(x) f(x)
//! s.t. Σ_x ξ(x) c(x)[i] ≤ ρ   for every resource i
//!      ξ ∈ Δ(actions)
//! ```
//!
//! Small instances (`n + m ≤ 12`) are solved by enumerating the vertices of
//! the feasible polytope; larger ones by a dense tableau simplex started from
//! the void vertex, which is always feasible.

use crate::error::{Error, Result};
use crate::types::{check_rho, Mixture, Request};

/// Feasibility tolerance for the budget rows.
pub const FEASIBILITY_TOL: f64 = 1e-8;
const PIVOT_TOL: f64 = 1e-11;

/// Largest `n + m` handled by vertex enumeration.
pub const VERTEX_ENUMERATION_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub mixture: Mixture,
}

/// Solves the LP for `req` at per-round budget `rho`.
pub fn solve_opt_lp(req: &Request, rho: f64) -> Result<LpSolution> {
    check_rho(rho)?;
    if req.num_actions() + req.num_resources() <= VERTEX_ENUMERATION_LIMIT {
        solve_by_vertices(req, rho)
    } else {
        solve_by_simplex(req, rho)
    }
}

fn finish(req: &Request, rho: f64, mut x: Vec<f64>) -> Result<LpSolution> {
    for v in &mut x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let total: f64 = x.iter().sum();
    for v in &mut x {
        *v /= total;
    }
    let mixture = Mixture::new(x)?;
    let value = req.expected_reward(&mixture)?;
    let spend = req.expected_cost(&mixture)?;
    if let Some(i) = spend.iter().position(|&s| s > rho + FEASIBILITY_TOL) {
        return Err(Error::Invariant(format!(
            "LP solution violates resource {i}: {} > {rho}",
            spend[i]
        )));
    }
    Ok(LpSolution { value, mixture })
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub(crate) fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < PIVOT_TOL {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for k in col..n {
                    a[row][k] -= factor * a[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Calls `visit` on every `k`-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_subset(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] < i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Vertex enumeration: every vertex makes `n - 1` inequalities tight in
/// addition to `Σξ = 1`.
pub fn solve_by_vertices(req: &Request, rho: f64) -> Result<LpSolution> {
    check_rho(rho)?;
    let n = req.num_actions();
    let m = req.num_resources();
    // Inequality rows 0..n are ξ_j ≥ 0, rows n..n+m are budget rows.
    let mut best: Option<(f64, Vec<f64>)> = None;
    for_each_subset(n + m, n - 1, |active| {
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        a.push(vec![1.0; n]);
        b.push(1.0);
        for &row in active {
            if row < n {
                let mut e = vec![0.0; n];
                e[row] = 1.0;
                a.push(e);
                b.push(0.0);
            } else {
                let i = row - n;
                a.push((0..n).map(|x| req.cost(x)[i]).collect());
                b.push(rho);
            }
        }
        let Some(x) = solve_linear(a, b) else {
            return;
        };
        if x.iter().any(|&v| v < -FEASIBILITY_TOL) {
            return;
        }
        let feasible = (0..m).all(|i| {
            let spend: f64 = (0..n).map(|j| x[j].max(0.0) * req.cost(j)[i]).sum();
            spend <= rho + FEASIBILITY_TOL
        });
        if !feasible {
            return;
        }
        let value: f64 = (0..n).map(|j| x[j].max(0.0) * req.reward(j)).sum();
        if best.as_ref().is_none_or(|(v, _)| value > *v + 1e-12) {
            best = Some((value, x));
        }
    });
    // The void vertex is always feasible, so `best` is populated.
    let (_, x) = best.ok_or_else(|| Error::Invariant("no feasible vertex found".into()))?;
    finish(req, rho, x)
}

/// Dense tableau simplex with Bland's rule, started from the void vertex.
pub fn solve_by_simplex(req: &Request, rho: f64) -> Result<LpSolution> {
    check_rho(rho)?;
    let n = req.num_actions();
    let m = req.num_resources();
    let cols = n + m; // action variables then slacks
    let rows = m + 1; // budget rows then the simplex row
    // tableau[r] = [coefficients..., rhs]
    let mut tableau = vec![vec![0.0; cols + 1]; rows];
    for i in 0..m {
        for j in 0..n {
            tableau[i][j] = req.cost(j)[i];
        }
        tableau[i][n + i] = 1.0;
        tableau[i][cols] = rho;
    }
    for j in 0..n {
        tableau[m][j] = 1.0;
    }
    tableau[m][cols] = 1.0;
    let mut basis: Vec<usize> = (0..m).map(|i| n + i).chain(std::iter::once(req.void_index())).collect();
    // Reduced costs for maximization: objective row stores -f_j for actions.
    // Void has zero reward, so the starting basis is already canonical.
    let mut objective = vec![0.0; cols + 1];
    for j in 0..n {
        objective[j] = -req.reward(j);
    }

    let max_iters = 50 * (rows + cols) * (rows + cols);
    for _ in 0..max_iters {
        let Some(entering) = (0..cols).find(|&j| objective[j] < -PIVOT_TOL) else {
            let mut x = vec![0.0; n];
            for (r, &var) in basis.iter().enumerate() {
                if var < n {
                    x[var] = tableau[r][cols];
                }
            }
            return finish(req, rho, x);
        };
        let mut leaving: Option<(usize, f64)> = None;
        for r in 0..rows {
            let coef = tableau[r][entering];
            if coef > PIVOT_TOL {
                let ratio = tableau[r][cols] / coef;
                let better = match leaving {
                    None => true,
                    Some((lr, best)) => {
                        ratio < best - 1e-14 || (ratio <= best + 1e-14 && basis[r] < basis[lr])
                    }
                };
                if better {
                    leaving = Some((r, ratio));
                }
            }
        }
        let (pivot_row, _) = leaving
            .ok_or_else(|| Error::Invariant("LP is unbounded, which the simplex row forbids".into()))?;
        let pivot = tableau[pivot_row][entering];
        for v in tableau[pivot_row].iter_mut() {
            *v /= pivot;
        }
        let pivot_vals = tableau[pivot_row].clone();
        for (r, row) in tableau.iter_mut().enumerate() {
            if r == pivot_row {
                continue;
            }
            let factor = row[entering];
            if factor != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_vals) {
                    *v -= factor * p;
                }
            }
        }
        let factor = objective[entering];
        for (v, p) in objective.iter_mut().zip(&pivot_vals) {
            *v -= factor * p;
        }
        basis[pivot_row] = entering;
    }
    Err(Error::Invariant("simplex did not terminate".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance(rewards: &[f64], costs: &[&[f64]]) -> Request {
        Request::new(rewards.to_vec(), costs.iter().map(|c| c.to_vec()).collect(), 0).unwrap()
    }

    fn i1() -> Request {
        instance(&[0.0, 0.8], &[&[0.0], &[0.5]])
    }

    fn i2() -> Request {
        instance(&[0.0, 1.0], &[&[0.0], &[1.0]])
    }

    #[test]
    fn subsets_are_enumerated_once() {
        let mut seen = Vec::new();
        for_each_subset(5, 2, |s| seen.push(s.to_vec()));
        assert_eq!(seen.len(), 10);
        assert_eq!(seen.first().unwrap(), &vec![0, 1]);
        assert_eq!(seen.last().unwrap(), &vec![3, 4]);
        let mut empty = 0;
        for_each_subset(3, 0, |s| {
            assert!(s.is_empty());
            empty += 1;
        });
        assert_eq!(empty, 1);
    }

    #[test]
    fn i1_picks_the_arm() {
        // The two vertices of the 2-action polytope are δ_void (value 0) and
        // δ_arm (value 0.8, cost 0.5 = ρ, feasible).
        let sol = solve_opt_lp(&i1(), 0.5).unwrap();
        assert!((sol.value - 0.8).abs() < 1e-12);
        assert!((sol.mixture.weights()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn i2_mixes_half_half() {
        let sol = solve_opt_lp(&i2(), 0.5).unwrap();
        assert!((sol.value - 0.5).abs() < 1e-12);
        assert!((sol.mixture.weights()[0] - 0.5).abs() < 1e-8);
        // Grid oracle over the mixing probability, step 1e-4.
        let mut best: f64 = 0.0;
        for k in 0..=10_000 {
            let p = k as f64 * 1e-4;
            if p * 1.0 <= 0.5 + 1e-12 {
                best = best.max(p);
            }
        }
        assert!((best - sol.value).abs() < 1e-3);
    }

    #[test]
    fn zero_rewards_give_zero() {
        let req = instance(&[0.0, 0.0, 0.0], &[&[0.0], &[0.3], &[0.9]]);
        assert_eq!(solve_opt_lp(&req, 0.2).unwrap().value, 0.0);
        assert_eq!(solve_by_simplex(&req, 0.2).unwrap().value, 0.0);
    }

    #[test]
    fn simplex_matches_vertices_on_known_instances() {
        for req in [i1(), i2()] {
            let a = solve_by_vertices(&req, 0.5).unwrap();
            let b = solve_by_simplex(&req, 0.5).unwrap();
            assert!((a.value - b.value).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_rho() {
        assert!(solve_opt_lp(&i1(), 0.0).is_err());
        assert!(solve_opt_lp(&i1(), 1.5).is_err());
    }
}
