//! Lagrangian evaluation, the inner supremum of the dual, input averaging
//! and LP-based baseline bounds.

use crate::error::{Error, Result};
use crate::lp::solve_opt_lp;
use crate::types::{check_rho, BaselineReport, DualVector, Mixture, Request};

/// `L(ξ, λ) = E_ξ[f] + ⟨λ, ρ1 − E_ξ[c]⟩`, with `ρ` taken from `lam`.
pub fn evaluate_lagrangian(xi: &Mixture, lam: &DualVector, req: &Request) -> Result<f64> {
    req.check_dual(lam)?;
    let reward = req.expected_reward(xi)?;
    let spend = req.expected_cost(xi)?;
    let rho = lam.rho();
    Ok(reward
        + lam
            .lambda()
            .iter()
            .zip(&spend)
            .map(|(l, c)| l * (rho - c))
            .sum::<f64>())
}

/// Pointwise Lagrangian of a single action.
pub fn action_lagrangian(action: usize, lam: &DualVector, req: &Request) -> f64 {
    let rho = lam.rho();
    req.reward(action)
        + lam
            .lambda()
            .iter()
            .zip(req.cost(action))
            .map(|(l, c)| l * (rho - c))
            .sum::<f64>()
}

/// `max_x f(x) + ⟨λ, ρ1 − c(x)⟩` and its lowest-index maximizer.
pub fn best_response_value(lam: &DualVector, req: &Request) -> Result<(f64, usize)> {
    req.check_dual(lam)?;
    let mut best = (f64::NEG_INFINITY, 0);
    for x in 0..req.num_actions() {
        let v = action_lagrangian(x, lam, req);
        if v > best.0 {
            best = (v, x);
        }
    }
    Ok(best)
}

/// Running mean of the first `tau` requests.
///
/// The running form `m ← m + (x − m)/k` returns a repeated input bit for bit.
pub fn average_inputs(seq: &[Request], tau: usize) -> Result<Request> {
    if tau == 0 || tau > seq.len() {
        return Err(Error::invalid(format!(
            "tau = {tau} must lie in [1, {}]",
            seq.len()
        )));
    }
    let first = &seq[0];
    let mut rewards = first.rewards().to_vec();
    let mut costs = first.costs_flat().to_vec();
    for (k, req) in seq.iter().enumerate().take(tau).skip(1) {
        if req.num_actions() != first.num_actions()
            || req.num_resources() != first.num_resources()
            || req.void_index() != first.void_index()
        {
            return Err(Error::invalid(format!("request {k} has different dimensions")));
        }
        let count = (k + 1) as f64;
        for (m, x) in rewards.iter_mut().zip(req.rewards()) {
            *m += (x - *m) / count;
        }
        for (m, x) in costs.iter_mut().zip(req.costs_flat()) {
            *m += (x - *m) / count;
        }
    }
    for v in rewards.iter_mut().chain(costs.iter_mut()) {
        *v = v.clamp(0.0, 1.0);
    }
    Request::from_flat(rewards, costs, first.num_resources(), first.void_index())
}

/// LP upper bounds on the fixed-mixture and dynamic baselines for a
/// length-`horizon` input sequence.
pub fn baselines(seq: &[Request], rho: f64, horizon: usize) -> Result<BaselineReport> {
    check_rho(rho)?;
    if seq.is_empty() {
        return Err(Error::invalid("baselines need a nonempty sequence"));
    }
    if seq.len() != horizon {
        return Err(Error::invalid(format!(
            "sequence has {} requests but the horizon is {horizon}",
            seq.len()
        )));
    }
    let averaged = average_inputs(seq, horizon)?;
    let sol = solve_opt_lp(&averaged, rho)?;
    let total = horizon as f64 * sol.value;
    Ok(BaselineReport {
        opt_lp_value: sol.value,
        opt_lp_mixture: sol.mixture,
        opt_dp_upper: total,
        opt_fd_upper: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i1() -> Request {
        Request::new(vec![0.0, 0.8], vec![vec![0.0], vec![0.5]], 0).unwrap()
    }

    fn i2() -> Request {
        Request::new(vec![0.0, 1.0], vec![vec![0.0], vec![1.0]], 0).unwrap()
    }

    #[test]
    fn lagrangian_at_void() {
        let void = Mixture::dirac(2, 0).unwrap();
        let lam = DualVector::new(vec![0.5], 0.5).unwrap();
        assert_eq!(evaluate_lagrangian(&void, &lam, &i1()).unwrap(), 0.25);
        let zero = DualVector::zeros(1, 0.5).unwrap();
        assert_eq!(evaluate_lagrangian(&void, &zero, &i1()).unwrap(), 0.0);
    }

    #[test]
    fn lagrangian_i1_arm() {
        let arm = Mixture::dirac(2, 1).unwrap();
        let lam = DualVector::new(vec![1.0], 0.5).unwrap();
        assert!((evaluate_lagrangian(&arm, &lam, &i1()).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn lagrangian_dimension_mismatch() {
        let lam = DualVector::zeros(2, 0.5).unwrap();
        let xi = Mixture::uniform(2).unwrap();
        assert!(matches!(
            evaluate_lagrangian(&xi, &lam, &i1()),
            Err(Error::InvalidArgument(_))
        ));
        let xi3 = Mixture::uniform(3).unwrap();
        let lam1 = DualVector::zeros(1, 0.5).unwrap();
        assert!(evaluate_lagrangian(&xi3, &lam1, &i1()).is_err());
    }

    #[test]
    fn best_response_examples() {
        let zero = DualVector::zeros(1, 0.5).unwrap();
        assert_eq!(best_response_value(&zero, &i1()).unwrap(), (0.8, 1));
        let lam = DualVector::new(vec![2.0], 0.5).unwrap();
        let (v, x) = best_response_value(&lam, &i2()).unwrap();
        assert_eq!(x, 0);
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn best_response_ties_go_to_lowest_index() {
        let req = Request::new(vec![0.0, 0.5, 0.5], vec![vec![0.0], vec![0.2], vec![0.2]], 0).unwrap();
        let zero = DualVector::zeros(1, 0.5).unwrap();
        assert_eq!(best_response_value(&zero, &req).unwrap().1, 1);
    }

    #[test]
    fn minimax_on_i2_grid() {
        // min over λ ∈ [0, 2] (step 1e-3) of the best-response value.
        let req = i2();
        let mut min = f64::INFINITY;
        for k in 0..=2000 {
            let lam = DualVector::new(vec![k as f64 * 1e-3], 0.5).unwrap();
            min = min.min(best_response_value(&lam, &req).unwrap().0);
        }
        assert!((min - 0.5).abs() < 1e-9);
    }

    #[test]
    fn averaging_examples() {
        let r = i1();
        assert_eq!(average_inputs(&[r.clone(), r.clone()], 2).unwrap(), r);
        assert_eq!(average_inputs(&[r.clone(), i2()], 1).unwrap(), r);
        let a = Request::new(vec![0.0, 0.0, 1.0], vec![vec![0.0]; 3], 0).unwrap();
        let b = Request::new(vec![0.0, 1.0, 0.0], vec![vec![0.0]; 3], 0).unwrap();
        let avg = average_inputs(&[a, b], 2).unwrap();
        assert_eq!(avg.rewards(), &[0.0, 0.5, 0.5]);
        assert!(average_inputs(&[i1()], 0).is_err());
        assert!(average_inputs(&[i1()], 2).is_err());
    }

    #[test]
    fn averaging_repeated_input_is_bit_identical() {
        let r = Request::new(vec![0.0, 0.1, 0.7], vec![vec![0.0, 0.0], vec![0.3, 0.1], vec![0.9, 0.6]], 0)
            .unwrap();
        let seq = vec![r.clone(); 37];
        assert_eq!(average_inputs(&seq, 37).unwrap(), r);
    }

    #[test]
    fn baseline_examples() {
        let seq = vec![i2(); 100];
        let rep = baselines(&seq, 0.5, 100).unwrap();
        assert!((rep.opt_fd_upper - 50.0).abs() < 1e-9);
        assert_eq!(rep.opt_dp_upper, rep.opt_fd_upper);

        let one = baselines(&[i1()], 0.5, 1).unwrap();
        assert!((one.opt_dp_upper - 0.8).abs() < 1e-12);

        let zero = Request::new(vec![0.0, 0.0], vec![vec![0.0], vec![0.4]], 0).unwrap();
        let rep = baselines(&[zero.clone(), zero], 0.5, 2).unwrap();
        assert_eq!((rep.opt_lp_value, rep.opt_dp_upper, rep.opt_fd_upper), (0.0, 0.0, 0.0));

        assert!(baselines(&[], 0.5, 0).is_err());
        assert!(baselines(&[i1()], 0.5, 2).is_err());
    }
}
