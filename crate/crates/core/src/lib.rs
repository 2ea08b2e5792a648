//! Primal-dual online learning with knapsack constraints over finite-support
//! strategy mixtures.

pub mod env;
pub mod error;
pub mod fpa;
pub mod gap;
pub mod harness;
pub mod lagrangian;
pub mod lp;
pub mod meta;
pub mod regret;
pub mod stackelberg;
pub mod types;

pub use error::{Error, Result};
pub use gap::{semi_infinite_gap_demo, GapReport};
pub use lagrangian::{action_lagrangian, average_inputs, baselines, best_response_value, evaluate_lagrangian};
pub use lp::{solve_opt_lp, LpSolution};
pub use types::{ActionSet, BaselineReport, BudgetState, DualVector, Mixture, Request};
pub use env::{mean_deviation, Distribution, InputEnv};
