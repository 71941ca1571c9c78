//! mdplab: a tabular Markov-decision-problem solver laboratory.
//!
//! The crate bundles the classic exact solution methods for discounted
//! finite MDPs (value iteration, policy iteration in parallel and
//! single-switch form, modified policy iteration, and both
//! linear-programming formulations solved by a built-in two-phase simplex)
//! together with brute-force oracles and generators for the worst-case
//! families whose iteration counts the experiment harness reproduces.
//!
//! Costs are minimized. All numerical kernels are generic over the scalar
//! type through [`scalar::Scalar`]; the `*64` aliases below fix `f64`, which
//! is what the generators, file formats and CLI use.

pub mod experiment;
pub mod families;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod mdp;
pub mod oracle;
pub mod scalar;
pub mod solve;

pub use mdp::{bellman_residual, DeterministicPolicy, EvaluationError, Violation};
pub use oracle::DEFAULT_ENUMERATION_LIMIT;
pub use scalar::Scalar;
pub use solve::{
    iteration_upper_bound, modified_policy_iteration, policy_iteration, simple_policy_iteration,
    stopping_threshold, value_iteration, Algorithm, StoppingRule, StoppingRuleError,
};

/// Double-precision aliases for the generic core types.
pub type Mdp64 = mdp::Mdp<f64>;
pub type ValueVector64 = mdp::ValueVector<f64>;
pub type QTable64 = mdp::QTable<f64>;
pub type StochasticPolicy64 = mdp::StochasticPolicy<f64>;
pub type SolveReport64 = solve::SolveReport<f64>;
pub type StoppingRule64 = solve::StoppingRule<f64>;
pub type LpProgram64 = lp::LpProgram<f64>;
pub type LpSolution64 = lp::LpSolution<f64>;

/// Single-precision aliases; same algorithms at `f32` tolerances.
pub type Mdp32 = mdp::Mdp<f32>;
pub type ValueVector32 = mdp::ValueVector<f32>;

#[cfg(test)]
pub(crate) mod test_support {
    use crate::mdp::Mdp;

    /// Two states, two actions, discount 1/2. State 0: action 0 self-loops
    /// at cost 1.5, action 1 moves to state 1 for free; state 1 self-loops
    /// at cost 2 under both actions. Optimal values (2, 4), policy [1, 0].
    pub(crate) fn toy2() -> Mdp<f64> {
        Mdp::from_tables(
            vec![
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            ],
            vec![vec![1.5, 0.0], vec![2.0, 2.0]],
            0.5,
        )
    }

    /// All-zero costs, uniform transitions; the optimal values are zero and
    /// every action ties at every state.
    pub(crate) fn zero_cost(n: usize, m: usize, gamma: f64) -> Mdp<f64> {
        let p = 1.0 / n as f64;
        Mdp::new(
            n,
            m,
            vec![p; n * m * n],
            vec![0.0; n * m],
            gamma,
        )
    }
}
