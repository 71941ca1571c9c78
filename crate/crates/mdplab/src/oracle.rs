//! Brute-force ground truth for small instances: exhaustive enumeration of
//! all M^N deterministic stationary policies, optimality-equation
//! verification, and epsilon-optimality testing.

use thiserror::Error;

use crate::mdp::{bellman_residual, DeterministicPolicy, Mdp, ValueVector};
use crate::scalar::Scalar;

/// Default cap on the number of policies an oracle call may enumerate.
pub const DEFAULT_ENUMERATION_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("policy space has {policies} members, above the enumeration limit {limit}")]
    LimitExceeded { policies: u128, limit: u64 },
    #[error("internal error: no single policy attains the pointwise-minimal values")]
    DominanceViolated,
}

/// Exhaustive-search result: the pointwise-minimal value vector over all
/// deterministic stationary policies and the first policy (in lexicographic
/// action order) attaining it.
#[derive(Debug, Clone)]
pub struct OracleResult<T> {
    pub optimal_values: ValueVector<T>,
    pub optimal_policy: DeterministicPolicy,
    pub policies_examined: u64,
}

fn policy_count(mdp_states: usize, mdp_actions: usize) -> u128 {
    (mdp_actions as u128).pow(mdp_states as u32)
}

/// Decodes policy index `idx` with state 0 as the most significant digit, so
/// ascending indices enumerate policies in lexicographic order.
fn decode_policy(idx: u64, n_states: usize, n_actions: usize) -> DeterministicPolicy {
    let mut actions = vec![0usize; n_states];
    let mut rest = idx;
    for state in (0..n_states).rev() {
        actions[state] = (rest % n_actions as u64) as usize;
        rest /= n_actions as u64;
    }
    DeterministicPolicy::new(actions)
}

/// Evaluates every deterministic stationary policy and returns the pointwise
/// minimum together with a dominating witness policy. Errors if M^N exceeds
/// `limit`.
pub fn brute_force_optimal<T: Scalar>(mdp: &Mdp<T>, limit: u64) -> Result<OracleResult<T>, OracleError> {
    let count = policy_count(mdp.n_states(), mdp.n_actions());
    if count > u128::from(limit) {
        return Err(OracleError::LimitExceeded { policies: count, limit });
    }
    let count = count as u64;

    let mut minimum = vec![T::infinity(); mdp.n_states()];
    for idx in 0..count {
        let policy = decode_policy(idx, mdp.n_states(), mdp.n_actions());
        let v = mdp
            .evaluate_policy(&policy)
            .expect("policy evaluation cannot fail on a valid MDP");
        for (m, &x) in minimum.iter_mut().zip(v.as_slice()) {
            if x < *m {
                *m = x;
            }
        }
    }
    let optimal_values = ValueVector::new(minimum);

    // second pass: the first policy matching the minimum everywhere is the
    // dominating witness guaranteed by the theory
    for idx in 0..count {
        let policy = decode_policy(idx, mdp.n_states(), mdp.n_actions());
        let v = mdp
            .evaluate_policy(&policy)
            .expect("policy evaluation cannot fail on a valid MDP");
        if bellman_residual(&v, &optimal_values) <= T::VALUE_TOLERANCE {
            return Ok(OracleResult {
                optimal_values,
                optimal_policy: policy,
                policies_examined: count,
            });
        }
    }
    Err(OracleError::DominanceViolated)
}

/// True iff `v` satisfies the optimality equations within `tol` in max norm.
pub fn verify_optimality_equations<T: Scalar>(mdp: &Mdp<T>, v: &ValueVector<T>, tol: T) -> bool {
    let (tv, _) = mdp.bellman_backup(v);
    bellman_residual(&tv, v) <= tol
}

/// True iff the policy's exact values are within `epsilon` of the brute-force
/// optimum at every state.
pub fn is_epsilon_optimal<T: Scalar>(
    mdp: &Mdp<T>,
    policy: &DeterministicPolicy,
    epsilon: T,
    limit: u64,
) -> Result<bool, OracleError> {
    let oracle = brute_force_optimal(mdp, limit)?;
    let v = mdp
        .evaluate_policy(policy)
        .expect("policy evaluation cannot fail on a valid MDP");
    let gap = v
        .as_slice()
        .iter()
        .zip(oracle.optimal_values.as_slice())
        .map(|(&a, &b)| a - b)
        .fold(T::neg_infinity(), |acc, d| if d > acc { d } else { acc });
    Ok(gap <= epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::toy2;

    #[test]
    fn toy_oracle() {
        let result = brute_force_optimal(&toy2(), DEFAULT_ENUMERATION_LIMIT).unwrap();
        assert_eq!(result.policies_examined, 4);
        assert_eq!(result.optimal_policy.actions(), &[1, 0]);
        assert!((result.optimal_values.get(0) - 2.0).abs() < 1e-12);
        assert!((result.optimal_values.get(1) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn single_action_mdp_reduces_to_evaluation() {
        let mdp = Mdp::from_tables(
            vec![vec![vec![0.5, 0.5]], vec![vec![0.0, 1.0]]],
            vec![vec![1.0], vec![3.0]],
            0.9,
        );
        let result = brute_force_optimal(&mdp, 10).unwrap();
        assert_eq!(result.policies_examined, 1);
        let direct = mdp.evaluate_policy(&DeterministicPolicy::zeros(2)).unwrap();
        assert_eq!(result.optimal_values, direct);
    }

    #[test]
    fn limit_is_enforced() {
        let mdp = crate::families::random_mdp(8, 4, 0.9, 0);
        let err = brute_force_optimal(&mdp, 1000).unwrap_err();
        assert_eq!(
            err,
            OracleError::LimitExceeded {
                policies: 4u128.pow(8),
                limit: 1000
            }
        );
    }

    #[test]
    fn dominance_holds_on_every_enumerated_policy() {
        let mdp = crate::families::random_mdp(4, 3, 0.9, 9);
        let result = brute_force_optimal(&mdp, 1 << 20).unwrap();
        for idx in 0..result.policies_examined {
            let policy = decode_policy(idx, 4, 3);
            let v = mdp.evaluate_policy(&policy).unwrap();
            for i in 0..4 {
                assert!(result.optimal_values.get(i) <= v.get(i) + 1e-9);
            }
        }
    }

    #[test]
    fn optimality_equation_checks() {
        let mdp = toy2();
        assert!(verify_optimality_equations(&mdp, &ValueVector::new(vec![2.0, 4.0]), 1e-9));
        assert!(!verify_optimality_equations(&mdp, &ValueVector::zeros(2), 1e-9));
        let zc = crate::test_support::zero_cost(3, 2, 0.9);
        assert!(verify_optimality_equations(&zc, &ValueVector::zeros(3), 1e-12));
    }

    #[test]
    fn oracle_values_solve_the_optimality_equations() {
        let mdp = crate::families::random_mdp(5, 3, 0.9, 17);
        let result = brute_force_optimal(&mdp, 1 << 20).unwrap();
        assert!(verify_optimality_equations(&mdp, &result.optimal_values, 1e-8));
        let greedy = mdp.greedy_policy(&result.optimal_values);
        assert!(is_epsilon_optimal(&mdp, &greedy, 1e-8, 1 << 20).unwrap());
    }

    #[test]
    fn epsilon_optimality_thresholds() {
        let mdp = toy2();
        let optimal = DeterministicPolicy::new(vec![1, 0]);
        let initial = DeterministicPolicy::new(vec![0, 0]);
        assert!(is_epsilon_optimal(&mdp, &optimal, 1e-12, 100).unwrap());
        // the all-zeros policy is off by exactly (1, 0)
        assert!(!is_epsilon_optimal(&mdp, &initial, 0.9, 100).unwrap());
        assert!(is_epsilon_optimal(&mdp, &initial, 1.1, 100).unwrap());
    }
}
