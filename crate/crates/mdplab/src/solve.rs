//! The iterative solvers: value iteration, policy iteration, simple policy
//! iteration (one switch per step), and modified policy iteration with
//! truncated evaluation sweeps.
//!
//! Iteration accounting follows each algorithm's natural unit: value
//! iteration counts backup sweeps, policy iteration counts improvement
//! phases (including the final pass that finds nothing to change), simple
//! policy iteration counts single-state switches.

use thiserror::Error;

use crate::mdp::{bellman_residual, DeterministicPolicy, Mdp, QTable, ValueVector};
use crate::scalar::Scalar;

/// Backup-sweep cap applied when a stopping rule sets no explicit iteration
/// limit; guards against unreachable residual thresholds.
pub const DEFAULT_SWEEP_CAP: usize = 1_000_000;

/// Pass cap for the policy-improvement solvers.
const POLICY_PASS_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    ValueIteration,
    PolicyIteration,
    SimplePolicyIteration,
    ModifiedPolicyIteration,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Algorithm::ValueIteration => "value-iteration",
            Algorithm::PolicyIteration => "policy-iteration",
            Algorithm::SimplePolicyIteration => "simple-policy-iteration",
            Algorithm::ModifiedPolicyIteration => "modified-policy-iteration",
        };
        f.write_str(name)
    }
}

/// When to stop value iteration: an iteration budget, a Bellman-residual
/// threshold, a target suboptimality (converted through
/// [`stopping_threshold`]), or any combination. At least one criterion is
/// always set; thresholds must be positive.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingRule<T> {
    max_iterations: Option<usize>,
    residual_threshold: Option<T>,
    epsilon_target: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoppingRuleError {
    #[error("threshold must be positive and finite, got {0}")]
    NonPositiveThreshold(f64),
}

impl<T: Scalar> StoppingRule<T> {
    /// Stop after exactly `n` backup sweeps (0 is allowed and makes the
    /// solver a no-op).
    pub fn max_iterations(n: usize) -> Self {
        StoppingRule {
            max_iterations: Some(n),
            residual_threshold: None,
            epsilon_target: None,
        }
    }

    /// Stop once the Bellman residual drops below `threshold`.
    pub fn residual_threshold(threshold: T) -> Result<Self, StoppingRuleError> {
        check_positive(threshold)?;
        Ok(StoppingRule {
            max_iterations: None,
            residual_threshold: Some(threshold),
            epsilon_target: None,
        })
    }

    /// Stop once the greedy policy is guaranteed `epsilon`-optimal, via the
    /// residual threshold `epsilon * (1 - gamma) / (2 gamma)`.
    pub fn epsilon_target(epsilon: T) -> Result<Self, StoppingRuleError> {
        check_positive(epsilon)?;
        Ok(StoppingRule {
            max_iterations: None,
            residual_threshold: None,
            epsilon_target: Some(epsilon),
        })
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = Some(n);
        self
    }

    pub fn with_residual_threshold(mut self, threshold: T) -> Result<Self, StoppingRuleError> {
        check_positive(threshold)?;
        self.residual_threshold = Some(threshold);
        Ok(self)
    }

    pub fn with_epsilon_target(mut self, epsilon: T) -> Result<Self, StoppingRuleError> {
        check_positive(epsilon)?;
        self.epsilon_target = Some(epsilon);
        Ok(self)
    }

    /// The residual threshold actually applied at discount `gamma`: the
    /// stricter of the explicit threshold and the converted epsilon target.
    pub fn effective_threshold(&self, gamma: T) -> Option<T> {
        let from_eps = self.epsilon_target.map(|e| stopping_threshold(e, gamma));
        match (self.residual_threshold, from_eps) {
            (Some(a), Some(b)) => Some(if a < b { a } else { b }),
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        }
    }

    pub fn iteration_cap(&self) -> usize {
        self.max_iterations.unwrap_or(DEFAULT_SWEEP_CAP)
    }
}

fn check_positive<T: Scalar>(x: T) -> Result<(), StoppingRuleError> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(StoppingRuleError::NonPositiveThreshold(x.to_f64().unwrap_or(f64::NAN)))
    }
}

/// Residual threshold `epsilon * (1 - gamma) / (2 gamma)` under which the
/// greedy policy of the final iterate is epsilon-optimal.
pub fn stopping_threshold<T: Scalar>(epsilon: T, gamma: T) -> T {
    assert!(epsilon > T::zero(), "epsilon must be positive");
    assert!(
        gamma > T::zero() && gamma < T::one(),
        "discount must lie in (0, 1)"
    );
    epsilon * (T::one() - gamma) / ((T::one() + T::one()) * gamma)
}

/// Worst-case sweep count for value iteration to reach an epsilon-optimal
/// policy on an instance whose costs and probabilities fit in `bits` bits:
/// `ceil((B + log2(1/eps) + log2(1/(1-gamma)) + 1) / (1 - gamma))`.
pub fn iteration_upper_bound<T: Scalar>(bits: u32, epsilon: T, gamma: T) -> u64 {
    assert!(bits > 0, "bit count must be positive");
    assert!(epsilon > T::zero(), "epsilon must be positive");
    assert!(
        gamma > T::zero() && gamma < T::one(),
        "discount must lie in (0, 1)"
    );
    let one = T::one();
    let numerator = T::real(f64::from(bits)) + (one / epsilon).log2() + (one / (one - gamma)).log2() + one;
    (numerator / (one - gamma))
        .ceil()
        .to_u64()
        .expect("iteration bound overflows u64")
}

/// Outcome of one solver run: the policy and values reached, iteration
/// counts, per-iteration residual and policy-change traces, and for the
/// policy-improvement solvers the full policy trajectory.
#[derive(Debug, Clone)]
pub struct SolveReport<T> {
    pub algorithm: Algorithm,
    pub policy: DeterministicPolicy,
    pub values: ValueVector<T>,
    pub iterations: usize,
    pub residual_history: Vec<T>,
    pub policy_change_history: Vec<usize>,
    /// Policy evaluated at each pass (policy-improvement solvers only; the
    /// first entry is the initial policy, the last the returned one).
    pub policy_history: Vec<DeterministicPolicy>,
    pub converged: bool,
}

/// Successive-approximation solve: repeat `v <- backup(v)` until the Bellman
/// residual falls under the stopping rule's threshold or the iteration
/// budget runs out. The returned policy is greedy for the final iterate.
pub fn value_iteration<T: Scalar>(mdp: &Mdp<T>, init: &ValueVector<T>, stop: &StoppingRule<T>) -> SolveReport<T> {
    let threshold = stop.effective_threshold(mdp.discount());
    let cap = stop.iteration_cap();

    let mut v = init.clone();
    let mut residuals = Vec::new();
    let mut policy_change_history = Vec::new();
    // the backup of sweep t hands out greedy(v_{t-1}); change entry t
    // compares the greedy policies of iterates t and t-1
    let mut prev_greedy: Option<DeterministicPolicy> = None;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cap {
        let (next, q) = mdp.bellman_backup(&v);
        let residual = bellman_residual(&next, &v);
        residuals.push(residual);
        let greedy = q.greedy();
        if let Some(prev) = &prev_greedy {
            policy_change_history.push(greedy.diff_count(prev));
        }
        prev_greedy = Some(greedy);
        v = next;
        iterations += 1;
        if let Some(t) = threshold {
            if residual < t {
                converged = true;
                break;
            }
        }
    }

    let (_, q) = mdp.bellman_backup(&v);
    let policy = q.greedy();
    if let Some(prev) = &prev_greedy {
        policy_change_history.push(policy.diff_count(prev));
    }

    SolveReport {
        algorithm: Algorithm::ValueIteration,
        policy,
        values: v,
        iterations,
        residual_history: residuals,
        policy_change_history,
        policy_history: Vec::new(),
        converged,
    }
}

/// Switches `policy[state]` to the smallest-index minimizing action if some
/// action strictly beats the current value there. Returns true on a switch.
fn improve_state<T: Scalar>(
    q: &QTable<T>,
    v: &ValueVector<T>,
    policy: &mut DeterministicPolicy,
    state: usize,
) -> bool {
    let best = q.min_action(state);
    if q.get(state, best) < v.get(state) - T::IMPROVEMENT_TOLERANCE {
        policy.set_action(state, best);
        true
    } else {
        false
    }
}

/// Howard policy iteration: exact value determination alternating with
/// parallel improvement at every state where some action is strictly better
/// than the current value. Terminates when an improvement pass changes
/// nothing; `iterations` counts improvement passes including that final one.
pub fn policy_iteration<T: Scalar>(mdp: &Mdp<T>, init: &DeterministicPolicy) -> SolveReport<T> {
    let mut policy = init.clone();
    let mut residuals = Vec::new();
    let mut changes_history = Vec::new();
    let mut policy_history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let values = mdp
            .evaluate_policy(&policy)
            .expect("policy evaluation cannot fail on a valid MDP");
        let (tv, q) = mdp.bellman_backup(&values);
        residuals.push(bellman_residual(&tv, &values));
        policy_history.push(policy.clone());

        let mut next = policy.clone();
        let mut changes = 0;
        for i in 0..mdp.n_states() {
            if improve_state(&q, &values, &mut next, i) {
                changes += 1;
            }
        }
        changes_history.push(changes);
        iterations += 1;

        if changes == 0 {
            converged = true;
            return SolveReport {
                algorithm: Algorithm::PolicyIteration,
                policy,
                values,
                iterations,
                residual_history: residuals,
                policy_change_history: changes_history,
                policy_history,
                converged,
            };
        }
        if iterations >= POLICY_PASS_CAP {
            return SolveReport {
                algorithm: Algorithm::PolicyIteration,
                policy: next,
                values,
                iterations,
                residual_history: residuals,
                policy_change_history: changes_history,
                policy_history,
                converged,
            };
        }
        policy = next;
    }
}

/// Sequential-improvement policy iteration: evaluate exactly, then switch
/// only the improvable state with the smallest index, to its smallest-index
/// strictly-improving action. `iterations` counts single-state switches, so
/// the number of policies stepped through (counting the initial policy) is
/// `iterations + 1`.
pub fn simple_policy_iteration<T: Scalar>(mdp: &Mdp<T>, init: &DeterministicPolicy) -> SolveReport<T> {
    let mut policy = init.clone();
    let mut residuals = Vec::new();
    let mut changes_history = Vec::new();
    let mut policy_history = Vec::new();
    let mut switches = 0;

    loop {
        let values = mdp
            .evaluate_policy(&policy)
            .expect("policy evaluation cannot fail on a valid MDP");
        let (tv, q) = mdp.bellman_backup(&values);
        residuals.push(bellman_residual(&tv, &values));
        policy_history.push(policy.clone());

        let mut switched = None;
        'states: for i in 0..mdp.n_states() {
            for k in 0..mdp.n_actions() {
                if q.get(i, k) < values.get(i) - T::IMPROVEMENT_TOLERANCE {
                    switched = Some((i, k));
                    break 'states;
                }
            }
        }

        match switched {
            None => {
                changes_history.push(0);
                return SolveReport {
                    algorithm: Algorithm::SimplePolicyIteration,
                    policy,
                    values,
                    iterations: switches,
                    residual_history: residuals,
                    policy_change_history: changes_history,
                    policy_history,
                    converged: true,
                };
            }
            Some((state, action)) => {
                policy.set_action(state, action);
                changes_history.push(1);
                switches += 1;
                assert!(switches < POLICY_PASS_CAP, "simple policy iteration failed to terminate");
            }
        }
    }
}

/// Modified policy iteration: the policy-iteration skeleton with exact value
/// determination replaced by `sweeps` fixed-policy backups carried over from
/// the previous value estimate. Termination requires a stable policy and an
/// optimality-equation residual under the scalar's MPI threshold, since
/// approximate values alone cannot certify a fixed point.
pub fn modified_policy_iteration<T: Scalar>(
    mdp: &Mdp<T>,
    init: &DeterministicPolicy,
    sweeps: usize,
) -> SolveReport<T> {
    assert!(sweeps >= 1, "sweep count must be at least 1");
    let mut policy = init.clone();
    let mut v = ValueVector::zeros(mdp.n_states());
    let mut residuals = Vec::new();
    let mut changes_history = Vec::new();
    let mut policy_history = Vec::new();
    let mut iterations = 0;

    loop {
        for _ in 0..sweeps {
            v = mdp.policy_backup(&policy, &v);
        }
        let (tv, q) = mdp.bellman_backup(&v);
        let residual = bellman_residual(&tv, &v);
        residuals.push(residual);
        policy_history.push(policy.clone());

        let mut next = policy.clone();
        let mut changes = 0;
        for i in 0..mdp.n_states() {
            if improve_state(&q, &v, &mut next, i) {
                changes += 1;
            }
        }
        changes_history.push(changes);
        iterations += 1;

        if changes == 0 && residual < T::MPI_RESIDUAL_TOLERANCE {
            return SolveReport {
                algorithm: Algorithm::ModifiedPolicyIteration,
                policy,
                values: v,
                iterations,
                residual_history: residuals,
                policy_change_history: changes_history,
                policy_history,
                converged: true,
            };
        }
        if iterations >= POLICY_PASS_CAP {
            return SolveReport {
                algorithm: Algorithm::ModifiedPolicyIteration,
                policy: next,
                values: v,
                iterations,
                residual_history: residuals,
                policy_change_history: changes_history,
                policy_history,
                converged: false,
            };
        }
        policy = next;
    }
}
