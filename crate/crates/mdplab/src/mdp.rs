//! Tabular Markov decision problem model and the one-step dynamic-programming
//! primitives: policy evaluation, Bellman backup, greedy extraction.
//!
//! Costs are minimized throughout. An MDP is the four-tuple (states, actions,
//! transition probabilities, instantaneous costs) plus a discount rate in
//! (0, 1). States with no real choice are encoded by duplicating their single
//! transition/cost row across all action slots, which keeps the tensor
//! rectangular.

use thiserror::Error;

use crate::linalg::{self, SingularSystem};
use crate::scalar::Scalar;

/// Tabular MDP: `N` states, `M` actions, dense `N x M x N` transition tensor,
/// `N x M` cost table, discount rate strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp<T> {
    n_states: usize,
    n_actions: usize,
    /// Row-major `[state][action][successor]`.
    transitions: Vec<T>,
    /// Row-major `[state][action]`.
    costs: Vec<T>,
    discount: T,
    /// Bit count of the common denominator when all inputs are exact dyadic
    /// rationals; feeds the value-iteration upper bound, nothing else.
    rational_bits: Option<u32>,
}

/// State-to-action map, one action index per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicPolicy {
    actions: Vec<usize>,
}

/// State-to-distribution-over-actions map, `N x M` row-stochastic.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy<T> {
    probs: Vec<T>,
    n_actions: usize,
}

/// Per-state expected discounted total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueVector<T> {
    values: Vec<T>,
}

/// Per-(state, action) one-step lookahead values.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable<T> {
    values: Vec<T>,
    n_actions: usize,
}

/// One invariant violation found by [`Mdp::validate`] or
/// [`StochasticPolicy::validate`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("MDP has no states")]
    NoStates,
    #[error("MDP has no actions")]
    NoActions,
    #[error("discount {discount} outside the open interval (0, 1)")]
    DiscountOutOfRange { discount: f64 },
    #[error("cost at (state {state}, action {action}) is not finite")]
    NonFiniteCost { state: usize, action: usize },
    #[error("transition probability ({state}, {action}) -> {successor} is negative or not finite")]
    InvalidProbability {
        state: usize,
        action: usize,
        successor: usize,
    },
    #[error("transition row ({state}, {action}) sums to {sum} instead of 1")]
    RowSumMismatch {
        state: usize,
        action: usize,
        sum: f64,
    },
    #[error("policy row for state {state} sums to {sum} instead of 1")]
    PolicyRowSumMismatch { state: usize, sum: f64 },
    #[error("policy probability (state {state}, action {action}) is negative or not finite")]
    InvalidPolicyProbability { state: usize, action: usize },
}

/// Policy evaluation failed; cannot happen for a valid MDP with discount < 1.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvaluationError {
    #[error("internal error: policy-evaluation system is singular ({0})")]
    Singular(#[from] SingularSystem),
}

impl<T: Scalar> Mdp<T> {
    /// Builds an MDP from flat row-major tables. Panics if the table lengths
    /// do not match `n_states` and `n_actions`; use [`Mdp::validate`] for the
    /// semantic invariants.
    pub fn new(n_states: usize, n_actions: usize, transitions: Vec<T>, costs: Vec<T>, discount: T) -> Self {
        assert_eq!(
            transitions.len(),
            n_states * n_actions * n_states,
            "transition tensor must be N*M*N"
        );
        assert_eq!(costs.len(), n_states * n_actions, "cost table must be N*M");
        Mdp {
            n_states,
            n_actions,
            transitions,
            costs,
            discount,
            rational_bits: None,
        }
    }

    /// Builds an MDP from nested tables: `transitions[i][k][j]`, `costs[i][k]`.
    pub fn from_tables(transitions: Vec<Vec<Vec<T>>>, costs: Vec<Vec<T>>, discount: T) -> Self {
        let n_states = transitions.len();
        let n_actions = transitions.first().map_or(0, Vec::len);
        let mut flat_p = Vec::with_capacity(n_states * n_actions * n_states);
        for (i, per_action) in transitions.iter().enumerate() {
            assert_eq!(per_action.len(), n_actions, "state {i} has a ragged action list");
            for (k, row) in per_action.iter().enumerate() {
                assert_eq!(row.len(), n_states, "row ({i}, {k}) has wrong successor count");
                flat_p.extend_from_slice(row);
            }
        }
        let mut flat_c = Vec::with_capacity(n_states * n_actions);
        for (i, row) in costs.iter().enumerate() {
            assert_eq!(row.len(), n_actions, "cost row {i} has wrong action count");
            flat_c.extend_from_slice(row);
        }
        Mdp::new(n_states, n_actions, flat_p, flat_c, discount)
    }

    pub fn with_rational_bits(mut self, bits: u32) -> Self {
        self.rational_bits = Some(bits);
        self
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> T {
        self.discount
    }

    pub fn rational_bits(&self) -> Option<u32> {
        self.rational_bits
    }

    pub fn probability(&self, state: usize, action: usize, successor: usize) -> T {
        self.transitions[(state * self.n_actions + action) * self.n_states + successor]
    }

    /// Successor distribution for one (state, action) pair, length `N`.
    pub fn successor_row(&self, state: usize, action: usize) -> &[T] {
        let start = (state * self.n_actions + action) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    pub fn cost(&self, state: usize, action: usize) -> T {
        self.costs[state * self.n_actions + action]
    }

    /// Checks every model invariant and reports all violations found; an
    /// empty report means the MDP is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut report = Vec::new();
        if self.n_states == 0 {
            report.push(Violation::NoStates);
        }
        if self.n_actions == 0 {
            report.push(Violation::NoActions);
        }
        let g = self.discount;
        if !(g > T::zero() && g < T::one()) || !g.is_finite() {
            report.push(Violation::DiscountOutOfRange {
                discount: g.to_f64().unwrap_or(f64::NAN),
            });
        }
        for i in 0..self.n_states {
            for k in 0..self.n_actions {
                if !self.cost(i, k).is_finite() {
                    report.push(Violation::NonFiniteCost { state: i, action: k });
                }
                let mut sum = T::zero();
                let mut row_ok = true;
                for (j, &p) in self.successor_row(i, k).iter().enumerate() {
                    if !p.is_finite() || p < T::zero() {
                        report.push(Violation::InvalidProbability {
                            state: i,
                            action: k,
                            successor: j,
                        });
                        row_ok = false;
                    }
                    sum = sum + p;
                }
                if row_ok && (sum - T::one()).abs() > T::ROW_SUM_TOLERANCE {
                    report.push(Violation::RowSumMismatch {
                        state: i,
                        action: k,
                        sum: sum.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }
        report
    }

    /// Exact evaluation of a deterministic policy: solves the linear system
    /// `(I - gamma * P_pi) v = c_pi` by Gaussian elimination with partial
    /// pivoting. The result satisfies the evaluation equations at every state
    /// up to solver round-off.
    pub fn evaluate_policy(&self, policy: &DeterministicPolicy) -> Result<ValueVector<T>, EvaluationError> {
        let n = self.n_states;
        assert_eq!(policy.len(), n, "policy length must match state count");
        let mut matrix = vec![T::zero(); n * n];
        let mut rhs = vec![T::zero(); n];
        for i in 0..n {
            let a = policy.action(i);
            assert!(a < self.n_actions, "policy action out of range at state {i}");
            let row = self.successor_row(i, a);
            for j in 0..n {
                let p = self.discount * row[j];
                matrix[i * n + j] = if i == j { T::one() - p } else { -p };
            }
            rhs[i] = self.cost(i, a);
        }
        linalg::solve_in_place(&mut matrix, &mut rhs, n)?;
        Ok(ValueVector::new(rhs))
    }

    /// One application `v <- c_pi + gamma * P_pi * v` of the fixed-policy
    /// backup operator; the building block of modified policy iteration.
    pub fn policy_backup(&self, policy: &DeterministicPolicy, v: &ValueVector<T>) -> ValueVector<T> {
        let n = self.n_states;
        assert_eq!(policy.len(), n);
        assert_eq!(v.len(), n);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let a = policy.action(i);
            out.push(self.lookahead(i, a, v));
        }
        ValueVector::new(out)
    }

    /// One Bellman backup: `q[i][k] = c_i^k + gamma * sum_j p_ij^k v_j`, new
    /// value per state is the minimum of its q-row.
    pub fn bellman_backup(&self, v: &ValueVector<T>) -> (ValueVector<T>, QTable<T>) {
        assert_eq!(v.len(), self.n_states, "value vector length must match state count");
        let mut q = Vec::with_capacity(self.n_states * self.n_actions);
        let mut values = Vec::with_capacity(self.n_states);
        for i in 0..self.n_states {
            let mut best = T::infinity();
            for k in 0..self.n_actions {
                let qik = self.lookahead(i, k, v);
                if qik < best {
                    best = qik;
                }
                q.push(qik);
            }
            values.push(best);
        }
        (
            ValueVector::new(values),
            QTable {
                values: q,
                n_actions: self.n_actions,
            },
        )
    }

    /// Greedy policy of `v`: per state the smallest action index attaining
    /// the minimum one-step lookahead.
    pub fn greedy_policy(&self, v: &ValueVector<T>) -> DeterministicPolicy {
        let (_, q) = self.bellman_backup(v);
        q.greedy()
    }

    /// `C_max / (1 - gamma)`: every policy's value vector lies within this
    /// bound in every component.
    pub fn value_range_bound(&self) -> T {
        self.max_cost_magnitude() / (T::one() - self.discount)
    }

    /// Magnitude of the largest instantaneous cost.
    pub fn max_cost_magnitude(&self) -> T {
        self.costs
            .iter()
            .map(|c| c.abs())
            .fold(T::zero(), |acc, c| if c > acc { c } else { acc })
    }

    fn lookahead(&self, state: usize, action: usize, v: &ValueVector<T>) -> T {
        let mut acc = T::zero();
        for (j, &p) in self.successor_row(state, action).iter().enumerate() {
            acc = acc + p * v.get(j);
        }
        self.cost(state, action) + self.discount * acc
    }
}

impl DeterministicPolicy {
    pub fn new(actions: Vec<usize>) -> Self {
        DeterministicPolicy { actions }
    }

    /// The all-zeros policy.
    pub fn zeros(n_states: usize) -> Self {
        DeterministicPolicy {
            actions: vec![0; n_states],
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn action(&self, state: usize) -> usize {
        self.actions[state]
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn set_action(&mut self, state: usize, action: usize) {
        self.actions[state] = action;
    }

    /// Number of states at which the two policies disagree.
    pub fn diff_count(&self, other: &DeterministicPolicy) -> usize {
        assert_eq!(self.len(), other.len());
        self.actions
            .iter()
            .zip(other.actions.iter())
            .filter(|(a, b)| a != b)
            .count()
    }
}

impl<T: Scalar> StochasticPolicy<T> {
    /// `probs` is row-major `[state][action]`.
    pub fn new(probs: Vec<T>, n_actions: usize) -> Self {
        assert!(n_actions > 0 && probs.len() % n_actions == 0);
        StochasticPolicy { probs, n_actions }
    }

    pub fn n_states(&self) -> usize {
        self.probs.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn probability(&self, state: usize, action: usize) -> T {
        self.probs[state * self.n_actions + action]
    }

    pub fn row(&self, state: usize) -> &[T] {
        &self.probs[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut report = Vec::new();
        for i in 0..self.n_states() {
            let mut sum = T::zero();
            let mut row_ok = true;
            for (k, &p) in self.row(i).iter().enumerate() {
                if !p.is_finite() || p < T::zero() {
                    report.push(Violation::InvalidPolicyProbability { state: i, action: k });
                    row_ok = false;
                }
                sum = sum + p;
            }
            if row_ok && (sum - T::one()).abs() > T::ROW_SUM_TOLERANCE {
                report.push(Violation::PolicyRowSumMismatch {
                    state: i,
                    sum: sum.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        report
    }
}

impl<T: Scalar> ValueVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        ValueVector { values }
    }

    pub fn zeros(n: usize) -> Self {
        ValueVector {
            values: vec![T::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, state: usize) -> T {
        self.values[state]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .map(|v| v.abs())
            .fold(T::zero(), |acc, v| if v > acc { v } else { acc })
    }
}

impl<T: Scalar> QTable<T> {
    pub fn n_states(&self) -> usize {
        self.values.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, state: usize, action: usize) -> T {
        self.values[state * self.n_actions + action]
    }

    pub fn row(&self, state: usize) -> &[T] {
        &self.values[state * self.n_actions..(state + 1) * self.n_actions]
    }

    /// Smallest action index attaining the row minimum.
    pub fn min_action(&self, state: usize) -> usize {
        let row = self.row(state);
        let mut best = 0;
        for (k, &q) in row.iter().enumerate().skip(1) {
            if q < row[best] {
                best = k;
            }
        }
        best
    }

    /// Greedy policy with the smallest-index tie rule applied at every state.
    pub fn greedy(&self) -> DeterministicPolicy {
        DeterministicPolicy::new((0..self.n_states()).map(|i| self.min_action(i)).collect())
    }
}

/// Max-norm distance between two value vectors. Panics on length mismatch.
pub fn bellman_residual<T: Scalar>(v_new: &ValueVector<T>, v_old: &ValueVector<T>) -> T {
    assert_eq!(v_new.len(), v_old.len(), "value vectors must have equal length");
    v_new
        .as_slice()
        .iter()
        .zip(v_old.as_slice().iter())
        .map(|(&a, &b)| (a - b).abs())
        .fold(T::zero(), |acc, d| if d > acc { d } else { acc })
}
