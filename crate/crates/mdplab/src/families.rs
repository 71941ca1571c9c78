//! Benchmark instance generators: the two worst-case families (the
//! exponential simple-policy-iteration ladder and the three-state
//! discount-sensitivity instance) plus seeded random MDPs for cross-checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mdp::{DeterministicPolicy, Mdp, ValueVector};
use crate::scalar::Scalar;

/// Discount used for the ladder family when the caller does not pick one.
/// The exponential switching law is discount-independent.
pub const MC90_DEFAULT_GAMMA: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FamilyError {
    #[error("ladder family needs an even state count, got {0}")]
    OddStateCount(usize),
    #[error("ladder family needs at least 6 states, got {0}")]
    TooFewStates(usize),
}

/// Ladder instance on which simple policy iteration steps through
/// `2^(N/2-2)` policies (counting the initial one) before reaching the
/// optimum, regardless of the discount rate.
///
/// Layout for `N` states: decision states `0 .. N/2-1`, random states
/// `1' .. (N/2-1)'` at indices `N/2 .. N-2`, absorbing state last. Decision
/// state 0 is a lead-in with a single effective action (both slots take the
/// chain edge); the exponential walk runs over decision states `1 .. N/2-2`.
/// All costs are zero except the exit from the last decision state, which
/// costs +1 on both actions.
#[derive(Debug, Clone)]
pub struct Mc90Instance<T> {
    pub mdp: Mdp<T>,
    /// All-zeros start: every decision state follows the chain edge.
    pub initial_policy: DeterministicPolicy,
    /// Action 0 everywhere except decision state `N/2 - 2`, which jumps to
    /// the free random escape.
    pub optimal_policy: DeterministicPolicy,
    /// `2^(N/2-2)`: policies stepped through, counting the initial policy;
    /// single-state switches come to one fewer.
    pub predicted_policy_steps: u64,
    pub state_labels: Vec<String>,
}

/// Builds the ladder instance for an even `n_states >= 6`.
pub fn mc90_family<T: Scalar>(n_states: usize, gamma: T) -> Result<Mc90Instance<T>, FamilyError> {
    if n_states % 2 != 0 {
        return Err(FamilyError::OddStateCount(n_states));
    }
    if n_states < 6 {
        return Err(FamilyError::TooFewStates(n_states));
    }
    assert!(
        gamma > T::zero() && gamma < T::one(),
        "discount must lie in (0, 1)"
    );

    let n = n_states;
    let k = n / 2; // decision states 0..k-1
    let absorbing = n - 1;
    let random = |i: usize| k + (i - 1); // random state i' for i in 1..k-1

    let half = T::real(0.5);
    let mut transitions = vec![T::zero(); n * 2 * n];
    let mut costs = vec![T::zero(); n * 2];
    let mut set = |state: usize, action: usize, successor: usize, p: T| {
        transitions[(state * 2 + action) * n + successor] = p;
    };

    for i in 0..k {
        if i == k - 1 {
            // costly exit: both actions leave for the absorbing state at +1
            set(i, 0, absorbing, T::one());
            set(i, 1, absorbing, T::one());
            costs[i * 2] = T::one();
            costs[i * 2 + 1] = T::one();
        } else if i == 0 {
            // lead-in decision state: no real choice, both slots follow the chain
            set(i, 0, i + 1, T::one());
            set(i, 1, i + 1, T::one());
        } else {
            // action 0 follows the decision chain, action 1 jumps to the ladder
            set(i, 0, i + 1, T::one());
            set(i, 1, random(i + 1), T::one());
        }
    }
    for i in 1..k {
        let s = random(i);
        for a in 0..2 {
            if i == k - 1 {
                set(s, a, absorbing, T::one());
            } else {
                set(s, a, random(i + 1), half);
                set(s, a, i + 1, half);
            }
        }
    }
    set(absorbing, 0, absorbing, T::one());
    set(absorbing, 1, absorbing, T::one());

    let mdp = Mdp::new(n, 2, transitions, costs, gamma);
    let initial_policy = DeterministicPolicy::zeros(n);
    let mut optimal_policy = DeterministicPolicy::zeros(n);
    optimal_policy.set_action(k - 2, 1);

    let mut state_labels = Vec::with_capacity(n);
    for i in 0..k {
        state_labels.push(format!("decision {i}"));
    }
    for i in 1..k {
        state_labels.push(format!("random {i}'"));
    }
    state_labels.push("absorbing".to_string());

    Ok(Mc90Instance {
        mdp,
        initial_policy,
        optimal_policy,
        predicted_policy_steps: 1u64 << (k - 2),
        state_labels,
    })
}

/// Three-state instance whose value-iteration solve time grows like
/// `1/(1-gamma) * log(1/(1-gamma))`.
///
/// State 0 chooses between action 0 (free move into the cost-1 self-loop
/// state) and action 1 (instantaneous cost `gamma^2/(1-gamma)` into the
/// zero-cost absorbing state). Action 1 is optimal, but from the zero
/// total-cost function value iteration prefers action 0 until the
/// accumulated self-loop estimate crosses over.
#[derive(Debug, Clone)]
pub struct ViLowerBoundInstance<T> {
    pub mdp: Mdp<T>,
    /// `0.5 * ln(1/(1-gamma)) / (1-gamma)`, the guaranteed lower bound on
    /// the crossing sweep for `gamma >= 0.5`.
    pub predicted_lower_bound: T,
    /// Smallest `n` with `gamma^n < 1 - gamma`: the sweep at which the
    /// greedy action at state 0 first switches.
    pub exact_crossing: u64,
}

/// Builds the three-state discount-sensitivity instance.
pub fn vi_lower_bound_family<T: Scalar>(gamma: T) -> ViLowerBoundInstance<T> {
    assert!(
        gamma > T::zero() && gamma < T::one(),
        "discount must lie in (0, 1)"
    );
    let zero = T::zero();
    let one = T::one();
    let jump_cost = gamma * gamma / (one - gamma);
    let mdp = Mdp::from_tables(
        vec![
            vec![vec![zero, one, zero], vec![zero, zero, one]],
            vec![vec![zero, one, zero], vec![zero, one, zero]],
            vec![vec![zero, zero, one], vec![zero, zero, one]],
        ],
        vec![vec![zero, jump_cost], vec![one, one], vec![zero, zero]],
        gamma,
    );
    let half = T::real(0.5);
    ViLowerBoundInstance {
        mdp,
        predicted_lower_bound: half * (one / (one - gamma)).ln() / (one - gamma),
        exact_crossing: vi_crossing_iteration(gamma),
    }
}

/// Smallest `n >= 1` with `gamma^n < 1 - gamma`, evaluated by iterated
/// multiplication to mirror the solver's arithmetic.
pub fn vi_crossing_iteration<T: Scalar>(gamma: T) -> u64 {
    assert!(
        gamma > T::zero() && gamma < T::one(),
        "discount must lie in (0, 1)"
    );
    let threshold = T::one() - gamma;
    let mut power = gamma;
    let mut n = 1;
    while !(power < threshold) {
        power = power * gamma;
        n += 1;
    }
    n
}

/// Runs backup sweeps from the zero vector and returns the first sweep count
/// `n` at which the greedy action at state 0 is action 1, or `None` within
/// `cap` sweeps.
pub fn observed_vi_crossing<T: Scalar>(mdp: &Mdp<T>, cap: u64) -> Option<u64> {
    let mut v = ValueVector::zeros(mdp.n_states());
    for n in 0..=cap {
        let (next, q) = mdp.bellman_backup(&v);
        if q.min_action(0) == 1 {
            return Some(n);
        }
        v = next;
    }
    None
}

/// Seeded random MDP: every transition row is an independently normalized
/// vector of uniform draws, costs are uniform in [0, 1).
///
/// The generator is pinned for reproducibility: a ChaCha8 stream seeded with
/// `seed_from_u64(seed)`, consumed as `f64` draws row by row (state-major,
/// then action), transitions before costs. Equal arguments give bit-identical
/// instances.
pub fn random_mdp(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> Mdp<f64> {
    assert!(n_states > 0 && n_actions > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        let mut row: Vec<f64> = (0..n_states).map(|_| rng.gen::<f64>()).collect();
        let sum: f64 = row.iter().sum();
        debug_assert!(sum > 0.0);
        for p in &mut row {
            *p /= sum;
        }
        transitions.extend_from_slice(&row);
    }
    let costs = (0..n_states * n_actions).map(|_| rng.gen::<f64>()).collect();
    Mdp::new(n_states, n_actions, transitions, costs, gamma)
}

/// Seeded random MDP whose probabilities and costs are exact multiples of
/// `2^-bits`, with the bit count recorded on the instance. Rows are rounded
/// by largest remainder so each still sums to exactly 1.
pub fn random_rational_mdp(n_states: usize, n_actions: usize, gamma: f64, bits: u32, seed: u64) -> Mdp<f64> {
    assert!(n_states > 0 && n_actions > 0);
    assert!(bits >= 1 && bits <= 30, "bit count must lie in 1..=30");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let denominator = 1u64 << bits;
    let scale = denominator as f64;

    let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        let raw: Vec<f64> = (0..n_states).map(|_| rng.gen::<f64>()).collect();
        let sum: f64 = raw.iter().sum();
        let mut units: Vec<u64> = raw.iter().map(|x| (x / sum * scale).floor() as u64).collect();
        let mut remainders: Vec<(usize, f64)> = raw
            .iter()
            .enumerate()
            .map(|(j, x)| (j, x / sum * scale - (x / sum * scale).floor()))
            .collect();
        remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let assigned: u64 = units.iter().sum();
        for &(j, _) in remainders.iter().take((denominator - assigned) as usize) {
            units[j] += 1;
        }
        transitions.extend(units.iter().map(|&u| u as f64 / scale));
    }
    let costs = (0..n_states * n_actions)
        .map(|_| rng.gen_range(0..=denominator) as f64 / scale)
        .collect();
    Mdp::new(n_states, n_actions, transitions, costs, gamma).with_rational_bits(bits)
}
