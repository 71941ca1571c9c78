//! Linear-programming route to the optimal total-cost function: the primal
//! program over per-state values, the dual program over occupancy flows, a
//! built-in dense two-phase simplex, policy extraction from dual solutions,
//! and text-format export for cross-checking against external solvers.

mod simplex;
mod text;

pub use simplex::{solve_lp, solve_lp_with, PivotRule};
pub use text::{export_lp, parse_lp, LpParseError};

use thiserror::Error;

use crate::mdp::{DeterministicPolicy, EvaluationError, Mdp, StochasticPolicy, ValueVector};
use crate::scalar::Scalar;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    LessEq,
    Equal,
    GreaterEq,
}

impl std::fmt::Display for Relation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Relation::LessEq => "<=",
            Relation::Equal => "=",
            Relation::GreaterEq => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub name: String,
    pub coefficients: Vec<T>,
    pub relation: Relation,
    pub rhs: T,
}

/// Per-variable bounds; `None` means unbounded on that side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariableBounds<T> {
    pub lower: Option<T>,
    pub upper: Option<T>,
}

impl<T: Scalar> VariableBounds<T> {
    pub fn free() -> Self {
        VariableBounds { lower: None, upper: None }
    }

    pub fn nonnegative() -> Self {
        VariableBounds {
            lower: Some(T::zero()),
            upper: None,
        }
    }
}

/// Dense linear program with named variables and constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProgram<T> {
    pub sense: Sense,
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
    pub bounds: Vec<VariableBounds<T>>,
    pub variable_names: Vec<String>,
}

impl<T: Scalar> LpProgram<T> {
    pub fn n_variables(&self) -> usize {
        self.objective.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Largest constraint or bound violation of `values`; zero means feasible.
    pub fn max_violation(&self, values: &[T]) -> T {
        assert_eq!(values.len(), self.n_variables());
        let mut worst = T::zero();
        let mut bump = |v: T| {
            if v > worst {
                worst = v;
            }
        };
        for c in &self.constraints {
            let lhs: T = c
                .coefficients
                .iter()
                .zip(values)
                .map(|(&a, &x)| a * x)
                .fold(T::zero(), |acc, t| acc + t);
            match c.relation {
                Relation::LessEq => bump(lhs - c.rhs),
                Relation::GreaterEq => bump(c.rhs - lhs),
                Relation::Equal => bump((lhs - c.rhs).abs()),
            }
        }
        for (b, &x) in self.bounds.iter().zip(values) {
            if let Some(lo) = b.lower {
                bump(lo - x);
            }
            if let Some(up) = b.upper {
                bump(x - up);
            }
        }
        worst
    }

    /// Objective value of `values` under the program's own coefficients.
    pub fn objective_value(&self, values: &[T]) -> T {
        self.objective
            .iter()
            .zip(values)
            .map(|(&c, &x)| c * x)
            .fold(T::zero(), |acc, t| acc + t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver outcome; `values` and `objective_value` are present exactly when
/// the status is optimal.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub values: Option<Vec<T>>,
    pub objective_value: Option<T>,
    /// Pivot steps the tableau performed across both phases.
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("numerical breakdown in the simplex solver: {0}")]
    NumericalBreakdown(String),
    #[error("dual flows at state {state} sum to {sum:e}, not a usable distribution")]
    DegenerateFlows { state: usize, sum: f64 },
    #[error("dual flow at (state {state}, action {action}) is negative beyond tolerance")]
    NegativeFlow { state: usize, action: usize },
}

/// Primal program: maximize the summed per-state values subject to
/// `v_i <= c_i^k + gamma * sum_j p_ij^k v_j` for every state-action pair,
/// rearranged so each row reads `(e_i - gamma p_i^k) . v <= c_i^k`.
/// `N` free variables, `N*M` inequality rows.
pub fn build_primal<T: Scalar>(mdp: &Mdp<T>) -> LpProgram<T> {
    let n = mdp.n_states();
    let m = mdp.n_actions();
    let gamma = mdp.discount();
    let mut constraints = Vec::with_capacity(n * m);
    for i in 0..n {
        for k in 0..m {
            let row = mdp.successor_row(i, k);
            let coefficients = (0..n)
                .map(|j| {
                    let scaled = gamma * row[j];
                    if i == j {
                        T::one() - scaled
                    } else {
                        normalize_zero(-scaled)
                    }
                })
                .collect();
            constraints.push(Constraint {
                name: format!("c_{i}_{k}"),
                coefficients,
                relation: Relation::LessEq,
                rhs: mdp.cost(i, k),
            });
        }
    }
    LpProgram {
        sense: Sense::Maximize,
        objective: vec![T::one(); n],
        constraints,
        bounds: vec![VariableBounds::free(); n],
        variable_names: (0..n).map(|j| format!("v_{j}")).collect(),
    }
}

/// Dual program: minimize the total cost of the occupancy flows subject to
/// flow conservation `sum_k x_j^k = 1 + gamma * sum_ik p_ij^k x_i^k` at
/// every state. `N*M` nonnegative variables, `N` equality rows.
pub fn build_dual<T: Scalar>(mdp: &Mdp<T>) -> LpProgram<T> {
    let n = mdp.n_states();
    let m = mdp.n_actions();
    let gamma = mdp.discount();
    let mut constraints = Vec::with_capacity(n);
    for j in 0..n {
        let mut coefficients = vec![T::zero(); n * m];
        for i in 0..n {
            for k in 0..m {
                let inflow = gamma * mdp.probability(i, k, j);
                let own = if i == j { T::one() } else { T::zero() };
                coefficients[i * m + k] = normalize_zero(own - inflow);
            }
        }
        constraints.push(Constraint {
            name: format!("flow_{j}"),
            coefficients,
            relation: Relation::Equal,
            rhs: T::one(),
        });
    }
    let mut objective = Vec::with_capacity(n * m);
    let mut names = Vec::with_capacity(n * m);
    for i in 0..n {
        for k in 0..m {
            objective.push(mdp.cost(i, k));
            names.push(format!("x_{i}_{k}"));
        }
    }
    LpProgram {
        sense: Sense::Minimize,
        objective,
        constraints,
        bounds: vec![VariableBounds::nonnegative(); n * m],
        variable_names: names,
    }
}

fn normalize_zero<T: Scalar>(x: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        x
    }
}

/// Normalizes per-state flows into a stochastic policy:
/// `probability(i, k) = x_i^k / sum_k x_i^k`. Flows slightly negative within
/// tolerance are clamped to zero; a state whose flows vanish is an error.
pub fn dual_to_stochastic_policy<T: Scalar>(mdp: &Mdp<T>, flows: &[T]) -> Result<StochasticPolicy<T>, LpError> {
    let n = mdp.n_states();
    let m = mdp.n_actions();
    assert_eq!(flows.len(), n * m, "flow vector must have N*M entries");
    let negative_tol = T::real(1e-9);
    let vanish_tol = T::real(1e-12);
    let mut probs = Vec::with_capacity(n * m);
    for i in 0..n {
        let row = &flows[i * m..(i + 1) * m];
        let mut sum = T::zero();
        for (k, &x) in row.iter().enumerate() {
            if x < -negative_tol {
                return Err(LpError::NegativeFlow { state: i, action: k });
            }
            sum = sum + x.max(T::zero());
        }
        if sum <= vanish_tol {
            return Err(LpError::DegenerateFlows {
                state: i,
                sum: sum.to_f64().unwrap_or(0.0),
            });
        }
        for &x in row {
            probs.push(x.max(T::zero()) / sum);
        }
    }
    Ok(StochasticPolicy::new(probs, m))
}

/// Deterministic conversion of dual flows: per state the smallest action
/// index carrying the maximum flow.
pub fn stochastic_to_deterministic<T: Scalar>(flows: &[T], n_states: usize, n_actions: usize) -> DeterministicPolicy {
    assert_eq!(flows.len(), n_states * n_actions);
    let mut actions = Vec::with_capacity(n_states);
    for i in 0..n_states {
        let row = &flows[i * n_actions..(i + 1) * n_actions];
        let mut best = 0;
        for (k, &x) in row.iter().enumerate().skip(1) {
            if x > row[best] {
                best = k;
            }
        }
        actions.push(best);
    }
    DeterministicPolicy::new(actions)
}

/// Solves the `N` primal constraints indexed by `(i, policy(i))` as
/// equalities: the feasible basis corresponding to the policy. The system is
/// exactly the policy-evaluation system, so the result equals
/// [`Mdp::evaluate_policy`].
pub fn policy_basis_solution<T: Scalar>(
    mdp: &Mdp<T>,
    policy: &DeterministicPolicy,
) -> Result<ValueVector<T>, EvaluationError> {
    let primal = build_primal(mdp);
    let n = mdp.n_states();
    let m = mdp.n_actions();
    let mut matrix = Vec::with_capacity(n * n);
    let mut rhs = Vec::with_capacity(n);
    for i in 0..n {
        let row = &primal.constraints[i * m + policy.action(i)];
        matrix.extend_from_slice(&row.coefficients);
        rhs.push(row.rhs);
    }
    linalg::solve_in_place(&mut matrix, &mut rhs, n)?;
    Ok(ValueVector::new(rhs))
}

/// Exact evaluation of a stochastic policy: solves the aggregated-chain
/// system `(I - gamma * P_sigma) v = c_sigma`. Used to check the dual
/// objective's interpretation as the flow-weighted total cost.
pub fn evaluate_stochastic_policy<T: Scalar>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
) -> Result<ValueVector<T>, EvaluationError> {
    let n = mdp.n_states();
    let m = mdp.n_actions();
    assert_eq!(policy.n_states(), n);
    assert_eq!(policy.n_actions(), m);
    let gamma = mdp.discount();
    let mut matrix = vec![T::zero(); n * n];
    let mut rhs = vec![T::zero(); n];
    for i in 0..n {
        let weights = policy.row(i);
        for k in 0..m {
            let w = weights[k];
            if w == T::zero() {
                continue;
            }
            rhs[i] = rhs[i] + w * mdp.cost(i, k);
            let row = mdp.successor_row(i, k);
            for j in 0..n {
                matrix[i * n + j] = matrix[i * n + j] - gamma * w * row[j];
            }
        }
        matrix[i * n + i] = matrix[i * n + i] + T::one();
    }
    linalg::solve_in_place(&mut matrix, &mut rhs, n)?;
    Ok(ValueVector::new(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{toy2, zero_cost};

    #[test]
    fn primal_shape_and_rows() {
        let lp = build_primal(&toy2());
        assert_eq!(lp.n_variables(), 2);
        assert_eq!(lp.n_constraints(), 4);
        assert_eq!(lp.sense, Sense::Maximize);
        // row (i=0, k=0): 0.5 v0 + 0 v1 <= 1.5
        let row = &lp.constraints[0];
        assert_eq!(row.coefficients, vec![0.5, 0.0]);
        assert_eq!(row.relation, Relation::LessEq);
        assert_eq!(row.rhs, 1.5);
        assert!(lp.bounds.iter().all(|b| *b == VariableBounds::free()));
    }

    #[test]
    fn primal_size_matches_dimensions() {
        let mdp = crate::families::random_mdp(3, 2, 0.9, 4);
        let lp = build_primal(&mdp);
        assert_eq!(lp.n_variables(), 3);
        assert_eq!(lp.n_constraints(), 6);
    }

    #[test]
    fn primal_zero_costs_have_zero_rhs() {
        let lp = build_primal(&zero_cost(3, 2, 0.9));
        assert!(lp.constraints.iter().all(|c| c.rhs == 0.0));
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.objective_value.unwrap().abs() < 1e-9);
    }

    #[test]
    fn dual_shape_and_conservation_row() {
        let lp = build_dual(&toy2());
        assert_eq!(lp.n_variables(), 4);
        assert_eq!(lp.n_constraints(), 2);
        assert_eq!(lp.sense, Sense::Minimize);
        // at j = 1: x_1^0 + x_1^1 - 0.5 (x_0^1 + x_1^0 + x_1^1) = 1
        let row = &lp.constraints[1];
        assert_eq!(row.coefficients, vec![0.0, -0.5, 0.5, 0.5]);
        assert_eq!(row.relation, Relation::Equal);
        assert_eq!(row.rhs, 1.0);
        assert!(lp.bounds.iter().all(|b| *b == VariableBounds::nonnegative()));
    }

    #[test]
    fn dual_zero_costs_solve_to_zero_objective() {
        let lp = build_dual(&zero_cost(2, 2, 0.5));
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.objective_value.unwrap().abs() < 1e-9);
    }

    #[test]
    fn primal_solution_is_the_optimal_value_function() {
        let lp = build_primal(&toy2());
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let values = sol.values.unwrap();
        assert!((values[0] - 2.0).abs() < 1e-7);
        assert!((values[1] - 4.0).abs() < 1e-7);
        assert!((sol.objective_value.unwrap() - 6.0).abs() < 1e-7);
    }

    #[test]
    fn strong_duality_on_toy() {
        let primal = solve_lp(&build_primal(&toy2())).unwrap();
        let dual = solve_lp(&build_dual(&toy2())).unwrap();
        let p = primal.objective_value.unwrap();
        let d = dual.objective_value.unwrap();
        assert!((p - d).abs() <= 1e-6 * (1.0 + p.abs()));
    }

    #[test]
    fn dual_extraction_examples() {
        let mdp = toy2();
        let sigma = dual_to_stochastic_policy(&mdp, &[0.0, 1.0, 0.5, 0.5]).unwrap();
        assert_eq!(sigma.row(0), &[0.0, 1.0]);
        assert_eq!(sigma.row(1), &[0.5, 0.5]);
        assert!(dual_to_stochastic_policy(&mdp, &[0.0, 0.0, 1.0, 0.0]).is_err());

        let dual = solve_lp(&build_dual(&mdp)).unwrap();
        let flows = dual.values.unwrap();
        let sigma = dual_to_stochastic_policy(&mdp, &flows).unwrap();
        assert!((sigma.probability(0, 1) - 1.0).abs() < 1e-7);
        let det = stochastic_to_deterministic(&flows, 2, 2);
        assert_eq!(det.actions(), &[1, 0]);
    }

    #[test]
    fn deterministic_conversion_tie_breaks_low() {
        let det = stochastic_to_deterministic(&[0.5, 0.5, 0.2, 0.8], 2, 2);
        assert_eq!(det.actions(), &[0, 1]);
    }

    #[test]
    fn basis_solution_equals_policy_evaluation() {
        let mdp = toy2();
        for actions in [vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]] {
            let policy = DeterministicPolicy::new(actions);
            let basis = policy_basis_solution(&mdp, &policy).unwrap();
            let eval = mdp.evaluate_policy(&policy).unwrap();
            assert!(crate::mdp::bellman_residual(&basis, &eval) < 1e-9);
        }
        let zc = zero_cost(3, 2, 0.9);
        let basis = policy_basis_solution(&zc, &DeterministicPolicy::zeros(3)).unwrap();
        assert!(basis.as_slice().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn dual_objective_is_the_flow_weighted_total_cost() {
        // for any feasible flows: objective == sum of the extracted
        // stochastic policy's values under the unit inflow per state
        let mdp = crate::families::random_mdp(4, 2, 0.9, 31);
        let dual = build_dual(&mdp);

        // construct a feasible point from an arbitrary stochastic policy
        let sigma = StochasticPolicy::new(vec![0.3, 0.7, 1.0, 0.0, 0.5, 0.5, 0.25, 0.75], 2);
        let occupancy = {
            // y = (I - gamma P_sigma^T)^{-1} 1, flows x_ik = y_i sigma_ik
            let n = 4;
            let mut matrix = vec![0.0; n * n];
            let mut rhs = vec![1.0; n];
            for i in 0..n {
                for k in 0..2 {
                    let w = sigma.probability(i, k);
                    let row = mdp.successor_row(i, k);
                    for j in 0..n {
                        // transposed: inflow to j from i
                        matrix[j * n + i] -= 0.9 * w * row[j];
                    }
                }
            }
            for i in 0..n {
                matrix[i * n + i] += 1.0;
            }
            crate::linalg::solve_in_place(&mut matrix, &mut rhs, n).unwrap();
            let mut flows = vec![0.0; n * 2];
            for i in 0..n {
                for k in 0..2 {
                    flows[i * 2 + k] = rhs[i] * sigma.probability(i, k);
                }
            }
            flows
        };
        assert!(dual.max_violation(&occupancy) < 1e-9, "constructed point must be feasible");

        let objective = dual.objective_value(&occupancy);
        let values = evaluate_stochastic_policy(&mdp, &sigma).unwrap();
        let total: f64 = values.as_slice().iter().sum();
        assert!((objective - total).abs() < 1e-8);

        // and the same identity at the simplex's optimal point
        let sol = solve_lp(&dual).unwrap();
        let flows = sol.values.unwrap();
        let sigma_opt = dual_to_stochastic_policy(&mdp, &flows).unwrap();
        let v_opt = evaluate_stochastic_policy(&mdp, &sigma_opt).unwrap();
        let total_opt: f64 = v_opt.as_slice().iter().sum();
        assert!((sol.objective_value.unwrap() - total_opt).abs() < 1e-7);
    }

    #[test]
    fn lp_routes_handle_the_benchmark_families() {
        // heavy degeneracy: zero costs everywhere except one exit, duplicate
        // action rows, ties at the optimum
        let ladder = crate::families::mc90_family(10, 0.95f64).unwrap();
        let truth = crate::oracle::brute_force_optimal(&ladder.mdp, 1 << 20).unwrap();
        let primal = solve_lp(&build_primal(&ladder.mdp)).unwrap();
        let values = primal.values.unwrap();
        for i in 0..10 {
            assert!((values[i] - truth.optimal_values.get(i)).abs() < 1e-6, "state {i}");
        }
        let dual = solve_lp(&build_dual(&ladder.mdp)).unwrap();
        let gap = (primal.objective_value.unwrap() - dual.objective_value.unwrap()).abs();
        assert!(gap <= 1e-6 * (1.0 + primal.objective_value.unwrap().abs()));
        let det = stochastic_to_deterministic(&dual.values.unwrap(), 10, 2);
        assert!(crate::oracle::is_epsilon_optimal(&ladder.mdp, &det, 1e-6, 1 << 20).unwrap());

        // large cost scale: the jump action costs gamma^2/(1-gamma) ~ 98
        let steep = crate::families::vi_lower_bound_family(0.99f64);
        let primal = solve_lp(&build_primal(&steep.mdp)).unwrap();
        let truth = crate::oracle::brute_force_optimal(&steep.mdp, 100).unwrap();
        let values = primal.values.unwrap();
        for i in 0..3 {
            assert!((values[i] - truth.optimal_values.get(i)).abs() < 1e-6);
        }
    }

    #[test]
    fn lp_routes_agree_on_larger_instances() {
        // larger than the oracle-checked sizes; exact policy iteration is
        // the reference here
        for seed in [0u64, 1, 2] {
            let mdp = crate::families::random_mdp(9, 4, 0.9, seed);
            let reference = crate::solve::policy_iteration(&mdp, &DeterministicPolicy::zeros(9));
            let primal = solve_lp(&build_primal(&mdp)).unwrap();
            let dual = solve_lp(&build_dual(&mdp)).unwrap();
            let p = primal.objective_value.unwrap();
            let d = dual.objective_value.unwrap();
            assert!((p - d).abs() <= 1e-6 * (1.0 + p.abs()), "seed {seed}");
            let values = primal.values.unwrap();
            for i in 0..9 {
                assert!((values[i] - reference.values.get(i)).abs() < 1e-6);
            }
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(40))]

            /// The primal optimum recovers the brute-force optimal values and
            /// strong duality binds the two objectives together.
            #[test]
            fn lp_routes_agree_with_oracle(seed in 0u64..200) {
                let n = 2 + (seed as usize % 4);
                let m = 1 + (seed as usize % 3);
                let mdp = crate::families::random_mdp(n, m, 0.9, seed);
                let oracle = crate::oracle::brute_force_optimal(&mdp, 1 << 20).unwrap();

                let primal = solve_lp(&build_primal(&mdp)).unwrap();
                prop_assert_eq!(primal.status, LpStatus::Optimal);
                let values = primal.values.unwrap();
                for i in 0..n {
                    prop_assert!((values[i] - oracle.optimal_values.get(i)).abs() < 1e-6);
                }

                let dual = solve_lp(&build_dual(&mdp)).unwrap();
                prop_assert_eq!(dual.status, LpStatus::Optimal);
                let p = primal.objective_value.unwrap();
                let d = dual.objective_value.unwrap();
                prop_assert!((p - d).abs() <= 1e-6 * (1.0 + p.abs()));

                let det = stochastic_to_deterministic(&dual.values.unwrap(), n, m);
                prop_assert!(crate::oracle::is_epsilon_optimal(&mdp, &det, 1e-6, 1 << 20).unwrap());
            }

            /// The Denardo basis correspondence: every deterministic policy's
            /// basis solution equals its exact evaluation.
            #[test]
            fn basis_correspondence(seed in 0u64..100) {
                let mdp = crate::families::random_mdp(4, 3, 0.9, seed);
                for p in 0..20u64 {
                    let policy = DeterministicPolicy::new(
                        (0..4).map(|i| ((seed + p) as usize * 5 + i * 3) % 3).collect(),
                    );
                    let basis = policy_basis_solution(&mdp, &policy).unwrap();
                    let eval = mdp.evaluate_policy(&policy).unwrap();
                    prop_assert!(crate::mdp::bellman_residual(&basis, &eval) < 1e-9);
                }
            }
        }
    }
}
