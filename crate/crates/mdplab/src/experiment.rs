//! Scripted experiments that reproduce the iteration-count laws as CSV
//! tables: exponential single-switch scaling on the ladder family, the
//! discount-driven crossing delay of value iteration, multi-algorithm
//! cross-checks against the brute-force oracle, and stopping-rule soundness.
//!
//! Every experiment is fully determined by its spec (grids and seeds), so
//! identical specs produce byte-identical CSV output. Floats are printed
//! with 17 significant digits, which round-trips `f64` exactly.

use thiserror::Error;

use crate::families;
use crate::lp;
use crate::mdp::{bellman_residual, DeterministicPolicy, ValueVector};
use crate::oracle;
use crate::solve::{
    modified_policy_iteration, policy_iteration, simple_policy_iteration, stopping_threshold,
    value_iteration, StoppingRule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Mc90Scaling,
    ViGammaScaling,
    CrossCheck,
    StoppingRule,
}

impl std::str::FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mc90-scaling" => Ok(ExperimentKind::Mc90Scaling),
            "vi-gamma-scaling" => Ok(ExperimentKind::ViGammaScaling),
            "cross-check" => Ok(ExperimentKind::CrossCheck),
            "stopping-rule" => Ok(ExperimentKind::StoppingRule),
            other => Err(format!(
                "unknown experiment kind `{other}` (expected mc90-scaling, vi-gamma-scaling, cross-check or stopping-rule)"
            )),
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExperimentKind::Mc90Scaling => "mc90-scaling",
            ExperimentKind::ViGammaScaling => "vi-gamma-scaling",
            ExperimentKind::CrossCheck => "cross-check",
            ExperimentKind::StoppingRule => "stopping-rule",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub n_values: Vec<usize>,
    pub gamma_values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub epsilons: Vec<f64>,
    pub max_states: usize,
    pub max_actions: usize,
    pub mpi_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid experiment grid: {0}")]
    InvalidGrid(String),
}

impl ExperimentSpec {
    /// Ladder scaling over even sizes; defaults match the headline runs.
    pub fn mc90_scaling(n_values: Vec<usize>, gamma_values: Vec<f64>) -> Self {
        ExperimentSpec {
            kind: ExperimentKind::Mc90Scaling,
            n_values,
            gamma_values,
            seeds: Vec::new(),
            epsilons: vec![1e-6],
            max_states: 0,
            max_actions: 0,
            mpi_sweeps: 5,
        }
    }

    pub fn vi_gamma_scaling(gamma_values: Vec<f64>) -> Self {
        ExperimentSpec {
            kind: ExperimentKind::ViGammaScaling,
            n_values: Vec::new(),
            gamma_values,
            seeds: Vec::new(),
            epsilons: Vec::new(),
            max_states: 0,
            max_actions: 0,
            mpi_sweeps: 5,
        }
    }

    pub fn cross_check(seeds: Vec<u64>, max_states: usize, max_actions: usize, gamma: f64) -> Self {
        ExperimentSpec {
            kind: ExperimentKind::CrossCheck,
            n_values: Vec::new(),
            gamma_values: vec![gamma],
            seeds,
            epsilons: vec![1e-6],
            max_states,
            max_actions,
            mpi_sweeps: 5,
        }
    }

    pub fn stopping_rule(epsilons: Vec<f64>, seeds: Vec<u64>, gamma: f64) -> Self {
        ExperimentSpec {
            kind: ExperimentKind::StoppingRule,
            n_values: Vec::new(),
            gamma_values: vec![gamma],
            seeds,
            epsilons,
            max_states: 6,
            max_actions: 3,
            mpi_sweeps: 5,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::InvalidGrid(msg));
        for &g in &self.gamma_values {
            if !(g > 0.0 && g < 1.0) {
                return bad(format!("discount {g} outside (0, 1)"));
            }
        }
        for &e in &self.epsilons {
            if !(e > 0.0) {
                return bad(format!("epsilon {e} must be positive"));
            }
        }
        match self.kind {
            ExperimentKind::Mc90Scaling => {
                if self.n_values.is_empty() || self.gamma_values.is_empty() {
                    return bad("mc90-scaling needs state counts and discounts".into());
                }
                for &n in &self.n_values {
                    if n % 2 != 0 || n < 6 {
                        return bad(format!("ladder size {n} must be even and at least 6"));
                    }
                }
            }
            ExperimentKind::ViGammaScaling => {
                if self.gamma_values.is_empty() {
                    return bad("vi-gamma-scaling needs discounts".into());
                }
            }
            ExperimentKind::CrossCheck => {
                if self.seeds.is_empty() {
                    return bad("cross-check needs seeds".into());
                }
                if self.max_states < 2 || self.max_actions < 1 {
                    return bad("cross-check needs max_states >= 2 and max_actions >= 1".into());
                }
                if self.gamma_values.len() != 1 || self.epsilons.len() != 1 {
                    return bad("cross-check takes exactly one discount and one epsilon".into());
                }
            }
            ExperimentKind::StoppingRule => {
                if self.seeds.is_empty() || self.epsilons.is_empty() {
                    return bad("stopping-rule needs seeds and epsilons".into());
                }
                if self.gamma_values.len() != 1 {
                    return bad("stopping-rule takes exactly one discount".into());
                }
            }
        }
        Ok(())
    }
}

/// Column-named result rows plus a human summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: String,
}

impl ExperimentTable {
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut widths: Vec<usize> = self.columns.iter().map(String::len).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let render = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = render(&self.columns);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&render(row));
            out.push('\n');
        }
        out
    }
}

/// 17-significant-digit decimal, the exact round-trip form for `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Deterministic instance dimensions for a cross-check seed.
pub fn cross_check_dims(seed: u64, max_states: usize, max_actions: usize) -> (usize, usize) {
    let n = 2 + (seed as usize) % (max_states - 1);
    let m = 1 + (seed as usize) % max_actions;
    (n, m)
}

/// Max-norm disagreement of each solution route against the brute-force
/// oracle on one seeded instance, plus an epsilon-optimality verdict over
/// all five returned policies.
#[derive(Debug, Clone)]
pub struct CrossCheckOutcome {
    pub seed: u64,
    pub n_states: usize,
    pub n_actions: usize,
    pub vi_error: f64,
    pub pi_error: f64,
    pub mpi_error: f64,
    pub lp_primal_error: f64,
    pub lp_dual_error: f64,
    pub policies_epsilon_optimal: bool,
}

impl CrossCheckOutcome {
    pub fn max_disagreement(&self) -> f64 {
        [
            self.vi_error,
            self.pi_error,
            self.mpi_error,
            self.lp_primal_error,
            self.lp_dual_error,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Runs all five solution routes on one seeded random instance and measures
/// them against the oracle; `policy_epsilon` is the optimality margin every
/// returned policy must meet.
pub fn cross_check_instance(
    seed: u64,
    max_states: usize,
    max_actions: usize,
    gamma: f64,
    vi_epsilon: f64,
    mpi_sweeps: usize,
    policy_epsilon: f64,
) -> CrossCheckOutcome {
    let (n, m) = cross_check_dims(seed, max_states, max_actions);
    let mdp = families::random_mdp(n, m, gamma, seed);
    let truth = oracle::brute_force_optimal(&mdp, oracle::DEFAULT_ENUMERATION_LIMIT)
        .expect("cross-check instances stay under the enumeration limit");

    let error = |v: &ValueVector<f64>| bellman_residual(v, &truth.optimal_values);
    let limit = oracle::DEFAULT_ENUMERATION_LIMIT;
    let mut policies_ok = true;
    let mut check_policy = |p: &DeterministicPolicy| {
        policies_ok &= oracle::is_epsilon_optimal(&mdp, p, policy_epsilon, limit).unwrap_or(false);
    };

    let vi = value_iteration(
        &mdp,
        &ValueVector::zeros(n),
        &StoppingRule::epsilon_target(vi_epsilon).expect("positive epsilon"),
    );
    check_policy(&vi.policy);

    let pi = policy_iteration(&mdp, &DeterministicPolicy::zeros(n));
    check_policy(&pi.policy);

    let mpi = modified_policy_iteration(&mdp, &DeterministicPolicy::zeros(n), mpi_sweeps);
    check_policy(&mpi.policy);

    let primal = lp::solve_lp(&lp::build_primal(&mdp)).expect("primal LP solves");
    let primal_values = ValueVector::new(primal.values.expect("primal LP is feasible and bounded"));
    check_policy(&mdp.greedy_policy(&primal_values));

    let dual = lp::solve_lp(&lp::build_dual(&mdp)).expect("dual LP solves");
    let flows = dual.values.expect("dual LP is feasible and bounded");
    let dual_policy = lp::stochastic_to_deterministic(&flows, n, m);
    check_policy(&dual_policy);
    let dual_values = mdp
        .evaluate_policy(&dual_policy)
        .expect("policy evaluation cannot fail on a valid MDP");

    CrossCheckOutcome {
        seed,
        n_states: n,
        n_actions: m,
        vi_error: error(&vi.values),
        pi_error: error(&pi.values),
        mpi_error: error(&mpi.values),
        lp_primal_error: error(&primal_values),
        lp_dual_error: error(&dual_values),
        policies_epsilon_optimal: policies_ok,
    }
}

/// Stopping-rule probe: stop value iteration at the epsilon-derived residual
/// threshold and measure the greedy policy's true optimality gap.
pub struct StoppingRuleOutcome {
    pub epsilon: f64,
    pub seed: u64,
    pub residual_threshold: f64,
    pub achieved_gap: f64,
    pub pass: bool,
}

pub fn stopping_rule_instance(epsilon: f64, seed: u64, gamma: f64) -> StoppingRuleOutcome {
    let n = 3 + (seed as usize) % 4;
    let m = 2 + (seed as usize) % 2;
    let mdp = families::random_mdp(n, m, gamma, seed);
    let threshold = stopping_threshold(epsilon, gamma);
    let report = value_iteration(
        &mdp,
        &ValueVector::zeros(n),
        &StoppingRule::epsilon_target(epsilon).expect("positive epsilon"),
    );
    let truth = oracle::brute_force_optimal(&mdp, oracle::DEFAULT_ENUMERATION_LIMIT)
        .expect("stopping-rule instances stay under the enumeration limit");
    let achieved = mdp
        .evaluate_policy(&report.policy)
        .expect("policy evaluation cannot fail on a valid MDP");
    let gap = achieved
        .as_slice()
        .iter()
        .zip(truth.optimal_values.as_slice())
        .map(|(&a, &b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max);
    StoppingRuleOutcome {
        epsilon,
        seed,
        residual_threshold: threshold,
        achieved_gap: gap,
        pass: gap <= epsilon,
    }
}

/// Runs the experiment described by `spec`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentTable, ExperimentError> {
    spec.validate()?;
    match spec.kind {
        ExperimentKind::Mc90Scaling => run_mc90_scaling(spec),
        ExperimentKind::ViGammaScaling => run_vi_gamma_scaling(spec),
        ExperimentKind::CrossCheck => run_cross_check(spec),
        ExperimentKind::StoppingRule => run_stopping_rule(spec),
    }
}

fn run_mc90_scaling(spec: &ExperimentSpec) -> Result<ExperimentTable, ExperimentError> {
    let columns = vec![
        "n".to_string(),
        "gamma".to_string(),
        "spi_switches".to_string(),
        "spi_policy_steps".to_string(),
        "pi_iterations".to_string(),
        "vi_iterations".to_string(),
        "predicted_policy_steps".to_string(),
    ];
    let mut rows = Vec::new();
    let vi_epsilon = spec.epsilons.first().copied().unwrap_or(1e-6);
    for &gamma in &spec.gamma_values {
        for &n in &spec.n_values {
            let inst = families::mc90_family(n, gamma)
                .map_err(|e| ExperimentError::InvalidGrid(e.to_string()))?;
            let spi = simple_policy_iteration(&inst.mdp, &inst.initial_policy);
            let pi = policy_iteration(&inst.mdp, &inst.initial_policy);
            let vi = value_iteration(
                &inst.mdp,
                &ValueVector::zeros(n),
                &StoppingRule::epsilon_target(vi_epsilon).expect("positive epsilon"),
            );
            rows.push(vec![
                n.to_string(),
                format_f64(gamma),
                spi.iterations.to_string(),
                (spi.iterations as u64 + 1).to_string(),
                pi.iterations.to_string(),
                vi.iterations.to_string(),
                inst.predicted_policy_steps.to_string(),
            ]);
        }
    }
    let summary = format!(
        "mc90-scaling: {} runs over n in {:?}, policies stepped through match 2^(n/2-2) when the prediction holds",
        rows.len(),
        spec.n_values
    );
    Ok(ExperimentTable { columns, rows, summary })
}

fn run_vi_gamma_scaling(spec: &ExperimentSpec) -> Result<ExperimentTable, ExperimentError> {
    let columns = vec![
        "gamma".to_string(),
        "observed_crossing".to_string(),
        "exact_crossing".to_string(),
        "predicted_lower_bound".to_string(),
    ];
    let mut rows = Vec::new();
    for &gamma in &spec.gamma_values {
        let inst = families::vi_lower_bound_family(gamma);
        let cap = inst.exact_crossing * 4 + 1000;
        let observed = families::observed_vi_crossing(&inst.mdp, cap)
            .expect("greedy switch occurs within the cap");
        rows.push(vec![
            format_f64(gamma),
            observed.to_string(),
            inst.exact_crossing.to_string(),
            format_f64(inst.predicted_lower_bound),
        ]);
    }
    let summary = format!("vi-gamma-scaling: {} discounts probed", rows.len());
    Ok(ExperimentTable { columns, rows, summary })
}

fn run_cross_check(spec: &ExperimentSpec) -> Result<ExperimentTable, ExperimentError> {
    let columns = vec![
        "seed".to_string(),
        "n_states".to_string(),
        "n_actions".to_string(),
        "gamma".to_string(),
        "vi_error".to_string(),
        "pi_error".to_string(),
        "mpi_error".to_string(),
        "lp_primal_error".to_string(),
        "lp_dual_error".to_string(),
        "max_disagreement".to_string(),
    ];
    let gamma = spec.gamma_values[0];
    let vi_epsilon = spec.epsilons[0];
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &seed in &spec.seeds {
        let outcome = cross_check_instance(
            seed,
            spec.max_states,
            spec.max_actions,
            gamma,
            vi_epsilon,
            spec.mpi_sweeps,
            1e-5,
        );
        worst = worst.max(outcome.max_disagreement());
        rows.push(vec![
            outcome.seed.to_string(),
            outcome.n_states.to_string(),
            outcome.n_actions.to_string(),
            format_f64(gamma),
            format_f64(outcome.vi_error),
            format_f64(outcome.pi_error),
            format_f64(outcome.mpi_error),
            format_f64(outcome.lp_primal_error),
            format_f64(outcome.lp_dual_error),
            format_f64(outcome.max_disagreement()),
        ]);
    }
    let summary = format!(
        "cross-check: {} seeds, worst max-norm disagreement {:e}",
        rows.len(),
        worst
    );
    Ok(ExperimentTable { columns, rows, summary })
}

fn run_stopping_rule(spec: &ExperimentSpec) -> Result<ExperimentTable, ExperimentError> {
    let columns = vec![
        "epsilon".to_string(),
        "seed".to_string(),
        "residual_threshold".to_string(),
        "achieved_gap".to_string(),
        "pass".to_string(),
    ];
    let gamma = spec.gamma_values[0];
    let mut rows = Vec::new();
    let mut failures = 0u64;
    for &epsilon in &spec.epsilons {
        for &seed in &spec.seeds {
            let outcome = stopping_rule_instance(epsilon, seed, gamma);
            if !outcome.pass {
                failures += 1;
            }
            rows.push(vec![
                format_f64(outcome.epsilon),
                outcome.seed.to_string(),
                format_f64(outcome.residual_threshold),
                format_f64(outcome.achieved_gap),
                outcome.pass.to_string(),
            ]);
        }
    }
    let summary = format!("stopping-rule: {} runs, {failures} failures", rows.len());
    Ok(ExperimentTable { columns, rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mc90_scaling_reproduces_the_doubling_column() {
        let spec = ExperimentSpec::mc90_scaling(vec![6, 8, 10], vec![0.95]);
        let table = run_experiment(&spec).unwrap();
        let steps: Vec<&str> = table.rows.iter().map(|r| r[3].as_str()).collect();
        assert_eq!(steps, vec!["2", "4", "8"]);
        let predicted: Vec<&str> = table.rows.iter().map(|r| r[6].as_str()).collect();
        assert_eq!(predicted, vec!["2", "4", "8"]);
    }

    #[test]
    fn vi_gamma_scaling_reports_the_observed_crossing() {
        let spec = ExperimentSpec::vi_gamma_scaling(vec![0.9]);
        let table = run_experiment(&spec).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0][1], "22");
        assert_eq!(table.rows[0][2], "22");
    }

    #[test]
    fn cross_check_disagreements_are_tiny() {
        let spec = ExperimentSpec::cross_check((0..10).collect(), 4, 2, 0.9);
        let table = run_experiment(&spec).unwrap();
        assert_eq!(table.rows.len(), 10);
        for row in &table.rows {
            let max: f64 = row[9].parse().unwrap();
            assert!(max <= 1e-5, "seed {} disagreement {max}", row[0]);
        }
    }

    #[test]
    fn stopping_rule_rows_all_pass() {
        let spec = ExperimentSpec::stopping_rule(vec![0.1], (0..5).collect(), 0.9);
        let table = run_experiment(&spec).unwrap();
        assert!(table.rows.iter().all(|r| r[4] == "true"));
    }

    #[test]
    fn csv_output_is_deterministic() {
        let spec = ExperimentSpec::cross_check((0..3).collect(), 4, 2, 0.9);
        let a = run_experiment(&spec).unwrap().to_csv();
        let b = run_experiment(&spec).unwrap().to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with("seed,n_states,n_actions,gamma,"));
    }

    #[test]
    fn grid_validation_catches_bad_parameters() {
        let spec = ExperimentSpec::mc90_scaling(vec![7], vec![0.95]);
        assert!(run_experiment(&spec).is_err());
        let spec = ExperimentSpec::cross_check(vec![], 4, 2, 0.9);
        assert!(run_experiment(&spec).is_err());
        let spec = ExperimentSpec::vi_gamma_scaling(vec![1.5]);
        assert!(run_experiment(&spec).is_err());
    }

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.1, 0.95, 1.0 / 3.0, 8.1e-5] {
            let s = format_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }
}
