//! Dense two-phase tableau simplex.
//!
//! Bland's smallest-index rule is the default pivot choice because it makes
//! termination unconditional; Dantzig's most-negative-reduced-cost rule is
//! available where speed matters more. Free variables are split, shifted
//! lower bounds are substituted away, finite upper bounds become rows.

use super::{LpError, LpProgram, LpSolution, LpStatus, Relation, Sense};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotRule {
    #[default]
    Bland,
    Dantzig,
}

const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = shift + column`
    Shifted { col: usize },
    /// `x = plus - minus`
    Split { plus: usize, minus: usize },
}

struct Standardized<T> {
    rows: Vec<Vec<T>>,
    relations: Vec<Relation>,
    rhs: Vec<T>,
    /// Minimization objective over structural columns.
    cost: Vec<T>,
    var_map: Vec<VarMap>,
    shifts: Vec<T>,
    n_structural: usize,
}

#[derive(Debug)]
enum Failure {
    PivotLimit,
    RatioBreakdown,
}

/// Rewrites the program over nonnegative structural columns with the
/// objective normalized to minimization.
fn standardize<T: Scalar>(lp: &LpProgram<T>) -> Standardized<T> {
    let n = lp.n_variables();
    let mut var_map = Vec::with_capacity(n);
    let mut shifts = vec![T::zero(); n];
    let mut next_col = 0;
    for (v, b) in lp.bounds.iter().enumerate() {
        match b.lower {
            Some(lo) => {
                shifts[v] = lo;
                var_map.push(VarMap::Shifted { col: next_col });
                next_col += 1;
            }
            None => {
                var_map.push(VarMap::Split {
                    plus: next_col,
                    minus: next_col + 1,
                });
                next_col += 2;
            }
        }
    }
    let n_structural = next_col;

    let mut rows = Vec::with_capacity(lp.n_constraints());
    let mut relations = Vec::with_capacity(lp.n_constraints());
    let mut rhs = Vec::with_capacity(lp.n_constraints());
    let mut push_row = |coefficients: &[T], relation: Relation, b: T| {
        let mut row = vec![T::zero(); n_structural];
        let mut shifted_rhs = b;
        for (v, &a) in coefficients.iter().enumerate() {
            if a == T::zero() {
                continue;
            }
            shifted_rhs = shifted_rhs - a * shifts[v];
            match var_map[v] {
                VarMap::Shifted { col } => row[col] = row[col] + a,
                VarMap::Split { plus, minus } => {
                    row[plus] = row[plus] + a;
                    row[minus] = row[minus] - a;
                }
            }
        }
        rows.push(row);
        relations.push(relation);
        rhs.push(shifted_rhs);
    };

    for c in &lp.constraints {
        push_row(&c.coefficients, c.relation, c.rhs);
    }
    // finite upper bounds become ordinary rows
    for (v, b) in lp.bounds.iter().enumerate() {
        if let Some(up) = b.upper {
            let mut unit = vec![T::zero(); n];
            unit[v] = T::one();
            push_row(&unit, Relation::LessEq, up);
        }
    }

    let mut cost = vec![T::zero(); n_structural];
    for (v, &c) in lp.objective.iter().enumerate() {
        let c = match lp.sense {
            Sense::Minimize => c,
            Sense::Maximize => -c,
        };
        match var_map[v] {
            VarMap::Shifted { col } => cost[col] = cost[col] + c,
            VarMap::Split { plus, minus } => {
                cost[plus] = cost[plus] + c;
                cost[minus] = cost[minus] - c;
            }
        }
    }

    Standardized {
        rows,
        relations,
        rhs,
        cost,
        var_map,
        shifts,
        n_structural,
    }
}

struct Tableau<T> {
    /// Row-major body, each row `n_cols` coefficients plus the rhs.
    rows: Vec<Vec<T>>,
    basis: Vec<usize>,
    n_cols: usize,
    pivots: usize,
}

impl<T: Scalar> Tableau<T> {
    fn rhs(&self, r: usize) -> T {
        self.rows[r][self.n_cols]
    }

    fn pivot(&mut self, r: usize, c: usize, cost_row: &mut [T]) {
        let scale = self.rows[r][c];
        for x in self.rows[r].iter_mut() {
            *x = *x / scale;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let factor = row[c];
            if factor == T::zero() {
                continue;
            }
            for (x, &p) in row.iter_mut().zip(&pivot_row) {
                *x = *x - factor * p;
            }
            row[c] = T::zero(); // keep the eliminated entry exactly zero
        }
        let factor = cost_row[c];
        if factor != T::zero() {
            for (x, &p) in cost_row.iter_mut().zip(&pivot_row) {
                *x = *x - factor * p;
            }
            cost_row[c] = T::zero();
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Reduced-cost row for `cost` priced out against the current basis. The
    /// final entry carries minus the current objective value.
    fn priced_cost_row(&self, cost: &[T]) -> Vec<T> {
        let mut row = vec![T::zero(); self.n_cols + 1];
        row[..cost.len()].copy_from_slice(cost);
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = if b < cost.len() { cost[b] } else { T::zero() };
            if cb == T::zero() {
                continue;
            }
            for (x, &a) in row.iter_mut().zip(&self.rows[r]) {
                *x = *x - cb * a;
            }
        }
        row
    }

    /// Runs pivots until no reduced cost is improvable. `banned` columns may
    /// never enter. Returns false if an entering column is unblocked
    /// (unbounded direction).
    fn optimize(&mut self, cost_row: &mut [T], rule: PivotRule, banned_from: usize) -> Result<bool, Failure> {
        let tol = T::LP_PIVOT_TOLERANCE;
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Failure::PivotLimit);
            }
            let mut entering = None;
            match rule {
                PivotRule::Bland => {
                    for j in 0..banned_from {
                        if cost_row[j] < -tol {
                            entering = Some(j);
                            break;
                        }
                    }
                }
                PivotRule::Dantzig => {
                    let mut best = -tol;
                    for j in 0..banned_from {
                        if cost_row[j] < best {
                            best = cost_row[j];
                            entering = Some(j);
                        }
                    }
                }
            }
            let Some(e) = entering else {
                return Ok(true);
            };

            let mut leaving: Option<(T, usize, usize)> = None; // ratio, basis var, row
            for r in 0..self.rows.len() {
                let a = self.rows[r][e];
                if a > tol {
                    let ratio = self.rhs(r) / a;
                    let candidate = (ratio, self.basis[r], r);
                    leaving = match leaving {
                        None => Some(candidate),
                        Some(best) => {
                            if ratio < best.0 || (ratio == best.0 && candidate.1 < best.1) {
                                Some(candidate)
                            } else {
                                Some(best)
                            }
                        }
                    };
                }
            }
            match leaving {
                None => return Ok(false),
                Some((_, _, r)) => self.pivot(r, e, cost_row),
            }
        }
    }
}

fn attempt<T: Scalar>(
    std_form: &Standardized<T>,
    rule: PivotRule,
    perturbation: T,
) -> Result<(LpStatus, Vec<T>, usize), Failure> {
    let m = std_form.rows.len();
    let n_structural = std_form.n_structural;

    // count slack and artificial columns after rhs-sign normalization
    let mut relations = std_form.relations.clone();
    let mut rhs: Vec<T> = std_form
        .rhs
        .iter()
        .enumerate()
        .map(|(r, &b)| b + perturbation * T::real((r + 1) as f64))
        .collect();
    let mut body: Vec<Vec<T>> = std_form.rows.clone();
    for r in 0..m {
        if rhs[r] < T::zero() {
            rhs[r] = -rhs[r];
            for x in body[r].iter_mut() {
                *x = -*x;
            }
            relations[r] = match relations[r] {
                Relation::LessEq => Relation::GreaterEq,
                Relation::GreaterEq => Relation::LessEq,
                Relation::Equal => Relation::Equal,
            };
        }
    }

    let n_slack = relations
        .iter()
        .filter(|rel| !matches!(rel, Relation::Equal))
        .count();
    let n_artificial = relations
        .iter()
        .filter(|rel| !matches!(rel, Relation::LessEq))
        .count();
    let artificial_start = n_structural + n_slack;
    let n_cols = artificial_start + n_artificial;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut slack_col = n_structural;
    let mut artificial_col = artificial_start;
    for r in 0..m {
        let mut row = vec![T::zero(); n_cols + 1];
        row[..n_structural].copy_from_slice(&body[r]);
        row[n_cols] = rhs[r];
        match relations[r] {
            Relation::LessEq => {
                row[slack_col] = T::one();
                basis.push(slack_col);
                slack_col += 1;
            }
            Relation::GreaterEq => {
                row[slack_col] = -T::one();
                slack_col += 1;
                row[artificial_col] = T::one();
                basis.push(artificial_col);
                artificial_col += 1;
            }
            Relation::Equal => {
                row[artificial_col] = T::one();
                basis.push(artificial_col);
                artificial_col += 1;
            }
        }
        rows.push(row);
    }

    let mut tableau = Tableau {
        rows,
        basis,
        n_cols,
        pivots: 0,
    };

    // phase 1: drive the artificial mass to zero
    if n_artificial > 0 {
        let mut phase1_cost = vec![T::zero(); n_cols];
        for j in artificial_start..n_cols {
            phase1_cost[j] = T::one();
        }
        let mut cost_row = tableau.priced_cost_row(&phase1_cost);
        let bounded = tableau.optimize(&mut cost_row, rule, artificial_start)?;
        if !bounded {
            return Err(Failure::RatioBreakdown);
        }
        let infeasibility = -cost_row[n_cols];
        if infeasibility > T::LP_FEASIBILITY_TOLERANCE {
            return Ok((LpStatus::Infeasible, Vec::new(), tableau.pivots));
        }
        // pivot leftover artificials out of the basis; drop genuinely
        // redundant rows. A leftover artificial sits at level zero, so the
        // row's rhs is round-off noise: zero it before the degenerate pivot
        // and pick the largest-magnitude column to keep the row scaled.
        let mut r = 0;
        while r < tableau.rows.len() {
            if tableau.basis[r] >= artificial_start {
                let rhs_col = tableau.n_cols;
                tableau.rows[r][rhs_col] = T::zero();
                let mut replacement: Option<(usize, T)> = None;
                for j in 0..artificial_start {
                    let mag = tableau.rows[r][j].abs();
                    if mag > T::LP_PIVOT_TOLERANCE
                        && replacement.map_or(true, |(_, best)| mag > best)
                    {
                        replacement = Some((j, mag));
                    }
                }
                match replacement {
                    Some((j, _)) => {
                        tableau.pivot(r, j, &mut cost_row);
                        r += 1;
                    }
                    None => {
                        tableau.rows.remove(r);
                        tableau.basis.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
    }

    // phase 2 over the real objective; artificial columns may not re-enter
    let mut phase2_cost = vec![T::zero(); n_cols];
    phase2_cost[..n_structural].copy_from_slice(&std_form.cost);
    let mut cost_row = tableau.priced_cost_row(&phase2_cost);
    let bounded = tableau.optimize(&mut cost_row, rule, artificial_start)?;
    if !bounded {
        return Ok((LpStatus::Unbounded, Vec::new(), tableau.pivots));
    }

    let mut columns = vec![T::zero(); n_cols];
    for (r, &b) in tableau.basis.iter().enumerate() {
        columns[b] = tableau.rhs(r);
    }
    let mut x = vec![T::zero(); std_form.var_map.len()];
    for (v, map) in std_form.var_map.iter().enumerate() {
        x[v] = match *map {
            VarMap::Shifted { col } => std_form.shifts[v] + columns[col],
            VarMap::Split { plus, minus } => columns[plus] - columns[minus],
        };
    }
    Ok((LpStatus::Optimal, x, tableau.pivots))
}

/// Solves with Bland's rule.
pub fn solve_lp<T: Scalar>(lp: &LpProgram<T>) -> Result<LpSolution<T>, LpError> {
    solve_lp_with(lp, PivotRule::Bland)
}

/// Two-phase solve under the chosen pivot rule. An optimal claim is verified
/// against the original constraints; on numerical breakdown the solve is
/// retried with tiny deterministic right-hand-side perturbations before
/// giving up.
pub fn solve_lp_with<T: Scalar>(lp: &LpProgram<T>, rule: PivotRule) -> Result<LpSolution<T>, LpError> {
    assert!(
        lp.constraints.iter().all(|c| c.coefficients.len() == lp.n_variables()),
        "constraint width must match the objective"
    );
    assert_eq!(lp.bounds.len(), lp.n_variables());

    let std_form = standardize(lp);
    let rhs_scale = lp
        .constraints
        .iter()
        .map(|c| c.rhs.abs())
        .fold(T::one(), |acc, b| if b > acc { b } else { acc });
    let feasibility_tol = T::LP_FEASIBILITY_TOLERANCE * rhs_scale;

    let mut last_failure = String::new();
    for (attempt_idx, perturbation) in [0.0f64, 1e-10, 1e-8].into_iter().enumerate() {
        match attempt(&std_form, rule, T::real(perturbation)) {
            Ok((LpStatus::Optimal, values, pivots)) => {
                let violation = lp.max_violation(&values);
                if violation <= feasibility_tol {
                    let objective = lp.objective_value(&values);
                    return Ok(LpSolution {
                        status: LpStatus::Optimal,
                        values: Some(values),
                        objective_value: Some(objective),
                        pivots,
                    });
                }
                last_failure = format!("optimal point violates constraints by {violation:e}");
            }
            Ok((status, _, pivots)) => {
                // non-optimal verdicts are only trusted unperturbed
                if attempt_idx == 0 {
                    return Ok(LpSolution {
                        status,
                        values: None,
                        objective_value: None,
                        pivots,
                    });
                }
                last_failure = format!("perturbed solve returned {status:?}");
            }
            Err(failure) => {
                last_failure = format!("{failure:?}");
            }
        }
    }
    Err(LpError::NumericalBreakdown(last_failure))
}
