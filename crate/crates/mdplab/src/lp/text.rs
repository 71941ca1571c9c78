//! LP text-file export and a parser for the same dialect, so the built-in
//! simplex can be cross-checked against external solvers.
//!
//! The emitted file has the usual sections: the sense keyword, `Subject To`
//! with one named constraint per line, `Bounds` with one line per variable,
//! and `End`. Objective terms are written for every variable (zeros
//! included) so a reader recovers the full variable list and order;
//! constraint lines omit zero coefficients. Numbers are printed in Rust's
//! shortest round-trip form, which re-parses to the identical float.

use std::collections::HashMap;

use thiserror::Error;

use super::{Constraint, LpProgram, Relation, Sense, VariableBounds};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown variable `{0}` (not present in the objective)")]
    UnknownVariable(String),
    #[error("missing {0} section")]
    MissingSection(&'static str),
}

fn format_coefficient<T: Scalar>(x: T) -> String {
    if x == T::zero() {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

fn write_terms<T: Scalar>(out: &mut String, coefficients: &[T], names: &[String], skip_zero: bool) {
    let mut first = true;
    for (v, &c) in coefficients.iter().enumerate() {
        if skip_zero && c == T::zero() {
            continue;
        }
        if first {
            if c < T::zero() {
                out.push_str("- ");
            }
            first = false;
        } else if c < T::zero() {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        out.push_str(&format_coefficient(c.abs()));
        out.push(' ');
        out.push_str(&names[v]);
    }
    if first {
        // all-zero row: keep the line syntactically valid
        out.push_str("0 ");
        out.push_str(&names[0]);
    }
}

/// Renders the program in LP text form.
pub fn export_lp<T: Scalar>(lp: &LpProgram<T>) -> String {
    let mut out = String::new();
    out.push_str(match lp.sense {
        Sense::Maximize => "Maximize\n",
        Sense::Minimize => "Minimize\n",
    });
    out.push_str(" obj: ");
    write_terms(&mut out, &lp.objective, &lp.variable_names, false);
    out.push('\n');

    out.push_str("Subject To\n");
    for c in &lp.constraints {
        out.push(' ');
        out.push_str(&c.name);
        out.push_str(": ");
        write_terms(&mut out, &c.coefficients, &lp.variable_names, true);
        out.push(' ');
        out.push_str(&c.relation.to_string());
        out.push(' ');
        out.push_str(&format_coefficient(c.rhs));
        out.push('\n');
    }

    out.push_str("Bounds\n");
    for (v, b) in lp.bounds.iter().enumerate() {
        let name = &lp.variable_names[v];
        let line = match (b.lower, b.upper) {
            (None, None) => format!(" {name} free\n"),
            (Some(lo), None) => format!(" {name} >= {}\n", format_coefficient(lo)),
            (None, Some(up)) => format!(" -infinity <= {name} <= {}\n", format_coefficient(up)),
            (Some(lo), Some(up)) => format!(
                " {} <= {name} <= {}\n",
                format_coefficient(lo),
                format_coefficient(up)
            ),
        };
        out.push_str(&line);
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Done,
}

struct Parser<T> {
    sense: Option<Sense>,
    objective_text: String,
    constraints: Vec<(usize, String)>,
    bound_lines: Vec<(usize, String)>,
    _marker: std::marker::PhantomData<T>,
}

fn syntax(line: usize, message: impl Into<String>) -> LpParseError {
    LpParseError::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_number(token: &str, line: usize) -> Result<f64, LpParseError> {
    if token.eq_ignore_ascii_case("-infinity") || token.eq_ignore_ascii_case("-inf") {
        return Ok(f64::NEG_INFINITY);
    }
    if token.eq_ignore_ascii_case("+infinity") || token.eq_ignore_ascii_case("infinity") || token.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    token
        .parse::<f64>()
        .map_err(|_| syntax(line, format!("expected a number, found `{token}`")))
}

fn looks_numeric(token: &str) -> bool {
    token
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_digit() || c == '.' || c == '-' || c == '+')
        && token.parse::<f64>().is_ok()
}

/// Parses `sign? (number? name)+` into (coefficient, name) pairs.
fn parse_terms(text: &str, line: usize) -> Result<Vec<(f64, String)>, LpParseError> {
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut pending: Option<f64> = None;
    for token in text.split_whitespace() {
        match token {
            "+" => {}
            "-" => sign = -sign,
            _ if looks_numeric(token) => {
                if pending.is_some() {
                    return Err(syntax(line, format!("two numbers in a row near `{token}`")));
                }
                pending = Some(parse_number(token, line)?);
            }
            name => {
                let magnitude = pending.take().unwrap_or(1.0);
                terms.push((sign * magnitude, name.to_string()));
                sign = 1.0;
            }
        }
    }
    if pending.is_some() {
        return Err(syntax(line, "dangling coefficient without a variable"));
    }
    Ok(terms)
}

/// Parses LP text produced by [`export_lp`] (or hand-written files in the
/// same dialect) back into a program. Variable order is the objective order.
pub fn parse_lp<T: Scalar>(text: &str) -> Result<LpProgram<T>, LpParseError> {
    let mut state = Section::Preamble;
    let mut parser: Parser<T> = Parser {
        sense: None,
        objective_text: String::new(),
        constraints: Vec::new(),
        bound_lines: Vec::new(),
        _marker: std::marker::PhantomData,
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        let lowered = line.to_ascii_lowercase();
        let new_section = match lowered.as_str() {
            "maximize" | "max" => Some((Section::Objective, Some(Sense::Maximize))),
            "minimize" | "min" => Some((Section::Objective, Some(Sense::Minimize))),
            "subject to" | "st" | "s.t." | "such that" => Some((Section::Constraints, None)),
            "bounds" => Some((Section::Bounds, None)),
            "end" => Some((Section::Done, None)),
            _ => None,
        };
        if let Some((section, sense)) = new_section {
            state = section;
            if sense.is_some() {
                parser.sense = sense;
            }
            continue;
        }
        match state {
            Section::Preamble => {
                return Err(syntax(line_no, format!("expected a sense keyword, found `{line}`")));
            }
            Section::Objective => {
                parser.objective_text.push(' ');
                parser.objective_text.push_str(line);
            }
            Section::Constraints => parser.constraints.push((line_no, line.to_string())),
            Section::Bounds => parser.bound_lines.push((line_no, line.to_string())),
            Section::Done => {
                return Err(syntax(line_no, "content after End"));
            }
        }
    }

    let sense = parser.sense.ok_or(LpParseError::MissingSection("objective"))?;

    // objective: optional label, then terms over the full variable list
    let objective_body = match parser.objective_text.find(':') {
        Some(pos) => parser.objective_text[pos + 1..].to_string(),
        None => parser.objective_text.clone(),
    };
    let objective_terms = parse_terms(&objective_body, 0)?;
    if objective_terms.is_empty() {
        return Err(LpParseError::MissingSection("objective"));
    }
    let mut variable_names = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut objective = Vec::new();
    for (c, name) in objective_terms {
        if index.contains_key(&name) {
            return Err(LpParseError::Syntax {
                line: 0,
                message: format!("variable `{name}` repeated in the objective"),
            });
        }
        index.insert(name.clone(), variable_names.len());
        variable_names.push(name);
        objective.push(T::real(c));
    }
    let n = variable_names.len();

    let mut constraints = Vec::new();
    for (line_no, line) in &parser.constraints {
        let (name, body) = match line.find(':') {
            Some(pos) => (line[..pos].trim().to_string(), &line[pos + 1..]),
            None => (format!("r{}", constraints.len()), line.as_str()),
        };
        let (relation, rel_pos, rel_len) = find_relation(body)
            .ok_or_else(|| syntax(*line_no, "constraint line lacks a relation"))?;
        let lhs = &body[..rel_pos];
        let rhs_text = body[rel_pos + rel_len..].trim();
        let rhs = parse_number(rhs_text, *line_no)?;
        let mut coefficients = vec![T::zero(); n];
        for (c, var) in parse_terms(lhs, *line_no)? {
            let &v = index
                .get(&var)
                .ok_or_else(|| LpParseError::UnknownVariable(var.clone()))?;
            coefficients[v] = coefficients[v] + T::real(c);
        }
        constraints.push(Constraint {
            name,
            coefficients,
            relation,
            rhs: T::real(rhs),
        });
    }

    let mut bounds = vec![VariableBounds::nonnegative(); n];
    for (line_no, line) in &parser.bound_lines {
        parse_bound_line(line, *line_no, &index, &mut bounds)?;
    }

    Ok(LpProgram {
        sense,
        objective,
        constraints,
        bounds,
        variable_names,
    })
}

fn find_relation(body: &str) -> Option<(Relation, usize, usize)> {
    if let Some(pos) = body.find("<=") {
        return Some((Relation::LessEq, pos, 2));
    }
    if let Some(pos) = body.find(">=") {
        return Some((Relation::GreaterEq, pos, 2));
    }
    body.find('=').map(|pos| (Relation::Equal, pos, 1))
}

fn parse_bound_line<T: Scalar>(
    line: &str,
    line_no: usize,
    index: &HashMap<String, usize>,
    bounds: &mut [VariableBounds<T>],
) -> Result<(), LpParseError> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let lookup = |name: &str| -> Result<usize, LpParseError> {
        index
            .get(name)
            .copied()
            .ok_or_else(|| LpParseError::UnknownVariable(name.to_string()))
    };
    let as_bound = |x: f64| -> Option<T> {
        if x.is_finite() {
            Some(T::real(x))
        } else {
            None
        }
    };
    match tokens.as_slice() {
        [name, kw] if kw.eq_ignore_ascii_case("free") => {
            let v = lookup(name)?;
            bounds[v] = VariableBounds::free();
        }
        [name, ">=", value] => {
            let v = lookup(name)?;
            bounds[v].lower = as_bound(parse_number(value, line_no)?);
        }
        [name, "<=", value] => {
            let v = lookup(name)?;
            bounds[v].upper = as_bound(parse_number(value, line_no)?);
        }
        [lo, "<=", name, "<=", up] => {
            let v = lookup(name)?;
            bounds[v] = VariableBounds {
                lower: as_bound(parse_number(lo, line_no)?),
                upper: as_bound(parse_number(up, line_no)?),
            };
        }
        _ => {
            return Err(syntax(line_no, format!("unrecognized bounds line `{line}`")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{build_dual, build_primal, solve_lp, LpStatus};
    use crate::test_support::toy2;

    #[test]
    fn export_structure() {
        let text = export_lp(&build_primal(&toy2()));
        assert!(text.starts_with("Maximize\n"));
        assert_eq!(text.matches("<=").count(), 4);
        assert!(text.contains("c_0_0: 0.5 v_0 <= 1.5"));
        assert!(text.contains("v_0 free"));
        assert!(text.trim_end().ends_with("End"));
    }

    #[test]
    fn dual_export_declares_nonnegative_variables() {
        let text = export_lp(&build_dual(&toy2()));
        assert!(text.starts_with("Minimize\n"));
        for name in ["x_0_0", "x_0_1", "x_1_0", "x_1_1"] {
            assert!(text.contains(&format!("{name} >= 0")), "missing bound for {name}");
        }
    }

    #[test]
    fn round_trips_exactly() {
        for lp in [build_primal(&toy2()), build_dual(&toy2())] {
            let text = export_lp(&lp);
            let parsed: crate::lp::LpProgram<f64> = parse_lp(&text).unwrap();
            assert_eq!(parsed, lp);
        }
    }

    #[test]
    fn round_trips_awkward_floats() {
        // coefficients that need the full shortest-roundtrip precision
        let mdp = crate::families::random_mdp(3, 2, 0.9, 99);
        for lp in [build_primal(&mdp), build_dual(&mdp)] {
            let parsed: crate::lp::LpProgram<f64> = parse_lp(&export_lp(&lp)).unwrap();
            assert_eq!(parsed, lp);
        }
    }

    #[test]
    fn parsed_program_solves_like_the_original() {
        let lp = build_primal(&toy2());
        let parsed = parse_lp::<f64>(&export_lp(&lp)).unwrap();
        let sol = solve_lp(&parsed).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value.unwrap() - 6.0).abs() < 1e-7);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_lp::<f64>("nonsense before any section").is_err());
        assert!(parse_lp::<f64>("Maximize\n obj: 1 x\nSubject To\n r: 1 x\nEnd\n").is_err());
        assert!(parse_lp::<f64>("Maximize\n obj: 1 x\nSubject To\n r: 1 y <= 2\nEnd\n").is_err());
    }

    #[test]
    fn accepts_unlabeled_constraints_and_comments() {
        let text = "\\ hand-written file\nMinimize\n obj: 2 a + 1 b\nSubject To\n a + b >= 1\nBounds\n a >= 0\n b >= 0\nEnd\n";
        let lp: crate::lp::LpProgram<f64> = parse_lp(text).unwrap();
        assert_eq!(lp.n_constraints(), 1);
        assert_eq!(lp.constraints[0].coefficients, vec![1.0, 1.0]);
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.objective_value.unwrap() - 1.0).abs() < 1e-9);
    }
}
