//! MDP document I/O: a JSON schema with explicit dimensions, an `N x M` cost
//! table, transitions as either a dense `N x M x N` tensor or a sparse list
//! of `[state, action, successor, probability]` quadruples, and an optional
//! bit count for exact-rational instances. Loading validates every model
//! invariant; numbers round-trip exactly through save/load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::mdp::{Mdp, Violation};

#[derive(Debug, Error)]
pub enum MdpFileError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid MDP document: {0}")]
    Parse(String),
    #[error("invalid MDP: {}", format_violations(.0))]
    Validation(Vec<Violation>),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Serialize, Deserialize)]
struct Document {
    n_states: usize,
    n_actions: usize,
    discount: f64,
    costs: Vec<Vec<f64>>,
    transitions: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rational_bits: Option<u32>,
}

/// Parses an MDP document from JSON text and validates it.
pub fn parse_mdp(text: &str) -> Result<Mdp<f64>, MdpFileError> {
    let doc: Document = serde_json::from_str(text).map_err(|e| MdpFileError::Parse(e.to_string()))?;
    let n = doc.n_states;
    let m = doc.n_actions;

    if doc.costs.len() != n {
        return Err(MdpFileError::Parse(format!(
            "costs has {} rows, expected n_states = {n}",
            doc.costs.len()
        )));
    }
    let mut costs = Vec::with_capacity(n * m);
    for (i, row) in doc.costs.iter().enumerate() {
        if row.len() != m {
            return Err(MdpFileError::Parse(format!(
                "costs[{i}] has {} entries, expected n_actions = {m}",
                row.len()
            )));
        }
        costs.extend_from_slice(row);
    }

    let transitions = parse_transitions(&doc.transitions, n, m)?;

    let mut mdp = Mdp::new(n, m, transitions, costs, doc.discount);
    if let Some(bits) = doc.rational_bits {
        mdp = mdp.with_rational_bits(bits);
    }
    let report = mdp.validate();
    if !report.is_empty() {
        return Err(MdpFileError::Validation(report));
    }
    Ok(mdp)
}

fn parse_transitions(value: &Value, n: usize, m: usize) -> Result<Vec<f64>, MdpFileError> {
    let parse = MdpFileError::Parse;
    let outer = value
        .as_array()
        .ok_or_else(|| parse("transitions must be an array".into()))?;
    if outer.is_empty() {
        return Err(parse("transitions is empty".into()));
    }

    // sparse form: a list of [i, k, j, p] quadruples
    let first_is_numbers = outer[0]
        .as_array()
        .is_some_and(|a| a.iter().all(Value::is_number));
    if first_is_numbers {
        let mut dense = vec![0.0; n * m * n];
        let mut seen = vec![false; n * m * n];
        for (idx, entry) in outer.iter().enumerate() {
            let quad = entry
                .as_array()
                .filter(|a| a.len() == 4)
                .ok_or_else(|| parse(format!("transitions[{idx}] is not an [i, k, j, p] quadruple")))?;
            let as_index = |v: &Value, what: &str| -> Result<usize, MdpFileError> {
                v.as_u64()
                    .map(|x| x as usize)
                    .ok_or_else(|| parse(format!("transitions[{idx}]: {what} is not a nonnegative integer")))
            };
            let i = as_index(&quad[0], "state")?;
            let k = as_index(&quad[1], "action")?;
            let j = as_index(&quad[2], "successor")?;
            let p = quad[3]
                .as_f64()
                .ok_or_else(|| parse(format!("transitions[{idx}]: probability is not a number")))?;
            if i >= n || k >= m || j >= n {
                return Err(parse(format!(
                    "transitions[{idx}]: index ({i}, {k}, {j}) out of range for {n} states, {m} actions"
                )));
            }
            let flat = (i * m + k) * n + j;
            if seen[flat] {
                return Err(parse(format!("transitions[{idx}]: duplicate entry for ({i}, {k}, {j})")));
            }
            seen[flat] = true;
            dense[flat] = p;
        }
        return Ok(dense);
    }

    // dense form: transitions[i][k][j]
    if outer.len() != n {
        return Err(parse(format!(
            "transitions has {} state entries, expected n_states = {n}",
            outer.len()
        )));
    }
    let mut dense = Vec::with_capacity(n * m * n);
    for (i, per_action) in outer.iter().enumerate() {
        let actions = per_action
            .as_array()
            .ok_or_else(|| parse(format!("transitions[{i}] must be an array of action rows")))?;
        if actions.len() != m {
            return Err(parse(format!(
                "transitions[{i}] has {} action rows, expected n_actions = {m}",
                actions.len()
            )));
        }
        for (k, row) in actions.iter().enumerate() {
            let row = row
                .as_array()
                .ok_or_else(|| parse(format!("transitions[{i}][{k}] must be an array")))?;
            if row.len() != n {
                return Err(parse(format!(
                    "transitions[{i}][{k}] has {} entries, expected n_states = {n}",
                    row.len()
                )));
            }
            for (j, p) in row.iter().enumerate() {
                dense.push(
                    p.as_f64()
                        .ok_or_else(|| parse(format!("transitions[{i}][{k}][{j}] is not a number")))?,
                );
            }
        }
    }
    Ok(dense)
}

/// Renders an MDP as a pretty-printed JSON document with dense transitions.
pub fn render_mdp(mdp: &Mdp<f64>) -> String {
    let n = mdp.n_states();
    let m = mdp.n_actions();
    let transitions: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| (0..m).map(|k| mdp.successor_row(i, k).to_vec()).collect())
        .collect();
    let costs: Vec<Vec<f64>> = (0..n).map(|i| (0..m).map(|k| mdp.cost(i, k)).collect()).collect();
    let doc = Document {
        n_states: n,
        n_actions: m,
        discount: mdp.discount(),
        costs,
        transitions: serde_json::to_value(transitions).expect("tensor serializes"),
        rational_bits: mdp.rational_bits(),
    };
    serde_json::to_string_pretty(&doc).expect("document serializes")
}

pub fn load_mdp(path: impl AsRef<Path>) -> Result<Mdp<f64>, MdpFileError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MdpFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_mdp(&text)
}

pub fn save_mdp(mdp: &Mdp<f64>, path: impl AsRef<Path>) -> Result<(), MdpFileError> {
    let path = path.as_ref();
    fs::write(path, render_mdp(mdp)).map_err(|source| MdpFileError::Io {
        path: path.display().to_string(),
        source,
    })
}
