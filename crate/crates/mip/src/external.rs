//! Escape hatch to an external MPS-consuming solver.
//!
//! The command template contains `{mps}` and `{sol}` placeholders. The model
//! is written as MPS, the command runs, and the solution file is parsed back
//! in the common `variable-name value` per-line format. The objective is
//! recomputed from the model rather than trusted from the file.

use crate::branch_bound::{SolveResult, SolveStatus, FEASIBILITY_TOL, INTEGRALITY_TOL};
use crate::model::{MipModel, VarKind};
use crate::mps::write_mps_file;
use crate::SolverConfig;
use std::process::Command;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("command template must contain {{mps}} and {{sol}} placeholders: `{0}`")]
    BadTemplate(String),
    #[error("failed to launch `{command}`: {source}")]
    Launch {
        command: String,
        source: std::io::Error,
    },
    #[error("solver `{command}` exited with {code:?}; stderr:\n{stderr}")]
    SolverFailed {
        command: String,
        code: Option<i32>,
        stderr: String,
    },
    #[error("no solution file was produced at {0}")]
    MissingSolution(String),
    #[error("unparseable solution file {path}: {reason}")]
    Unparseable { path: String, reason: String },
    #[error("solution from external solver violates constraints by {violation:.3e}")]
    InfeasibleSolution { violation: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Runs `solver_command_template` on the model and maps the result back.
pub fn solve_external(
    model: &MipModel,
    solver_command_template: &str,
    config: &SolverConfig,
) -> Result<SolveResult, ExternalError> {
    if !solver_command_template.contains("{mps}") || !solver_command_template.contains("{sol}") {
        return Err(ExternalError::BadTemplate(
            solver_command_template.to_string(),
        ));
    }
    let start = Instant::now();
    let dir = tempfile::tempdir()?;
    let mps_path = dir.path().join("model.mps");
    let sol_path = dir.path().join("model.sol");
    write_mps_file(model, &mps_path)?;

    let rendered = solver_command_template
        .replace("{mps}", &mps_path.to_string_lossy())
        .replace("{sol}", &sol_path.to_string_lossy());
    let parts: Vec<&str> = rendered.split_whitespace().collect();
    let (program, args) = parts
        .split_first()
        .ok_or_else(|| ExternalError::BadTemplate(rendered.clone()))?;

    let output = Command::new(program)
        .args(args)
        .output()
        .map_err(|source| ExternalError::Launch {
            command: program.to_string(),
            source,
        })?;
    if !output.status.success() {
        return Err(ExternalError::SolverFailed {
            command: program.to_string(),
            code: output.status.code(),
            stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
        });
    }
    if !sol_path.exists() {
        return Err(ExternalError::MissingSolution(
            sol_path.to_string_lossy().into_owned(),
        ));
    }

    let text = std::fs::read_to_string(&sol_path)?;
    parse_solution(model, &text, start.elapsed().as_secs_f64(), config)
        .map_err(|reason| ExternalError::Unparseable {
            path: sol_path.to_string_lossy().into_owned(),
            reason,
        })
        .and_then(|r| r)
}

fn parse_solution(
    model: &MipModel,
    text: &str,
    wall_time_s: f64,
    config: &SolverConfig,
) -> Result<Result<SolveResult, ExternalError>, String> {
    let mut status_hint: Option<SolveStatus> = None;
    let mut values = vec![0.0; model.num_vars()];
    let mut seen = vec![false; model.num_vars()];
    let mut any_value = false;

    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('=') {
            continue;
        }
        let lower = trimmed.to_ascii_lowercase();
        if lower.contains("infeasible") {
            status_hint = Some(SolveStatus::Infeasible);
            continue;
        }
        if lower.contains("unbounded") {
            status_hint = Some(SolveStatus::Unbounded);
            continue;
        }
        if lower.contains("time limit") || lower.contains("stopped") {
            status_hint = Some(SolveStatus::FeasibleTimeLimit);
            continue;
        }
        if lower.starts_with("optimal") || lower.contains("optimal - objective") {
            status_hint = Some(SolveStatus::Optimal);
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let first = tokens.next().ok_or("empty token")?;
        // Some writers prefix an index column; accept `name value` from the
        // first token that resolves to a model variable.
        let (name, value_tok) = if model.var_by_name(first).is_some() {
            (first, tokens.next())
        } else {
            match tokens.next() {
                Some(second) if model.var_by_name(second).is_some() => (second, tokens.next()),
                _ => continue,
            }
        };
        let value_tok = value_tok.ok_or_else(|| format!("no value for variable `{name}`"))?;
        let value: f64 = value_tok
            .parse()
            .map_err(|_| format!("bad value `{value_tok}` for `{name}`"))?;
        let var = model.var_by_name(name).unwrap();
        values[var.id.index()] = value;
        seen[var.id.index()] = true;
        any_value = true;
    }

    if status_hint == Some(SolveStatus::Infeasible) {
        return Ok(Ok(SolveResult {
            status: SolveStatus::Infeasible,
            incumbent: None,
            objective: f64::NAN,
            best_bound: f64::NAN,
            gap: f64::INFINITY,
            nodes_explored: 0,
            wall_time_s,
        }));
    }
    if !any_value {
        return Err("no variable assignments found".into());
    }
    // Unreported variables default to their closest-to-zero bound.
    for v in model.variables() {
        if !seen[v.id.index()] {
            let x = if v.lower <= 0.0 && v.upper >= 0.0 {
                0.0
            } else if v.lower.abs() < v.upper.abs() {
                v.lower
            } else {
                v.upper
            };
            values[v.id.index()] = x;
        }
    }
    for v in model.variables() {
        if v.kind == VarKind::Binary {
            let x = values[v.id.index()];
            if (x - x.round()).abs() <= INTEGRALITY_TOL {
                values[v.id.index()] = x.round();
            }
        }
    }
    let violation = model.max_violation(&values);
    if violation > FEASIBILITY_TOL {
        return Ok(Err(ExternalError::InfeasibleSolution { violation }));
    }
    let objective = model.objective_value(&values);
    let status = status_hint.unwrap_or(SolveStatus::Optimal);
    let (best_bound, gap) = match status {
        SolveStatus::Optimal => (objective, 0.0),
        _ => (
            if model.direction() == crate::model::Direction::Maximize {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            },
            f64::INFINITY,
        ),
    };
    let _ = config;
    Ok(Ok(SolveResult {
        status,
        incumbent: Some(values),
        objective,
        best_bound,
        gap,
        nodes_explored: 0,
        wall_time_s,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Direction, MipModel, Sense, VarKind};

    fn model() -> MipModel {
        let mut m = MipModel::new("t", Direction::Maximize);
        let x = m.add_variable(VarKind::Binary, 0.0, 1.0, "x").unwrap();
        let y = m.add_variable(VarKind::Continuous, 0.0, 2.0, "y").unwrap();
        m.add_objective_term(x, 1.0).unwrap();
        m.add_objective_term(y, 1.0).unwrap();
        m.add_constraint(&[(1.0, x), (1.0, y)], Sense::Le, 2.0, "c")
            .unwrap();
        m
    }

    #[test]
    fn missing_executable_is_reported() {
        let err = solve_external(
            &model(),
            "definitely-not-a-solver-binary {mps} {sol}",
            &SolverConfig::default(),
        )
        .unwrap_err();
        match err {
            ExternalError::Launch { command, .. } => {
                assert_eq!(command, "definitely-not-a-solver-binary")
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn template_without_placeholders_rejected() {
        assert!(matches!(
            solve_external(&model(), "solver", &SolverConfig::default()),
            Err(ExternalError::BadTemplate(_))
        ));
    }

    #[test]
    fn parses_name_value_lines() {
        let m = model();
        let sol = "# comment\nObjective value: 2\nx 1\ny 1\n";
        let r = parse_solution(&m, sol, 0.1, &SolverConfig::default())
            .unwrap()
            .unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn time_limit_header_maps_to_feasible_time_limit() {
        let m = model();
        let sol = "Stopped on time limit\nx 1\ny 0.5\n";
        let r = parse_solution(&m, sol, 0.1, &SolverConfig::default())
            .unwrap()
            .unwrap();
        assert_eq!(r.status, SolveStatus::FeasibleTimeLimit);
        assert!((r.objective - 1.5).abs() < 1e-12);
    }

    #[test]
    fn infeasible_header() {
        let m = model();
        let sol = "Infeasible\n";
        let r = parse_solution(&m, sol, 0.1, &SolverConfig::default())
            .unwrap()
            .unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }
}
