//! Exhaustive enumeration oracle for small models.
//!
//! Enumerates every assignment of the binary variables; for each assignment
//! the continuous remainder is solved as an LP (or the constraints are
//! checked directly when no continuous variables exist). Deliberately
//! independent of the branch-and-bound search path so the two can
//! cross-check each other.

use crate::model::{MipModel, VarKind};
use crate::simplex::{solve_lp, LpInstance, LpStatus, LpWorkspace, SolveOptions};
use thiserror::Error;

pub const DEFAULT_BINARY_LIMIT: usize = 20;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("model has {found} binaries, oracle limit is {limit}")]
    TooManyBinaries { found: usize, limit: usize },
}

#[derive(Debug, Clone)]
pub enum OracleOutcome {
    Optimal { objective: f64, solution: Vec<f64> },
    Infeasible,
}

/// Enumerates all binary assignments and returns the best feasible solution.
pub fn brute_force_oracle(
    model: &MipModel,
    binary_limit: usize,
) -> Result<OracleOutcome, OracleError> {
    let binaries: Vec<usize> = model
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.id.index())
        .collect();
    if binaries.len() > binary_limit {
        return Err(OracleError::TooManyBinaries {
            found: binaries.len(),
            limit: binary_limit,
        });
    }
    let pure_binary = binaries.len() == model.num_vars();
    let maximize = model.direction() == crate::model::Direction::Maximize;

    let inst = if pure_binary {
        None
    } else {
        Some(LpInstance::from_model(model))
    };
    let mut ws = LpWorkspace::new();
    let base_lower: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
    let base_upper: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    let combos: u64 = 1u64 << binaries.len();
    let mut assignment = vec![0.0; model.num_vars()];
    for mask in 0..combos {
        for (k, &b) in binaries.iter().enumerate() {
            assignment[b] = ((mask >> k) & 1) as f64;
        }
        let candidate = if let Some(inst) = &inst {
            let mut lo = base_lower.clone();
            let mut up = base_upper.clone();
            for &b in &binaries {
                lo[b] = assignment[b];
                up[b] = assignment[b];
            }
            let res = solve_lp(
                &inst,
                &SolveOptions {
                    lower: Some(&lo),
                    upper: Some(&up),
                    ..Default::default()
                },
                &mut ws,
            );
            if res.status != LpStatus::Optimal {
                continue;
            }
            let mut full = res.values;
            for &b in &binaries {
                full[b] = assignment[b];
            }
            Some((model.objective_value(&full), full))
        } else {
            if model.max_violation(&assignment) > 1e-9 {
                continue;
            }
            Some((model.objective_value(&assignment), assignment.clone()))
        };
        if let Some((obj, vals)) = candidate {
            let improves = match &best {
                None => true,
                Some((bobj, _)) => {
                    if maximize {
                        obj > *bobj
                    } else {
                        obj < *bobj
                    }
                }
            };
            if improves {
                best = Some((obj, vals));
            }
        }
    }

    Ok(match best {
        Some((objective, solution)) => OracleOutcome::Optimal {
            objective,
            solution,
        },
        None => OracleOutcome::Infeasible,
    })
}
