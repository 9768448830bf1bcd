//! Round-trips models through the MPS writer and an independent
//! MPS-consuming solver (HiGHS via `tools/mps_solve.py`), comparing optima
//! against the embedded solver. Skips with a warning when no Python/SciPy
//! stack is available.

use pnn_mip::{
    solve, solve_external, Direction, MipModel, Sense, SolveStatus, SolverConfig, VarKind,
};
use std::path::PathBuf;
use std::process::Command;

fn external_template() -> Option<String> {
    let script: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "tools", "mps_solve.py"]
        .iter()
        .collect();
    if !script.exists() {
        return None;
    }
    let probe = Command::new("python3")
        .args(["-c", "import scipy.optimize"])
        .output();
    match probe {
        Ok(out) if out.status.success() => Some(format!(
            "python3 {} {{mps}} {{sol}}",
            script.canonicalize().unwrap().display()
        )),
        _ => None,
    }
}

fn knapsack() -> MipModel {
    let mut m = MipModel::new("KNAP", Direction::Maximize);
    let weights = [6.0, 5.0, 5.0, 4.0, 3.0];
    let values = [10.0, 9.0, 8.0, 7.0, 6.0];
    let mut terms = Vec::new();
    for i in 0..5 {
        let v = m
            .add_variable(VarKind::Binary, 0.0, 1.0, format!("x{i}"))
            .unwrap();
        m.add_objective_term(v, values[i]).unwrap();
        terms.push((weights[i], v));
    }
    m.add_constraint(&terms, Sense::Le, 12.0, "cap").unwrap();
    m
}

#[test]
fn binary_knapsack_matches_external_solver() {
    let Some(template) = external_template() else {
        eprintln!("warning: python3/scipy unavailable, skipping external round-trip");
        return;
    };
    let model = knapsack();
    let cfg = SolverConfig {
        rel_gap_tol: 1e-9,
        ..Default::default()
    };
    let embedded = solve(&model, &cfg).unwrap();
    let external = solve_external(&model, &template, &cfg).unwrap();
    assert_eq!(embedded.status, SolveStatus::Optimal);
    assert_eq!(external.status, SolveStatus::Optimal);
    let rel = (embedded.objective - external.objective).abs()
        / embedded.objective.abs().max(1.0);
    assert!(rel <= 1e-6, "{} vs {}", embedded.objective, external.objective);
}

#[test]
fn bv_bound_single_binary_optimum() {
    // {max x, x binary, x <= 1}: external optimum must be 1 and the MPS file
    // must mark the variable integral.
    let mut m = MipModel::new("ONEBIT", Direction::Maximize);
    let x = m.add_variable(VarKind::Binary, 0.0, 1.0, "x").unwrap();
    m.add_objective_term(x, 1.0).unwrap();
    m.add_constraint(&[(1.0, x)], Sense::Le, 1.0, "c").unwrap();
    let text = pnn_mip::write_mps(&m);
    assert!(text.contains("'INTORG'"));
    assert!(text.contains(" BV BND"));

    let Some(template) = external_template() else {
        eprintln!("warning: python3/scipy unavailable, skipping external round-trip");
        return;
    };
    let external = solve_external(&m, &template, &SolverConfig::default()).unwrap();
    assert!((external.objective - 1.0).abs() <= 1e-6);
}

#[test]
fn empty_constraints_min_zero() {
    let Some(template) = external_template() else {
        eprintln!("warning: python3/scipy unavailable, skipping external round-trip");
        return;
    };
    let mut m = MipModel::new("ZERO", Direction::Minimize);
    m.add_variable(VarKind::Continuous, 0.0, 1.0, "x").unwrap();
    let external = solve_external(&m, &template, &SolverConfig::default()).unwrap();
    assert!(external.objective.abs() <= 1e-9);
}

#[test]
fn objective_constant_survives_round_trip() {
    let Some(template) = external_template() else {
        eprintln!("warning: python3/scipy unavailable, skipping external round-trip");
        return;
    };
    let mut m = MipModel::new("CONST", Direction::Maximize);
    let x = m.add_variable(VarKind::Binary, 0.0, 1.0, "x").unwrap();
    m.add_objective_term(x, 2.0).unwrap();
    m.add_objective_constant(-0.75);
    let cfg = SolverConfig {
        rel_gap_tol: 1e-9,
        ..Default::default()
    };
    let embedded = solve(&m, &cfg).unwrap();
    let external = solve_external(&m, &template, &cfg).unwrap();
    assert!((embedded.objective - 1.25).abs() <= 1e-9);
    assert!((external.objective - embedded.objective).abs() <= 1e-6);
}
