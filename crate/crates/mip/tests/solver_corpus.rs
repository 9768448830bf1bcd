//! Randomized cross-checks of the branch-and-bound solver against the
//! enumeration oracle, plus determinism checks.

use pnn_mip::{
    brute_force_oracle, solve, Direction, MipModel, OracleOutcome, Sense, SolveStatus,
    SolverConfig, VarKind,
};

struct SplitMix(u64);

impl SplitMix {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }
    fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
    fn int(&mut self, lo: i64, hi: i64) -> i64 {
        lo + self.below((hi - lo + 1) as u64) as i64
    }
}

/// Random mixed model small enough for the oracle.
pub fn random_instance(seed: u64) -> MipModel {
    let mut rng = SplitMix(seed.wrapping_mul(0x9E3779B97F4A7C15) ^ 0xD1B54A32D192ED03);
    let nbin = rng.int(2, 9) as usize;
    let ncont = rng.int(0, 5) as usize;
    let nrows = rng.int(1, 7) as usize;
    let dir = if rng.below(2) == 0 {
        Direction::Maximize
    } else {
        Direction::Minimize
    };
    let mut m = MipModel::new(format!("rand{seed}"), dir);
    let mut vars = Vec::new();
    for i in 0..nbin {
        let v = m
            .add_variable(VarKind::Binary, 0.0, 1.0, format!("b{i}"))
            .unwrap();
        m.add_objective_term(v, rng.int(-9, 9) as f64).unwrap();
        vars.push(v);
    }
    for i in 0..ncont {
        let lo = rng.int(-3, 0) as f64;
        let hi = lo + rng.int(1, 5) as f64;
        let v = m
            .add_variable(VarKind::Continuous, lo, hi, format!("c{i}"))
            .unwrap();
        m.add_objective_term(v, rng.int(-9, 9) as f64).unwrap();
        vars.push(v);
    }
    for r in 0..nrows {
        let mut terms = Vec::new();
        let mut mid = 0.0;
        for &v in &vars {
            if rng.below(3) == 0 {
                continue;
            }
            let coef = rng.int(-4, 4) as f64;
            if coef == 0.0 {
                continue;
            }
            let (lo, hi) = {
                let var = m.var(v);
                (var.lower, var.upper)
            };
            mid += coef * 0.5 * (lo + hi);
            terms.push((coef, v));
        }
        if terms.is_empty() {
            continue;
        }
        let sense = match rng.below(3) {
            0 => Sense::Le,
            1 => Sense::Ge,
            _ => Sense::Eq,
        };
        let slackiness = rng.int(-2, 4) as f64;
        m.add_constraint(&terms, sense, mid.round() + slackiness, format!("r{r}"))
            .unwrap();
    }
    m
}

fn exact_config() -> SolverConfig {
    SolverConfig {
        rel_gap_tol: 1e-9,
        abs_gap_tol: 1e-9,
        ..Default::default()
    }
}

#[test]
fn oracle_equivalence_sample() {
    // The full 200-instance sweep runs in the acceptance suite; this keeps a
    // fast cross-check in the unit pipeline.
    let mut infeasible = 0;
    for seed in 0..60u64 {
        let model = random_instance(seed);
        let bb = solve(&model, &exact_config()).unwrap();
        let oracle = brute_force_oracle(&model, 20).unwrap();
        match oracle {
            OracleOutcome::Infeasible => {
                infeasible += 1;
                assert_eq!(
                    bb.status,
                    SolveStatus::Infeasible,
                    "seed {seed}: oracle infeasible, solver said {:?}",
                    bb.status
                );
            }
            OracleOutcome::Optimal { objective, .. } => {
                assert_eq!(bb.status, SolveStatus::Optimal, "seed {seed}");
                assert!(
                    (bb.objective - objective).abs() <= 1e-6,
                    "seed {seed}: bb={} oracle={}",
                    bb.objective,
                    objective
                );
                // Bound validity: the proven bound can never cut off the optimum.
                let ok = match model.direction() {
                    Direction::Maximize => bb.best_bound >= objective - 1e-6,
                    Direction::Minimize => bb.best_bound <= objective + 1e-6,
                };
                assert!(ok, "seed {seed}: bound {} vs {}", bb.best_bound, objective);
            }
        }
    }
    // The generator should produce a healthy mix, not all-infeasible.
    assert!(infeasible < 40, "degenerate corpus: {infeasible} infeasible");
}

#[test]
fn incumbent_is_feasible_and_integral() {
    for seed in 100..140u64 {
        let model = random_instance(seed);
        let bb = solve(&model, &exact_config()).unwrap();
        if let Some(values) = &bb.incumbent {
            assert!(model.max_violation(values) <= 1e-6, "seed {seed}");
            for v in model.variables() {
                if v.kind == VarKind::Binary {
                    let x = values[v.id.index()];
                    assert!((x - x.round()).abs() <= 1e-6, "seed {seed} {}", v.name);
                }
            }
        }
    }
}

#[test]
fn byte_identical_reruns() {
    for seed in [3u64, 17, 42] {
        let model = random_instance(seed);
        let a = solve(&model, &exact_config()).unwrap();
        let b = solve(&model, &exact_config()).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.nodes_explored, b.nodes_explored);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.best_bound.to_bits(), b.best_bound.to_bits());
        match (&a.incumbent, &b.incumbent) {
            (Some(x), Some(y)) => {
                assert_eq!(x.len(), y.len());
                for (xa, xb) in x.iter().zip(y.iter()) {
                    assert_eq!(xa.to_bits(), xb.to_bits());
                }
            }
            (None, None) => {}
            _ => panic!("incumbent presence differs for seed {seed}"),
        }
    }
}
