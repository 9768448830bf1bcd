//! Embedded branch-and-bound over the LP relaxation.
//!
//! Nodes are selected best-bound-first (depth-first available for memory),
//! branching is on the most fractional binary with ties broken by lowest
//! variable id, and pruning uses the proven LP bound against the incumbent.
//! Everything is deterministic for a fixed `(model, config, seed)`: node ids
//! are assigned in creation order and every tie-break is by id. No cutting
//! planes and no presolve beyond dropping fixed variables and empty
//! constraints; correctness and determinism are preferred over speed.

use crate::model::{Direction, MipModel, VarKind};
use crate::simplex::{solve_lp, Basis, LpInstance, LpStatus, LpWorkspace, SolveOptions};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;
use thiserror::Error;

/// Binaries are accepted as integral within this tolerance.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Incumbents must satisfy every constraint within this tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// How often the rounding dive heuristic runs (in processed nodes).
const DIVE_INTERVAL: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branching {
    MostFractional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Search {
    BestBound,
    DepthFirst,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub time_limit_s: f64,
    pub rel_gap_tol: f64,
    pub abs_gap_tol: f64,
    pub node_limit: usize,
    pub branching: Branching,
    pub search: Search,
    pub seed: u64,
    /// Optional full assignment used as the initial incumbent after a
    /// feasibility check; silently ignored when infeasible.
    pub warm_start: Option<Vec<f64>>,
    /// Deterministic cap on simplex iterations per LP solve. Nodes whose
    /// relaxation hits the cap keep their parent bound and are not expanded.
    pub lp_iteration_limit: Option<usize>,
    /// Skip LP solving entirely for models with more rows than this; the
    /// bound then comes from variable bounds alone.
    pub lp_row_limit: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            time_limit_s: 3600.0,
            rel_gap_tol: 1e-4,
            abs_gap_tol: 1e-9,
            node_limit: 50_000_000,
            branching: Branching::MostFractional,
            search: Search::BestBound,
            seed: 0,
            warm_start: None,
            lp_iteration_limit: None,
            lp_row_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    FeasibleTimeLimit,
    Infeasible,
    Unbounded,
    NodeLimit,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Best feasible assignment found, indexed by `VarId::index`.
    pub incumbent: Option<Vec<f64>>,
    /// Objective of the incumbent (NaN when absent).
    pub objective: f64,
    /// Proven bound on the optimum.
    pub best_bound: f64,
    /// `|bound - objective| / max(1e-10, |objective|)`.
    pub gap: f64,
    pub nodes_explored: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
}

struct Node {
    id: u64,
    bound: f64,
    /// Accumulated (var, lower, upper) overrides from the root.
    changes: Vec<(u32, f64, f64)>,
    basis: Option<Basis>,
}

struct HeapEntry {
    key: f64,
    id: u64,
    node: Node,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.id == other.id
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Larger key first; ties resolve to the lowest node id.
        self.key
            .total_cmp(&other.key)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct Searcher<'a> {
    model: &'a MipModel,
    inst: LpInstance,
    ws: LpWorkspace,
    maximize: bool,
    binaries: Vec<usize>,
    base_lower: Vec<f64>,
    base_upper: Vec<f64>,
    cfg: &'a SolverConfig,
    incumbent: Option<Vec<f64>>,
    incumbent_obj: f64,
    heap: BinaryHeap<HeapEntry>,
    stack: Vec<Node>,
    stalled_bound: f64,
    resource_limited: bool,
    next_id: u64,
    nodes: u64,
    lower_buf: Vec<f64>,
    upper_buf: Vec<f64>,
}

impl<'a> Searcher<'a> {
    fn better(&self, a: f64, b: f64) -> bool {
        if self.maximize {
            a > b
        } else {
            a < b
        }
    }

    /// Bound from variable bounds alone; valid whenever the LP is skipped.
    fn trivial_bound(&self) -> f64 {
        let mut total = self.model.objective_constant();
        for v in self.model.variables() {
            let c = self.model.objective()[v.id.index()];
            if c == 0.0 {
                continue;
            }
            total += if self.maximize {
                (c * v.upper).max(c * v.lower)
            } else {
                (c * v.upper).min(c * v.lower)
            };
        }
        total
    }

    fn node_bounds(&mut self, node: &Node) {
        self.lower_buf.clear();
        self.lower_buf.extend_from_slice(&self.base_lower);
        self.upper_buf.clear();
        self.upper_buf.extend_from_slice(&self.base_upper);
        for &(var, lo, up) in &node.changes {
            self.lower_buf[var as usize] = lo;
            self.upper_buf[var as usize] = up;
        }
    }

    fn try_incumbent(&mut self, values: &[f64]) -> bool {
        let mut snapped = values.to_vec();
        for &b in &self.binaries {
            let r = snapped[b].round();
            if (snapped[b] - r).abs() > INTEGRALITY_TOL {
                return false;
            }
            snapped[b] = r.clamp(0.0, 1.0);
        }
        if self.model.max_violation(&snapped) > FEASIBILITY_TOL {
            return false;
        }
        let obj = self.model.objective_value(&snapped);
        if self.incumbent.is_none() || self.better(obj, self.incumbent_obj) {
            self.incumbent = Some(snapped);
            self.incumbent_obj = obj;
            return true;
        }
        false
    }

    fn push_node(&mut self, node: Node) {
        match self.cfg.search {
            Search::BestBound => {
                let key = if self.maximize { node.bound } else { -node.bound };
                self.heap.push(HeapEntry {
                    key,
                    id: node.id,
                    node,
                });
            }
            Search::DepthFirst => self.stack.push(node),
        }
    }

    fn pop_node(&mut self) -> Option<Node> {
        match self.cfg.search {
            Search::BestBound => self.heap.pop().map(|e| e.node),
            Search::DepthFirst => self.stack.pop(),
        }
    }

    fn open_bound(&self) -> f64 {
        let mut best = self.stalled_bound;
        match self.cfg.search {
            Search::BestBound => {
                for e in self.heap.iter() {
                    if self.better(e.node.bound, best) {
                        best = e.node.bound;
                    }
                }
            }
            Search::DepthFirst => {
                for n in self.stack.iter() {
                    if self.better(n.bound, best) {
                        best = n.bound;
                    }
                }
            }
        }
        best
    }

    /// Rounds the binaries of an LP solution, fixes them, and re-solves the
    /// residual LP once. Cheap and deterministic.
    fn dive(&mut self, relaxation_values: &[f64]) {
        if self.binaries.is_empty() {
            return;
        }
        let mut lo = self.base_lower.clone();
        let mut up = self.base_upper.clone();
        for &b in &self.binaries {
            let r = relaxation_values[b].round().clamp(0.0, 1.0);
            lo[b] = r;
            up[b] = r;
        }
        let res = solve_lp(
            &self.inst,
            &SolveOptions {
                lower: Some(&lo),
                upper: Some(&up),
                iteration_limit: self.cfg.lp_iteration_limit.unwrap_or(usize::MAX),
                warm_basis: None,
            },
            &mut self.ws,
        );
        if res.status == LpStatus::Optimal {
            self.try_incumbent(&res.values);
        }
    }
}

/// Solves the model by branch-and-bound. Deterministic for fixed inputs.
pub fn solve(model: &MipModel, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    if !(config.rel_gap_tol >= 0.0 && config.rel_gap_tol < 1.0) {
        return Err(SolveError::InvalidConfig(format!(
            "rel_gap_tol must be in [0, 1), got {}",
            config.rel_gap_tol
        )));
    }
    if config.abs_gap_tol < 0.0 {
        return Err(SolveError::InvalidConfig("abs_gap_tol must be >= 0".into()));
    }
    if config.time_limit_s <= 0.0 {
        return Err(SolveError::InvalidConfig("time_limit_s must be > 0".into()));
    }

    let start = Instant::now();
    let maximize = model.direction() == Direction::Maximize;
    let binaries: Vec<usize> = model
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.id.index())
        .collect();

    let inst = LpInstance::from_model(model);
    let base_lower: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
    let base_upper: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();

    let mut s = Searcher {
        model,
        inst,
        ws: LpWorkspace::new(),
        maximize,
        binaries,
        base_lower,
        base_upper,
        cfg: config,
        incumbent: None,
        incumbent_obj: f64::NAN,
        heap: BinaryHeap::new(),
        stack: Vec::new(),
        stalled_bound: if maximize {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        },
        resource_limited: false,
        next_id: 1,
        nodes: 0,
        lower_buf: Vec::new(),
        upper_buf: Vec::new(),
    };

    if let Some(ws_vals) = &config.warm_start {
        if ws_vals.len() == model.num_vars() {
            s.try_incumbent(ws_vals);
        }
    }

    let lp_iteration_limit = config.lp_iteration_limit.unwrap_or(usize::MAX);
    let skip_lp = config
        .lp_row_limit
        .map(|cap| model.num_constraints() > cap)
        .unwrap_or(false);

    if skip_lp {
        s.stalled_bound = s.trivial_bound();
        s.resource_limited = true;
    } else {
        s.push_node(Node {
            id: 0,
            bound: s.trivial_bound(),
            changes: Vec::new(),
            basis: None,
        });
    }

    let mut status: Option<SolveStatus> = None;

    while let Some(node) = s.pop_node() {
        // A node cannot beat the incumbent: prune by bound.
        if s.incumbent.is_some() {
            let slack = config
                .abs_gap_tol
                .max(s.incumbent_obj.abs() * config.rel_gap_tol);
            let prunable = if s.maximize {
                node.bound <= s.incumbent_obj + slack
            } else {
                node.bound >= s.incumbent_obj - slack
            };
            if prunable {
                continue;
            }
        }
        if s.nodes >= config.node_limit as u64 {
            s.push_node(node);
            status = Some(SolveStatus::NodeLimit);
            break;
        }
        if start.elapsed().as_secs_f64() > config.time_limit_s {
            s.push_node(node);
            status = Some(SolveStatus::FeasibleTimeLimit);
            break;
        }
        s.nodes += 1;

        s.node_bounds(&node);
        let lower = std::mem::take(&mut s.lower_buf);
        let upper = std::mem::take(&mut s.upper_buf);
        let mut res = solve_lp(
            &s.inst,
            &SolveOptions {
                lower: Some(&lower),
                upper: Some(&upper),
                iteration_limit: lp_iteration_limit,
                warm_basis: node.basis.as_ref(),
            },
            &mut s.ws,
        );
        if res.status == LpStatus::NumericError && node.basis.is_some() {
            // Retry once from scratch before giving up on the node.
            res = solve_lp(
                &s.inst,
                &SolveOptions {
                    lower: Some(&lower),
                    upper: Some(&upper),
                    iteration_limit: lp_iteration_limit,
                    warm_basis: None,
                },
                &mut s.ws,
            );
        }
        s.lower_buf = lower;
        s.upper_buf = upper;

        match res.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if node.id == 0 {
                    // Unbounded relaxation at the root with no incumbent to
                    // contradict it: report unbounded.
                    return Ok(SolveResult {
                        status: SolveStatus::Unbounded,
                        incumbent: None,
                        objective: f64::NAN,
                        best_bound: if maximize {
                            f64::INFINITY
                        } else {
                            f64::NEG_INFINITY
                        },
                        gap: f64::INFINITY,
                        nodes_explored: s.nodes,
                        wall_time_s: start.elapsed().as_secs_f64(),
                    });
                }
                // Keep the parent bound; conservatively treat as stalled.
                if s.better(node.bound, s.stalled_bound) {
                    s.stalled_bound = node.bound;
                }
                s.resource_limited = true;
                continue;
            }
            LpStatus::IterationLimit | LpStatus::NumericError => {
                if s.better(node.bound, s.stalled_bound) {
                    s.stalled_bound = node.bound;
                }
                s.resource_limited = true;
                continue;
            }
            LpStatus::Optimal => {}
        }

        let node_bound = res.objective;
        if s.incumbent.is_some() {
            let slack = config
                .abs_gap_tol
                .max(s.incumbent_obj.abs() * config.rel_gap_tol);
            let prunable = if s.maximize {
                node_bound <= s.incumbent_obj + slack
            } else {
                node_bound >= s.incumbent_obj - slack
            };
            if prunable {
                continue;
            }
        }

        // Integral relaxation: the node is solved.
        let frac_var = most_fractional(&s.binaries, &res.values);
        match frac_var {
            None => {
                s.try_incumbent(&res.values);
                continue;
            }
            Some(branch_var) => {
                if s.nodes == 1 || s.nodes % DIVE_INTERVAL == 0 {
                    s.dive(&res.values);
                }
                let mut lo_changes = node.changes.clone();
                lo_changes.push((branch_var as u32, 0.0, 0.0));
                let mut hi_changes = node.changes;
                hi_changes.push((branch_var as u32, 1.0, 1.0));
                let lo_id = s.next_id;
                let hi_id = s.next_id + 1;
                s.next_id += 2;
                let basis = Some(res.basis);
                s.push_node(Node {
                    id: lo_id,
                    bound: node_bound,
                    changes: lo_changes,
                    basis: basis.clone(),
                });
                s.push_node(Node {
                    id: hi_id,
                    bound: node_bound,
                    changes: hi_changes,
                    basis,
                });
            }
        }
    }

    let open = s.open_bound();
    let best_bound = match (&s.incumbent, open.is_finite()) {
        (Some(_), true) => {
            if s.better(open, s.incumbent_obj) {
                open
            } else {
                s.incumbent_obj
            }
        }
        (Some(_), false) => {
            if (s.heap.is_empty() && s.stack.is_empty()) && !s.resource_limited {
                s.incumbent_obj
            } else {
                open
            }
        }
        (None, _) => open,
    };

    let status = match status {
        Some(st) => st,
        None => {
            if s.incumbent.is_some() {
                let gap_now = (best_bound - s.incumbent_obj).abs()
                    / f64::max(1e-10, s.incumbent_obj.abs());
                if !s.resource_limited || gap_now <= config.rel_gap_tol {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::FeasibleTimeLimit
                }
            } else if s.resource_limited {
                SolveStatus::FeasibleTimeLimit
            } else {
                SolveStatus::Infeasible
            }
        }
    };

    let (objective, gap) = match &s.incumbent {
        Some(_) => {
            let g = (best_bound - s.incumbent_obj).abs()
                / f64::max(1e-10, s.incumbent_obj.abs());
            (s.incumbent_obj, g)
        }
        None => (f64::NAN, f64::INFINITY),
    };

    Ok(SolveResult {
        status,
        incumbent: s.incumbent,
        objective,
        best_bound,
        gap,
        nodes_explored: s.nodes,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn most_fractional(binaries: &[usize], values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &b in binaries {
        let x = values[b];
        let dist = (x - x.round()).abs();
        if dist <= INTEGRALITY_TOL {
            continue;
        }
        match best {
            None => best = Some((b, dist)),
            Some((_, bd)) => {
                if dist > bd {
                    best = Some((b, dist));
                }
            }
        }
    }
    best.map(|(b, _)| b)
}
