//! Bounded-variable revised simplex.
//!
//! Solves `min/max c'x  s.t.  Ax {<=,>=,=} b,  l <= x <= u` with possibly
//! infinite bounds. One slack column is appended per row, so the working
//! problem is `Ax = b` with box constraints on structural and slack columns
//! alike. The basis inverse is kept explicitly (dense) and updated in
//! product form after every pivot; the basis is refactorized from scratch
//! every [`REFACTOR_INTERVAL`] pivots to keep drift in check. Pricing is
//! Dantzig's rule, falling back to Bland's rule permanently once the
//! degenerate-pivot budget (10 x number of columns) is exhausted, which
//! guarantees termination.
//!
//! Phase 1 minimizes the sum of bound violations of the basic variables
//! starting from the all-slack basis (or a caller-supplied warm basis) and
//! transitions into phase 2 on the same basis once feasible.

use crate::model::{Direction, MipModel, Sense};

pub const REFACTOR_INTERVAL: u32 = 100;

const FEAS_TOL: f64 = 1e-7;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-8;
const DEGEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericError,
}

/// Basis snapshot: the basic column per row plus which nonbasic columns sit
/// at their upper bound. Small enough to stash per branch-and-bound node.
#[derive(Debug, Clone)]
pub struct Basis {
    pub cols: Vec<u32>,
    pub at_upper: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    /// Objective in the original model direction, including the constant.
    pub objective: f64,
    /// Values of the structural variables, indexed like the model.
    pub values: Vec<f64>,
    pub basis: Basis,
    pub iterations: usize,
}

/// Immutable LP data extracted from a [`MipModel`] once per solve tree.
#[derive(Debug, Clone)]
pub struct LpInstance {
    pub nstruct: usize,
    pub nrows: usize,
    ncols: usize,
    /// Sparse columns (structural then slack), entries as (row, coef).
    cols: Vec<Vec<(u32, f64)>>,
    /// Base bounds for all columns.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Cost in minimize form, zero on slacks.
    cost: Vec<f64>,
    rhs: Vec<f64>,
    maximize: bool,
    constant: f64,
}

impl LpInstance {
    pub fn from_model(model: &MipModel) -> Self {
        let nstruct = model.num_vars();
        let nrows = model.num_constraints();
        let ncols = nstruct + nrows;
        let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); ncols];
        let mut lower = Vec::with_capacity(ncols);
        let mut upper = Vec::with_capacity(ncols);
        for v in model.variables() {
            lower.push(v.lower);
            upper.push(v.upper);
        }
        let mut rhs = Vec::with_capacity(nrows);
        for (i, c) in model.constraints().iter().enumerate() {
            for &(coef, var) in &c.terms {
                if coef != 0.0 {
                    cols[var.index()].push((i as u32, coef));
                }
            }
            let slack = nstruct + i;
            cols[slack].push((i as u32, 1.0));
            let (lo, hi) = match c.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
            rhs.push(c.rhs);
        }
        let maximize = model.direction() == Direction::Maximize;
        let mut cost = vec![0.0; ncols];
        for (j, &c) in model.objective().iter().enumerate() {
            cost[j] = if maximize { -c } else { c };
        }
        LpInstance {
            nstruct,
            nrows,
            ncols,
            cols,
            lower,
            upper,
            cost,
            rhs,
            maximize,
            constant: model.objective_constant(),
        }
    }

    /// True when the model has any binary column marked in `binaries`.
    pub fn column(&self, j: usize) -> &[(u32, f64)] {
        &self.cols[j]
    }
}

/// Scratch state reused across solves of the same instance.
pub struct LpWorkspace {
    binv: Vec<f64>,
    xb: Vec<f64>,
    y: Vec<f64>,
    ftran: Vec<f64>,
    rhs_work: Vec<f64>,
}

impl LpWorkspace {
    pub fn new() -> Self {
        LpWorkspace {
            binv: Vec::new(),
            xb: Vec::new(),
            y: Vec::new(),
            ftran: Vec::new(),
            rhs_work: Vec::new(),
        }
    }
}

impl Default for LpWorkspace {
    fn default() -> Self {
        Self::new()
    }
}

pub struct SolveOptions<'a> {
    /// Structural bound overrides (branch-and-bound node bounds).
    pub lower: Option<&'a [f64]>,
    pub upper: Option<&'a [f64]>,
    pub iteration_limit: usize,
    pub warm_basis: Option<&'a Basis>,
}

impl<'a> Default for SolveOptions<'a> {
    fn default() -> Self {
        SolveOptions {
            lower: None,
            upper: None,
            iteration_limit: usize::MAX,
            warm_basis: None,
        }
    }
}

struct Tableau<'a> {
    inst: &'a LpInstance,
    lower: Vec<f64>,
    upper: Vec<f64>,
    m: usize,
    n: usize,
    basis: Vec<u32>,
    row_of: Vec<u32>,
    at_upper: Vec<bool>,
    binv: &'a mut Vec<f64>,
    xb: &'a mut Vec<f64>,
    pivots_since_refactor: u32,
    degenerate_pivots: usize,
    bland: bool,
}

const NOT_BASIC: u32 = u32::MAX;

impl<'a> Tableau<'a> {
    fn nonbasic_value(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.upper[j]
        } else if self.lower[j].is_finite() {
            self.lower[j]
        } else if self.upper[j].is_finite() {
            self.upper[j]
        } else {
            0.0
        }
    }

    /// Rebuilds the dense inverse from the current basis by Gauss-Jordan
    /// elimination with partial pivoting. Fails on a (near-)singular basis.
    fn refactorize(&mut self) -> Result<(), ()> {
        let m = self.m;
        let mut mat = vec![0.0; m * m];
        for (r, &col) in self.basis.iter().enumerate() {
            for &(row, coef) in self.inst.column(col as usize) {
                mat[row as usize * m + r] = coef;
            }
        }
        let binv = &mut *self.binv;
        binv.clear();
        binv.resize(m * m, 0.0);
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        for k in 0..m {
            let mut piv_row = k;
            let mut piv_val = mat[k * m + k].abs();
            for i in (k + 1)..m {
                let v = mat[i * m + k].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = i;
                }
            }
            if piv_val < 1e-11 {
                return Err(());
            }
            if piv_row != k {
                for j in 0..m {
                    mat.swap(k * m + j, piv_row * m + j);
                    binv.swap(k * m + j, piv_row * m + j);
                }
            }
            let p = mat[k * m + k];
            let inv_p = 1.0 / p;
            for j in 0..m {
                mat[k * m + j] *= inv_p;
                binv[k * m + j] *= inv_p;
            }
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = mat[i * m + k];
                if f == 0.0 {
                    continue;
                }
                for j in 0..m {
                    mat[i * m + j] -= f * mat[k * m + j];
                }
                for j in 0..m {
                    binv[i * m + j] -= f * binv[k * m + j];
                }
            }
        }
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn recompute_xb(&mut self, rhs_work: &mut Vec<f64>) {
        let m = self.m;
        rhs_work.clear();
        rhs_work.extend_from_slice(&self.inst.rhs);
        for j in 0..self.n {
            if self.row_of[j] != NOT_BASIC {
                continue;
            }
            let xj = self.nonbasic_value(j);
            if xj != 0.0 {
                for &(row, coef) in self.inst.column(j) {
                    rhs_work[row as usize] -= coef * xj;
                }
            }
        }
        for i in 0..m {
            let mut acc = 0.0;
            let row = &self.binv[i * m..(i + 1) * m];
            for (k, &r) in rhs_work.iter().enumerate() {
                if r != 0.0 {
                    acc += row[k] * r;
                }
            }
            self.xb[i] = acc;
        }
    }

    fn infeasibility(&self) -> f64 {
        let mut total = 0.0;
        for (r, &col) in self.basis.iter().enumerate() {
            let j = col as usize;
            let x = self.xb[r];
            if x < self.lower[j] - FEAS_TOL {
                total += self.lower[j] - x;
            } else if x > self.upper[j] + FEAS_TOL {
                total += x - self.upper[j];
            }
        }
        total
    }

    /// y = w' B^-1 for a per-row weight vector.
    fn btran(&self, w: &[f64], y: &mut Vec<f64>) {
        let m = self.m;
        y.clear();
        y.resize(m, 0.0);
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            let row = &self.binv[i * m..(i + 1) * m];
            for k in 0..m {
                y[k] += wi * row[k];
            }
        }
    }

    /// t = B^-1 a_j for a sparse column.
    fn ftran(&self, j: usize, t: &mut Vec<f64>) {
        let m = self.m;
        t.clear();
        t.resize(m, 0.0);
        for &(row, coef) in self.inst.column(j) {
            let r = row as usize;
            for i in 0..m {
                t[i] += coef * self.binv[i * m + r];
            }
        }
    }

    fn apply_pivot(&mut self, t: &[f64], pivot_row: usize) {
        let m = self.m;
        let piv = t[pivot_row];
        let inv = 1.0 / piv;
        {
            let row = &mut self.binv[pivot_row * m..(pivot_row + 1) * m];
            for v in row.iter_mut() {
                *v *= inv;
            }
        }
        for i in 0..m {
            if i == pivot_row {
                continue;
            }
            let f = t[i];
            if f == 0.0 {
                continue;
            }
            let (head, tail) = if i < pivot_row {
                let (a, b) = self.binv.split_at_mut(pivot_row * m);
                (&mut a[i * m..(i + 1) * m], &b[..m])
            } else {
                let (a, b) = self.binv.split_at_mut(i * m);
                (&mut b[..m], &a[pivot_row * m..(pivot_row + 1) * m])
            };
            for (hv, &pv) in head.iter_mut().zip(tail.iter()) {
                *hv -= f * pv;
            }
        }
        self.pivots_since_refactor += 1;
    }
}

/// Solves the LP. Bounds overrides replace the structural bounds; slack
/// bounds always come from the constraint senses.
pub fn solve_lp(
    inst: &LpInstance,
    opts: &SolveOptions,
    ws: &mut LpWorkspace,
) -> LpResult {
    let m = inst.nrows;
    let n = inst.ncols;

    let mut lower = inst.lower.clone();
    let mut upper = inst.upper.clone();
    if let Some(lo) = opts.lower {
        lower[..inst.nstruct].copy_from_slice(lo);
    }
    if let Some(up) = opts.upper {
        upper[..inst.nstruct].copy_from_slice(up);
    }

    let basis: Vec<u32>;
    let mut at_upper: Vec<bool>;
    match opts.warm_basis {
        Some(b) if b.cols.len() == m && b.at_upper.len() == n => {
            basis = b.cols.clone();
            at_upper = b.at_upper.clone();
            // A nonbasic column pinned at an upper bound that no longer
            // exists falls back to its lower bound.
            for j in 0..n {
                if at_upper[j] && !upper[j].is_finite() {
                    at_upper[j] = false;
                }
            }
        }
        _ => {
            basis = ((inst.nstruct as u32)..(n as u32)).collect();
            at_upper = vec![false; n];
        }
    }
    let mut row_of = vec![NOT_BASIC; n];
    for (r, &c) in basis.iter().enumerate() {
        row_of[c as usize] = r as u32;
    }

    ws.xb.clear();
    ws.xb.resize(m, 0.0);
    let (binv, xb) = (&mut ws.binv, &mut ws.xb);
    let mut tab = Tableau {
        inst,
        lower,
        upper,
        m,
        n,
        basis,
        row_of,
        at_upper,
        binv,
        xb,
        pivots_since_refactor: 0,
        degenerate_pivots: 0,
        bland: false,
    };

    if tab.refactorize().is_err() {
        return numeric_error(inst, &tab, 0);
    }
    tab.recompute_xb(&mut ws.rhs_work);

    let mut iterations = 0usize;
    let bland_threshold = 10 * n;
    let mut phase = if tab.infeasibility() > FEAS_TOL { 1 } else { 2 };
    let mut w = vec![0.0; m];

    let trace = std::env::var("PNN_LP_TRACE").is_ok();
    loop {
        if trace {
            eprintln!(
                "[lp] iter {iterations} phase {phase} infeas {:.6e} basis {:?} xb {:?}",
                tab.infeasibility(),
                tab.basis,
                tab.xb
            );
        }
        if iterations >= opts.iteration_limit {
            return finish(inst, &tab, LpStatus::IterationLimit, iterations);
        }
        iterations += 1;

        if tab.pivots_since_refactor >= REFACTOR_INTERVAL {
            if tab.refactorize().is_err() {
                return numeric_error(inst, &tab, iterations);
            }
            tab.recompute_xb(&mut ws.rhs_work);
        }

        if phase == 1 && tab.infeasibility() <= FEAS_TOL {
            phase = 2;
        }

        // Pricing weights: phase 1 uses the infeasibility gradient of the
        // basic variables, phase 2 the basic objective costs.
        for i in 0..m {
            let j = tab.basis[i] as usize;
            w[i] = if phase == 1 {
                let x = tab.xb[i];
                if x < tab.lower[j] - FEAS_TOL {
                    -1.0
                } else if x > tab.upper[j] + FEAS_TOL {
                    1.0
                } else {
                    0.0
                }
            } else {
                inst.cost[j]
            };
        }
        tab.btran(&w, &mut ws.y);

        // Entering column: most violating reduced cost (Dantzig), or the
        // lowest-index violating column once Bland's rule is engaged.
        let mut entering: Option<(usize, i8, f64)> = None;
        for j in 0..n {
            if tab.row_of[j] != NOT_BASIC {
                continue;
            }
            if tab.lower[j] == tab.upper[j] {
                continue; // fixed, can never move
            }
            let cost_j = if phase == 1 { 0.0 } else { inst.cost[j] };
            let mut d = cost_j;
            for &(row, coef) in inst.column(j) {
                d -= ws.y[row as usize] * coef;
            }
            let at_up = tab.at_upper[j];
            let lo_finite = tab.lower[j].is_finite();
            let up_finite = tab.upper[j].is_finite();
            let free = !at_up && !lo_finite && !up_finite;
            // Direction of travel that improves the (phase) objective.
            let dir: i8 = if free {
                if d < -DUAL_TOL {
                    1
                } else if d > DUAL_TOL {
                    -1
                } else {
                    0
                }
            } else if at_up || (!lo_finite && up_finite) {
                if d > DUAL_TOL {
                    -1
                } else {
                    0
                }
            } else if d < -DUAL_TOL {
                1
            } else {
                0
            };
            if dir == 0 {
                continue;
            }
            // Columns are scanned in index order, so keeping strict
            // improvement only makes ties resolve to the lowest index.
            let score = d.abs();
            match entering {
                None => entering = Some((j, dir, score)),
                Some((_, _, bscore)) => {
                    if !tab.bland && score > bscore {
                        entering = Some((j, dir, score));
                    }
                }
            }
            if tab.bland && entering.is_some() {
                // Bland: the lowest violating index wins outright.
                break;
            }
        }

        if trace {
            eprintln!("[lp]   entering {:?}", entering);
        }
        let (q, dir, _) = match entering {
            Some(e) => e,
            None => {
                if phase == 1 {
                    if tab.infeasibility() > FEAS_TOL {
                        return finish(inst, &tab, LpStatus::Infeasible, iterations);
                    }
                    phase = 2;
                    continue;
                }
                return finish(inst, &tab, LpStatus::Optimal, iterations);
            }
        };

        tab.ftran(q, &mut ws.ftran);
        let t = &ws.ftran;
        let dirf = dir as f64;

        // Ratio test: the entering column moves theta >= 0 in `dirf`, each
        // basic variable i moves by -dirf * t[i] * theta.
        let own_range = tab.upper[q] - tab.lower[q];
        let mut theta = if own_range.is_finite() { own_range } else { f64::INFINITY };
        let mut leaving: Option<(usize, bool)> = None; // (row, leaves at upper)
        let mut best_piv = 0.0;
        for i in 0..m {
            let ti = t[i];
            if ti.abs() <= PIVOT_TOL {
                continue;
            }
            let jb = tab.basis[i] as usize;
            let movement = -dirf * ti;
            let x = tab.xb[i];
            let lb = tab.lower[jb];
            let ub = tab.upper[jb];
            // An infeasible basic constrains the step only while moving
            // toward its violated bound (it stops exactly there); moving away
            // just worsens the phase-1 objective, which pricing accounts for.
            let (limit, hits_upper) = if movement > 0.0 {
                if x < lb - FEAS_TOL {
                    ((lb - x) / movement, false)
                } else if x > ub + FEAS_TOL {
                    continue;
                } else if ub.is_finite() {
                    (((ub - x) / movement).max(0.0), true)
                } else {
                    continue;
                }
            } else if x > ub + FEAS_TOL {
                ((ub - x) / movement, true)
            } else if x < lb - FEAS_TOL {
                continue;
            } else if lb.is_finite() {
                (((lb - x) / movement).max(0.0), false)
            } else {
                continue;
            };
            let strictly_better = limit < theta - 1e-12;
            let tied = !strictly_better && limit < theta + 1e-12;
            let wins_tie = if tab.bland {
                // Bland: lowest leaving variable index among ties.
                leaving
                    .map(|(r, _)| tab.basis[i] < tab.basis[r])
                    .unwrap_or(true)
            } else {
                // Numerical preference: largest pivot magnitude among ties.
                ti.abs() > best_piv
            };
            if strictly_better || (tied && wins_tie) {
                theta = theta.min(limit);
                leaving = Some((i, hits_upper));
                best_piv = ti.abs();
            }
        }

        if trace {
            eprintln!("[lp]   q={q} dir={dir} theta={theta:.6} leaving={leaving:?}");
        }
        if theta.is_infinite() {
            if phase == 1 {
                return numeric_error(inst, &tab, iterations);
            }
            return finish(inst, &tab, LpStatus::Unbounded, iterations);
        }

        if theta <= DEGEN_TOL {
            tab.degenerate_pivots += 1;
            if tab.degenerate_pivots > bland_threshold {
                tab.bland = true;
            }
        }

        match leaving {
            None => {
                // Bound flip: the entering column traverses its whole range.
                for i in 0..m {
                    tab.xb[i] += -dirf * t[i] * theta;
                }
                tab.at_upper[q] = !tab.at_upper[q];
            }
            Some((r, hits_upper)) => {
                let entering_value = tab.nonbasic_value(q) + dirf * theta;
                for i in 0..m {
                    tab.xb[i] += -dirf * t[i] * theta;
                }
                let leaving_col = tab.basis[r] as usize;
                tab.row_of[leaving_col] = NOT_BASIC;
                tab.at_upper[leaving_col] = hits_upper && tab.upper[leaving_col].is_finite();
                tab.basis[r] = q as u32;
                tab.row_of[q] = r as u32;
                tab.at_upper[q] = false;
                tab.apply_pivot(t, r);
                tab.xb[r] = entering_value;
            }
        }
    }
}

fn assemble_values(inst: &LpInstance, tab: &Tableau) -> Vec<f64> {
    let mut vals = vec![0.0; inst.nstruct];
    for j in 0..inst.nstruct {
        let r = tab.row_of[j];
        vals[j] = if r == NOT_BASIC {
            tab.nonbasic_value(j)
        } else {
            tab.xb[r as usize]
        };
    }
    vals
}

fn finish(inst: &LpInstance, tab: &Tableau, status: LpStatus, iterations: usize) -> LpResult {
    let values = assemble_values(inst, tab);
    let mut obj = 0.0;
    for (j, v) in values.iter().enumerate() {
        obj += inst.cost[j] * v;
    }
    if inst.maximize {
        obj = -obj;
    }
    obj += inst.constant;
    LpResult {
        status,
        objective: obj,
        values,
        basis: Basis {
            cols: tab.basis.clone(),
            at_upper: tab.at_upper.clone(),
        },
        iterations,
    }
}

fn numeric_error(inst: &LpInstance, tab: &Tableau, iterations: usize) -> LpResult {
    LpResult {
        status: LpStatus::NumericError,
        objective: f64::NAN,
        values: vec![0.0; inst.nstruct],
        basis: Basis {
            cols: tab.basis.clone(),
            at_upper: tab.at_upper.clone(),
        },
        iterations,
    }
}
