//! In-memory representation of a mixed-integer linear program.
//!
//! A [`MipModel`] is a flat list of variables and constraints plus a linear
//! objective. It is deliberately solver-agnostic: the embedded solver in
//! [`crate::branch_bound`], the brute-force oracle, the MPS writer and the
//! external-solver bridge all consume the same structure. Construction is
//! single-threaded per model; a completed model is immutable and can be
//! shared freely.

use std::collections::HashMap;
use thiserror::Error;

/// Maximum accepted variable/constraint name length.
pub const MAX_NAME_LEN: usize = 255;

/// Opaque handle to a registered variable.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub(crate) u32);

impl VarId {
    /// Position of the variable in registration order.
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Opaque handle to a registered constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConstraintId(pub(crate) u32);

impl ConstraintId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

/// Constraint sense: `<=`, `>=` or `=`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

/// A registered decision variable.
#[derive(Debug, Clone)]
pub struct Variable {
    pub id: VarId,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub name: String,
}

/// A linear constraint `sum(coef * var) sense rhs`.
///
/// Terms are stored merged: each variable appears at most once.
#[derive(Debug, Clone)]
pub struct LinearConstraint {
    pub terms: Vec<(f64, VarId)>,
    pub sense: Sense,
    pub rhs: f64,
    pub name: String,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("invalid name `{0}`: names must be non-empty, at most {MAX_NAME_LEN} chars, without whitespace")]
    InvalidName(String),
    #[error("invalid bounds [{lower}, {upper}] for `{name}`")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("binary variable `{0}` must have bounds [0, 1]")]
    BinaryBounds(String),
    #[error("variable id {0:?} is not registered in this model")]
    UnregisteredVariable(VarId),
    #[error("non-finite coefficient for variable `{0}`")]
    NonFiniteCoefficient(String),
    #[error("non-finite right-hand side in constraint `{0}`")]
    NonFiniteRhs(String),
}

/// Solver-agnostic MIP: variables, constraints, linear objective.
#[derive(Debug, Clone)]
pub struct MipModel {
    name: String,
    direction: Direction,
    variables: Vec<Variable>,
    constraints: Vec<LinearConstraint>,
    objective: Vec<f64>,
    objective_constant: f64,
    names: HashMap<String, VarId>,
}

impl MipModel {
    pub fn new(name: impl Into<String>, direction: Direction) -> Self {
        MipModel {
            name: name.into(),
            direction,
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            objective_constant: 0.0,
            names: HashMap::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.index()]
    }

    /// Looks a variable up by its registered name.
    pub fn var_by_name(&self, name: &str) -> Option<&Variable> {
        self.names.get(name).map(|id| &self.variables[id.index()])
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    /// Objective coefficient per variable, indexed by `VarId::index`.
    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    /// Registers a variable and returns its stable handle.
    pub fn add_variable(
        &mut self,
        kind: VarKind,
        lower: f64,
        upper: f64,
        name: impl Into<String>,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        if name.is_empty() || name.len() > MAX_NAME_LEN || name.contains(char::is_whitespace) {
            return Err(ModelError::InvalidName(name));
        }
        if self.names.contains_key(&name) {
            return Err(ModelError::DuplicateName(name));
        }
        match kind {
            VarKind::Binary => {
                if lower != 0.0 || upper != 1.0 {
                    return Err(ModelError::BinaryBounds(name));
                }
            }
            VarKind::Continuous => {
                // Infinite bounds are fine for continuous variables, NaN is not.
                if lower.is_nan() || upper.is_nan() || lower > upper {
                    return Err(ModelError::InvalidBounds { name, lower, upper });
                }
            }
        }
        let id = VarId(self.variables.len() as u32);
        self.variables.push(Variable {
            id,
            kind,
            lower,
            upper,
            name: name.clone(),
        });
        self.objective.push(0.0);
        self.names.insert(name, id);
        Ok(id)
    }

    /// Appends a constraint. Coefficients of repeated variables are merged.
    pub fn add_constraint(
        &mut self,
        terms: &[(f64, VarId)],
        sense: Sense,
        rhs: f64,
        name: impl Into<String>,
    ) -> Result<ConstraintId, ModelError> {
        let name = name.into();
        if name.is_empty() || name.len() > MAX_NAME_LEN || name.contains(char::is_whitespace) {
            return Err(ModelError::InvalidName(name));
        }
        if !rhs.is_finite() {
            return Err(ModelError::NonFiniteRhs(name));
        }
        let merged = self.merge_terms(terms)?;
        let id = ConstraintId(self.constraints.len() as u32);
        self.constraints.push(LinearConstraint {
            terms: merged,
            sense,
            rhs,
            name,
        });
        Ok(id)
    }

    /// Adds `coef * var` to the objective (accumulates on repeated calls).
    pub fn add_objective_term(&mut self, var: VarId, coef: f64) -> Result<(), ModelError> {
        self.check_registered(var)?;
        if !coef.is_finite() {
            return Err(ModelError::NonFiniteCoefficient(
                self.var(var).name.clone(),
            ));
        }
        self.objective[var.index()] += coef;
        Ok(())
    }

    pub fn add_objective_constant(&mut self, value: f64) {
        self.objective_constant += value;
    }

    /// Evaluates the objective at a full assignment (indexed by `VarId::index`).
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        let mut total = self.objective_constant;
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                total += c * values[j];
            }
        }
        total
    }

    /// Largest constraint/bound violation of an assignment, for feasibility checks.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for v in &self.variables {
            let x = values[v.id.index()];
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|(a, v)| a * values[v.index()]).sum();
            let viol = match c.sense {
                Sense::Le => lhs - c.rhs,
                Sense::Ge => c.rhs - lhs,
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    fn check_registered(&self, var: VarId) -> Result<(), ModelError> {
        if var.index() >= self.variables.len() {
            return Err(ModelError::UnregisteredVariable(var));
        }
        Ok(())
    }

    fn merge_terms(&self, terms: &[(f64, VarId)]) -> Result<Vec<(f64, VarId)>, ModelError> {
        let mut acc: HashMap<VarId, f64> = HashMap::with_capacity(terms.len());
        let mut order: Vec<VarId> = Vec::with_capacity(terms.len());
        for &(coef, var) in terms {
            self.check_registered(var)?;
            if !coef.is_finite() {
                return Err(ModelError::NonFiniteCoefficient(
                    self.var(var).name.clone(),
                ));
            }
            match acc.entry(var) {
                std::collections::hash_map::Entry::Occupied(mut e) => {
                    *e.get_mut() += coef;
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(coef);
                    order.push(var);
                }
            }
        }
        Ok(order.into_iter().map(|v| (acc[&v], v)).collect())
    }
}
