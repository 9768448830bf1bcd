//! Translation of a network architecture plus training data into a
//! mixed-integer program.
//!
//! Per sample `i`, hidden unit `k`, layer `l`, a binary `h_i_k_l` carries the
//! unit's activation, pinned by paired big-M constraints around the
//! pre-activation. Bi-linear products between weights and previous-layer
//! activations are linearized through auxiliary `z` variables. The weights
//! `alpha`/`beta` are shared across samples. Prescription mode adds binary
//! output units with an exactly-one constraint per sample and maximizes the
//! counterfactual-score-weighted assignment; prediction mode pins continuous
//! outputs to the linear readout and minimizes a piecewise-linear surrogate
//! of the soft-max negative log-likelihood with diversifying constraints.

use crate::types::{Architecture, CounterfactualScores, Dataset, NetworkMode, NetworkWeights};
use ndarray::Array2;
use pnn_mip::{Direction, MipModel, Sense, VarId, VarKind};
use thiserror::Error;

/// Weights whose magnitude exceeds this count as nonzero for the L0 penalty.
pub const L0_ACTIVATION_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("{0}")]
    Invalid(String),
    #[error("feature {column} has unbounded range; big-M needs finite bounds")]
    UnboundedFeature { column: usize },
    #[error("loss `{kind}` requires {missing}")]
    MissingLossInput { kind: String, missing: String },
    #[error("label {label} outside [0, {classes}) at row {row}")]
    LabelOutOfRange {
        label: usize,
        classes: usize,
        row: usize,
    },
    #[error("scores shape {found:?} does not match n={n}, T={t}")]
    ScoreShape {
        found: (usize, usize),
        n: usize,
        t: usize,
    },
    #[error(transparent)]
    Model(#[from] pnn_mip::ModelError),
}

/// Strict-inequality margin and per-layer big-M constants.
#[derive(Debug, Clone)]
pub struct BigMConfig {
    /// Margin enforcing the strict side of the activation indicator.
    pub epsilon: f64,
    /// Valid pre-activation magnitude bound per layer, length L+1.
    pub layer_m: Vec<f64>,
    pub integrality_tol: f64,
}

impl BigMConfig {
    /// Builds per-layer constants from the architecture and bounds. The
    /// default margin is 1e-4, raised when the invariant
    /// `epsilon > 10 * integrality_tol * max(layer_m)` would fail.
    pub fn for_network(
        arch: &Architecture,
        alpha_bounds: (f64, f64),
        beta_bounds: (f64, f64),
        feature_bounds: &[(f64, f64)],
    ) -> Result<Self, FormulationError> {
        let mut layer_m = Vec::with_capacity(arch.hidden_layers + 1);
        for layer in 0..=arch.hidden_layers {
            layer_m.push(compute_big_m(
                arch,
                alpha_bounds,
                beta_bounds,
                feature_bounds,
                layer,
            )?);
        }
        let integrality_tol = 1e-6;
        let max_m = layer_m.iter().cloned().fold(0.0, f64::max);
        let epsilon = f64::max(1e-4, 20.0 * integrality_tol * max_m);
        let cfg = BigMConfig {
            epsilon,
            layer_m,
            integrality_tol,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), FormulationError> {
        let max_m = self.layer_m.iter().cloned().fold(0.0, f64::max);
        if !(self.epsilon > 10.0 * self.integrality_tol * max_m) {
            return Err(FormulationError::Invalid(format!(
                "epsilon {} must exceed 10 * {} * {}",
                self.epsilon, self.integrality_tol, max_m
            )));
        }
        Ok(())
    }
}

/// Valid bound on the pre-activation magnitude entering `layer`.
///
/// Layer 0 sees the raw features; deeper layers see 0/1 activations, so the
/// bound is the weight box times the fan-in plus the bias box.
pub fn compute_big_m(
    arch: &Architecture,
    alpha_bounds: (f64, f64),
    beta_bounds: (f64, f64),
    feature_bounds: &[(f64, f64)],
    layer: usize,
) -> Result<f64, FormulationError> {
    let alpha_abs = alpha_bounds.0.abs().max(alpha_bounds.1.abs());
    let beta_abs = beta_bounds.0.abs().max(beta_bounds.1.abs());
    if layer == 0 {
        let mut total = beta_abs;
        for (column, &(lo, hi)) in feature_bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(FormulationError::UnboundedFeature { column });
            }
            total += alpha_abs * lo.abs().max(hi.abs());
        }
        Ok(total)
    } else {
        Ok(arch.width as f64 * alpha_abs + beta_abs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Dr,
    Ipw,
    Dm,
    Nll,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Dr => "dr",
            LossKind::Ipw => "ipw",
            LossKind::Dm => "dm",
            LossKind::Nll => "nll",
        }
    }
}

/// Objective specification: which estimator feeds the coefficients, or the
/// labels for prediction, plus an optional baseline policy to compare
/// against.
#[derive(Debug, Clone)]
pub struct LossSpec {
    pub kind: LossKind,
    pub scores: Option<CounterfactualScores>,
    pub labels: Option<Vec<usize>>,
    pub baseline_policy: Option<Vec<usize>>,
}

impl LossSpec {
    pub fn counterfactual(kind: LossKind, scores: CounterfactualScores) -> Self {
        assert!(kind != LossKind::Nll, "use LossSpec::nll for prediction");
        LossSpec {
            kind,
            scores: Some(scores),
            labels: None,
            baseline_policy: None,
        }
    }

    pub fn nll(labels: Vec<usize>) -> Self {
        LossSpec {
            kind: LossKind::Nll,
            scores: None,
            labels: None,
            baseline_policy: None,
        }
        .with_labels(labels)
    }

    fn with_labels(mut self, labels: Vec<usize>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn with_baseline(mut self, baseline: Vec<usize>) -> Self {
        self.baseline_policy = Some(baseline);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegKind {
    None,
    L0,
    L1,
}

/// Weight-penalty specification; `lambda == 0` if and only if `kind == None`.
#[derive(Debug, Clone, Copy)]
pub struct RegularizerSpec {
    pub kind: RegKind,
    pub lambda: f64,
}

impl RegularizerSpec {
    pub fn none() -> Self {
        RegularizerSpec {
            kind: RegKind::None,
            lambda: 0.0,
        }
    }

    pub fn new(kind: RegKind, lambda: f64) -> Result<Self, FormulationError> {
        if lambda < 0.0 {
            return Err(FormulationError::Invalid(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        match kind {
            RegKind::None if lambda != 0.0 => Err(FormulationError::Invalid(
                "lambda must be 0 when no regularizer is chosen".into(),
            )),
            RegKind::L0 | RegKind::L1 if lambda == 0.0 => Ok(RegularizerSpec::none()),
            _ => Ok(RegularizerSpec { kind, lambda }),
        }
    }
}

pub fn alpha_name(layer: usize, from: usize, to: usize) -> String {
    format!("alpha_{from}_{to}_{layer}")
}

pub fn beta_name(layer: usize, unit: usize) -> String {
    format!("beta_{unit}_{layer}")
}

pub fn h_name(sample: usize, unit: usize, layer: usize) -> String {
    format!("h_{sample}_{unit}_{layer}")
}

pub fn z_name(sample: usize, from: usize, to: usize, layer: usize) -> String {
    format!("z_{sample}_{from}_{to}_{layer}")
}

/// The assembled program plus handles to every structured variable group.
#[derive(Debug)]
pub struct Formulation {
    pub model: MipModel,
    pub arch: Architecture,
    pub bigm: BigMConfig,
    pub n: usize,
    features: Array2<f64>,
    treatments: Vec<usize>,
    outcomes: Vec<f64>,
    pub alpha_bounds: (f64, f64),
    pub beta_bounds: (f64, f64),
    /// [d][k]
    pub input_alpha: Vec<Vec<VarId>>,
    /// [l-1][k_prev][k]
    pub hidden_alpha: Vec<Vec<Vec<VarId>>>,
    /// [k_prev][t]
    pub output_alpha: Vec<Vec<VarId>>,
    /// [l][unit]
    pub beta: Vec<Vec<VarId>>,
    /// [l][i][k] hidden activation binaries
    pub hidden_h: Vec<Vec<Vec<VarId>>>,
    /// [i][t] output units (binary for prescription, continuous otherwise)
    pub output_h: Vec<Vec<VarId>>,
    /// [l-1][i][k_prev][k] plus output layer at index L-1: [i][k_prev][t]
    pub z: Vec<Vec<Vec<Vec<VarId>>>>,
    /// NLL max-of-outputs variables, one per sample
    pub omega: Vec<VarId>,
    /// NLL diversify binaries [i][j][j'] (j != j', flattened over j')
    pub r: Vec<Vec<Vec<VarId>>>,
    /// Regularizer variables in alpha registration order
    pub reg_vars: Vec<VarId>,
    reg: RegularizerSpec,
    loss_kind: Option<LossKind>,
}

impl Formulation {
    /// Registers the shared weight variables. Layers are built by the
    /// `build_*` methods, the objective by `attach_objective_*`.
    pub fn new(
        name: impl Into<String>,
        arch: &Architecture,
        dataset: &Dataset,
        bigm: BigMConfig,
        alpha_bounds: (f64, f64),
        beta_bounds: (f64, f64),
    ) -> Result<Self, FormulationError> {
        bigm.validate()?;
        if dataset.num_features() != arch.input_dim {
            return Err(FormulationError::Invalid(format!(
                "dataset has {} features, architecture expects {}",
                dataset.num_features(),
                arch.input_dim
            )));
        }
        if bigm.layer_m.len() != arch.hidden_layers + 1 {
            return Err(FormulationError::Invalid(format!(
                "layer_m has {} entries, expected {}",
                bigm.layer_m.len(),
                arch.hidden_layers + 1
            )));
        }
        let direction = match arch.mode {
            NetworkMode::Prescription => Direction::Maximize,
            NetworkMode::Prediction => Direction::Minimize,
        };
        let mut model = MipModel::new(name, direction);
        let (alo, ahi) = alpha_bounds;
        let (blo, bhi) = beta_bounds;
        let l = arch.hidden_layers;
        let k = arch.width;

        let mut input_alpha = vec![vec![VarId::default(); k]; arch.input_dim];
        for (d, row) in input_alpha.iter_mut().enumerate() {
            for (kk, slot) in row.iter_mut().enumerate() {
                *slot =
                    model.add_variable(VarKind::Continuous, alo, ahi, alpha_name(0, d, kk))?;
            }
        }
        let mut hidden_alpha = vec![vec![vec![VarId::default(); k]; k]; l - 1];
        for layer in 1..l {
            for kp in 0..k {
                for kk in 0..k {
                    hidden_alpha[layer - 1][kp][kk] = model.add_variable(
                        VarKind::Continuous,
                        alo,
                        ahi,
                        alpha_name(layer, kp, kk),
                    )?;
                }
            }
        }
        let mut output_alpha = vec![vec![VarId::default(); arch.output_dim]; k];
        for (kp, row) in output_alpha.iter_mut().enumerate() {
            for (t, slot) in row.iter_mut().enumerate() {
                *slot =
                    model.add_variable(VarKind::Continuous, alo, ahi, alpha_name(l, kp, t))?;
            }
        }
        let mut beta = Vec::with_capacity(l + 1);
        for layer in 0..l {
            let mut row = Vec::with_capacity(k);
            for kk in 0..k {
                row.push(model.add_variable(
                    VarKind::Continuous,
                    blo,
                    bhi,
                    beta_name(layer, kk),
                )?);
            }
            beta.push(row);
        }
        let mut out_beta = Vec::with_capacity(arch.output_dim);
        for t in 0..arch.output_dim {
            out_beta.push(model.add_variable(VarKind::Continuous, blo, bhi, beta_name(l, t))?);
        }
        beta.push(out_beta);

        Ok(Formulation {
            model,
            arch: arch.clone(),
            bigm,
            n: dataset.n(),
            features: dataset.features.clone(),
            treatments: dataset.treatments.clone(),
            outcomes: dataset.outcomes.to_vec(),
            alpha_bounds,
            beta_bounds,
            input_alpha,
            hidden_alpha,
            output_alpha,
            beta,
            hidden_h: Vec::new(),
            output_h: Vec::new(),
            z: Vec::new(),
            omega: Vec::new(),
            r: Vec::new(),
            reg_vars: Vec::new(),
            reg: RegularizerSpec::none(),
            loss_kind: None,
        })
    }

    fn alpha_abs(&self) -> f64 {
        self.alpha_bounds.0.abs().max(self.alpha_bounds.1.abs())
    }

    /// First hidden layer: binary activations driven by the raw features.
    pub fn build_input_layer(&mut self) -> Result<(), FormulationError> {
        let k = self.arch.width;
        let m0 = self.bigm.layer_m[0];
        let eps = self.bigm.epsilon;
        let mut layer = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let mut units = Vec::with_capacity(k);
            for kk in 0..k {
                let h =
                    self.model
                        .add_variable(VarKind::Binary, 0.0, 1.0, h_name(i, kk, 0))?;
                let mut terms: Vec<(f64, VarId)> = Vec::with_capacity(self.arch.input_dim + 2);
                for d in 0..self.arch.input_dim {
                    terms.push((self.features[[i, d]], self.input_alpha[d][kk]));
                }
                terms.push((1.0, self.beta[0][kk]));
                let mut le = terms.clone();
                le.push((-m0, h));
                self.model
                    .add_constraint(&le, Sense::Le, 0.0, format!("in_le_{i}_{kk}"))?;
                let mut ge = terms;
                ge.push((-(m0 + eps), h));
                self.model
                    .add_constraint(&ge, Sense::Ge, -m0, format!("in_ge_{i}_{kk}"))?;
                units.push(h);
            }
            layer.push(units);
        }
        self.hidden_h.push(layer);
        Ok(())
    }

    /// Hidden layers beyond the first: activation constraints plus the
    /// z-linearization of the weight-activation products.
    pub fn build_hidden_layers(&mut self) -> Result<(), FormulationError> {
        if self.hidden_h.is_empty() {
            return Err(FormulationError::Invalid(
                "input layer must be built first".into(),
            ));
        }
        let k = self.arch.width;
        let eps = self.bigm.epsilon;
        for layer in 1..self.arch.hidden_layers {
            let m = self.bigm.layer_m[layer];
            let mut h_layer = Vec::with_capacity(self.n);
            let mut z_layer = Vec::with_capacity(self.n);
            for i in 0..self.n {
                let mut units = Vec::with_capacity(k);
                for kk in 0..k {
                    units.push(self.model.add_variable(
                        VarKind::Binary,
                        0.0,
                        1.0,
                        h_name(i, kk, layer),
                    )?);
                }
                // z_{i,kp,kk,layer} indexed [kp][kk]
                let mut z_mat = vec![vec![VarId::default(); k]; k];
                for (kp, z_row) in z_mat.iter_mut().enumerate() {
                    for (kk, slot) in z_row.iter_mut().enumerate() {
                        *slot = self.register_z(i, kp, kk, layer)?;
                    }
                }
                for kk in 0..k {
                    let h = units[kk];
                    let mut terms: Vec<(f64, VarId)> = Vec::with_capacity(k + 2);
                    for z_row in z_mat.iter() {
                        terms.push((1.0, z_row[kk]));
                    }
                    terms.push((1.0, self.beta[layer][kk]));
                    let mut le = terms.clone();
                    le.push((-m, h));
                    self.model.add_constraint(
                        &le,
                        Sense::Le,
                        0.0,
                        format!("hid_le_{i}_{kk}_{layer}"),
                    )?;
                    let mut ge = terms;
                    ge.push((-(m + eps), h));
                    self.model.add_constraint(
                        &ge,
                        Sense::Ge,
                        -m,
                        format!("hid_ge_{i}_{kk}_{layer}"),
                    )?;
                    for kp in 0..k {
                        let h_prev = self.hidden_h[layer - 1][i][kp];
                        self.link_z(
                            z_mat[kp][kk],
                            self.hidden_alpha[layer - 1][kp][kk],
                            h_prev,
                            i,
                            kp,
                            kk,
                            layer,
                        )?;
                    }
                }
                z_layer.push(z_mat);
                h_layer.push(units);
            }
            self.hidden_h.push(h_layer);
            self.z.push(z_layer);
        }
        Ok(())
    }

    fn register_z(
        &mut self,
        i: usize,
        from: usize,
        to: usize,
        layer: usize,
    ) -> Result<VarId, FormulationError> {
        let ma = self.alpha_abs();
        Ok(self.model.add_variable(
            VarKind::Continuous,
            -ma,
            ma,
            z_name(i, from, to, layer),
        )?)
    }

    /// The four-row product linearization `z = alpha * h_prev`.
    fn link_z(
        &mut self,
        z: VarId,
        alpha: VarId,
        h_prev: VarId,
        i: usize,
        from: usize,
        to: usize,
        layer: usize,
    ) -> Result<(), FormulationError> {
        // The product is bounded by the weight box, so the box magnitude is a
        // valid (and tighter) constant than the layer bound here.
        let ma = self.alpha_abs();
        self.model.add_constraint(
            &[(1.0, z), (-1.0, alpha), (ma, h_prev)],
            Sense::Le,
            ma,
            format!("z_ub_{i}_{from}_{to}_{layer}"),
        )?;
        self.model.add_constraint(
            &[(1.0, z), (-1.0, alpha), (-ma, h_prev)],
            Sense::Ge,
            -ma,
            format!("z_lb_{i}_{from}_{to}_{layer}"),
        )?;
        self.model.add_constraint(
            &[(1.0, z), (-ma, h_prev)],
            Sense::Le,
            0.0,
            format!("z_cap_{i}_{from}_{to}_{layer}"),
        )?;
        self.model.add_constraint(
            &[(1.0, z), (ma, h_prev)],
            Sense::Ge,
            0.0,
            format!("z_cup_{i}_{from}_{to}_{layer}"),
        )?;
        Ok(())
    }

    /// Output layer for prescription: binary units with sign constraints and
    /// the exactly-one-treatment equality per sample.
    pub fn build_output_layer_prescription(&mut self) -> Result<(), FormulationError> {
        if self.arch.mode != NetworkMode::Prescription {
            return Err(FormulationError::Invalid(
                "architecture mode is not Prescription".into(),
            ));
        }
        self.build_output_common(true)
    }

    /// Output layer for prediction: continuous units pinned to the linear
    /// readout by a paired inequality.
    pub fn build_output_layer_prediction(&mut self) -> Result<(), FormulationError> {
        if self.arch.mode != NetworkMode::Prediction {
            return Err(FormulationError::Invalid(
                "architecture mode is not Prediction".into(),
            ));
        }
        self.build_output_common(false)
    }

    fn build_output_common(&mut self, prescription: bool) -> Result<(), FormulationError> {
        if self.hidden_h.len() != self.arch.hidden_layers {
            return Err(FormulationError::Invalid(
                "hidden layers must be built before the output layer".into(),
            ));
        }
        let l = self.arch.hidden_layers;
        let k = self.arch.width;
        let t_count = self.arch.output_dim;
        let m = self.bigm.layer_m[l];
        let eps = self.bigm.epsilon;

        let mut z_layer = Vec::with_capacity(self.n);
        let mut out_layer = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let mut units = Vec::with_capacity(t_count);
            for t in 0..t_count {
                let v = if prescription {
                    self.model
                        .add_variable(VarKind::Binary, 0.0, 1.0, h_name(i, t, l))?
                } else {
                    self.model
                        .add_variable(VarKind::Continuous, -m, m, h_name(i, t, l))?
                };
                units.push(v);
            }
            let mut z_mat = vec![vec![VarId::default(); t_count]; k];
            for (kp, z_row) in z_mat.iter_mut().enumerate() {
                for (t, slot) in z_row.iter_mut().enumerate() {
                    *slot = self.register_z(i, kp, t, l)?;
                }
            }
            for t in 0..t_count {
                let mut terms: Vec<(f64, VarId)> = Vec::with_capacity(k + 2);
                for z_row in z_mat.iter() {
                    terms.push((1.0, z_row[t]));
                }
                terms.push((1.0, self.beta[l][t]));
                if prescription {
                    let h = units[t];
                    let mut le = terms.clone();
                    le.push((-m, h));
                    self.model.add_constraint(
                        &le,
                        Sense::Le,
                        0.0,
                        format!("out_le_{i}_{t}"),
                    )?;
                    let mut ge = terms;
                    ge.push((-(m + eps), h));
                    self.model.add_constraint(
                        &ge,
                        Sense::Ge,
                        -m,
                        format!("out_ge_{i}_{t}"),
                    )?;
                } else {
                    let h = units[t];
                    let mut ub: Vec<(f64, VarId)> = vec![(1.0, h)];
                    ub.extend(terms.iter().map(|&(c, v)| (-c, v)));
                    self.model.add_constraint(
                        &ub,
                        Sense::Le,
                        0.0,
                        format!("pred_ub_{i}_{t}"),
                    )?;
                    let mut lb: Vec<(f64, VarId)> = vec![(1.0, h)];
                    lb.extend(terms.iter().map(|&(c, v)| (-c, v)));
                    self.model.add_constraint(
                        &lb,
                        Sense::Ge,
                        0.0,
                        format!("pred_lb_{i}_{t}"),
                    )?;
                }
                for kp in 0..k {
                    let h_prev = self.hidden_h[l - 1][i][kp];
                    self.link_z(z_mat[kp][t], self.output_alpha[kp][t], h_prev, i, kp, t, l)?;
                }
            }
            if prescription {
                let one: Vec<(f64, VarId)> = units.iter().map(|&u| (1.0, u)).collect();
                self.model
                    .add_constraint(&one, Sense::Eq, 1.0, format!("one_{i}"))?;
            }
            z_layer.push(z_mat);
            out_layer.push(units);
        }
        self.z.push(z_layer);
        self.output_h = out_layer;
        Ok(())
    }

    /// Counterfactual objective: maximize the mean score of the assigned
    /// treatments. `Dr` uses the doubly robust scores, `Ipw` the inverse
    /// propensity weighted outcomes, `Dm` the direct estimates. A baseline
    /// policy only shifts the objective constant.
    pub fn attach_objective_dr(&mut self, loss: &LossSpec) -> Result<(), FormulationError> {
        let scores = loss.scores.as_ref().ok_or_else(|| {
            FormulationError::MissingLossInput {
                kind: loss.kind.as_str().into(),
                missing: "counterfactual scores".into(),
            }
        })?;
        if loss.kind == LossKind::Nll {
            return Err(FormulationError::Invalid(
                "attach_objective_dr expects a counterfactual loss kind".into(),
            ));
        }
        if self.output_h.is_empty() || self.arch.mode != NetworkMode::Prescription {
            return Err(FormulationError::Invalid(
                "prescription output layer must be built first".into(),
            ));
        }
        let t_count = self.arch.output_dim;
        if scores.psi_hat.dim() != (self.n, t_count) {
            return Err(FormulationError::ScoreShape {
                found: scores.psi_hat.dim(),
                n: self.n,
                t: t_count,
            });
        }
        let coef = objective_coefficients(loss.kind, scores, &self.treatments, &self.outcomes);
        let inv_n = 1.0 / self.n as f64;
        for i in 0..self.n {
            for t in 0..t_count {
                self.model
                    .add_objective_term(self.output_h[i][t], inv_n * coef[[i, t]])?;
            }
        }
        if let Some(baseline) = &loss.baseline_policy {
            if baseline.len() != self.n {
                return Err(FormulationError::Invalid(format!(
                    "baseline policy has {} entries for {} samples",
                    baseline.len(),
                    self.n
                )));
            }
            let mut shift = 0.0;
            for (i, &t) in baseline.iter().enumerate() {
                shift -= inv_n * coef[[i, t]];
            }
            self.model.add_objective_constant(shift);
        }
        self.loss_kind = Some(loss.kind);
        Ok(())
    }

    /// Prediction objective: minimize `sum_i (omega_i - h_{i,y_i})` with
    /// `omega_i` pinned to the max output by covering constraints, plus the
    /// diversifying big-M pairs that forbid equal outputs.
    pub fn attach_objective_nll(&mut self, loss: &LossSpec) -> Result<(), FormulationError> {
        if loss.kind != LossKind::Nll {
            return Err(FormulationError::Invalid(
                "attach_objective_nll expects the NLL loss kind".into(),
            ));
        }
        let labels = loss
            .labels
            .as_ref()
            .ok_or_else(|| FormulationError::MissingLossInput {
                kind: "nll".into(),
                missing: "labels".into(),
            })?;
        if self.output_h.is_empty() || self.arch.mode != NetworkMode::Prediction {
            return Err(FormulationError::Invalid(
                "prediction output layer must be built first".into(),
            ));
        }
        let classes = self.arch.output_dim;
        for (row, &label) in labels.iter().enumerate() {
            if label >= classes {
                return Err(FormulationError::LabelOutOfRange {
                    label,
                    classes,
                    row,
                });
            }
        }
        let l = self.arch.hidden_layers;
        let m = self.bigm.layer_m[l];
        let eps = self.bigm.epsilon;
        let m_div = 2.0 * m + eps;

        for i in 0..self.n {
            let omega =
                self.model
                    .add_variable(VarKind::Continuous, -m, m, format!("omega_{i}"))?;
            for j in 0..classes {
                self.model.add_constraint(
                    &[(1.0, omega), (-1.0, self.output_h[i][j])],
                    Sense::Ge,
                    0.0,
                    format!("omega_{i}_{j}"),
                )?;
            }
            self.omega.push(omega);
            let mut r_i = Vec::with_capacity(classes);
            for j in 0..classes {
                let mut r_j = Vec::new();
                for jp in 0..classes {
                    if jp == j {
                        continue;
                    }
                    let r = self.model.add_variable(
                        VarKind::Binary,
                        0.0,
                        1.0,
                        format!("r_{i}_{j}_{jp}"),
                    )?;
                    // h_jp - h_j <= -eps + M r  and  h_jp - h_j >= eps - M(1-r)
                    self.model.add_constraint(
                        &[
                            (1.0, self.output_h[i][jp]),
                            (-1.0, self.output_h[i][j]),
                            (-m_div, r),
                        ],
                        Sense::Le,
                        -eps,
                        format!("div_le_{i}_{j}_{jp}"),
                    )?;
                    self.model.add_constraint(
                        &[
                            (1.0, self.output_h[i][jp]),
                            (-1.0, self.output_h[i][j]),
                            (-m_div, r),
                        ],
                        Sense::Ge,
                        eps - m_div,
                        format!("div_ge_{i}_{j}_{jp}"),
                    )?;
                    r_j.push(r);
                }
                r_i.push(r_j);
            }
            self.r.push(r_i);
            self.model.add_objective_term(omega, 1.0)?;
            self.model
                .add_objective_term(self.output_h[i][labels[i]], -1.0)?;
        }
        self.loss_kind = Some(LossKind::Nll);
        Ok(())
    }

    /// Weight penalty on the alpha variables (biases are not penalized).
    pub fn attach_regularizer(&mut self, spec: RegularizerSpec) -> Result<(), FormulationError> {
        if spec.lambda < 0.0 {
            return Err(FormulationError::Invalid("negative lambda".into()));
        }
        if spec.kind == RegKind::None || spec.lambda == 0.0 {
            self.reg = RegularizerSpec::none();
            return Ok(());
        }
        let ma = self.alpha_abs();
        // Penalty sign flips so it always degrades the objective.
        let sign = match self.model.direction() {
            Direction::Maximize => -1.0,
            Direction::Minimize => 1.0,
        };
        let alphas = self.all_alpha_vars();
        for alpha in alphas {
            let suffix = {
                let name = self.model.var(alpha).name.clone();
                name.trim_start_matches("alpha_").to_string()
            };
            match spec.kind {
                RegKind::L0 => {
                    let u = self.model.add_variable(
                        VarKind::Binary,
                        0.0,
                        1.0,
                        format!("u_{suffix}"),
                    )?;
                    self.model.add_constraint(
                        &[(1.0, alpha), (-ma, u)],
                        Sense::Le,
                        0.0,
                        format!("reg_ub_{suffix}"),
                    )?;
                    self.model.add_constraint(
                        &[(1.0, alpha), (ma, u)],
                        Sense::Ge,
                        0.0,
                        format!("reg_lb_{suffix}"),
                    )?;
                    self.model.add_objective_term(u, sign * spec.lambda)?;
                    self.reg_vars.push(u);
                }
                RegKind::L1 => {
                    let a = self.model.add_variable(
                        VarKind::Continuous,
                        0.0,
                        ma,
                        format!("a_{suffix}"),
                    )?;
                    self.model.add_constraint(
                        &[(1.0, a), (-1.0, alpha)],
                        Sense::Ge,
                        0.0,
                        format!("reg_ub_{suffix}"),
                    )?;
                    self.model.add_constraint(
                        &[(1.0, a), (1.0, alpha)],
                        Sense::Ge,
                        0.0,
                        format!("reg_lb_{suffix}"),
                    )?;
                    self.model.add_objective_term(a, sign * spec.lambda)?;
                    self.reg_vars.push(a);
                }
                RegKind::None => unreachable!(),
            }
        }
        self.reg = spec;
        Ok(())
    }

    pub fn all_alpha_vars(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        for row in &self.input_alpha {
            out.extend(row.iter().copied());
        }
        for mat in &self.hidden_alpha {
            for row in mat {
                out.extend(row.iter().copied());
            }
        }
        for row in &self.output_alpha {
            out.extend(row.iter().copied());
        }
        out
    }

    /// Pins every weight with equality constraints (test and warm-start
    /// tooling).
    pub fn fix_weights(&mut self, w: &NetworkWeights) -> Result<(), FormulationError> {
        let mut pin = |var: VarId, value: f64, tag: String| -> Result<(), FormulationError> {
            self.model
                .add_constraint(&[(1.0, var)], Sense::Eq, value, tag)?;
            Ok(())
        };
        for (d, row) in self.input_alpha.iter().enumerate() {
            for (kk, &v) in row.iter().enumerate() {
                pin(v, w.input_alpha[d][kk], format!("fix_a_{d}_{kk}_0"))?;
            }
        }
        for (lm1, mat) in self.hidden_alpha.iter().enumerate() {
            for (kp, row) in mat.iter().enumerate() {
                for (kk, &v) in row.iter().enumerate() {
                    pin(
                        v,
                        w.hidden_alpha[lm1][kp][kk],
                        format!("fix_a_{kp}_{kk}_{}", lm1 + 1),
                    )?;
                }
            }
        }
        let l = self.arch.hidden_layers;
        for (kp, row) in self.output_alpha.iter().enumerate() {
            for (t, &v) in row.iter().enumerate() {
                pin(v, w.output_alpha[kp][t], format!("fix_a_{kp}_{t}_{l}"))?;
            }
        }
        for (layer, row) in self.beta.iter().enumerate() {
            for (u, &v) in row.iter().enumerate() {
                pin(v, w.biases[layer][u], format!("fix_b_{u}_{layer}"))?;
            }
        }
        Ok(())
    }

    pub fn regularizer(&self) -> RegularizerSpec {
        self.reg
    }

    /// Derives the full MIP variable assignment implied by a set of weights,
    /// or `None` when some pre-activation falls inside the infeasible margin
    /// gap or (prescription) the outputs are not one-positive/rest-negative.
    pub fn assignment_from_weights(&self, w: &NetworkWeights) -> Option<Vec<f64>> {
        let eps = self.bigm.epsilon;
        let mut values = vec![0.0; self.model.num_vars()];
        for (d, row) in self.input_alpha.iter().enumerate() {
            for (kk, &v) in row.iter().enumerate() {
                values[v.index()] = w.input_alpha[d][kk];
            }
        }
        for (lm1, mat) in self.hidden_alpha.iter().enumerate() {
            for (kp, row) in mat.iter().enumerate() {
                for (kk, &v) in row.iter().enumerate() {
                    values[v.index()] = w.hidden_alpha[lm1][kp][kk];
                }
            }
        }
        for (kp, row) in self.output_alpha.iter().enumerate() {
            for (t, &v) in row.iter().enumerate() {
                values[v.index()] = w.output_alpha[kp][t];
            }
        }
        for (layer, row) in self.beta.iter().enumerate() {
            for (u, &v) in row.iter().enumerate() {
                values[v.index()] = w.biases[layer][u];
            }
        }

        let l = self.arch.hidden_layers;
        let k = self.arch.width;
        for i in 0..self.n {
            // Input layer with margin discipline.
            let mut prev = vec![0u8; k];
            for kk in 0..k {
                let mut pre = w.biases[0][kk];
                for d in 0..self.arch.input_dim {
                    pre += w.input_alpha[d][kk] * self.features[[i, d]];
                }
                if pre > 0.0 && pre < eps {
                    return None;
                }
                prev[kk] = u8::from(pre >= eps);
                values[self.hidden_h[0][i][kk].index()] = f64::from(prev[kk]);
            }
            for layer in 1..l {
                let mut acts = vec![0u8; k];
                for kk in 0..k {
                    let mut pre = w.biases[layer][kk];
                    for kp in 0..k {
                        let zv = if prev[kp] == 1 {
                            w.hidden_alpha[layer - 1][kp][kk]
                        } else {
                            0.0
                        };
                        values[self.z[layer - 1][i][kp][kk].index()] = zv;
                        pre += zv;
                    }
                    if pre > 0.0 && pre < eps {
                        return None;
                    }
                    acts[kk] = u8::from(pre >= eps);
                    values[self.hidden_h[layer][i][kk].index()] = f64::from(acts[kk]);
                }
                prev = acts;
            }
            let t_count = self.arch.output_dim;
            let mut outs = vec![0.0; t_count];
            for t in 0..t_count {
                let mut pre = w.biases[l][t];
                for kp in 0..k {
                    let zv = if prev[kp] == 1 {
                        w.output_alpha[kp][t]
                    } else {
                        0.0
                    };
                    values[self.z[l - 1][i][kp][t].index()] = zv;
                    pre += zv;
                }
                outs[t] = pre;
            }
            match self.arch.mode {
                NetworkMode::Prescription => {
                    let mut winner = None;
                    for (t, &o) in outs.iter().enumerate() {
                        if o >= eps {
                            if winner.is_some() {
                                return None;
                            }
                            winner = Some(t);
                        } else if o > 0.0 {
                            return None;
                        }
                    }
                    let winner = winner?;
                    for t in 0..t_count {
                        values[self.output_h[i][t].index()] = f64::from(t == winner);
                    }
                }
                NetworkMode::Prediction => {
                    for t in 0..t_count {
                        values[self.output_h[i][t].index()] = outs[t];
                    }
                    if !self.omega.is_empty() {
                        let max = outs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        values[self.omega[i].index()] = max;
                        for (j, r_row) in self.r[i].iter().enumerate() {
                            let mut slot = 0;
                            for jp in 0..t_count {
                                if jp == j {
                                    continue;
                                }
                                let diff = outs[jp] - outs[j];
                                if diff.abs() < eps {
                                    return None;
                                }
                                values[r_row[slot].index()] = f64::from(diff >= eps);
                                slot += 1;
                            }
                        }
                    }
                }
            }
        }
        for (&rv, &alpha) in self.reg_vars.iter().zip(self.all_alpha_vars().iter()) {
            let a = values[alpha.index()];
            values[rv.index()] = match self.reg.kind {
                RegKind::L0 => f64::from(a.abs() > L0_ACTIVATION_EPS),
                RegKind::L1 => a.abs(),
                RegKind::None => 0.0,
            };
        }
        Some(values)
    }
}

/// Objective coefficient per (sample, treatment) for the three
/// counterfactual estimators.
pub fn objective_coefficients(
    kind: LossKind,
    scores: &CounterfactualScores,
    treatments: &[usize],
    outcomes: &[f64],
) -> Array2<f64> {
    let (n, t_count) = scores.psi_hat.dim();
    let mut coef = Array2::zeros((n, t_count));
    for i in 0..n {
        for t in 0..t_count {
            coef[[i, t]] = match kind {
                LossKind::Dr => scores.psi_hat[[i, t]],
                LossKind::Dm => scores.mu_hat[[i, t]],
                LossKind::Ipw => {
                    if treatments[i] == t {
                        outcomes[i] / scores.propensity[[i, treatments[i]]]
                    } else {
                        0.0
                    }
                }
                LossKind::Nll => unreachable!("NLL has no counterfactual coefficients"),
            };
        }
    }
    coef
}

/// Closed-form variable count of the full formulation.
pub fn expected_variable_count(
    arch: &Architecture,
    n: usize,
    reg: RegularizerSpec,
) -> usize {
    let (f, l, k, t) = (
        arch.input_dim,
        arch.hidden_layers,
        arch.width,
        arch.output_dim,
    );
    let alphas = f * k + (l - 1) * k * k + k * t;
    let betas = l * k + t;
    let hidden = n * k * l;
    let z = n * k * k * (l - 1) + n * k * t;
    let outputs = n * t;
    let nll = if arch.mode == NetworkMode::Prediction {
        n + n * t * (t - 1)
    } else {
        0
    };
    let reg_vars = if reg.kind == RegKind::None { 0 } else { alphas };
    alphas + betas + hidden + z + outputs + nll + reg_vars
}

/// Closed-form constraint count of the full formulation.
pub fn expected_constraint_count(
    arch: &Architecture,
    n: usize,
    reg: RegularizerSpec,
) -> usize {
    let (f, l, k, t) = (
        arch.input_dim,
        arch.hidden_layers,
        arch.width,
        arch.output_dim,
    );
    let _ = f;
    let input = 2 * n * k;
    let hidden = (l - 1) * (2 * n * k + 4 * n * k * k);
    let output = 2 * n * t + 4 * n * k * t;
    let mode_rows = match arch.mode {
        NetworkMode::Prescription => n,
        NetworkMode::Prediction => n * t + 2 * n * t * (t - 1),
    };
    let alphas = f * k + (l - 1) * k * k + k * t;
    let reg_rows = if reg.kind == RegKind::None { 0 } else { 2 * alphas };
    input + hidden + output + mode_rows + reg_rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Dataset;
    use ndarray::{array, Array1};
    use pnn_mip::{solve, SolveStatus, SolverConfig};

    fn exact() -> SolverConfig {
        SolverConfig {
            rel_gap_tol: 1e-9,
            abs_gap_tol: 1e-9,
            ..Default::default()
        }
    }

    fn unit_dataset(x: f64) -> Dataset {
        Dataset::new(array![[x], [x + 0.1]], vec![0, 1], array![1.0, 0.0], 2).unwrap()
    }

    fn unit_arch() -> Architecture {
        Architecture::new(1, 1, 1, 2, NetworkMode::Prescription).unwrap()
    }

    fn unit_formulation(x: f64) -> Formulation {
        let arch = unit_arch();
        let data = unit_dataset(x);
        let bigm =
            BigMConfig::for_network(&arch, (-1.0, 1.0), (-1.0, 1.0), &data.feature_bounds)
                .unwrap();
        Formulation::new("t", &arch, &data, bigm, (-1.0, 1.0), (-1.0, 1.0)).unwrap()
    }

    #[test]
    fn big_m_formula_instances() {
        let arch = Architecture::new(2, 1, 3, 2, NetworkMode::Prescription).unwrap();
        let m0 = compute_big_m(
            &arch,
            (-1.0, 1.0),
            (-1.0, 1.0),
            &[(-3.0, 3.0), (-3.0, 3.0)],
            0,
        )
        .unwrap();
        assert!((m0 - 7.0).abs() < 1e-12);
        let m1 = compute_big_m(&arch, (-1.0, 1.0), (-1.0, 1.0), &[], 1).unwrap();
        assert!((m1 - 4.0).abs() < 1e-12);
        let wide = Architecture::new(2, 1, 10, 2, NetworkMode::Prescription).unwrap();
        let m1 = compute_big_m(&wide, (-1.0, 1.0), (-1.0, 1.0), &[], 1).unwrap();
        assert!((m1 - 11.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_feature_rejected() {
        let arch = unit_arch();
        let err = compute_big_m(
            &arch,
            (-1.0, 1.0),
            (-1.0, 1.0),
            &[(f64::NEG_INFINITY, 1.0)],
            0,
        );
        assert!(matches!(err, Err(FormulationError::UnboundedFeature { .. })));
    }

    #[test]
    fn input_layer_counts() {
        // n=2, F=1, K=1: two binaries, four constraints, shared alpha/beta.
        let mut f = unit_formulation(0.5);
        f.build_input_layer().unwrap();
        assert_eq!(f.model.num_binaries(), 2);
        assert_eq!(f.model.num_constraints(), 4);
    }

    fn forced_h(x: f64, alpha: f64, beta: f64) -> f64 {
        let arch = unit_arch();
        let data = Dataset::new(array![[x]], vec![0], array![1.0], 2).unwrap();
        let bigm =
            BigMConfig::for_network(&arch, (-1.0, 1.0), (-1.0, 1.0), &data.feature_bounds)
                .unwrap();
        let mut f =
            Formulation::new("t", &arch, &data, bigm, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        f.build_input_layer().unwrap();
        f.build_output_layer_prescription().unwrap();
        let mut w = NetworkWeights::zeros(&f.arch, (-1.0, 1.0), (-1.0, 1.0));
        w.input_alpha[0][0] = alpha;
        w.biases[0][0] = beta;
        // Make the output layer trivially satisfiable for either h value.
        w.biases[1][0] = 0.5;
        w.biases[1][1] = -0.5;
        f.fix_weights(&w).unwrap();
        let res = solve(&f.model, &exact()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        let inc = res.incumbent.unwrap();
        inc[f.hidden_h[0][0][0].index()]
    }

    #[test]
    fn positive_preactivation_forces_h_one() {
        assert_eq!(forced_h(0.5, 1.0, 0.0), 1.0);
    }

    #[test]
    fn negative_preactivation_forces_h_zero() {
        assert_eq!(forced_h(-0.5, 1.0, 0.0), 0.0);
    }

    #[test]
    fn hidden_layer_z_linkage() {
        // L=2, K=1: h_prev fixed via weights; z must equal alpha * h_prev.
        let arch = Architecture::new(1, 2, 1, 2, NetworkMode::Prescription).unwrap();
        let data = Dataset::new(array![[0.5]], vec![0], array![1.0], 2).unwrap();
        let bigm =
            BigMConfig::for_network(&arch, (-1.0, 1.0), (-1.0, 1.0), &data.feature_bounds)
                .unwrap();
        let mut f =
            Formulation::new("t", &arch, &data, bigm, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        f.build_input_layer().unwrap();
        f.build_hidden_layers().unwrap();
        f.build_output_layer_prescription().unwrap();
        let mut w = NetworkWeights::zeros(&arch, (-1.0, 1.0), (-1.0, 1.0));
        w.input_alpha[0][0] = 1.0; // h_prev = 1 at x=0.5
        w.hidden_alpha[0][0][0] = -0.7;
        w.biases[1][0] = 0.2; // pre = -0.5 -> h = 0
        w.biases[2][0] = 0.5;
        w.biases[2][1] = -0.5;
        f.fix_weights(&w).unwrap();
        let res = solve(&f.model, &exact()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        let inc = res.incumbent.unwrap();
        assert!((inc[f.z[0][0][0][0].index()] + 0.7).abs() < 1e-6);
        assert_eq!(inc[f.hidden_h[1][0][0].index()], 0.0);

        // Now kill h_prev: z must collapse to zero.
        let mut w2 = w.clone();
        w2.input_alpha[0][0] = -1.0; // pre = -0.5 -> h_prev = 0
        let arch2 = arch.clone();
        let data2 = Dataset::new(array![[0.5]], vec![0], array![1.0], 2).unwrap();
        let bigm2 =
            BigMConfig::for_network(&arch2, (-1.0, 1.0), (-1.0, 1.0), &data2.feature_bounds)
                .unwrap();
        let mut f2 =
            Formulation::new("t", &arch2, &data2, bigm2, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        f2.build_input_layer().unwrap();
        f2.build_hidden_layers().unwrap();
        f2.build_output_layer_prescription().unwrap();
        w2.biases[1][0] = 0.2;
        f2.fix_weights(&w2).unwrap();
        let res2 = solve(&f2.model, &exact()).unwrap();
        let inc2 = res2.incumbent.unwrap();
        assert_eq!(inc2[f2.z[0][0][0][0].index()], 0.0);
    }

    #[test]
    fn layer_variable_counts_match_formulas() {
        let arch = Architecture::new(2, 2, 3, 2, NetworkMode::Prescription).unwrap();
        let n = 5;
        let feats = Array2::from_shape_fn((n, 2), |(i, j)| (i as f64) * 0.1 + j as f64 * 0.05);
        let data = Dataset::new(
            feats,
            vec![0, 1, 0, 1, 0],
            Array1::from(vec![0.; 5]),
            2,
        )
        .unwrap();
        let bigm =
            BigMConfig::for_network(&arch, (-1.0, 1.0), (-1.0, 1.0), &data.feature_bounds)
                .unwrap();
        let mut f =
            Formulation::new("t", &arch, &data, bigm, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        f.build_input_layer().unwrap();
        f.build_hidden_layers().unwrap();
        f.build_output_layer_prescription().unwrap();
        let reg = RegularizerSpec::new(RegKind::L0, 0.1).unwrap();
        f.attach_regularizer(reg).unwrap();
        assert_eq!(
            f.model.num_vars(),
            expected_variable_count(&arch, n, reg)
        );
        assert_eq!(
            f.model.num_constraints(),
            expected_constraint_count(&arch, n, reg)
        );
        // Layer-1 additions alone: 5*3 binaries and 5*3*3 z variables.
        assert_eq!(f.hidden_h[1].len(), 5);
        assert_eq!(f.hidden_h[1][0].len(), 3);
        assert_eq!(f.z[0][0].len(), 3);
        assert_eq!(f.z[0][0][0].len(), 3);
    }

    #[test]
    fn prescription_output_exactly_one() {
        let mut f = unit_formulation(0.5);
        f.build_input_layer().unwrap();
        f.build_output_layer_prescription().unwrap();
        let res = solve(&f.model, &exact()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        let inc = res.incumbent.unwrap();
        for i in 0..f.n {
            let total: f64 = (0..2).map(|t| inc[f.output_h[i][t].index()]).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dr_objective_examples() {
        // n=2, psi rows (1,0) and (0,1): matching policy scores 1.
        let arch = unit_arch();
        let data = unit_dataset(0.5);
        let scores = CounterfactualScores {
            mu_hat: array![[1.0, 0.0], [0.0, 1.0]],
            propensity: array![[0.5, 0.5], [0.5, 0.5]],
            psi_hat: array![[1.0, 0.0], [0.0, 1.0]],
        };
        let bigm =
            BigMConfig::for_network(&arch, (-1.0, 1.0), (-1.0, 1.0), &data.feature_bounds)
                .unwrap();
        let mut f =
            Formulation::new("t", &arch, &data, bigm, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        f.build_input_layer().unwrap();
        f.build_output_layer_prescription().unwrap();
        f.attach_objective_dr(&LossSpec::counterfactual(LossKind::Dr, scores.clone()))
            .unwrap();
        let res = solve(&f.model, &exact()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective - 1.0).abs() < 1e-6, "obj={}", res.objective);

        // Baseline equal to the optimal policy zeroes the objective.
        let optimal_policy = {
            let inc = res.incumbent.as_ref().unwrap();
            (0..2)
                .map(|i| {
                    (0..2)
                        .find(|&t| inc[f.output_h[i][t].index()] > 0.5)
                        .unwrap()
                })
                .collect::<Vec<_>>()
        };
        let data2 = unit_dataset(0.5);
        let bigm2 =
            BigMConfig::for_network(&arch, (-1.0, 1.0), (-1.0, 1.0), &data2.feature_bounds)
                .unwrap();
        let mut f2 =
            Formulation::new("t", &arch, &data2, bigm2, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        f2.build_input_layer().unwrap();
        f2.build_output_layer_prescription().unwrap();
        f2.attach_objective_dr(
            &LossSpec::counterfactual(LossKind::Dr, scores).with_baseline(optimal_policy),
        )
        .unwrap();
        let res2 = solve(&f2.model, &exact()).unwrap();
        assert!(res2.objective.abs() < 1e-6, "obj={}", res2.objective);
    }

    #[test]
    fn ipw_and_dm_coefficients() {
        let scores = CounterfactualScores {
            mu_hat: array![[2.0, 3.0]],
            propensity: array![[0.25, 0.75]],
            psi_hat: array![[2.0, 3.0]],
        };
        let ipw = objective_coefficients(LossKind::Ipw, &scores, &[1], &[6.0]);
        assert_eq!(ipw[[0, 0]], 0.0);
        assert!((ipw[[0, 1]] - 8.0).abs() < 1e-12);
        let dm = objective_coefficients(LossKind::Dm, &scores, &[1], &[6.0]);
        assert_eq!(dm[[0, 0]], 2.0);
        assert_eq!(dm[[0, 1]], 3.0);
    }

    fn prediction_formulation(outputs: (f64, f64)) -> (Formulation, SolverConfig) {
        let arch = Architecture::new(1, 1, 1, 2, NetworkMode::Prediction).unwrap();
        let data = Dataset::new(array![[0.5]], vec![0], array![0.0], 1).unwrap();
        let bigm =
            BigMConfig::for_network(&arch, (-2.0, 2.0), (-2.0, 2.0), &data.feature_bounds)
                .unwrap();
        let mut f =
            Formulation::new("t", &arch, &data, bigm, (-2.0, 2.0), (-2.0, 2.0)).unwrap();
        f.build_input_layer().unwrap();
        f.build_output_layer_prediction().unwrap();
        f.attach_objective_nll(&LossSpec::nll(vec![0])).unwrap();
        let mut w = NetworkWeights::zeros(&f.arch, (-2.0, 2.0), (-2.0, 2.0));
        w.input_alpha[0][0] = 1.0; // h = 1 at x=0.5
        w.output_alpha[0][0] = outputs.0;
        w.output_alpha[0][1] = outputs.1;
        f.fix_weights(&w).unwrap();
        (f, exact())
    }

    #[test]
    fn nll_correct_class_on_top_has_zero_loss() {
        let (f, cfg) = prediction_formulation((2.0, 0.0));
        let res = solve(&f.model, &cfg).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!(res.objective.abs() < 1e-6, "obj={}", res.objective);
        let inc = res.incumbent.unwrap();
        assert!((inc[f.omega[0].index()] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn nll_wrong_class_pays_margin() {
        let (f, cfg) = prediction_formulation((0.0, 2.0));
        let res = solve(&f.model, &cfg).unwrap();
        assert!((res.objective - 2.0).abs() < 1e-6, "obj={}", res.objective);
    }

    #[test]
    fn nll_equal_outputs_infeasible() {
        let (f, cfg) = prediction_formulation((1.0, 1.0));
        let res = solve(&f.model, &cfg).unwrap();
        assert_eq!(res.status, SolveStatus::Infeasible);
    }

    #[test]
    fn l0_indicator_semantics() {
        // A pinned nonzero weight forces its indicator on, costing lambda.
        let arch = unit_arch();
        let data = unit_dataset(0.5);
        let scores = CounterfactualScores {
            mu_hat: array![[1.0, 0.0], [1.0, 0.0]],
            propensity: array![[0.5, 0.5], [0.5, 0.5]],
            psi_hat: array![[1.0, 0.0], [1.0, 0.0]],
        };
        let bigm =
            BigMConfig::for_network(&arch, (-1.0, 1.0), (-1.0, 1.0), &data.feature_bounds)
                .unwrap();
        let mut f =
            Formulation::new("t", &arch, &data, bigm, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        f.build_input_layer().unwrap();
        f.build_output_layer_prescription().unwrap();
        f.attach_objective_dr(&LossSpec::counterfactual(LossKind::Dr, scores))
            .unwrap();
        f.attach_regularizer(RegularizerSpec::new(RegKind::L0, 0.25).unwrap())
            .unwrap();
        let mut w = NetworkWeights::zeros(&f.arch, (-1.0, 1.0), (-1.0, 1.0));
        w.input_alpha[0][0] = 0.5;
        w.biases[1][0] = 0.5;
        w.biases[1][1] = -0.5;
        f.fix_weights(&w).unwrap();
        let res = solve(&f.model, &exact()).unwrap();
        let inc = res.incumbent.unwrap();
        // One alpha pinned to 0.5 forces u=1; the other three stay free at 0.
        let u_on: f64 = f.reg_vars.iter().map(|&u| inc[u.index()]).sum();
        assert!((u_on - 1.0).abs() < 1e-9, "u_on={u_on}");
        // Policy picks treatment 0 both samples (psi favors it): base 1.0.
        assert!((res.objective - (1.0 - 0.25)).abs() < 1e-6);
    }

    #[test]
    fn l1_envelope_is_tight() {
        let arch = unit_arch();
        let data = unit_dataset(0.5);
        let scores = CounterfactualScores {
            mu_hat: array![[1.0, 0.0], [1.0, 0.0]],
            propensity: array![[0.5, 0.5], [0.5, 0.5]],
            psi_hat: array![[1.0, 0.0], [1.0, 0.0]],
        };
        let bigm =
            BigMConfig::for_network(&arch, (-1.0, 1.0), (-1.0, 1.0), &data.feature_bounds)
                .unwrap();
        let mut f =
            Formulation::new("t", &arch, &data, bigm, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        f.build_input_layer().unwrap();
        f.build_output_layer_prescription().unwrap();
        f.attach_objective_dr(&LossSpec::counterfactual(LossKind::Dr, scores))
            .unwrap();
        f.attach_regularizer(RegularizerSpec::new(RegKind::L1, 0.1).unwrap())
            .unwrap();
        let mut w = NetworkWeights::zeros(&f.arch, (-1.0, 1.0), (-1.0, 1.0));
        w.input_alpha[0][0] = -0.3;
        w.biases[1][0] = 0.5;
        w.biases[1][1] = -0.5;
        f.fix_weights(&w).unwrap();
        let res = solve(&f.model, &exact()).unwrap();
        let inc = res.incumbent.unwrap();
        let a_total: f64 = f.reg_vars.iter().map(|&a| inc[a.index()]).sum();
        assert!((a_total - 0.3).abs() < 1e-6, "a_total={a_total}");
    }

    #[test]
    fn lambda_zero_adds_nothing() {
        let mut f = unit_formulation(0.5);
        f.build_input_layer().unwrap();
        f.build_output_layer_prescription().unwrap();
        let before_vars = f.model.num_vars();
        let before_cons = f.model.num_constraints();
        f.attach_regularizer(RegularizerSpec::new(RegKind::L0, 0.0).unwrap())
            .unwrap();
        assert_eq!(f.model.num_vars(), before_vars);
        assert_eq!(f.model.num_constraints(), before_cons);
    }

    #[test]
    fn psi_scaling_preserves_optimal_policy() {
        let arch = unit_arch();
        let make = |scale: f64| {
            let data = Dataset::new(
                array![[0.8], [-0.6], [0.4]],
                vec![0, 1, 0],
                array![1.0, 0.0, 0.5],
                2,
            )
            .unwrap();
            let scores = CounterfactualScores {
                mu_hat: array![[0.3, 0.9], [0.8, 0.1], [0.2, 0.4]],
                propensity: array![[0.5, 0.5], [0.5, 0.5], [0.5, 0.5]],
                psi_hat: array![
                    [0.3 * scale, 0.9 * scale],
                    [0.8 * scale, 0.1 * scale],
                    [0.2 * scale, 0.4 * scale]
                ],
            };
            let bigm = BigMConfig::for_network(
                &arch,
                (-1.0, 1.0),
                (-1.0, 1.0),
                &data.feature_bounds,
            )
            .unwrap();
            let mut f =
                Formulation::new("t", &arch, &data, bigm, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
            f.build_input_layer().unwrap();
            f.build_output_layer_prescription().unwrap();
            f.attach_objective_dr(&LossSpec::counterfactual(LossKind::Dr, scores))
                .unwrap();
            let res = solve(&f.model, &exact()).unwrap();
            let inc = res.incumbent.unwrap();
            (0..3)
                .map(|i| {
                    (0..2)
                        .find(|&t| inc[f.output_h[i][t].index()] > 0.5)
                        .unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(make(1.0), make(3.0));
    }
}
