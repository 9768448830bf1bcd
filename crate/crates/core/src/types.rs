//! Shared domain types: observational datasets, network architectures,
//! trained weights, counterfactual score matrices, and the persisted policy
//! model. Everything here is immutable after construction and safe to share
//! across threads.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

/// Schema tag written into every persisted policy model.
pub const MODEL_SCHEMA: &str = "pnn_model_v1";

#[derive(Debug, Error)]
pub enum TypeError {
    #[error("{0}")]
    Invalid(String),
    #[error("weight shapes do not match the architecture: {0}")]
    ShapeMismatch(String),
    #[error("model file has schema `{found}`, expected `{expected}`")]
    SchemaMismatch { found: String, expected: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Observational training data: one row per individual.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// n x F covariate matrix.
    pub features: Array2<f64>,
    /// Dense treatment codes in [0, treatment_count).
    pub treatments: Vec<usize>,
    /// Observed outcome per individual.
    pub outcomes: Array1<f64>,
    /// Per-column (lower, upper) bounds containing every feature value.
    pub feature_bounds: Vec<(f64, f64)>,
    pub treatment_count: usize,
}

impl Dataset {
    /// Builds a dataset with bounds defaulted to the empirical min/max
    /// expanded by 5% of the column range on each side.
    pub fn new(
        features: Array2<f64>,
        treatments: Vec<usize>,
        outcomes: Array1<f64>,
        treatment_count: usize,
    ) -> Result<Self, TypeError> {
        let bounds = empirical_bounds(&features);
        let d = Dataset {
            features,
            treatments,
            outcomes,
            feature_bounds: bounds,
            treatment_count,
        };
        let problems = validate_dataset(&d);
        let hard: Vec<&String> = problems
            .iter()
            .filter(|m| !m.starts_with("warning"))
            .collect();
        if !hard.is_empty() {
            return Err(TypeError::Invalid(hard[0].clone()));
        }
        Ok(d)
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    /// Rows having the given treatment.
    pub fn rows_with_treatment(&self, t: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.treatments[i] == t).collect()
    }
}

/// Expands empirical per-column min/max by 5% of the range on each side.
pub fn empirical_bounds(features: &Array2<f64>) -> Vec<(f64, f64)> {
    (0..features.ncols())
        .map(|d| {
            let col = features.column(d);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let pad = 0.05 * (hi - lo).max(1e-12);
            (lo - pad, hi + pad)
        })
        .collect()
}

/// Checks every dataset invariant; returns one message per violation.
/// Messages prefixed `warning:` are advisory (positivity), the rest are hard
/// errors. An empty list means all invariants hold.
pub fn validate_dataset(d: &Dataset) -> Vec<String> {
    let mut problems = Vec::new();
    let n = d.features.nrows();
    if n == 0 {
        problems.push("dataset has no rows".to_string());
    }
    if d.treatments.len() != n {
        problems.push(format!(
            "treatments length {} does not match {} feature rows",
            d.treatments.len(),
            n
        ));
    }
    if d.outcomes.len() != n {
        problems.push(format!(
            "outcomes length {} does not match {} feature rows",
            d.outcomes.len(),
            n
        ));
    }
    if d.treatment_count < 1 {
        problems.push("treatment_count must be at least 1".to_string());
    }
    if d.feature_bounds.len() != d.features.ncols() {
        problems.push(format!(
            "{} feature bounds for {} columns",
            d.feature_bounds.len(),
            d.features.ncols()
        ));
    }
    for (i, &t) in d.treatments.iter().enumerate() {
        if t >= d.treatment_count {
            problems.push(format!(
                "row {i}: treatment {t} outside [0, {})",
                d.treatment_count
            ));
        }
    }
    for (col, &(lo, hi)) in d.feature_bounds.iter().enumerate() {
        if col >= d.features.ncols() {
            break;
        }
        for (i, &x) in d.features.column(col).iter().enumerate() {
            if !x.is_finite() || x < lo || x > hi {
                problems.push(format!(
                    "row {i}, feature {col}: value {x} outside bounds [{lo}, {hi}]"
                ));
            }
        }
    }
    // Positivity needs every treatment observed at least once.
    for t in 0..d.treatment_count {
        if !d.treatments.iter().any(|&ti| ti == t) {
            problems.push(format!(
                "warning: treatment {t} never observed; positivity cannot hold on this sample"
            ));
        }
    }
    problems
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetworkMode {
    Prescription,
    Prediction,
}

/// Network shape: `hidden_layers` hidden layers of `width` units each, plus
/// one output layer of `output_dim` units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub width: usize,
    pub output_dim: usize,
    pub mode: NetworkMode,
}

impl Architecture {
    pub fn new(
        input_dim: usize,
        hidden_layers: usize,
        width: usize,
        output_dim: usize,
        mode: NetworkMode,
    ) -> Result<Self, TypeError> {
        if input_dim < 1 {
            return Err(TypeError::Invalid("input_dim must be >= 1".into()));
        }
        if hidden_layers < 1 {
            return Err(TypeError::Invalid("hidden_layers must be >= 1".into()));
        }
        if width < 1 {
            return Err(TypeError::Invalid("width must be >= 1".into()));
        }
        if output_dim < 2 {
            return Err(TypeError::Invalid("output_dim must be >= 2".into()));
        }
        Ok(Architecture {
            input_dim,
            hidden_layers,
            width,
            output_dim,
            mode,
        })
    }
}

/// Trained weights; `α` entries live in `alpha_bounds`, `β` in `beta_bounds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkWeights {
    /// F x K input weights.
    pub input_alpha: Vec<Vec<f64>>,
    /// (L-1) matrices of K x K hidden weights.
    pub hidden_alpha: Vec<Vec<Vec<f64>>>,
    /// K x output_dim output weights.
    pub output_alpha: Vec<Vec<f64>>,
    /// L hidden bias vectors (length K) followed by the output bias vector.
    pub biases: Vec<Vec<f64>>,
    pub alpha_bounds: (f64, f64),
    pub beta_bounds: (f64, f64),
}

impl NetworkWeights {
    /// All-zero weights shaped for the architecture.
    pub fn zeros(arch: &Architecture, alpha_bounds: (f64, f64), beta_bounds: (f64, f64)) -> Self {
        let mut biases: Vec<Vec<f64>> =
            vec![vec![0.0; arch.width]; arch.hidden_layers];
        biases.push(vec![0.0; arch.output_dim]);
        NetworkWeights {
            input_alpha: vec![vec![0.0; arch.width]; arch.input_dim],
            hidden_alpha: vec![
                vec![vec![0.0; arch.width]; arch.width];
                arch.hidden_layers - 1
            ],
            output_alpha: vec![vec![0.0; arch.output_dim]; arch.width],
            biases,
            alpha_bounds,
            beta_bounds,
        }
    }

    /// Verifies shapes against an architecture and bounds on every entry.
    pub fn validate(&self, arch: &Architecture) -> Result<(), TypeError> {
        let k = arch.width;
        if self.input_alpha.len() != arch.input_dim
            || self.input_alpha.iter().any(|r| r.len() != k)
        {
            return Err(TypeError::ShapeMismatch(format!(
                "input_alpha must be {} x {k}",
                arch.input_dim
            )));
        }
        if self.hidden_alpha.len() != arch.hidden_layers - 1
            || self
                .hidden_alpha
                .iter()
                .any(|m| m.len() != k || m.iter().any(|r| r.len() != k))
        {
            return Err(TypeError::ShapeMismatch(format!(
                "hidden_alpha must be {} matrices of {k} x {k}",
                arch.hidden_layers - 1
            )));
        }
        if self.output_alpha.len() != k
            || self.output_alpha.iter().any(|r| r.len() != arch.output_dim)
        {
            return Err(TypeError::ShapeMismatch(format!(
                "output_alpha must be {k} x {}",
                arch.output_dim
            )));
        }
        if self.biases.len() != arch.hidden_layers + 1 {
            return Err(TypeError::ShapeMismatch(format!(
                "expected {} bias vectors",
                arch.hidden_layers + 1
            )));
        }
        for (l, b) in self.biases.iter().enumerate() {
            let want = if l < arch.hidden_layers {
                k
            } else {
                arch.output_dim
            };
            if b.len() != want {
                return Err(TypeError::ShapeMismatch(format!(
                    "bias vector {l} has length {}, expected {want}",
                    b.len()
                )));
            }
        }
        let (alo, ahi) = self.alpha_bounds;
        let (blo, bhi) = self.beta_bounds;
        let alpha_ok = self
            .input_alpha
            .iter()
            .flatten()
            .chain(self.hidden_alpha.iter().flatten().flatten())
            .chain(self.output_alpha.iter().flatten())
            .all(|&w| w >= alo - 1e-12 && w <= ahi + 1e-12);
        if !alpha_ok {
            return Err(TypeError::Invalid(format!(
                "alpha weight outside [{alo}, {ahi}]"
            )));
        }
        if !self
            .biases
            .iter()
            .flatten()
            .all(|&b| b >= blo - 1e-12 && b <= bhi + 1e-12)
        {
            return Err(TypeError::Invalid(format!(
                "bias outside [{blo}, {bhi}]"
            )));
        }
        Ok(())
    }
}

/// Estimated counterfactual quantities per individual and treatment.
#[derive(Debug, Clone)]
pub struct CounterfactualScores {
    /// n x T direct estimates of the conditional mean outcome.
    pub mu_hat: Array2<f64>,
    /// n x T assignment probabilities; rows sum to one, entries in (0, 1).
    pub propensity: Array2<f64>,
    /// n x T doubly robust scores.
    pub psi_hat: Array2<f64>,
}

impl CounterfactualScores {
    pub fn validate(&self) -> Result<(), TypeError> {
        let (n, t) = self.mu_hat.dim();
        if self.propensity.dim() != (n, t) || self.psi_hat.dim() != (n, t) {
            return Err(TypeError::ShapeMismatch(
                "mu_hat, propensity, psi_hat must share n x T shape".into(),
            ));
        }
        for i in 0..n {
            let row = self.propensity.row(i);
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(TypeError::Invalid(format!(
                    "propensity row {i} sums to {sum}"
                )));
            }
            if row.iter().any(|&p| p <= 0.0 || p >= 1.0) {
                return Err(TypeError::Invalid(format!(
                    "propensity row {i} has entries outside (0, 1)"
                )));
            }
        }
        if self.psi_hat.iter().any(|v| !v.is_finite()) {
            return Err(TypeError::Invalid("psi_hat contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Trained policy plus everything needed to reproduce and apply it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyModel {
    pub architecture: Architecture,
    pub weights: NetworkWeights,
    pub objective_value: f64,
    pub gap: f64,
    /// Free-form provenance: seed, lambda, time limit, feature transform.
    pub training_meta: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    schema: String,
    #[serde(flatten)]
    model: PolicyModel,
}

impl PolicyModel {
    pub fn validate(&self) -> Result<(), TypeError> {
        if !self.objective_value.is_finite() {
            return Err(TypeError::Invalid("objective_value must be finite".into()));
        }
        if !(self.gap >= 0.0) {
            return Err(TypeError::Invalid(format!("gap must be >= 0, got {}", self.gap)));
        }
        self.weights.validate(&self.architecture)
    }

    /// Persists as a self-describing JSON document.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TypeError> {
        let file = ModelFile {
            schema: MODEL_SCHEMA.to_string(),
            model: self.clone(),
        };
        let text = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TypeError> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text)?;
        if file.schema != MODEL_SCHEMA {
            return Err(TypeError::SchemaMismatch {
                found: file.schema,
                expected: MODEL_SCHEMA.to_string(),
            });
        }
        Ok(file.model)
    }

    /// The stored feature standardization, if training recorded one.
    pub fn feature_transform(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let parse = |key: &str| -> Option<Vec<f64>> {
            self.training_meta.get(key).map(|s| {
                s.split(',')
                    .filter(|t| !t.is_empty())
                    .map(|t| t.parse().unwrap_or(f64::NAN))
                    .collect()
            })
        };
        match (parse("standardize_mean"), parse("standardize_sd")) {
            (Some(m), Some(s)) if m.len() == s.len() => Some((m, s)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny_dataset() -> Dataset {
        Dataset::new(
            array![[0.0, 1.0], [1.0, 0.5], [-1.0, 2.0]],
            vec![0, 1, 0],
            array![1.0, 2.0, 0.5],
            2,
        )
        .unwrap()
    }

    #[test]
    fn valid_dataset_has_no_diagnostics() {
        assert!(validate_dataset(&tiny_dataset()).is_empty());
    }

    #[test]
    fn out_of_range_treatment_is_named() {
        let mut d = tiny_dataset();
        d.treatments[1] = 5;
        let msgs = validate_dataset(&d);
        assert_eq!(msgs.len(), 1);
        assert!(msgs[0].contains("row 1"), "{msgs:?}");
        assert!(msgs[0].contains("treatment 5"));
    }

    #[test]
    fn missing_treatment_is_a_warning() {
        let mut d = tiny_dataset();
        d.treatment_count = 3;
        let msgs = validate_dataset(&d);
        assert_eq!(msgs.len(), 1);
        assert!(msgs[0].starts_with("warning"), "{msgs:?}");
        assert!(msgs[0].contains("treatment 2"));
    }

    #[test]
    fn feature_outside_bounds_is_flagged() {
        let mut d = tiny_dataset();
        d.feature_bounds[0] = (-0.5, 0.5);
        let msgs = validate_dataset(&d);
        assert!(msgs.iter().any(|m| m.contains("feature 0")));
    }

    #[test]
    fn weight_shapes_follow_architecture() {
        let arch = Architecture::new(2, 2, 3, 2, NetworkMode::Prescription).unwrap();
        let w = NetworkWeights::zeros(&arch, (-1.0, 1.0), (-1.0, 1.0));
        assert!(w.validate(&arch).is_ok());
        let narrower = Architecture::new(2, 2, 2, 2, NetworkMode::Prescription).unwrap();
        assert!(w.validate(&narrower).is_err());
    }

    #[test]
    fn out_of_box_weight_rejected() {
        let arch = Architecture::new(1, 1, 1, 2, NetworkMode::Prescription).unwrap();
        let mut w = NetworkWeights::zeros(&arch, (-1.0, 1.0), (-1.0, 1.0));
        w.input_alpha[0][0] = 1.5;
        assert!(w.validate(&arch).is_err());
    }

    #[test]
    fn model_roundtrip_is_identical() {
        let arch = Architecture::new(2, 1, 3, 2, NetworkMode::Prescription).unwrap();
        let mut w = NetworkWeights::zeros(&arch, (-1.0, 1.0), (-1.0, 1.0));
        w.input_alpha[0][1] = -0.12345678901234567;
        w.biases[1][0] = 0.25;
        let mut meta = BTreeMap::new();
        meta.insert("seed".to_string(), "7".to_string());
        meta.insert("standardize_mean".to_string(), "0.5,-0.25".to_string());
        meta.insert("standardize_sd".to_string(), "1.5,2".to_string());
        let m = PolicyModel {
            architecture: arch,
            weights: w,
            objective_value: 1.25,
            gap: 0.0,
            training_meta: meta,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        let back = PolicyModel::load(&path).unwrap();
        assert_eq!(m, back);
        let (mean, sd) = back.feature_transform().unwrap();
        assert_eq!(mean, vec![0.5, -0.25]);
        assert_eq!(sd, vec![1.5, 2.0]);
    }

    #[test]
    fn wrong_schema_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"{"schema":"other_v9"}"#).unwrap();
        assert!(matches!(
            PolicyModel::load(&path),
            Err(TypeError::SchemaMismatch { .. }) | Err(TypeError::Json(_))
        ));
    }
}
