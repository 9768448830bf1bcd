//! Forward evaluation of a trained 0-1 network and weight extraction from a
//! solver incumbent.
//!
//! Hidden units use the binary activation `1[z >= 0]` (so zero activates);
//! the output layer reports raw pre-activations. Prescription takes the
//! argmax over output scores, prediction a numerically stable soft-max.
//! Everything is a pure function of its inputs.

use crate::types::{Architecture, NetworkWeights, PolicyModel, TypeError};
use pnn_mip::{MipModel, SolveResult};
use thiserror::Error;

/// Solver values this close to a bound are snapped onto it.
pub const EXTRACT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("input has {found} features, network expects {expected}")]
    DimensionMismatch { found: usize, expected: usize },
    #[error("solver result carries no incumbent")]
    NoIncumbent,
    #[error("variable `{0}` not found in model")]
    MissingVariable(String),
    #[error("extracted value {value} for `{name}` violates bounds [{lo}, {hi}]")]
    BoundViolation {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error(transparent)]
    Type(#[from] TypeError),
}

/// Per-layer binary activations plus raw output scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    /// One 0/1 vector per hidden layer.
    pub hidden: Vec<Vec<u8>>,
    /// Raw output pre-activations (no activation applied).
    pub outputs: Vec<f64>,
}

/// Evaluates the network layer by layer on a standardized input.
pub fn forward(weights: &NetworkWeights, x: &[f64]) -> Result<ForwardPass, InferenceError> {
    if x.len() != weights.input_alpha.len() {
        return Err(InferenceError::DimensionMismatch {
            found: x.len(),
            expected: weights.input_alpha.len(),
        });
    }
    let k = weights.output_alpha.len();
    let mut hidden = Vec::with_capacity(weights.biases.len() - 1);

    let mut acts = vec![0u8; k];
    for kk in 0..k {
        let mut pre = weights.biases[0][kk];
        for (d, &xd) in x.iter().enumerate() {
            pre += weights.input_alpha[d][kk] * xd;
        }
        acts[kk] = u8::from(pre >= 0.0);
    }
    hidden.push(acts);

    for (l, alpha) in weights.hidden_alpha.iter().enumerate() {
        let prev = hidden.last().unwrap().clone();
        let mut acts = vec![0u8; k];
        for kk in 0..k {
            let mut pre = weights.biases[l + 1][kk];
            for (kp, &h) in prev.iter().enumerate() {
                if h == 1 {
                    pre += alpha[kp][kk];
                }
            }
            acts[kk] = u8::from(pre >= 0.0);
        }
        hidden.push(acts);
    }

    let last = hidden.last().unwrap();
    let out_dim = weights.biases.last().unwrap().len();
    let mut outputs = vec![0.0; out_dim];
    for t in 0..out_dim {
        let mut pre = weights.biases.last().unwrap()[t];
        for (kp, &h) in last.iter().enumerate() {
            if h == 1 {
                pre += weights.output_alpha[kp][t];
            }
        }
        outputs[t] = pre;
    }
    Ok(ForwardPass { hidden, outputs })
}

/// Argmax treatment; ties break to the lowest id.
pub fn prescribe(weights: &NetworkWeights, x: &[f64]) -> Result<usize, InferenceError> {
    let pass = forward(weights, x)?;
    Ok(argmax(&pass.outputs))
}

/// Class id plus soft-max probabilities (max subtracted before
/// exponentiation so large scores cannot overflow).
pub fn predict(weights: &NetworkWeights, x: &[f64]) -> Result<(usize, Vec<f64>), InferenceError> {
    let pass = forward(weights, x)?;
    let probs = softmax(&pass.outputs);
    Ok((argmax(&pass.outputs), probs))
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

impl PolicyModel {
    /// Applies the stored feature transform (when present) and prescribes.
    pub fn prescribe_raw(&self, x_raw: &[f64]) -> Result<usize, InferenceError> {
        match self.feature_transform() {
            Some((mean, sd)) => {
                let x: Vec<f64> = x_raw
                    .iter()
                    .enumerate()
                    .map(|(d, &v)| (v - mean[d]) / sd[d])
                    .collect();
                prescribe(&self.weights, &x)
            }
            None => prescribe(&self.weights, x_raw),
        }
    }

    pub fn predict_raw(&self, x_raw: &[f64]) -> Result<(usize, Vec<f64>), InferenceError> {
        match self.feature_transform() {
            Some((mean, sd)) => {
                let x: Vec<f64> = x_raw
                    .iter()
                    .enumerate()
                    .map(|(d, &v)| (v - mean[d]) / sd[d])
                    .collect();
                predict(&self.weights, &x)
            }
            None => predict(&self.weights, x_raw),
        }
    }
}

/// Reads `alpha`/`beta` variables out of a solved formulation by name.
/// Values within [`EXTRACT_TOL`] of their box are clamped; anything further
/// out is an error.
pub fn extract_weights(
    model: &MipModel,
    result: &SolveResult,
    arch: &Architecture,
) -> Result<NetworkWeights, InferenceError> {
    let incumbent = result
        .incumbent
        .as_ref()
        .ok_or(InferenceError::NoIncumbent)?;
    let read = |name: String| -> Result<f64, InferenceError> {
        let var = model
            .var_by_name(&name)
            .ok_or_else(|| InferenceError::MissingVariable(name.clone()))?;
        let raw = incumbent[var.id.index()];
        if raw < var.lower - EXTRACT_TOL || raw > var.upper + EXTRACT_TOL {
            return Err(InferenceError::BoundViolation {
                name,
                value: raw,
                lo: var.lower,
                hi: var.upper,
            });
        }
        Ok(raw.clamp(var.lower, var.upper))
    };

    // Bounds are recorded on the variables themselves.
    let probe = model
        .var_by_name(&crate::formulation::alpha_name(0, 0, 0))
        .ok_or_else(|| InferenceError::MissingVariable(crate::formulation::alpha_name(0, 0, 0)))?;
    let alpha_bounds = (probe.lower, probe.upper);
    let beta_probe = model
        .var_by_name(&crate::formulation::beta_name(0, 0))
        .ok_or_else(|| InferenceError::MissingVariable(crate::formulation::beta_name(0, 0)))?;
    let beta_bounds = (beta_probe.lower, beta_probe.upper);

    let l = arch.hidden_layers;
    let k = arch.width;
    let mut w = NetworkWeights::zeros(arch, alpha_bounds, beta_bounds);
    for d in 0..arch.input_dim {
        for kk in 0..k {
            w.input_alpha[d][kk] = read(crate::formulation::alpha_name(0, d, kk))?;
        }
    }
    for layer in 1..l {
        for kp in 0..k {
            for kk in 0..k {
                w.hidden_alpha[layer - 1][kp][kk] =
                    read(crate::formulation::alpha_name(layer, kp, kk))?;
            }
        }
    }
    for kp in 0..k {
        for t in 0..arch.output_dim {
            w.output_alpha[kp][t] = read(crate::formulation::alpha_name(l, kp, t))?;
        }
    }
    for layer in 0..l {
        for kk in 0..k {
            w.biases[layer][kk] = read(crate::formulation::beta_name(layer, kk))?;
        }
    }
    for t in 0..arch.output_dim {
        w.biases[l][t] = read(crate::formulation::beta_name(l, t))?;
    }
    w.validate(arch)?;
    Ok(w)
}
