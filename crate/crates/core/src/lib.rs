//! Prescriptive 0-1 neural networks: shallow binary-activation networks
//! trained by exact mixed-integer optimization against counterfactual
//! (doubly robust, inverse propensity, direct) or predictive
//! (negative log-likelihood) objectives.

pub mod formulation;
pub mod inference;
pub mod rng;
pub mod types;
