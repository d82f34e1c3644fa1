use serde::{Deserialize, Serialize};

use super::{AbilityDistribution, DifficultyParams};
use crate::error::{Error, Result};
use crate::numeric::softplus;
use crate::symfunc::log_esp_slice;

/// `G(k, θ, F) = log ∫ e^{kβ} Π_l (1 + e^{β - θ_l})^{-1} dF(β)`.
pub fn g_log_norm(k: usize, params: &DifficultyParams, ability: &AbilityDistribution) -> Result<f64> {
    let m = params.m();
    if k > m {
        return Err(Error::invalid(format!("score {k} exceeds m = {m}")));
    }
    let theta = params.theta();
    let log_g = |beta: f64| k as f64 * beta - theta.iter().map(|t| softplus(beta - t)).sum::<f64>();
    let (value, rel_err) = ability.log_expectation(log_g)?;
    log::trace!("G({k}) = {value} (relative error {rel_err:e})");
    Ok(value)
}

/// Score-cell probabilities `q_0..q_m`, renormalized to sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellProbs {
    pub q: Vec<f64>,
    /// `Σ q_k - 1` before renormalization.
    pub raw_defect: f64,
}

/// `q_k = e_k(e^{-θ_1}, …, e^{-θ_m}) · exp G(k, θ, F)`.
pub fn cell_probs(params: &DifficultyParams, ability: &AbilityDistribution) -> Result<CellProbs> {
    let m = params.m();
    let logw: Vec<f64> = params.theta().iter().map(|t| -t).collect();
    let e = log_esp_slice(&logw);
    let mut q = Vec::with_capacity(m + 1);
    for (k, ek) in e.iter().enumerate() {
        q.push((ek + g_log_norm(k, params, ability)?).exp());
    }
    let total: f64 = q.iter().sum();
    let raw_defect = total - 1.0;
    if raw_defect.abs() > 1e-8 {
        log::warn!("cell probabilities sum to 1 {raw_defect:+e} before renormalization");
    } else {
        log::debug!("cell probability defect {raw_defect:e}");
    }
    q.iter_mut().for_each(|v| *v /= total);
    Ok(CellProbs { q, raw_defect })
}
