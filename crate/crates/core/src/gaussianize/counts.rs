use nalgebra::{DMatrix, DVector};
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::model::{cell_probs, AbilityDistribution, DifficultyParams};
use crate::mvn;
use crate::rng::Stream;
use crate::symfunc::{psi_eval, Order};

/// Multinomial draw by sequential conditional binomials.
pub fn sample_multinomial(n: u64, q: &[f64], rng: &mut Stream) -> Result<Vec<u64>> {
    if q.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(Error::invalid("cell probabilities must be nonnegative"));
    }
    let mut out = vec![0u64; q.len()];
    let mut left = n;
    let mut mass: f64 = q.iter().sum();
    for (k, &p) in q.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == q.len() {
            out[k] = left;
            break;
        }
        let r = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(left, r).map_err(|e| Error::invalid(e.to_string()))?.sample(rng);
        out[k] = draw;
        left -= draw;
        mass -= p;
    }
    Ok(out)
}

/// Stage-D draw of `T**` given `N`: `N(ϑ, ΔΨ_N(ϑ)^{-1})`.
pub fn sample_stage_d(vartheta: &[f64], counts: &[u64], rng: &mut Stream) -> Result<Vec<f64>> {
    let ev = psi_eval(counts, vartheta, Order::Hessian)?;
    let inv = ev.hessian().clone().cholesky().ok_or(Error::SingularHessian)?.inverse();
    let f = mvn::factor(&inv)?;
    Ok(mvn::sample(&DVector::from_column_slice(vartheta), &f, rng).as_slice().to_vec())
}

/// `N* ~ N(n q̃, n (diag q̃ - q̃ q̃ᵀ))` with `q̃ = (q_1, …, q_m)`.
pub fn sample_e_counts_from(q: &[f64], n: u64, rng: &mut Stream) -> Result<Vec<f64>> {
    let qt = DVector::from_column_slice(&q[1..]);
    let nf = n as f64;
    let cov = (DMatrix::from_diagonal(&qt) - &qt * qt.transpose()) * nf;
    let f = mvn::factor(&cov)?;
    if f.defect > 0.0 {
        log::debug!("experiment E covariance floored (defect {:e})", f.defect);
    }
    Ok(mvn::sample(&(qt * nf), &f, rng).as_slice().to_vec())
}

pub fn sample_e_counts(
    params: &DifficultyParams,
    ability: &AbilityDistribution,
    n: u64,
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    sample_e_counts_from(&cell_probs(params, ability)?.q, n, rng)
}

/// `N** ~ N(n q, n diag q)`, independent coordinates `0..=m`.
pub fn sample_f_counts_from(q: &[f64], n: u64, rng: &mut Stream) -> Vec<f64> {
    let nf = n as f64;
    mvn::standard_normal(q.len(), rng)
        .iter()
        .zip(q)
        .map(|(z, p)| nf * p + (nf * p).sqrt() * z)
        .collect()
}

pub fn sample_f_counts(
    params: &DifficultyParams,
    ability: &AbilityDistribution,
    n: u64,
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    Ok(sample_f_counts_from(&cell_probs(params, ability)?.q, n, rng))
}

/// `τ(x) = (x_1, …, x_m) · n / max(ζ, Σ_j x_j)`.
pub fn tau(x: &[f64], n: u64, zeta: f64) -> Result<Vec<f64>> {
    if !(zeta > 0.0) {
        return Err(Error::invalid("zeta must be positive"));
    }
    let total: f64 = x.iter().sum();
    let scale = n as f64 / zeta.max(total);
    Ok(x[1..].iter().map(|v| v * scale).collect())
}

/// Recovers `x` from `(τ(x), Σx)` when `Σx >= ζ`.
pub fn tau_inverse(t: &[f64], total: f64, n: u64) -> Vec<f64> {
    let tail: Vec<f64> = t.iter().map(|v| v * total / n as f64).collect();
    let mut x = vec![total - tail.iter().sum::<f64>()];
    x.extend(tail);
    x
}

/// `[x]_+`: nearest integer (ties to even), floored at zero.
pub fn positive_part(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.round_ties_even().max(0.0) as u64).collect()
}
