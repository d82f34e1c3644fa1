//! Multivariate normal helpers: factorization with an eigen fallback,
//! sampling and log density.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// `L` with `L Lᵀ = Σ`. Falls back to `V diag(max(λ, 0))^{1/2}` when the
/// Cholesky factorization fails; the clipped negative mass is kept in
/// `defect`.
#[derive(Debug, Clone)]
pub struct Factor {
    pub l: DMatrix<f64>,
    pub defect: f64,
}

pub fn factor(cov: &DMatrix<f64>) -> Result<Factor> {
    if !cov.is_square() || cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("covariance must be a finite square matrix"));
    }
    if let Some(ch) = Cholesky::new(cov.clone()) {
        return Ok(Factor { l: ch.l(), defect: 0.0 });
    }
    let eig = SymmetricEigen::new(cov.clone());
    let defect: f64 = eig.eigenvalues.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    if defect > 0.0 {
        log::debug!("covariance not positive definite; flooring eigenvalues (defect {defect:e})");
    }
    let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let l = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt);
    Ok(Factor { l, defect })
}

pub fn standard_normal(d: usize, rng: &mut Stream) -> DVector<f64> {
    DVector::from_fn(d, |_, _| StandardNormal.sample(rng))
}

pub fn sample(mean: &DVector<f64>, f: &Factor, rng: &mut Stream) -> DVector<f64> {
    mean + &f.l * standard_normal(mean.len(), rng)
}

/// Strict SPD check through Cholesky.
pub fn require_spd(cov: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    if !cov.is_square() || cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotSpd);
    }
    Cholesky::new(cov.clone()).ok_or(Error::NotSpd)
}

/// Log density of `N(mean, Σ)` at `x` given the Cholesky factor of `Σ`.
pub fn log_density(x: &DVector<f64>, mean: &DVector<f64>, ch: &Cholesky<f64, nalgebra::Dyn>) -> f64 {
    let d = x.len() as f64;
    let z = ch.l().solve_lower_triangular(&(x - mean)).expect("triangular factor");
    let log_det: f64 = ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    -0.5 * (z.norm_squared() + log_det + d * (2.0 * std::f64::consts::PI).ln())
}
