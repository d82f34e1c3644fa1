//! Confidence ellipsoids for the difficulty parameters, their maximal axis,
//! and coverage simulation.

mod coverage;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};
use crate::model::interior_count;
use crate::symfunc::{psi_eval, Order};

pub use coverage::{coverage_sim, oracle_conditional_coverage, CoverageConfig, CoverageMode, CoverageResult};

/// `m × (m-1)` lift from reduced coordinates to the sum-zero hyperplane:
/// `I - 11ᵀ/m` on top of a `-1/m` row, so `θ = Z ϑ`.
pub fn z_matrix(m: usize) -> DMatrix<f64> {
    assert!(m >= 2, "z_matrix needs m >= 2");
    let inv = 1.0 / m as f64;
    DMatrix::from_fn(m, m - 1, |r, c| if r == c { 1.0 - inv } else { -inv })
}

/// `α`-quantile of `χ²(df)` by bisection on the regularized lower incomplete
/// gamma function.
pub fn chi2_quantile(df: usize, alpha: f64) -> Result<f64> {
    if df == 0 {
        return Err(Error::invalid("chi-square quantile needs df >= 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("confidence level must lie in (0, 1), got {alpha}")));
    }
    let a = df as f64 / 2.0;
    let cdf = |x: f64| gamma_lr(a, x / 2.0);
    let mut hi = df as f64 + 1.0;
    while cdf(hi) < alpha {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-11 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Where the quadratic form of the ellipsoid is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EllipsoidKind {
    /// `ΔΨ_N(T**)`.
    PlugIn,
    /// `ΔΨ_N(ϑ)` at the true parameter.
    Oracle,
}

/// `{x : Σx = 0, (x - c)ᵀ S (x - c) <= ι}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub kind: EllipsoidKind,
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    pub iota: f64,
    pub alpha: f64,
    /// Reduced-coordinate center `T**`.
    pub t_star_star: Vec<f64>,
    /// `ΔΨ_N` at the evaluation point, `(m-1) × (m-1)`.
    pub hessian: DMatrix<f64>,
}

fn assemble(kind: EllipsoidKind, t_ss: &[f64], hessian: DMatrix<f64>, alpha: f64) -> Result<Ellipsoid> {
    let m = t_ss.len() + 1;
    let z = z_matrix(m);
    let ztz_inv = (z.transpose() * &z).try_inverse().ok_or(Error::SingularHessian)?;
    let left = &z * &ztz_inv;
    let mut shape = &left * &hessian * left.transpose();
    shape = 0.5 * (&shape + shape.transpose());
    Ok(Ellipsoid {
        kind,
        center: &z * DVector::from_column_slice(t_ss),
        shape,
        iota: chi2_quantile(m - 1, alpha)?,
        alpha,
        t_star_star: t_ss.to_vec(),
        hessian,
    })
}

fn check_inputs(t_ss: &[f64], counts: &[u64]) -> Result<()> {
    if t_ss.is_empty() || counts.len() != t_ss.len() + 2 {
        return Err(Error::invalid(format!(
            "T** has {} entries but the histogram has {} cells (need m-1 and m+1)",
            t_ss.len(),
            counts.len()
        )));
    }
    if t_ss.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("T** has non-finite entries"));
    }
    if interior_count(counts) == 0 {
        return Err(Error::Degenerate);
    }
    Ok(())
}

/// Plug-in ellipsoid `Ê`. Fails with [`Error::Degenerate`] when no subject
/// has an interior score.
pub fn build_ellipsoid(t_ss: &[f64], counts: &[u64], alpha: f64) -> Result<Ellipsoid> {
    check_inputs(t_ss, counts)?;
    let h = psi_eval(counts, t_ss, Order::Hessian)?.hessian().clone();
    assemble(EllipsoidKind::PlugIn, t_ss, h, alpha)
}

/// Oracle ellipsoid `Ẽ`, evaluating `ΔΨ_N` at the true `ϑ`.
pub fn build_oracle_ellipsoid(t_ss: &[f64], vartheta: &[f64], counts: &[u64], alpha: f64) -> Result<Ellipsoid> {
    check_inputs(t_ss, counts)?;
    if vartheta.len() != t_ss.len() {
        return Err(Error::invalid("vartheta and T** differ in length"));
    }
    let h = psi_eval(counts, vartheta, Order::Hessian)?.hessian().clone();
    assemble(EllipsoidKind::Oracle, t_ss, h, alpha)
}

/// Orthonormal basis of the sum-zero hyperplane (Helmert columns).
fn hyperplane_basis(m: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(m, m - 1);
    for j in 0..m - 1 {
        let k = (j + 1) as f64;
        let norm = (k * (k + 1.0)).sqrt();
        for r in 0..=j {
            q[(r, j)] = 1.0 / norm;
        }
        q[(j + 1, j)] = -k / norm;
    }
    q
}

impl Ellipsoid {
    pub fn m(&self) -> usize {
        self.center.len()
    }

    /// Quadratic form `(x - c)ᵀ S (x - c)`.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let d = DVector::from_column_slice(x) - &self.center;
        (d.transpose() * &self.shape * &d)[(0, 0)]
    }

    /// Membership: `x` sums to zero within `1e-10·m` and lies inside.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.m() && x.iter().sum::<f64>().abs() <= 1e-10 * self.m() as f64 && self.distance(x) <= self.iota
    }

    /// Membership of `θ = Zϑ` evaluated in reduced coordinates as
    /// `(ϑ - T**)ᵀ ΔΨ (ϑ - T**) <= ι`.
    pub fn contains_reduced(&self, vartheta: &[f64]) -> bool {
        let d = DVector::from_column_slice(vartheta) - DVector::from_column_slice(&self.t_star_star);
        (d.transpose() * &self.hessian * &d)[(0, 0)] <= self.iota
    }

    /// Smallest eigenvalue of the shape restricted to the hyperplane.
    pub fn hyperplane_min_eigenvalue(&self) -> f64 {
        let q = hyperplane_basis(self.m());
        let r = q.transpose() * &self.shape * &q;
        SymmetricEigen::new(0.5 * (&r + r.transpose())).eigenvalues.min()
    }

    /// `2 / √λ_min` on the hyperplane.
    pub fn maximal_axis(&self) -> Result<f64> {
        let lambda = self.hyperplane_min_eigenvalue();
        if !(lambda > 0.0) {
            return Err(Error::Degenerate);
        }
        Ok(2.0 / lambda.sqrt())
    }
}
