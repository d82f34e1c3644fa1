use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::interior_count;
use crate::symfunc::{psi_eval, Order};

/// Conditional mean and covariance of `T` given `N`, with the lattice offset
/// `y0 = N_m·(1, …, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentPair {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub offset: Vec<u64>,
}

/// Mean `-∇Ψ_N(ϑ)` and covariance `ΔΨ_N(ϑ)`.
pub fn moments_given_counts(vartheta: &[f64], counts: &[u64]) -> Result<MomentPair> {
    let ev = psi_eval(counts, vartheta, Order::Hessian)?;
    let n_m = *counts.last().expect("validated by psi_eval");
    Ok(MomentPair {
        mean: -ev.gradient(),
        cov: ev.hessian().clone(),
        offset: vec![n_m; vartheta.len()],
    })
}

/// The mean map `x ↦ -∇Ψ_N(x)`; `0` when every subject scored `0` or `m`.
pub fn phi_forward(x: &[f64], counts: &[u64]) -> Result<(Vec<f64>, Vec<u64>)> {
    if interior_count(counts) == 0 {
        return Ok((vec![0.0; x.len()], counts.to_vec()));
    }
    let ev = psi_eval(counts, x, Order::Gradient)?;
    Ok((ev.gradient().iter().map(|g| -g).collect(), counts.to_vec()))
}

/// Upper and lower bounds on the sum of the `s` largest (resp. smallest)
/// coordinates of `T - N_m·1`, `s = 1..d`. The open mean-map range is the set
/// of points meeting every bound strictly.
fn cardinality_bounds(counts: &[u64]) -> (Vec<f64>, Vec<f64>) {
    let m = counts.len() - 1;
    let d = m - 1;
    let mut upper = vec![0.0; d + 1];
    let mut lower = vec![0.0; d + 1];
    for s in 1..=d {
        for k in 1..m {
            let nk = counts[k] as f64;
            upper[s] += nk * s.min(k) as f64;
            lower[s] += nk * (k + s).saturating_sub(1 + d) as f64;
        }
    }
    (upper, lower)
}

/// Whether `target` lies in the open range of the mean map given `N`.
pub fn in_mean_range(counts: &[u64], target: &[f64]) -> bool {
    let d = counts.len().saturating_sub(2);
    if target.len() != d || interior_count(counts) == 0 {
        return false;
    }
    let n_m = counts[d + 1] as f64;
    let mut y: Vec<f64> = target.iter().map(|t| t - n_m).collect();
    if y.iter().any(|v| !v.is_finite()) {
        return false;
    }
    y.sort_by(|a, b| b.total_cmp(a));
    let (upper, lower) = cardinality_bounds(counts);
    let (mut top, mut bottom) = (0.0, 0.0);
    for s in 1..=d {
        top += y[s - 1];
        bottom += y[d - s];
        if top >= upper[s] || bottom <= lower[s] {
            return false;
        }
    }
    true
}

/// Pulls `target` back into the open mean-map range along the segment to
/// the interior point `-∇Ψ_N(0)`, leaving a relative margin. Returns the
/// projected point and whether it moved.
pub fn clamp_to_range(counts: &[u64], target: &[f64], margin: f64) -> Result<(Vec<f64>, bool)> {
    if interior_count(counts) == 0 {
        return Err(Error::Degenerate);
    }
    if in_mean_range(counts, target) {
        return Ok((target.to_vec(), false));
    }
    let (center, _) = phi_forward(&vec![0.0; target.len()], counts)?;
    let at = |t: f64| -> Vec<f64> { center.iter().zip(target).map(|(c, x)| c + t * (x - c)).collect() };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if in_mean_range(counts, &at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON {
            break;
        }
    }
    Ok((at(lo * (1.0 - margin)), true))
}

/// Solves `-∇Ψ_N(x) = target` by damped Newton from `x = 0`.
///
/// Minimizes the convex `Ψ_N(x) + ⟨target, x⟩`, halving the step until the
/// objective does not increase. `tol` bounds the sup-norm residual and
/// defaults to `1e-10·n`.
pub fn cml_invert(counts: &[u64], target: &[f64], tol: Option<f64>) -> Result<Vec<f64>> {
    const MAX_ITER: usize = 200;
    const MAX_HALVINGS: usize = 60;
    let d = target.len();
    if counts.len() != d + 2 {
        return Err(Error::invalid(format!("histogram has {} cells, expected {}", counts.len(), d + 2)));
    }
    if interior_count(counts) == 0 {
        return Err(Error::SingularHessian);
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("target must be finite"));
    }
    let n: u64 = counts.iter().sum();
    let tol = tol.unwrap_or(1e-10 * n as f64);
    let tgt = DVector::from_column_slice(target);
    let objective = |x: &DVector<f64>| -> Result<f64> {
        Ok(psi_eval(counts, x.as_slice(), Order::Value)?.value + tgt.dot(x))
    };
    let mut x = DVector::zeros(d);
    let mut residual = f64::INFINITY;
    for iter in 0..MAX_ITER {
        let ev = psi_eval(counts, x.as_slice(), Order::Hessian)?;
        let grad = ev.gradient() + &tgt;
        residual = grad.amax();
        if residual <= tol {
            log::trace!("Newton converged in {iter} iterations (residual {residual:e})");
            return Ok(x.as_slice().to_vec());
        }
        let Some(ch) = Cholesky::new(ev.hessian().clone()) else {
            return Err(Error::Divergence { iterations: iter, residual });
        };
        let step = -ch.solve(&grad);
        let g0 = ev.value + tgt.dot(&x);
        let slack = 8.0 * f64::EPSILON * g0.abs().max(1.0);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = &x + &step * t;
            if cand.iter().all(|v| v.is_finite()) && objective(&cand)? <= g0 + slack {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some(next) => x = next,
            None => return Err(Error::Divergence { iterations: iter, residual }),
        }
    }
    Err(Error::Divergence { iterations: MAX_ITER, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FixedSumSampler;
    use crate::rng::stream_from_seed;
    use approx::assert_relative_eq;
    use rand::RngExt;

    #[test]
    fn single_subject_moments() {
        let mp = moments_given_counts(&[0.0, 0.0], &[0, 1, 0, 0]).unwrap();
        assert_relative_eq!(mp.mean[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(mp.mean[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(mp.cov[(0, 0)], 2.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(mp.cov[(0, 1)], -1.0 / 9.0, epsilon = 1e-15);
        let zero = moments_given_counts(&[0.5, 0.1], &[4, 0, 0, 0]).unwrap();
        assert_eq!(zero.mean.amax(), 0.0);
        assert_eq!(zero.cov.amax(), 0.0);
    }

    #[test]
    fn moments_match_sampler() {
        let v = [0.5, -0.8, 0.2];
        let counts = [1, 2, 3, 1, 2];
        let mp = moments_given_counts(&v, &counts).unwrap();
        let s = FixedSumSampler::new(&v).unwrap();
        let mut rng = stream_from_seed(13);
        let reps = 100_000;
        let mut sum = DVector::zeros(3);
        let mut sq = DMatrix::zeros(3, 3);
        for _ in 0..reps {
            let mut t = DVector::zeros(3);
            for (k, &c) in counts.iter().enumerate() {
                for _ in 0..c {
                    let b = s.sample(k, &mut rng).unwrap();
                    for l in 0..3 {
                        t[l] += f64::from(b[l]);
                    }
                }
            }
            sum += &t;
            sq += &t * t.transpose();
        }
        let mean = &sum / reps as f64;
        let cov = &sq / reps as f64 - &mean * mean.transpose();
        for l in 0..3 {
            let se = (mp.cov[(l, l)] / reps as f64).sqrt();
            assert!((mean[l] - mp.mean[l]).abs() < 4.0 * se);
            for j in 0..3 {
                let se = ((mp.cov[(l, l)] * mp.cov[(j, j)] + mp.cov[(l, j)].powi(2)) / reps as f64).sqrt();
                assert!((cov[(l, j)] - mp.cov[(l, j)]).abs() < 4.0 * se);
            }
        }
    }

    #[test]
    fn fixed_point_at_zero() {
        let counts = [2, 3, 1, 4];
        let (t, _) = phi_forward(&[0.0, 0.0], &counts).unwrap();
        let x = cml_invert(&counts, &t, None).unwrap();
        assert!(x.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn round_trip_random() {
        let mut rng = stream_from_seed(31);
        for m in 2..=8 {
            let v: Vec<f64> = (0..m - 1).map(|_| rng.random_range(-2.0..2.0)).collect();
            let counts: Vec<u64> = (0..=m).map(|_| rng.random_range(1..20)).collect();
            let n: u64 = counts.iter().sum();
            let (t, _) = phi_forward(&v, &counts).unwrap();
            let x = cml_invert(&counts, &t, None).unwrap();
            for (a, b) in x.iter().zip(&v) {
                assert!((a - b).abs() < 1e-8, "m = {m}");
            }
            let (back, _) = phi_forward(&x, &counts).unwrap();
            for (a, b) in back.iter().zip(&t) {
                assert!((a - b).abs() <= 1e-8 * n as f64);
            }
        }
    }

    #[test]
    fn infeasible_target_diverges() {
        let counts = [0, 5, 5, 0];
        assert!(matches!(cml_invert(&counts, &[11.0, 1.0], None), Err(Error::Divergence { .. })));
        assert_eq!(cml_invert(&[3, 0, 0, 1], &[1.0, 1.0], None), Err(Error::SingularHessian));
    }

    #[test]
    fn range_and_clamp() {
        let counts = [1, 3, 2, 1];
        // y = T - N_m; per subject k=1 atoms have coordinate sum 0 or 1, k=2 sum 1 or 2
        assert!(in_mean_range(&counts, &[2.5, 2.5]));
        assert!(!in_mean_range(&counts, &[6.0, 1.5]));
        assert!(!in_mean_range(&counts, &[1.0, 1.0]));
        let mut rng = stream_from_seed(4);
        for _ in 0..200 {
            let v = [rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)];
            let (t, _) = phi_forward(&v, &counts).unwrap();
            assert!(in_mean_range(&counts, &t));
            let wild = [rng.random_range(-5.0..12.0), rng.random_range(-5.0..12.0)];
            let (c, moved) = clamp_to_range(&counts, &wild, 1e-9).unwrap();
            assert!(in_mean_range(&counts, &c));
            assert_eq!(moved, !in_mean_range(&counts, &wild));
            let x = cml_invert(&counts, &c, None).unwrap();
            let (back, _) = phi_forward(&x, &counts).unwrap();
            for (a, b) in back.iter().zip(&c) {
                assert!((a - b).abs() <= 1e-10 * 7.0);
            }
        }
    }

    #[test]
    fn degenerate_forward() {
        let (t, n) = phi_forward(&[1.0, 2.0], &[2, 0, 0, 3]).unwrap();
        assert_eq!(t, vec![0.0, 0.0]);
        assert_eq!(n, vec![2, 0, 0, 3]);
    }
}
