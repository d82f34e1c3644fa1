//! Total variation (as the L1 distance, i.e. `2 sup_A |P(A) - Q(A)|`) and
//! Hellinger distances.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};
use crate::mvn;
use crate::numeric::{norm_cdf, norm_interval, norm_sf};
use crate::par::{map_range, Execution};
use crate::rng::{child_stream, Stream};

const NORMALIZATION_TOL: f64 = 1e-10;

fn check_pmf<K>(p: &BTreeMap<K, f64>, name: &str) -> Result<()> {
    if p.values().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::invalid(format!("{name} has a negative or non-finite mass")));
    }
    let total: f64 = p.values().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::invalid(format!("{name} sums to {total}, not 1")));
    }
    Ok(())
}

/// `Σ_x |p(x) - q(x)|` over the union of supports.
pub fn tv_discrete<K: Ord>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> Result<f64> {
    check_pmf(p, "first pmf")?;
    check_pmf(q, "second pmf")?;
    let mut tv = 0.0;
    for (k, a) in p {
        tv += (a - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, b) in q {
        if !p.contains_key(k) {
            tv += b;
        }
    }
    Ok(tv)
}

/// How [`tv_gaussian_numeric`] may spend its effort.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvBudget {
    /// Grid points per axis for `d = 2`.
    pub grid_2d: usize,
    /// Grid points per axis for `d = 3`.
    pub grid_3d: usize,
    /// Monte Carlo draws for `4 <= d <= 6`, or for any `d` when `force_mc`.
    pub mc_samples: usize,
    pub force_mc: bool,
    pub seed: u64,
}

impl Default for TvBudget {
    fn default() -> Self {
        Self { grid_2d: 1024, grid_3d: 192, mc_samples: 200_000, force_mc: false, seed: 0 }
    }
}

/// TV estimate with an error bar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvEstimate {
    pub estimate: f64,
    pub error_bar: f64,
}

/// Both laws in coordinates where the first is `N(0, I)` and the second is
/// `N(nu, diag(var))`.
struct Canonical {
    nu: Vec<f64>,
    var: Vec<f64>,
}

fn canonical(mu1: &DVector<f64>, s1: &DMatrix<f64>, mu2: &DVector<f64>, s2: &DMatrix<f64>) -> Result<Canonical> {
    let d = mu1.len();
    if mu2.len() != d || s1.shape() != (d, d) || s2.shape() != (d, d) {
        return Err(Error::invalid("mean and covariance dimensions disagree"));
    }
    let ch1 = mvn::require_spd(s1)?;
    mvn::require_spd(s2)?;
    let l = ch1.l();
    let a = l.clone().try_inverse().ok_or(Error::NotSpd)?;
    let nu = &a * (mu2 - mu1);
    let mut s = &a * s2 * a.transpose();
    s = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let nu = eig.eigenvectors.transpose() * nu;
    Ok(Canonical { nu: nu.as_slice().to_vec(), var: eig.eigenvalues.as_slice().to_vec() })
}

/// Exact L1 distance between `N(m1, v1)` and `N(m2, v2)` on the line, by
/// locating the density crossings and summing interval probabilities.
pub fn tv_gaussian_1d(m1: f64, v1: f64, m2: f64, v2: f64) -> f64 {
    let (s1, s2) = (v1.sqrt(), v2.sqrt());
    let a = 0.5 / v2 - 0.5 / v1;
    let b = m1 / v1 - m2 / v2;
    let c = 0.5 * m2 * m2 / v2 - 0.5 * m1 * m1 / v1 + (s2 / s1).ln();
    let mut roots = Vec::new();
    if a.abs() <= 1e-14 * (0.5 / v1) {
        if b != 0.0 {
            roots.push(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc > 0.0 {
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            roots.push(q / a);
            roots.push(c / q);
        }
    }
    roots.sort_by(f64::total_cmp);
    let mut edges = vec![f64::NEG_INFINITY];
    edges.extend(roots);
    edges.push(f64::INFINITY);
    let prob = |m: f64, s: f64, lo: f64, hi: f64| {
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            1.0
        } else if lo == f64::NEG_INFINITY {
            norm_cdf((hi - m) / s)
        } else if hi == f64::INFINITY {
            norm_sf((lo - m) / s)
        } else {
            norm_interval((lo - m) / s, (hi - m) / s)
        }
    };
    edges
        .windows(2)
        .map(|w| (prob(m1, s1, w[0], w[1]) - prob(m2, s2, w[0], w[1])).abs())
        .sum()
}

fn axis_grid(nu: f64, var: f64, points: usize) -> (Vec<f64>, f64) {
    const REACH: f64 = 8.5;
    let sd = var.sqrt();
    let lo = (-REACH).min(nu - REACH * sd);
    let hi = REACH.max(nu + REACH * sd);
    let h = (hi - lo) / points as f64;
    ((0..points).map(|i| lo + (i as f64 + 0.5) * h).collect(), h)
}

fn log_phi(z: f64, mean: f64, var: f64) -> f64 {
    let u = z - mean;
    -0.5 * u * u / var - 0.5 * (2.0 * std::f64::consts::PI * var).ln()
}

/// Midpoint-rule L1 distance on a product grid in canonical coordinates.
fn grid_l1(c: &Canonical, points: usize, exec: Execution) -> f64 {
    let d = c.nu.len();
    let axes: Vec<(Vec<f64>, f64)> = (0..d).map(|i| axis_grid(c.nu[i], c.var[i], points)).collect();
    let tables: Vec<(Vec<f64>, Vec<f64>)> = axes
        .iter()
        .enumerate()
        .map(|(i, (z, _))| {
            (
                z.iter().map(|&x| log_phi(x, 0.0, 1.0)).collect(),
                z.iter().map(|&x| log_phi(x, c.nu[i], c.var[i])).collect(),
            )
        })
        .collect();
    let cell: f64 = axes.iter().map(|(_, h)| h).product();
    // slice over the first axis so each task walks the remaining axes
    let partial = map_range(exec, points, |i0| {
        let mut sum = 0.0;
        let mut idx = vec![0usize; d];
        idx[0] = i0;
        loop {
            let (mut l1, mut l2) = (0.0, 0.0);
            for (k, &j) in idx.iter().enumerate() {
                l1 += tables[k].0[j];
                l2 += tables[k].1[j];
            }
            sum += (l1.exp() - l2.exp()).abs();
            let mut k = d - 1;
            loop {
                if k == 0 {
                    return sum;
                }
                idx[k] += 1;
                if idx[k] < points {
                    break;
                }
                idx[k] = 0;
                k -= 1;
            }
        }
    });
    partial.iter().sum::<f64>() * cell
}

/// `E_M[2 |p1 - p2| / (p1 + p2)]` under the midpoint mixture `M`, with a
/// 20-group jackknife error bar.
fn mc_l1(c: &Canonical, samples: usize, seed: u64, exec: Execution) -> TvEstimate {
    const GROUPS: usize = 20;
    let d = c.nu.len();
    let per = samples.div_ceil(GROUPS).max(1);
    let group_means = map_range(exec, GROUPS, |g| {
        let mut rng: Stream = child_stream(seed, "tv-mc", g as u64);
        let mut acc = 0.0;
        for i in 0..per {
            let z = mvn::standard_normal(d, &mut rng);
            let from_second = i % 2 == 1;
            let (mut l1, mut l2) = (0.0, 0.0);
            for k in 0..d {
                let x = if from_second { c.nu[k] + c.var[k].sqrt() * z[k] } else { z[k] };
                l1 += log_phi(x, 0.0, 1.0);
                l2 += log_phi(x, c.nu[k], c.var[k]);
            }
            acc += 2.0 * (0.5 * (l2 - l1)).tanh().abs();
        }
        acc / per as f64
    });
    let mean = group_means.iter().sum::<f64>() / GROUPS as f64;
    let loo: Vec<f64> = group_means.iter().map(|g| (mean * GROUPS as f64 - g) / (GROUPS - 1) as f64).collect();
    let loo_mean = loo.iter().sum::<f64>() / GROUPS as f64;
    let var = (GROUPS - 1) as f64 / GROUPS as f64 * loo.iter().map(|v| (v - loo_mean).powi(2)).sum::<f64>();
    TvEstimate { estimate: mean, error_bar: var.sqrt() }
}

/// L1 distance between two Gaussians: exact for `d = 1`, a product grid for
/// `d <= 3` (error bar from the half-resolution grid), Monte Carlo up to
/// `d = 6`.
pub fn tv_gaussian_numeric(
    mu1: &DVector<f64>,
    s1: &DMatrix<f64>,
    mu2: &DVector<f64>,
    s2: &DMatrix<f64>,
    budget: &TvBudget,
) -> Result<TvEstimate> {
    let c = canonical(mu1, s1, mu2, s2)?;
    let d = c.nu.len();
    let exec = Execution::default();
    if budget.force_mc && d >= 1 {
        return Ok(mc_l1(&c, budget.mc_samples, budget.seed, exec));
    }
    match d {
        0 => Ok(TvEstimate { estimate: 0.0, error_bar: 0.0 }),
        1 => Ok(TvEstimate { estimate: tv_gaussian_1d(0.0, 1.0, c.nu[0], c.var[0]), error_bar: 1e-14 }),
        2 | 3 => {
            let g = if d == 2 { budget.grid_2d } else { budget.grid_3d };
            let fine = grid_l1(&c, g, exec);
            let coarse = grid_l1(&c, g / 2, exec);
            Ok(TvEstimate { estimate: fine, error_bar: (fine - coarse).abs() })
        }
        4..=6 => Ok(mc_l1(&c, budget.mc_samples, budget.seed, exec)),
        _ => Err(Error::Budget(format!("numeric TV supports d <= 6, got d = {d}"))),
    }
}

/// Hellinger distance `H = (∫ (√p - √q)²)^{1/2} = (2 (1 - BC))^{1/2}`, so that
/// the L1 distance is at most `2 H`.
pub fn hellinger_gaussian(mu1: &DVector<f64>, s1: &DMatrix<f64>, mu2: &DVector<f64>, s2: &DMatrix<f64>) -> Result<f64> {
    let d = mu1.len();
    if mu2.len() != d || s1.shape() != (d, d) || s2.shape() != (d, d) {
        return Err(Error::invalid("mean and covariance dimensions disagree"));
    }
    let c1 = mvn::require_spd(s1)?;
    let c2 = mvn::require_spd(s2)?;
    let avg = (s1 + s2) * 0.5;
    let ca = mvn::require_spd(&avg)?;
    let log_det = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| 2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let diff = mu1 - mu2;
    let quad = diff.dot(&ca.solve(&diff));
    let log_bc = 0.25 * log_det(&c1) + 0.25 * log_det(&c2) - 0.5 * log_det(&ca) - 0.125 * quad;
    // 1 - BC without cancellation for nearly equal laws
    let one_minus_bc = -log_bc.exp_m1();
    Ok((2.0 * one_minus_bc.max(0.0)).sqrt())
}

/// Exact L1 distance between `N(0, c I_d)` and `N(0, I_d)` through the
/// chi-square CDF at the radius where the densities cross.
pub fn tv_isotropic_scale(c: f64, d: usize) -> f64 {
    if (c - 1.0).abs() < 1e-15 || d == 0 {
        return 0.0;
    }
    let k = d as f64 / 2.0;
    let r2 = d as f64 * c * c.ln() / (c - 1.0);
    let chi2 = |x: f64| gamma_lr(k, x / 2.0);
    2.0 * (chi2(r2) - chi2(r2 / c)).abs()
}
