//! Elementary symmetric polynomials in log space and the log-partition
//! function `Ψ_N(ϑ) = Σ_k N_k · log e_k(w)` with `w_l = exp(-ϑ_l)` for
//! `l < m` and `w_m = 1`.
//!
//! All positive sums are carried as logarithms. Leave-one-out and
//! leave-two-out polynomials are assembled from prefix and suffix tables by
//! log-space convolution, never by dividing a weight back out, so there is
//! no subtractive cancellation anywhere except in the final
//! `E[b_l b_l'] - E[b_l]E[b_l']` covariance, which is formed from
//! probabilities in `[0, 1]`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::numeric::{log_add_exp, log_sum_exp};

/// Per-item log weights `log w_1, …, log w_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeights(Vec<f64>);

impl LogWeights {
    pub fn new(logw: Vec<f64>) -> Result<Self> {
        if logw.is_empty() {
            return Err(Error::invalid("at least one item weight is required"));
        }
        if logw.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("log weights must be finite"));
        }
        Ok(Self(logw))
    }

    /// Weights `exp(-ϑ_1), …, exp(-ϑ_{m-1}), 1` for the reduced parameter.
    pub fn from_vartheta(vartheta: &[f64]) -> Result<Self> {
        let mut logw: Vec<f64> = vartheta.iter().map(|v| -v).collect();
        logw.push(0.0);
        Self::new(logw)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `log e_k(w)` for `k = 0..=m` via the one-item-at-a-time recursion
/// `e_k ← e_k + w_j e_{k-1}`.
pub fn log_esp(logw: &LogWeights) -> Vec<f64> {
    log_esp_slice(logw.as_slice())
}

pub(crate) fn log_esp_slice(logw: &[f64]) -> Vec<f64> {
    let mut e = vec![f64::NEG_INFINITY; logw.len() + 1];
    e[0] = 0.0;
    for (j, &lw) in logw.iter().enumerate() {
        for k in (1..=j + 1).rev() {
            e[k] = log_add_exp(e[k], lw + e[k - 1]);
        }
    }
    e
}

/// Appends one item to a log-ESP vector in place (length grows by one).
pub(crate) fn log_esp_push(e: &mut Vec<f64>, lw: f64) {
    e.push(f64::NEG_INFINITY);
    for k in (1..e.len()).rev() {
        e[k] = log_add_exp(e[k], lw + e[k - 1]);
    }
}

/// Log-space convolution `c_k = log Σ_{i+j=k} exp(a_i + b_j)`.
pub(crate) fn log_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![f64::NEG_INFINITY; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == f64::NEG_INFINITY {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            c[i + j] = log_add_exp(c[i + j], ai + bj);
        }
    }
    c
}

/// Prefix tables `pre[j] = log ESP(w_0..w_{j-1})` and suffix tables
/// `suf[j] = log ESP(w_j..w_{m-1})`, both for `j = 0..=m`.
pub(crate) fn prefix_suffix(logw: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let m = logw.len();
    let mut pre = Vec::with_capacity(m + 1);
    let mut cur = vec![0.0];
    pre.push(cur.clone());
    for &lw in logw {
        log_esp_push(&mut cur, lw);
        pre.push(cur.clone());
    }
    let mut suf = vec![Vec::new(); m + 1];
    let mut cur = vec![0.0];
    suf[m] = cur.clone();
    for j in (0..m).rev() {
        log_esp_push(&mut cur, logw[j]);
        suf[j] = cur.clone();
    }
    (pre, suf)
}

/// `log e_k(w without item j)` for every `j` and `k = 0..m-1`.
pub(crate) fn leave_one_out(logw: &[f64]) -> Vec<Vec<f64>> {
    let (pre, suf) = prefix_suffix(logw);
    (0..logw.len()).map(|j| log_convolve(&pre[j], &suf[j + 1])).collect()
}

/// Requested derivative order for [`psi_eval`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiEvaluation {
    pub value: f64,
    pub gradient: Option<DVector<f64>>,
    pub hessian: Option<DMatrix<f64>>,
    pub min_eigenvalue_estimate: Option<f64>,
}

impl PsiEvaluation {
    pub fn gradient(&self) -> &DVector<f64> {
        self.gradient.as_ref().expect("gradient was not requested")
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        self.hessian.as_ref().expect("hessian was not requested")
    }
}

fn check_inputs(counts: &[u64], point: &[f64]) -> Result<usize> {
    let m = point.len() + 1;
    if counts.len() != m + 1 {
        return Err(Error::invalid(format!(
            "score histogram has {} cells, expected m+1 = {}",
            counts.len(),
            m + 1
        )));
    }
    if point.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("evaluation point must be finite"));
    }
    Ok(m)
}

/// Value, gradient and Hessian of `Ψ_N` at `point = ϑ ∈ R^{m-1}`.
///
/// `counts` is the score histogram `N_0..N_m`. The gradient is
/// `-Σ_k N_k E_k[b_l]` and the Hessian `Σ_k N_k Cov_k(b_l, b_l')`, with the
/// moments taken under the tilted law on `S(k, m)`.
pub fn psi_eval(counts: &[u64], point: &[f64], order: Order) -> Result<PsiEvaluation> {
    let m = check_inputs(counts, point)?;
    let d = m - 1;
    let logw = LogWeights::from_vartheta(point)?;
    let logw = logw.as_slice();
    let e = log_esp_slice(logw);

    let value: f64 = counts
        .iter()
        .zip(&e)
        .filter(|(&n, _)| n > 0)
        .map(|(&n, &ek)| n as f64 * ek)
        .sum();
    if order == Order::Value {
        return Ok(PsiEvaluation { value, gradient: None, hessian: None, min_eigenvalue_estimate: None });
    }

    let active: Vec<usize> = (0..=m).filter(|&k| counts[k] > 0).collect();
    let loo = leave_one_out(logw);

    // inclusion[l][k] = P_k(b_l = 1), exclusion[l][k] = P_k(b_l = 0)
    let mut inclusion = vec![vec![0.0; m + 1]; d];
    let mut exclusion = vec![vec![0.0; m + 1]; d];
    for l in 0..d {
        for &k in &active {
            let with = if k >= 1 { logw[l] + loo[l][k - 1] - e[k] } else { f64::NEG_INFINITY };
            let without = if k < m { loo[l][k] - e[k] } else { f64::NEG_INFINITY };
            inclusion[l][k] = with.exp();
            exclusion[l][k] = without.exp();
        }
    }
    let gradient = DVector::from_fn(d, |l, _| {
        -active.iter().map(|&k| counts[k] as f64 * inclusion[l][k]).sum::<f64>()
    });
    if order == Order::Gradient {
        return Ok(PsiEvaluation { value, gradient: Some(gradient), hessian: None, min_eigenvalue_estimate: None });
    }

    let mut hessian = DMatrix::zeros(d, d);
    for l in 0..d {
        hessian[(l, l)] = active
            .iter()
            .map(|&k| counts[k] as f64 * inclusion[l][k] * exclusion[l][k])
            .sum();
    }
    if d >= 2 {
        let pair = pair_inclusion_aggregates(counts, logw, &e);
        for l in 0..d {
            for lp in (l + 1)..d {
                let product: f64 = active
                    .iter()
                    .map(|&k| counts[k] as f64 * inclusion[l][k] * inclusion[lp][k])
                    .sum();
                let v = pair[l][lp].exp() - product;
                hessian[(l, lp)] = v;
                hessian[(lp, l)] = v;
            }
        }
    }
    let min_eig = if d > 0 {
        SymmetricEigen::new(hessian.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };
    Ok(PsiEvaluation {
        value,
        gradient: Some(gradient),
        hessian: Some(hessian),
        min_eigenvalue_estimate: Some(min_eig),
    })
}

/// `log Σ_k N_k P_k(b_l = 1, b_l' = 1)` for all `l < l' < m-1`.
///
/// `P_k(b_l = b_l' = 1) = w_l w_l' e_{k-2}(w without l, l') / e_k(w)`. The
/// leave-two-out polynomial factors as prefix ⊛ middle ⊛ suffix; the suffix
/// is folded together with the per-score weights `N_k / e_k` once per `l'`,
/// and the prefix ⊛ middle factor is grown one item at a time while `l'`
/// advances, which keeps the whole table at O(m³).
fn pair_inclusion_aggregates(counts: &[u64], logw: &[f64], e: &[f64]) -> Vec<Vec<f64>> {
    let m = logw.len();
    let d = m - 1;
    let (pre, suf) = prefix_suffix(logw);
    let score_weight: Vec<f64> = (0..=m)
        .map(|k| if counts[k] > 0 { (counts[k] as f64).ln() - e[k] } else { f64::NEG_INFINITY })
        .collect();

    // folded[lp][a] = log Σ_c exp(suf[lp+1][c] + score_weight[a + c + 2])
    let folded: Vec<Vec<f64>> = (0..d)
        .map(|lp| {
            let s = &suf[lp + 1];
            (0..=m)
                .map(|a| {
                    let terms: Vec<f64> = s
                        .iter()
                        .enumerate()
                        .filter_map(|(c, &sc)| {
                            let k = a + c + 2;
                            (k <= m && score_weight[k] > f64::NEG_INFINITY).then(|| sc + score_weight[k])
                        })
                        .collect();
                    log_sum_exp(&terms)
                })
                .collect()
        })
        .collect();

    let mut out = vec![vec![f64::NEG_INFINITY; d]; d];
    for l in 0..d {
        let mut head = pre[l].clone();
        for lp in (l + 1)..d {
            let terms: Vec<f64> = head
                .iter()
                .zip(&folded[lp])
                .map(|(&h, &f)| h + f)
                .filter(|v| *v > f64::NEG_INFINITY)
                .collect();
            out[l][lp] = logw[l] + logw[lp] + log_sum_exp(&terms);
            log_esp_push(&mut head, logw[lp]);
        }
    }
    out
}

/// Largest deviation between the analytic derivatives of `Ψ_N` and central
/// differences, relative to the largest analytic entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDiffReport {
    pub gradient_deviation: f64,
    pub hessian_deviation: f64,
}

impl FiniteDiffReport {
    pub fn max_deviation(&self) -> f64 {
        self.gradient_deviation.max(self.hessian_deviation)
    }
}

/// Gradient is checked against central differences of the value, the
/// Hessian against central differences of the analytic gradient.
pub fn finite_diff_check(counts: &[u64], point: &[f64], h: f64) -> Result<FiniteDiffReport> {
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let full = psi_eval(counts, point, Order::Hessian)?;
    let d = point.len();
    let mut grad_fd = DVector::zeros(d);
    let mut hess_fd = DMatrix::zeros(d, d);
    let mut x = point.to_vec();
    for l in 0..d {
        x[l] = point[l] + h;
        let up = psi_eval(counts, &x, Order::Gradient)?;
        x[l] = point[l] - h;
        let down = psi_eval(counts, &x, Order::Gradient)?;
        x[l] = point[l];
        grad_fd[l] = (up.value - down.value) / (2.0 * h);
        let col = (up.gradient() - down.gradient()) / (2.0 * h);
        hess_fd.set_column(l, &col);
    }
    Ok(FiniteDiffReport {
        gradient_deviation: relative_deviation(full.gradient().as_slice(), grad_fd.as_slice()),
        hessian_deviation: relative_deviation(full.hessian().as_slice(), hess_fd.as_slice()),
    })
}

fn relative_deviation(analytic: &[f64], approx: &[f64]) -> f64 {
    let diff = analytic.iter().zip(approx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if diff == 0.0 {
        return 0.0;
    }
    let scale = analytic.iter().map(|a| a.abs()).fold(0.0, f64::max);
    diff / scale.max(f64::MIN_POSITIVE)
}
