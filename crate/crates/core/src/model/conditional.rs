//! Conditional laws of a response row given its total score.
//!
//! `Γ(·|i)` is the law of the full row `b ∈ S(i, m)`; `U(·|i)` is the law of
//! its first `m-1` coordinates, supported on vectors whose sum is `i-1` or
//! `i`. Both depend on the parameters only through `ϑ`.

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::symfunc::{log_esp_slice, prefix_suffix, LogWeights};

fn reduced_logw(vartheta: &[f64]) -> Result<Vec<f64>> {
    Ok(LogWeights::from_vartheta(vartheta)?.as_slice().to_vec())
}

/// `Γ(b | i)` for a full binary row `b` of length `m`.
pub fn conditional_pmf(vartheta: &[f64], i: usize, b: &[u8]) -> Result<f64> {
    let m = vartheta.len() + 1;
    if b.len() != m {
        return Err(Error::invalid(format!("row has length {}, expected {m}", b.len())));
    }
    if i > m {
        return Err(Error::invalid(format!("score {i} exceeds m = {m}")));
    }
    if b.iter().any(|&x| x > 1) {
        return Err(Error::invalid("row entries must be 0 or 1"));
    }
    let sum: usize = b.iter().map(|&x| usize::from(x)).sum();
    if sum != i {
        return Ok(0.0);
    }
    let logw = reduced_logw(vartheta)?;
    let e = log_esp_slice(&logw);
    let tilt: f64 = b.iter().zip(&logw).map(|(&x, lw)| f64::from(x) * lw).sum();
    Ok((tilt - e[i]).exp())
}

/// `U(b' | i)` for the first `m-1` coordinates `b'`.
pub fn marginal_pmf(vartheta: &[f64], i: usize, head: &[u8]) -> Result<f64> {
    let m = vartheta.len() + 1;
    if head.len() != m - 1 {
        return Err(Error::invalid(format!("marginal row has length {}, expected {}", head.len(), m - 1)));
    }
    let sum: usize = head.iter().map(|&x| usize::from(x)).sum();
    if sum > i || i - sum > 1 {
        return Ok(0.0);
    }
    let mut full = head.to_vec();
    full.push((i - sum) as u8);
    conditional_pmf(vartheta, i, &full)
}

/// Exact sampler for `Γ(·|i)` by sequential conditional Bernoulli draws.
///
/// Item `j` is included with probability `w_j e_{r-1}(w_{j+1..}) / e_r(w_{j..})`
/// where `r` is the number of items still to be placed.
#[derive(Debug, Clone)]
pub struct FixedSumSampler {
    logw: Vec<f64>,
    suffix: Vec<Vec<f64>>,
}

impl FixedSumSampler {
    pub fn new(vartheta: &[f64]) -> Result<Self> {
        let logw = reduced_logw(vartheta)?;
        let (_, suffix) = prefix_suffix(&logw);
        Ok(Self { logw, suffix })
    }

    pub fn m(&self) -> usize {
        self.logw.len()
    }

    pub fn sample(&self, i: usize, rng: &mut Stream) -> Result<Vec<u8>> {
        let m = self.m();
        if i > m {
            return Err(Error::invalid(format!("score {i} exceeds m = {m}")));
        }
        let mut out = vec![0u8; m];
        let mut r = i;
        for j in 0..m {
            if r == 0 {
                break;
            }
            if r == m - j {
                out[j..].fill(1);
                break;
            }
            let p = (self.logw[j] + self.suffix[j + 1][r - 1] - self.suffix[j][r]).exp();
            if rng.random::<f64>() < p {
                out[j] = 1;
                r -= 1;
            }
        }
        Ok(out)
    }
}

pub fn sample_fixed_sum(vartheta: &[f64], i: usize, rng: &mut Stream) -> Result<Vec<u8>> {
    FixedSumSampler::new(vartheta)?.sample(i, rng)
}

/// Atoms `(b', U(b'|i))` of the marginal law, in lexicographic order of `b'`.
pub fn marginal_atoms(vartheta: &[f64], i: usize) -> Result<Vec<(Vec<u8>, f64)>> {
    let d = vartheta.len();
    if d >= 31 {
        return Err(Error::Budget(format!("enumerating 2^{d} marginal atoms")));
    }
    let mut atoms = Vec::new();
    for code in 0u32..(1 << d) {
        let b: Vec<u8> = (0..d).map(|l| ((code >> (d - 1 - l)) & 1) as u8).collect();
        let p = marginal_pmf(vartheta, i, &b)?;
        if p > 0.0 {
            atoms.push((b, p));
        }
    }
    Ok(atoms)
}

/// Dense pmf of `T = N_m·1 + Y` with `Y ∈ {0..n'}^{m-1}`, `n' = N_1+…+N_{m-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeLaw {
    pub dim: usize,
    pub side: usize,
    pub offset: u64,
    pub probs: Vec<f64>,
}

impl LatticeLaw {
    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.dim];
        for l in (0..self.dim.saturating_sub(1)).rev() {
            s[l] = s[l + 1] * self.side;
        }
        s
    }

    fn decode(&self, mut idx: usize) -> Vec<u64> {
        let mut t = vec![0u64; self.dim];
        for l in (0..self.dim).rev() {
            t[l] = (idx % self.side) as u64 + self.offset;
            idx /= self.side;
        }
        t
    }

    /// Probability of the column-sum vector `t` (length `m-1`).
    pub fn prob(&self, t: &[u64]) -> f64 {
        if t.len() != self.dim {
            return 0.0;
        }
        let mut idx = 0usize;
        for (&v, s) in t.iter().zip(self.strides()) {
            if v < self.offset || (v - self.offset) as usize >= self.side {
                return 0.0;
            }
            idx += (v - self.offset) as usize * s;
        }
        self.probs[idx]
    }

    /// Non-zero atoms `(t, p)` in lexicographic order.
    pub fn atoms(&self) -> Vec<(Vec<u64>, f64)> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| (self.decode(i), p))
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.dim];
        for (t, p) in self.atoms() {
            for (m, v) in mu.iter_mut().zip(t) {
                *m += p * v as f64;
            }
        }
        mu
    }
}

/// Exact conditional law of `T` given `N`: the convolution over subjects of
/// `U(·|k)`, each repeated `N_k` times, shifted by `N_m`.
pub fn exact_law_t_given_n(vartheta: &[f64], counts: &[u64], cap: u128) -> Result<LatticeLaw> {
    let m = vartheta.len() + 1;
    if counts.len() != m + 1 {
        return Err(Error::invalid(format!("histogram has {} cells, expected {}", counts.len(), m + 1)));
    }
    let d = m - 1;
    let interior: u64 = counts[1..m].iter().sum();
    let side = interior as u128 + 1;
    let required = side.checked_pow(d as u32).unwrap_or(u128::MAX);
    if required > cap {
        return Err(Error::CapExceeded { required, cap });
    }
    let side = side as usize;
    let mut law = LatticeLaw { dim: d, side, offset: counts[m], probs: vec![0.0; required as usize] };
    law.probs[0] = 1.0;
    let strides = law.strides();
    // the cell k = m contributes the constant offset; k = 0 contributes nothing
    for k in 1..m {
        if counts[k] == 0 {
            continue;
        }
        let shifts: Vec<(usize, f64)> = marginal_atoms(vartheta, k)?
            .into_iter()
            .map(|(b, p)| (b.iter().zip(&strides).map(|(&x, s)| usize::from(x) * s).sum(), p))
            .collect();
        for _ in 0..counts[k] {
            let mut next = vec![0.0; law.probs.len()];
            for (idx, &p) in law.probs.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for &(shift, q) in &shifts {
                    next[idx + shift] += p * q;
                }
            }
            law.probs = next;
        }
    }
    Ok(law)
}
