use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::marginal_atoms;

/// Largest `m` accepted by [`kappa_bruteforce`].
pub const KAPPA_MAX_M: usize = 14;

/// `min_{k, l} E[p_l (1 - p_l)]` with `p_l = P(b_l = 1 | b_{-l})` under
/// `U(·|k)`, by enumeration of the marginal atoms.
pub fn kappa_bruteforce(vartheta: &[f64], score_set: &[usize]) -> Result<f64> {
    let m = vartheta.len() + 1;
    if m > KAPPA_MAX_M {
        return Err(Error::Budget(format!("kappa enumeration supports m <= {KAPPA_MAX_M}, got m = {m}")));
    }
    if m < 2 {
        return Err(Error::invalid("kappa needs at least two items"));
    }
    if score_set.is_empty() {
        return Err(Error::invalid("score set is empty"));
    }
    if let Some(k) = score_set.iter().find(|&&k| k == 0 || k >= m) {
        return Err(Error::invalid(format!("score {k} has a degenerate conditional law (need 1 <= k <= m-1)")));
    }
    let d = m - 1;
    let mut kappa = f64::INFINITY;
    for &k in score_set {
        let atoms: HashMap<Vec<u8>, f64> = marginal_atoms(vartheta, k)?.into_iter().collect();
        for l in 0..d {
            let mut e = 0.0;
            for (b, &p) in &atoms {
                let mut flip = b.clone();
                flip[l] ^= 1;
                let other = atoms.get(&flip).copied().unwrap_or(0.0);
                let p_one = if b[l] == 1 { p / (p + other) } else { other / (p + other) };
                e += p * p_one * (1.0 - p_one);
            }
            kappa = kappa.min(e);
        }
    }
    Ok(kappa)
}

/// `exp(-6R) / ((m-1)(1 + exp(2R)))`.
pub fn kappa_lower_bound(m: usize, radius: f64) -> f64 {
    (-6.0 * radius).exp() / ((m as f64 - 1.0) * (1.0 + (2.0 * radius).exp()))
}
