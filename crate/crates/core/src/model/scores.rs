use rand::RngExt;
use serde::{Deserialize, Serialize};

use super::{AbilityDistribution, DifficultyParams};
use crate::error::{Error, Result};
use crate::numeric::logistic;
use crate::rng::Stream;

/// Binary `n × m` score matrix stored row-major; rows are subjects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    n: usize,
    m: usize,
    entries: Vec<u8>,
}

impl ScoreMatrix {
    pub fn new(n: usize, m: usize, entries: Vec<u8>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::invalid("score matrix needs at least one row and one column"));
        }
        if entries.len() != n * m {
            return Err(Error::invalid(format!("expected {} entries, got {}", n * m, entries.len())));
        }
        if let Some(pos) = entries.iter().position(|&x| x > 1) {
            return Err(Error::invalid(format!(
                "entry at row {}, column {} is {} (must be 0 or 1)",
                pos / m + 1,
                pos % m + 1,
                entries[pos]
            )));
        }
        Ok(Self { n, m, entries })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::invalid(format!("row {} has {} columns, expected {m}", i + 1, rows[i].len())));
        }
        Self::new(rows.len(), m, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, j: usize) -> &[u8] {
        &self.entries[j * self.m..(j + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.entries.chunks(self.m)
    }

    pub fn get(&self, j: usize, k: usize) -> u8 {
        self.entries[j * self.m + k]
    }
}

/// `S` (row sums), `T_1..T_{m-1}`, `T_m` (column sums) and `N` (histogram of
/// row sums).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub s: Vec<u64>,
    pub t: Vec<u64>,
    pub t_m: u64,
    pub counts: Vec<u64>,
}

impl SufficientStats {
    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn m(&self) -> usize {
        self.counts.len() - 1
    }

    /// `N_1 + … + N_{m-1}`.
    pub fn interior(&self) -> u64 {
        interior_count(&self.counts)
    }

    /// Checks the affine identities between `S`, `T` and `N`.
    pub fn check_invariants(&self) -> Vec<(String, bool)> {
        let n = self.s.len() as u64;
        let m = self.m() as u64;
        let total_t: u64 = self.t.iter().sum::<u64>() + self.t_m;
        let total_s: u64 = self.s.iter().sum();
        let weighted: u64 = self.counts.iter().enumerate().map(|(k, c)| k as u64 * c).sum();
        vec![
            ("counts_sum_to_n".into(), self.n() == n),
            ("column_total_equals_row_total".into(), total_t == total_s),
            ("row_total_equals_weighted_counts".into(), total_s == weighted),
            ("column_sums_in_range".into(), self.t.iter().chain([&self.t_m]).all(|&t| t <= n)),
            ("row_sums_in_range".into(), self.s.iter().all(|&s| s <= m)),
        ]
    }
}

pub fn interior_count(counts: &[u64]) -> u64 {
    let m = counts.len().saturating_sub(1);
    if m < 2 {
        return 0;
    }
    counts[1..m].iter().sum()
}

pub fn sufficient_stats(x: &ScoreMatrix) -> SufficientStats {
    let m = x.m();
    let mut col = vec![0u64; m];
    let mut counts = vec![0u64; m + 1];
    let mut s = Vec::with_capacity(x.n());
    for row in x.rows() {
        let mut sum = 0u64;
        for (k, &v) in row.iter().enumerate() {
            col[k] += u64::from(v);
            sum += u64::from(v);
        }
        counts[sum as usize] += 1;
        s.push(sum);
    }
    let t_m = col.pop().expect("m >= 1");
    SufficientStats { s, t: col, t_m, counts }
}

/// Draws `β_j ~ F` i.i.d., then `X_jk ~ Bernoulli(σ(β_j - θ_k))`.
pub fn simulate_scores(
    params: &DifficultyParams,
    ability: &AbilityDistribution,
    n: usize,
    rng: &mut Stream,
) -> Result<ScoreMatrix> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let m = params.m();
    let mut entries = Vec::with_capacity(n * m);
    for _ in 0..n {
        let beta = ability.sample(rng);
        for &th in params.theta() {
            let p = logistic(beta - th);
            entries.push(u8::from(rng.random::<f64>() < p));
        }
    }
    ScoreMatrix::new(n, m, entries)
}
