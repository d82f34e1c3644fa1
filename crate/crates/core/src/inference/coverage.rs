use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{build_ellipsoid, chi2_quantile};
use crate::error::{Error, Result};
use crate::gaussianize::{chain_b_to_c, chain_c_to_d, sample_multinomial, sample_stage_d, ChainObservation, SmoothingConfig};
use crate::model::{cell_probs, interior_count, simulate_scores, sufficient_stats, AbilityDistribution, DifficultyParams};
use crate::mvn::standard_normal;
use crate::par::{map_range, Execution};
use crate::rng::child_stream;
use crate::symfunc::{psi_eval, Order};

/// How each replicate produces `(N, T**)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageMode {
    /// `N ~ Multinomial(n, q)`, then `T**` from its stage-D law.
    D,
    /// Simulated score matrix, reduced, smoothed and inverted.
    EndToEndA,
}

impl std::str::FromStr for CoverageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d" => Ok(Self::D),
            "a" | "end-to-end-a" | "e2e" => Ok(Self::EndToEndA),
            _ => Err(Error::invalid(format!("unknown coverage mode '{s}' (use d or end-to-end-a)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageConfig {
    pub params: DifficultyParams,
    pub ability: AbilityDistribution,
    pub n: usize,
    pub alpha: f64,
    pub reps: usize,
    pub mode: CoverageMode,
    /// Smoothing for end-to-end runs; `None` inverts the integer `T` directly.
    pub smoothing: Option<SmoothingConfig>,
    pub seed: u64,
    pub exec: Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub replications: usize,
    pub hits: usize,
    pub coverage: f64,
    pub axis_median: Option<f64>,
    pub axis_p90: Option<f64>,
    pub degenerate_count: usize,
    pub failures: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failure_examples: Vec<String>,
    /// Maximal axis per successful replicate, in replicate order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub axes: Vec<f64>,
}

enum Outcome {
    Covered(bool, f64),
    Degenerate,
    Failed(String),
}

fn replicate(cfg: &CoverageConfig, q: &[f64], index: usize) -> Outcome {
    let mut rng = child_stream(cfg.seed, "coverage", index as u64);
    let vartheta = cfg.params.vartheta();
    let mut run = || -> Result<Option<(bool, f64)>> {
        let (t_ss, counts) = match cfg.mode {
            CoverageMode::D => {
                let counts = sample_multinomial(cfg.n as u64, q, &mut rng)?;
                if interior_count(&counts) == 0 {
                    return Ok(None);
                }
                (sample_stage_d(&vartheta, &counts, &mut rng)?, counts)
            }
            CoverageMode::EndToEndA => {
                let stats = sufficient_stats(&simulate_scores(&cfg.params, &cfg.ability, cfg.n, &mut rng)?);
                if stats.interior() == 0 {
                    return Ok(None);
                }
                let b = ChainObservation::from_stats(&stats);
                let c = match &cfg.smoothing {
                    Some(s) => chain_b_to_c(&b, s, &mut rng)?,
                    None => ChainObservation::C {
                        t_star: stats.t.iter().map(|&v| v as f64).collect(),
                        counts: stats.counts.clone(),
                    },
                };
                let ChainObservation::D { t_star_star, counts, .. } = chain_c_to_d(&c, true)? else {
                    unreachable!("chain_c_to_d yields stage D")
                };
                (t_star_star, counts)
            }
        };
        let e = build_ellipsoid(&t_ss, &counts, cfg.alpha)?;
        Ok(Some((e.contains_reduced(&vartheta), e.maximal_axis()?)))
    };
    match run() {
        Ok(Some((hit, axis))) => Outcome::Covered(hit, axis),
        Ok(None) | Err(Error::Degenerate) => Outcome::Degenerate,
        Err(e) => Outcome::Failed(e.to_string()),
    }
}

fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    Some(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Coverage of the plug-in ellipsoid over independent replicates. Degenerate
/// histograms and failed replicates count as misses.
pub fn coverage_sim(cfg: &CoverageConfig) -> Result<CoverageResult> {
    if cfg.reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    if cfg.n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    chi2_quantile(cfg.params.m() - 1, cfg.alpha)?;
    let q = cell_probs(&cfg.params, &cfg.ability)?.q;
    let outcomes = map_range(cfg.exec, cfg.reps, |i| replicate(cfg, &q, i));
    let mut res = CoverageResult {
        replications: cfg.reps,
        hits: 0,
        coverage: 0.0,
        axis_median: None,
        axis_p90: None,
        degenerate_count: 0,
        failures: 0,
        failure_examples: Vec::new(),
        axes: Vec::new(),
    };
    for o in outcomes {
        match o {
            Outcome::Covered(hit, axis) => {
                res.hits += usize::from(hit);
                res.axes.push(axis);
            }
            Outcome::Degenerate => res.degenerate_count += 1,
            Outcome::Failed(msg) => {
                res.failures += 1;
                if res.failure_examples.len() < 5 {
                    res.failure_examples.push(msg);
                }
            }
        }
    }
    res.coverage = res.hits as f64 / res.replications as f64;
    let mut sorted = res.axes.clone();
    sorted.sort_by(f64::total_cmp);
    res.axis_median = quantile(&sorted, 0.5);
    res.axis_p90 = quantile(&sorted, 0.9);
    Ok(res)
}

/// Fraction of `draws` oracle replicates `T** = ϑ + ΔΨ_N(ϑ)^{-1/2} ε` whose
/// oracle ellipsoid covers `ϑ`.
pub fn oracle_conditional_coverage(
    vartheta: &[f64],
    counts: &[u64],
    alpha: f64,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    if interior_count(counts) == 0 {
        return Err(Error::Degenerate);
    }
    let d = vartheta.len();
    let iota = chi2_quantile(d, alpha)?;
    let h = psi_eval(counts, vartheta, Order::Hessian)?.hessian().clone();
    let eig = SymmetricEigen::new(h.clone());
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::NotSpd);
    }
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    let theta = DVector::from_column_slice(vartheta);
    let mut rng = child_stream(seed, "oracle-coverage", 0);
    let mut hits = 0usize;
    for _ in 0..draws {
        let t_ss = &theta + &inv_sqrt * standard_normal(d, &mut rng);
        let diff = &theta - &t_ss;
        if (diff.transpose() * &h * &diff)[(0, 0)] <= iota {
            hits += 1;
        }
    }
    Ok(hits as f64 / draws as f64)
}
