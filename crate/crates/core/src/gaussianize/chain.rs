use serde::{Deserialize, Serialize};

use super::kernels::{smooth, SmoothingConfig};
use super::moments::{clamp_to_range, cml_invert, in_mean_range};
use crate::error::{Error, Result};
use crate::model::{interior_count, SufficientStats};
use crate::rng::Stream;

/// Relative margin kept from the boundary of the mean-map range when a
/// smoothed statistic is pulled back inside.
pub const CLAMP_MARGIN: f64 = 1e-9;

/// One observation along the chain of experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "UPPERCASE")]
pub enum ChainObservation {
    B { t: Vec<u64>, counts: Vec<u64> },
    C { t_star: Vec<f64>, counts: Vec<u64> },
    D { t_star_star: Vec<f64>, counts: Vec<u64>, clamped: bool },
    E { t_star_star: Vec<f64>, n_star: Vec<f64> },
    F { t_star_star: Vec<f64>, n_star_star: Vec<f64> },
}

impl ChainObservation {
    pub fn from_stats(stats: &SufficientStats) -> Self {
        Self::B { t: stats.t.clone(), counts: stats.counts.clone() }
    }

    pub fn stage(&self) -> char {
        match self {
            Self::B { .. } => 'B',
            Self::C { .. } => 'C',
            Self::D { .. } => 'D',
            Self::E { .. } => 'E',
            Self::F { .. } => 'F',
        }
    }
}

/// `T* = T + U`, `U ~ N(0, b I)`.
pub fn chain_b_to_c(obs: &ChainObservation, cfg: &SmoothingConfig, rng: &mut Stream) -> Result<ChainObservation> {
    let ChainObservation::B { t, counts } = obs else {
        return Err(Error::invalid(format!("expected a stage B observation, got stage {}", obs.stage())));
    };
    let w: Vec<f64> = t.iter().map(|&v| v as f64).collect();
    Ok(ChainObservation::C { t_star: smooth(&w, cfg, rng), counts: counts.clone() })
}

/// `T** = (mean map)^{-1}(T*)`, with `T** = 0` when no subject has an
/// interior score. With `clamp` set, a `T*` outside the mean-map range is
/// first pulled back inside; otherwise the inversion error propagates.
pub fn chain_c_to_d(obs: &ChainObservation, clamp: bool) -> Result<ChainObservation> {
    let ChainObservation::C { t_star, counts } = obs else {
        return Err(Error::invalid(format!("expected a stage C observation, got stage {}", obs.stage())));
    };
    if interior_count(counts) == 0 {
        return Ok(ChainObservation::D { t_star_star: vec![0.0; t_star.len()], counts: counts.clone(), clamped: false });
    }
    let (target, clamped) = if clamp && !in_mean_range(counts, t_star) {
        clamp_to_range(counts, t_star, CLAMP_MARGIN)?
    } else {
        (t_star.clone(), false)
    };
    let x = cml_invert(counts, &target, None)?;
    Ok(ChainObservation::D { t_star_star: x, counts: counts.clone(), clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussianize::phi_forward;
    use crate::rng::stream_from_seed;

    #[test]
    fn tiny_noise_passes_through() {
        let obs = ChainObservation::B { t: vec![3, 4], counts: vec![1, 2, 3, 1] };
        let cfg = SmoothingConfig::new(1e-40).unwrap();
        let c = chain_b_to_c(&obs, &cfg, &mut stream_from_seed(1)).unwrap();
        let ChainObservation::C { t_star, .. } = &c else { panic!() };
        assert_eq!(t_star, &vec![3.0, 4.0]);
        assert!(chain_c_to_d(&obs, true).is_err());
    }

    #[test]
    fn degenerate_goes_to_zero() {
        let obs = ChainObservation::C { t_star: vec![2.2, 1.9], counts: vec![3, 0, 0, 2] };
        let d = chain_c_to_d(&obs, true).unwrap();
        assert_eq!(d, ChainObservation::D { t_star_star: vec![0.0, 0.0], counts: vec![3, 0, 0, 2], clamped: false });
    }

    #[test]
    fn noise_free_round_trip() {
        let counts = vec![2, 5, 4, 3, 1];
        let v = [0.4, -1.1, 0.7];
        let (t, _) = phi_forward(&v, &counts).unwrap();
        let d = chain_c_to_d(&ChainObservation::C { t_star: t.clone(), counts: counts.clone() }, true).unwrap();
        let ChainObservation::D { t_star_star, clamped, .. } = d else { panic!() };
        assert!(!clamped);
        for (a, b) in t_star_star.iter().zip(&v) {
            assert!((a - b).abs() < 1e-8);
        }
        let (back, _) = phi_forward(&t_star_star, &counts).unwrap();
        for (a, b) in back.iter().zip(&t) {
            assert!((a - b).abs() <= 1e-8 * 15.0);
        }
    }

    #[test]
    fn infeasible_without_clamp_errors() {
        let obs = ChainObservation::C { t_star: vec![-1.0, 0.5], counts: vec![0, 3, 0, 0] };
        assert!(chain_c_to_d(&obs, false).is_err());
        let ChainObservation::D { clamped, .. } = chain_c_to_d(&obs, true).unwrap() else { panic!() };
        assert!(clamped);
    }
}
