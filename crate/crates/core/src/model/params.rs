use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Item difficulties `θ ∈ [-R, R]^m` calibrated to sum to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyParams {
    theta: Vec<f64>,
    radius: f64,
}

impl DifficultyParams {
    pub fn new(theta: Vec<f64>, radius: f64) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::invalid("at least one item is required"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius must be positive and finite"));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("difficulties must be finite"));
        }
        let m = theta.len() as f64;
        let sum: f64 = theta.iter().sum();
        if sum.abs() > 1e-12 * m {
            return Err(Error::invalid(format!("difficulties must sum to zero (sum = {sum:e})")));
        }
        if let Some(t) = theta.iter().find(|t| t.abs() > radius) {
            return Err(Error::invalid(format!("difficulty {t} lies outside [-{radius}, {radius}]")));
        }
        Ok(Self { theta, radius })
    }

    /// Centers an arbitrary vector so that it sums to zero before validating.
    pub fn centered(raw: &[f64], radius: f64) -> Result<Self> {
        let mean = raw.iter().sum::<f64>() / raw.len().max(1) as f64;
        Self::new(raw.iter().map(|t| t - mean).collect(), radius)
    }

    /// `θ = Z ϑ`: recovers the calibrated parameter from its reduced form.
    pub fn from_vartheta(vartheta: &[f64], radius: f64) -> Result<Self> {
        let m = vartheta.len() + 1;
        let mean = vartheta.iter().sum::<f64>() / m as f64;
        let mut theta: Vec<f64> = vartheta.iter().map(|v| v - mean).collect();
        theta.push(-mean);
        Self::new(theta, radius)
    }

    /// Uniform draw in the box, centered and shrunk back into the box if the
    /// centering pushed a coordinate outside.
    pub fn random(m: usize, radius: f64, rng: &mut Stream) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("at least one item is required"));
        }
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(-radius..=radius)).collect();
        let mean = raw.iter().sum::<f64>() / m as f64;
        let mut theta: Vec<f64> = raw.iter().map(|t| t - mean).collect();
        let peak = theta.iter().fold(0.0f64, |a, t| a.max(t.abs()));
        if peak > radius {
            let s = radius * (1.0 - 1e-12) / peak;
            theta.iter_mut().for_each(|t| *t *= s);
        }
        // re-center to wash out rounding from the rescale
        let mean = theta.iter().sum::<f64>() / m as f64;
        theta.iter_mut().for_each(|t| *t -= mean);
        Self::new(theta, radius)
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn m(&self) -> usize {
        self.theta.len()
    }

    /// `ϑ_k = θ_k - θ_m`, `k = 1..m-1`.
    pub fn vartheta(&self) -> Vec<f64> {
        let last = *self.theta.last().expect("non-empty");
        self.theta[..self.theta.len() - 1].iter().map(|t| t - last).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_from_seed;

    #[test]
    fn validation() {
        assert!(DifficultyParams::new(vec![1.0, -1.0], 1.0).is_ok());
        assert!(DifficultyParams::new(vec![1.0, -0.5], 2.0).is_err());
        assert!(DifficultyParams::new(vec![2.0, -2.0], 1.0).is_err());
        assert!(DifficultyParams::new(vec![], 1.0).is_err());
        assert!(DifficultyParams::new(vec![0.0], 0.0).is_err());
    }

    #[test]
    fn vartheta_round_trip() {
        let mut rng = stream_from_seed(11);
        for m in 2..8 {
            let p = DifficultyParams::random(m, 2.0, &mut rng).unwrap();
            let back = DifficultyParams::from_vartheta(&p.vartheta(), 2.0).unwrap();
            for (a, b) in p.theta().iter().zip(back.theta()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shift_invariance_of_vartheta() {
        let p = DifficultyParams::new(vec![0.5, -0.25, -0.25], 1.0).unwrap();
        let shifted: Vec<f64> = p.theta().iter().map(|t| t + 3.0).collect();
        let last = shifted[2];
        let v: Vec<f64> = shifted[..2].iter().map(|t| t - last).collect();
        assert_eq!(v, p.vartheta());
    }
}
