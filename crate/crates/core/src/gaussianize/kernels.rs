use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Which equivalence chain the smoothing exponent is tuned for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Regime {
    /// Column sums given the score histogram (stages B to D).
    Scores,
    /// Score histogram under a tail floor with exponent `d1` (stages D to F).
    Counts { d1: f64 },
}

impl Regime {
    /// Open interval of admissible `α` for the growth exponent `β`
    /// (`m^β <= n`). Empty when the lower end is not below the upper.
    pub fn admissible_alpha(self, beta: f64) -> (f64, f64) {
        match self {
            Regime::Scores => (10.0 / beta, 1.0 - 3.0 / beta),
            Regime::Counts { d1 } => ((11.0 + 2.0 * d1) / beta, 1.0 - (3.5 + d1) / beta),
        }
    }
}

/// Variance `b` of the isotropic smoothing noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub b: f64,
    pub alpha_exponent: Option<f64>,
}

impl SmoothingConfig {
    pub fn new(b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::invalid(format!("smoothing variance must be positive, got {b}")));
        }
        Ok(Self { b, alpha_exponent: None })
    }

    /// `b = n^α` with `α` checked against the regime's interval.
    pub fn from_alpha(n: u64, alpha: f64, regime: Regime, beta: f64) -> Result<Self> {
        let (lo, hi) = regime.admissible_alpha(beta);
        if !(alpha > lo && alpha < hi) {
            return Err(Error::invalid(format!(
                "alpha = {alpha} outside the admissible interval ({lo:.4}, {hi:.4}) for beta = {beta}"
            )));
        }
        Ok(Self { b: (n as f64).powf(alpha), alpha_exponent: Some(alpha) })
    }

    /// Midpoint of the admissible interval, or an error if it is empty.
    pub fn midpoint(n: u64, regime: Regime, beta: f64) -> Result<Self> {
        let (lo, hi) = regime.admissible_alpha(beta);
        if lo >= hi {
            return Err(Error::invalid(format!(
                "no admissible alpha for beta = {beta}: interval ({lo:.4}, {hi:.4}) is empty"
            )));
        }
        Self::from_alpha(n, 0.5 * (lo + hi), regime, beta)
    }
}

/// `w + U` with `U ~ N(0, b I)`.
pub fn smooth(w: &[f64], cfg: &SmoothingConfig, rng: &mut Stream) -> Vec<f64> {
    let noise = Normal::new(0.0, cfg.b.sqrt()).expect("validated variance");
    w.iter().map(|x| x + noise.sample(rng)).collect()
}

/// Componentwise nearest integer, ties to even.
pub fn round_kernel(x: &[f64]) -> Vec<i64> {
    x.iter().map(|v| v.round_ties_even() as i64).collect()
}
