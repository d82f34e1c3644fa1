//! Ability distributions `F` for the mixture model.
//!
//! A closed registry of parametric families. Each member knows its log
//! density, how to sample itself, an exact bound on the mass it puts outside
//! `[-L, L]` (used to size quadrature domains) and, where one exists, a
//! certified exponential tail floor `f(x) >= D0·exp(-D1·|x|)`.
//!
//! `point` is a degenerate law kept for analytic test oracles only; it has no
//! Lebesgue density.

use std::fmt;
use std::str::FromStr;

use rand::RngExt;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numeric::{integrate, log_integrate, log_sum_exp, logistic, norm_cdf, norm_sf, softplus};
use crate::rng::Stream;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
/// Mass allowed outside the quadrature domain.
const DOMAIN_MASS: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum AbilityDistribution {
    Gaussian { mean: f64, sd: f64 },
    Logistic { location: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
    Mixture(Vec<(f64, AbilityDistribution)>),
    Point(f64),
}

/// `f(x) >= d0 · exp(-d1·|x|)` for every `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFloor {
    pub d0: f64,
    pub d1: f64,
}

/// Finite integration domain with interior breakpoints at density kinks.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
    pub breakpoints: Vec<f64>,
}

impl AbilityDistribution {
    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        Self::Gaussian { mean, sd }.validated()
    }

    pub fn logistic(location: f64, scale: f64) -> Result<Self> {
        Self::Logistic { location, scale }.validated()
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::Uniform { lo, hi }.validated()
    }

    /// Weights are normalized to sum to one.
    pub fn mixture(components: Vec<(f64, AbilityDistribution)>) -> Result<Self> {
        let total: f64 = components.iter().map(|(w, _)| *w).sum();
        if components.is_empty() || components.iter().any(|(w, _)| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("mixture weights must be positive"));
        }
        let comps = components.into_iter().map(|(w, c)| (w / total, c)).collect();
        Self::Mixture(comps).validated()
    }

    /// Degenerate law at `beta0` (test oracle only).
    pub fn point(beta0: f64) -> Result<Self> {
        Self::Point(beta0).validated()
    }

    fn check_params(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            Self::Gaussian { mean, sd } if finite(&[*mean, *sd]) && *sd > 0.0 => Ok(()),
            Self::Logistic { location, scale } if finite(&[*location, *scale]) && *scale > 0.0 => Ok(()),
            Self::Uniform { lo, hi } if finite(&[*lo, *hi]) && hi > lo => Ok(()),
            Self::Point(b) if b.is_finite() => Ok(()),
            Self::Mixture(comps) => {
                for (_, c) in comps {
                    if matches!(c, Self::Mixture(_) | Self::Point(_)) {
                        return Err(Error::invalid("mixture components must be gaussian, logistic or uniform"));
                    }
                    c.check_params()?;
                }
                Ok(())
            }
            other => Err(Error::invalid(format!("invalid ability distribution parameters: {other}"))),
        }
    }

    /// Checks parameters, that the density integrates to one within 1e-8 and
    /// that the tail floor (if any) holds on a dense grid of the domain.
    fn validated(self) -> Result<Self> {
        self.check_params()?;
        if self.is_point() {
            return Ok(self);
        }
        let dom = self.domain();
        let mass = integrate(|x| self.log_density(x).exp(), dom.lo, dom.hi, &dom.breakpoints, 1e-13, 1e-12)?;
        if (mass.value - 1.0).abs() > 1e-8 {
            return Err(Error::invalid(format!("density integrates to {} instead of 1", mass.value)));
        }
        if let Some(floor) = self.tail_floor() {
            const GRID: usize = 2000;
            for i in 0..=GRID {
                let x = dom.lo + (dom.hi - dom.lo) * i as f64 / GRID as f64;
                if self.log_density(x) < floor.d0.ln() - floor.d1 * x.abs() - 1e-12 {
                    return Err(Error::invalid(format!("tail floor violated at x = {x}")));
                }
            }
        }
        Ok(self)
    }

    pub fn is_point(&self) -> bool {
        matches!(self, Self::Point(_))
    }

    /// Log density; `-inf` everywhere for the point law.
    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Self::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - LN_SQRT_2PI
            }
            Self::Logistic { location, scale } => {
                let z = (x - location) / scale;
                -z - 2.0 * softplus(-z) - scale.ln()
            }
            Self::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Self::Mixture(ref comps) => {
                let terms: Vec<f64> = comps.iter().map(|(w, c)| w.ln() + c.log_density(x)).collect();
                log_sum_exp(&terms)
            }
            Self::Point(_) => f64::NEG_INFINITY,
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    pub fn sample(&self, rng: &mut Stream) -> f64 {
        match *self {
            Self::Gaussian { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
            Self::Logistic { location, scale } => {
                let u: f64 = rng.random_range(f64::EPSILON..1.0);
                location + scale * (u / (1.0 - u)).ln()
            }
            Self::Uniform { lo, hi } => rng.random_range(lo..hi),
            Self::Mixture(ref comps) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, c) in comps {
                    acc += w;
                    if u < acc {
                        return c.sample(rng);
                    }
                }
                comps.last().expect("non-empty").1.sample(rng)
            }
            Self::Point(b) => b,
        }
    }

    /// Exact mass outside `[-l, l]`.
    pub fn envelope_mass(&self, l: f64) -> f64 {
        match *self {
            Self::Gaussian { mean, sd } => norm_cdf((-l - mean) / sd) + norm_sf((l - mean) / sd),
            Self::Logistic { location, scale } => {
                logistic((-l - location) / scale) + logistic((-l + location) / scale)
            }
            Self::Uniform { lo, hi } => {
                let inside = (hi.min(l) - lo.max(-l)).max(0.0);
                1.0 - inside / (hi - lo)
            }
            Self::Mixture(ref comps) => comps.iter().map(|(w, c)| w * c.envelope_mass(l)).sum(),
            Self::Point(b) => {
                if b.abs() <= l {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    pub fn tail_floor(&self) -> Option<TailFloor> {
        match *self {
            // f(x) >= e^{-|z|}/(4s) >= e^{-|μ|/s}/(4s) · e^{-|x|/s}
            Self::Logistic { location, scale } => Some(TailFloor {
                d0: (-location.abs() / scale).exp() / (4.0 * scale),
                d1: 1.0 / scale,
            }),
            Self::Mixture(ref comps) => comps
                .iter()
                .filter_map(|(w, c)| c.tail_floor().map(|t| TailFloor { d0: w * t.d0, d1: t.d1 }))
                .min_by(|a, b| a.d1.total_cmp(&b.d1)),
            _ => None,
        }
    }

    /// Domain carrying all but `1e-14` of the mass.
    pub fn domain(&self) -> Domain {
        match *self {
            Self::Uniform { lo, hi } => Domain { lo, hi, breakpoints: vec![] },
            Self::Point(b) => Domain { lo: b, hi: b, breakpoints: vec![] },
            Self::Mixture(ref comps) => {
                let parts: Vec<Domain> = comps.iter().map(|(_, c)| c.domain()).collect();
                let lo = parts.iter().map(|d| d.lo).fold(f64::INFINITY, f64::min);
                let hi = parts.iter().map(|d| d.hi).fold(f64::NEG_INFINITY, f64::max);
                let mut breakpoints: Vec<f64> = comps
                    .iter()
                    .filter_map(|(_, c)| match *c {
                        Self::Uniform { lo, hi } => Some([lo, hi]),
                        _ => None,
                    })
                    .flatten()
                    .collect();
                breakpoints.sort_by(f64::total_cmp);
                breakpoints.dedup();
                Domain { lo, hi, breakpoints }
            }
            _ => {
                let mut l = 1.0;
                while self.envelope_mass(l) >= DOMAIN_MASS {
                    l *= 1.25;
                }
                Domain { lo: -l, hi: l, breakpoints: vec![] }
            }
        }
    }

    /// `log ∫ exp(log_g(β)) dF(β)` by log-space adaptive quadrature.
    /// Returns the value and a relative error estimate.
    pub fn log_expectation<G: Fn(f64) -> f64>(&self, log_g: G) -> Result<(f64, f64)> {
        if let Self::Point(b) = *self {
            return Ok((log_g(b), 0.0));
        }
        let dom = self.domain();
        log_integrate(|x| log_g(x) + self.log_density(x), dom.lo, dom.hi, &dom.breakpoints, 1e-12)
    }
}

impl fmt::Display for AbilityDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaussian { mean, sd } => write!(f, "gaussian:{mean},{sd}"),
            Self::Logistic { location, scale } => write!(f, "logistic:{location},{scale}"),
            Self::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            Self::Point(b) => write!(f, "point:{b}"),
            Self::Mixture(comps) => {
                write!(f, "mixture:")?;
                for (i, (w, c)) in comps.iter().enumerate() {
                    if i > 0 {
                        write!(f, "|")?;
                    }
                    write!(f, "{w}@{c}")?;
                }
                Ok(())
            }
        }
    }
}

fn parse_params(s: &str, expected: usize) -> Result<Vec<f64>> {
    let vals: std::result::Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|e| Error::invalid(format!("bad number in '{s}': {e}")))?;
    if vals.len() != expected {
        return Err(Error::invalid(format!("expected {expected} parameters in '{s}', got {}", vals.len())));
    }
    Ok(vals)
}

impl FromStr for AbilityDistribution {
    type Err = Error;

    /// Grammar: `kind:param,param` with kinds `gaussian`, `logistic`,
    /// `uniform`, `point` and `mixture:w@kind:p,p|w@kind:p,p|…`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("ability spec '{s}' lacks a ':'")))?;
        match kind.trim() {
            "gaussian" | "normal" => {
                let p = parse_params(rest, 2)?;
                Self::gaussian(p[0], p[1])
            }
            "logistic" => {
                let p = parse_params(rest, 2)?;
                Self::logistic(p[0], p[1])
            }
            "uniform" => {
                let p = parse_params(rest, 2)?;
                Self::uniform(p[0], p[1])
            }
            "point" => {
                let p = parse_params(rest, 1)?;
                Self::point(p[0])
            }
            "mixture" => {
                let mut comps = Vec::new();
                for part in rest.split('|') {
                    let (w, spec) = part
                        .split_once('@')
                        .ok_or_else(|| Error::invalid(format!("mixture component '{part}' lacks 'weight@'")))?;
                    let w: f64 = w
                        .trim()
                        .parse()
                        .map_err(|e| Error::invalid(format!("bad mixture weight '{w}': {e}")))?;
                    comps.push((w, spec.parse()?));
                }
                Self::mixture(comps)
            }
            other => Err(Error::invalid(format!("unknown ability distribution kind '{other}'"))),
        }
    }
}

impl Serialize for AbilityDistribution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for AbilityDistribution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_from_seed;
    use approx::assert_relative_eq;

    #[test]
    fn parse_and_display_round_trip() {
        for s in [
            "gaussian:0,1",
            "logistic:0.5,2",
            "uniform:-2,3",
            "point:0.25",
            "mixture:0.3@gaussian:-1,1|0.7@logistic:1,0.5",
        ] {
            let f: AbilityDistribution = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
        }
        assert!("gaussian:0".parse::<AbilityDistribution>().is_err());
        assert!("gaussian:0,-1".parse::<AbilityDistribution>().is_err());
        assert!("cauchy:0,1".parse::<AbilityDistribution>().is_err());
        assert!("mixture:1@point:0".parse::<AbilityDistribution>().is_err());
    }

    #[test]
    fn densities_are_normalized() {
        for f in [
            AbilityDistribution::gaussian(0.3, 1.7).unwrap(),
            AbilityDistribution::logistic(-1.0, 0.8).unwrap(),
            AbilityDistribution::uniform(-1.0, 2.0).unwrap(),
            "mixture:0.4@uniform:-1,0|0.6@gaussian:2,0.5".parse().unwrap(),
        ] {
            let d = f.domain();
            let q = integrate(|x| f.density(x), d.lo, d.hi, &d.breakpoints, 1e-14, 1e-12).unwrap();
            assert_relative_eq!(q.value, 1.0, epsilon = 1e-10);
            assert!(f.envelope_mass(d.hi.max(-d.lo)) < 1e-13);
        }
    }

    #[test]
    fn logistic_tail_floor_holds() {
        let f = AbilityDistribution::logistic(0.7, 1.3).unwrap();
        let t = f.tail_floor().unwrap();
        for i in -200..=200 {
            let x = i as f64 * 0.25;
            assert!(f.density(x) >= t.d0 * (-t.d1 * x.abs()).exp() * (1.0 - 1e-12));
        }
        assert!(AbilityDistribution::gaussian(0.0, 1.0).unwrap().tail_floor().is_none());
    }

    #[test]
    fn sampling_moments() {
        let mut rng = stream_from_seed(5);
        let f = AbilityDistribution::logistic(1.0, 0.5).unwrap();
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| f.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let true_var = std::f64::consts::PI.powi(2) * 0.25 / 3.0;
        assert!((mean - 1.0).abs() < 4.0 * (true_var / n as f64).sqrt());
        assert!((var / true_var - 1.0).abs() < 0.02);
        assert_eq!(AbilityDistribution::point(0.3).unwrap().sample(&mut rng), 0.3);
    }

    #[test]
    fn log_expectation_point_and_gaussian() {
        let p = AbilityDistribution::point(0.0).unwrap();
        assert_eq!(p.log_expectation(|b| 2.0 * b - 1.0).unwrap().0, -1.0);
        // E exp(tβ) = exp(t²/2) for β ~ N(0,1)
        let g = AbilityDistribution::gaussian(0.0, 1.0).unwrap();
        let (v, _) = g.log_expectation(|b| 1.5 * b).unwrap();
        assert_relative_eq!(v, 1.125, epsilon = 1e-10);
    }
}
