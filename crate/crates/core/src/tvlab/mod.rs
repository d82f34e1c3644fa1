//! Distance computation and verification of the explicit bounds and scaling
//! laws: exact and Monte Carlo total variation, Gaussian Hellinger distance,
//! brute-force `κ`, and one driver per check.

mod checks;
mod distance;
mod kappa;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

pub use checks::{
    binomial_shift_tv, clt_tv, denoising_report, smooth_round_tv, check_binomial_shift, check_clt, check_denoising, check_eigen_floor, check_extreme_mass, check_kappa_floor,
    check_lemma, check_q_floor, check_scale_chain, check_smooth_round, loglog_slope, SuiteConfig,
};
pub use distance::{
    hellinger_gaussian, tv_discrete, tv_gaussian_1d, tv_gaussian_numeric, tv_isotropic_scale, TvBudget, TvEstimate,
};
pub use kappa::{kappa_bruteforce, kappa_lower_bound, KAPPA_MAX_M};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    HoldsAsShape,
    Violated,
    Inconclusive,
}

/// Whether the bound caps the quantity from above or from below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

/// Right-hand side of a check: a number, or a scaling law with unknown
/// constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rhs {
    Numeric(f64),
    ShapeOnly,
}

impl Serialize for Rhs {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Rhs::Numeric(v) => s.serialize_f64(*v),
            Rhs::ShapeOnly => s.serialize_str("shape-only"),
        }
    }
}

impl<'de> Deserialize<'de> for Rhs {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Tag(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Rhs::Numeric(v)),
            Repr::Tag(t) if t == "shape-only" => Ok(Rhs::ShapeOnly),
            Repr::Tag(t) => Err(serde::de::Error::custom(format!("unexpected rhs '{t}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detail {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub check: String,
    pub instance: String,
    pub lhs_estimate: f64,
    pub lhs_error_bar: f64,
    pub rhs_bound: Rhs,
    pub relation: Relation,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<Detail>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl DistanceReport {
    /// Report for a numeric bound; `violated` only when the estimate is on
    /// the wrong side by more than three error bars, `holds` only when it is
    /// strictly on the right side by more than three error bars.
    pub fn numeric(check: &str, instance: String, lhs: f64, err: f64, rhs: f64, relation: Relation) -> Self {
        let (lo, hi) = (lhs - 3.0 * err, lhs + 3.0 * err);
        let verdict = match relation {
            Relation::AtMost if lo > rhs => Verdict::Violated,
            Relation::AtMost if hi < rhs => Verdict::Holds,
            Relation::AtLeast if hi < rhs => Verdict::Violated,
            Relation::AtLeast if lo > rhs => Verdict::Holds,
            _ => Verdict::Inconclusive,
        };
        Self {
            check: check.into(),
            instance,
            lhs_estimate: lhs,
            lhs_error_bar: err,
            rhs_bound: Rhs::Numeric(rhs),
            relation,
            verdict,
            details: Vec::new(),
            reason: None,
        }
    }

    /// Report for a scaling-law check whose shape conditions either all hold
    /// or not.
    pub fn shape(check: &str, instance: String, lhs: f64, err: f64, ok: bool) -> Self {
        Self {
            check: check.into(),
            instance,
            lhs_estimate: lhs,
            lhs_error_bar: err,
            rhs_bound: Rhs::ShapeOnly,
            relation: Relation::AtMost,
            verdict: if ok { Verdict::HoldsAsShape } else { Verdict::Violated },
            details: Vec::new(),
            reason: None,
        }
    }

    pub fn inconclusive(check: &str, instance: String, reason: String) -> Self {
        Self {
            check: check.into(),
            instance,
            lhs_estimate: f64::NAN,
            lhs_error_bar: f64::NAN,
            rhs_bound: Rhs::ShapeOnly,
            relation: Relation::AtMost,
            verdict: Verdict::Inconclusive,
            details: Vec::new(),
            reason: Some(reason),
        }
    }

    pub fn with_detail(mut self, name: impl Into<String>, value: f64) -> Self {
        self.details.push(Detail { name: name.into(), value });
        self
    }

    pub fn with_reason(mut self, reason: impl Into<String>) -> Self {
        self.reason = Some(reason.into());
        self
    }

    pub fn detail(&self, name: &str) -> Option<f64> {
        self.details.iter().find(|d| d.name == name).map(|d| d.value)
    }

    pub fn passed(&self) -> bool {
        matches!(self.verdict, Verdict::Holds | Verdict::HoldsAsShape)
    }
}

/// Checks addressable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LemmaId {
    #[serde(rename = "L4.1")]
    L41,
    #[serde(rename = "L4.2")]
    L42,
    #[serde(rename = "L4.3")]
    L43,
    #[serde(rename = "L4.5")]
    L45,
    #[serde(rename = "L4.6")]
    L46,
    #[serde(rename = "L5.1")]
    L51,
    #[serde(rename = "L5.2")]
    L52,
    #[serde(rename = "L5.3")]
    L53,
    #[serde(rename = "L5.4")]
    L54,
}

impl LemmaId {
    pub const ALL: [LemmaId; 9] = [
        LemmaId::L41,
        LemmaId::L42,
        LemmaId::L43,
        LemmaId::L45,
        LemmaId::L46,
        LemmaId::L51,
        LemmaId::L52,
        LemmaId::L53,
        LemmaId::L54,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LemmaId::L41 => "L4.1",
            LemmaId::L42 => "L4.2",
            LemmaId::L43 => "L4.3",
            LemmaId::L45 => "L4.5",
            LemmaId::L46 => "L4.6",
            LemmaId::L51 => "L5.1",
            LemmaId::L52 => "L5.2",
            LemmaId::L53 => "L5.3",
            LemmaId::L54 => "L5.4",
        }
    }
}

impl fmt::Display for LemmaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LemmaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        LemmaId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown check '{s}'")))
    }
}
