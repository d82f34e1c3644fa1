//! Smoothing and rounding kernels, conditional moments of the column sums,
//! the Newton inversion of the mean map and the Gaussian count experiments.
//!
//! Sign convention: the mean map is `x ↦ -∇Ψ_N(x)`, which equals
//! `E(T | N)` at the true parameter.

mod chain;
mod counts;
mod kernels;
mod moments;

pub use chain::{chain_b_to_c, chain_c_to_d, ChainObservation, CLAMP_MARGIN};
pub use counts::{
    positive_part, sample_e_counts, sample_e_counts_from, sample_f_counts, sample_f_counts_from, sample_multinomial,
    sample_stage_d, tau, tau_inverse,
};
pub use kernels::{round_kernel, smooth, Regime, SmoothingConfig};
pub use moments::{clamp_to_range, cml_invert, in_mean_range, moments_given_counts, phi_forward, MomentPair};
