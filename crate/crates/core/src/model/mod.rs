//! The mixture Rasch model: parameters, ability laws, simulation, sufficient
//! statistics, score-cell probabilities and conditional row laws.

mod ability;
mod cells;
mod conditional;
mod params;
mod scores;

pub use ability::{AbilityDistribution, Domain, TailFloor};
pub use cells::{cell_probs, g_log_norm, CellProbs};
pub use conditional::{
    conditional_pmf, exact_law_t_given_n, marginal_atoms, marginal_pmf, sample_fixed_sum, FixedSumSampler,
    LatticeLaw,
};
pub use params::DifficultyParams;
pub use scores::{interior_count, simulate_scores, sufficient_stats, ScoreMatrix, SufficientStats};
