//! AdaBoost.R2 and two-stage TrAdaBoost.R2.

mod adaboost;
mod two_stage;

pub use adaboost::{
    adaboost_r2_fit, adjusted_errors, weighted_median, AdaBoostConfig, AdaBoostEnsemble,
    AdaBoostFit, LossKind, DEGENERATE_BETA,
};
pub use two_stage::{
    solve_beta, target_fraction, two_stage_fit, update_weights, BetaSolution, Pool, StageTrace,
    TrAModel, TwoStageConfig, TwoStageFit, MASS_TOLERANCE,
};
