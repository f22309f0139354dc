//! Lasso regularization paths, subsampling stability selection and
//! per-dimension selection-stability scores.

mod lasso;
mod stability;

pub use lasso::{
    default_grid, lambda_max, lasso_objective, lasso_path, log_grid, soft_threshold, LassoPath,
};
pub use stability::{
    fp_bound, select_features, select_features_with, selection_grid, selection_probabilities,
    selection_stability, standardize_columns, threshold_scores, LambdaRule, SelectionConfig,
    SelectionProbabilities, SelectionResult,
};
