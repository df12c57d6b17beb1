//! Individualized treatment effect estimation for randomized trials with
//! random forests of interaction trees.
//!
//! The pipeline: ingest a trial dataset ([`data`]), grow interaction trees
//! whose splits maximize the treatment-effect difference between children
//! ([`split`], [`tree`]), bag them over multinomial bootstrap resamples and
//! attach infinitesimal-jackknife standard errors to every prediction
//! ([`forest`]). A separate-regression baseline ([`sr`]) and the reference
//! simulation experiments ([`sim`]) round out the toolkit.

pub mod data;
pub mod error;
pub mod forest;
pub mod rng;
pub mod sim;
pub mod split;
pub mod sr;
pub mod tree;

pub use data::{
    encode_nominal, load_covariate_rows, standardize_column, ColumnKind, ColumnMeta,
    MissingPolicy, SchemaConfig, TrialDataset, UnseenLevelPolicy,
};
pub use error::{Error, Result};
pub use forest::{fit_rfit, ij_variance, ForestParams, ItePrediction, RfitForest, SeVariant};
pub use split::{
    brent_maximize, expit, greedy_best_cut, naive_best_cut, pooled_sigma2, q_statistic,
    sss_best_cut, sss_objective, NodeTable, SplitCandidate, SplitMethod, SssConfig,
};
pub use sr::{fit_sr, grow_regression_tree, SrModel};
pub use tree::{grow_tree, predict_tree, terminal_effect, InteractionTree, TreeNode, TreeParams};
