//! Beam search per latent class and the cross-class merge of the final ranking.

mod beam;
mod predict;

pub use beam::{beam_search, BeamConfig, Hypothesis, StepScorer, TransitionModel};
pub use predict::{
    canonical_reactants, mean_pairwise_token_distance, merge_pools, pairwise_distinct_fraction, predict_pools,
    predict_reactants, predict_topk, read_predictions, write_predictions, Prediction, PredictionList,
    PredictionRecord,
};
