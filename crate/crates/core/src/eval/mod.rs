//! Challenge metrics, ensembling and split evaluation.

mod ensemble;
mod evaluate;
mod metrics;

pub use ensemble::{ensemble_predict, EnsembleMode, EnsembleOutput};
pub use evaluate::{
    evaluate, predict_split, write_predictions, EvalOptions, EvalReport, ModelSplit, PositiveClass,
    Prediction,
};
pub use metrics::{average_precision, vqa_accuracy};
