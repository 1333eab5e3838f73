//! Frozen-feature visual question answering head.
//!
//! The pipeline runs in stages that mirror the CLI subcommands:
//!
//! 1. [`ingest`] parses VizWiz-style annotation files and CFV1 feature files
//!    holding precomputed image and question embeddings.
//! 2. [`vocab`] selects one target answer per sample and builds the answer
//!    vocabulary together with per-class answer types.
//! 3. [`head`] is the classifier: layer-normalised linear trunk, an answer
//!    head and an answer-type head, with the type logits projected into a
//!    sigmoid gate over the answer logits.
//! 4. [`train`] fits the head with Adam on the sum of both cross entropies.
//! 5. [`eval`] computes VQA accuracy and answerability average precision,
//!    and ensembles several checkpoints.

pub mod error;
pub mod eval;
mod fsutil;
pub mod head;
pub mod ingest;
pub mod train;
pub mod vocab;

pub use error::{Error, Result};
pub use fsutil::write_atomic;

pub use eval::{
    average_precision, ensemble_predict, evaluate, vqa_accuracy, EnsembleMode, EvalOptions,
    EvalReport, Prediction, PositiveClass,
};
pub use head::{
    init_params, predict, AnswerabilityPolicy, AnswerabilityPolicyKind, Checkpoint,
    CheckpointMeta, GateInput, GatedHeadParams, HeadArch, HeadOutput, LossWeights,
};
pub use ingest::{
    join_split, parse_annotations, read_feature_file, write_feature_file, AnnotatedSample,
    FeatureRecord, FeatureSet, JoinMode, JoinOutcome, JoinedSample, ParseMode,
};
pub use train::{fit, train_epoch, AdamState, FitOutcome, TrainConfig, TrainExample};
pub use vocab::{
    build_vocabulary, levenshtein, medoid, normalize_answer, select_target_answer, vqa_score,
    AnswerType, ScoreMode, TypeScheme, Vocabulary,
};
