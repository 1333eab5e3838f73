//! Annotation and feature-file ingestion.

mod annotations;
mod features;
mod join;

pub use annotations::{parse_annotations, parse_annotations_str, AnnotatedSample, ParseMode};
pub use features::{
    decode_features, encode_features, read_feature_file, write_feature_file, FeatureRecord,
    FeatureSet, CFV1_MAGIC, CFV1_VERSION,
};
pub use join::{join_split, JoinMode, JoinOutcome, JoinedSample};
