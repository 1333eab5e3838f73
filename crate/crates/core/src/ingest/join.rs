use crate::error::{Error, Result};

use super::{AnnotatedSample, FeatureRecord, FeatureSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinMode {
    Train,
    Infer,
}

/// A sample with its image variants (canonical variant first) and the
/// canonical question embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedSample {
    pub sample: AnnotatedSample,
    pub image: Vec<FeatureRecord>,
    pub text: FeatureRecord,
}

impl JoinedSample {
    pub fn image_canonical(&self) -> &FeatureRecord {
        &self.image[0]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct JoinOutcome {
    pub joined: Vec<JoinedSample>,
    /// Sample ids dropped in infer mode because a feature was missing.
    pub skipped: Vec<String>,
}

/// Attaches features to samples, keeping annotation order. Both feature files
/// are keyed by sample id.
pub fn join_split(
    samples: &[AnnotatedSample],
    image_features: &FeatureSet,
    text_features: &FeatureSet,
    mode: JoinMode,
) -> Result<JoinOutcome> {
    let mut out = JoinOutcome::default();
    for s in samples {
        let id = s.sample_id.as_str();
        let image = image_features.get(id, 0);
        let text = text_features.get(id, 0);
        let (Some(_), Some(text)) = (image, text) else {
            if mode == JoinMode::Train {
                return Err(Error::MissingFeature(id.to_string()));
            }
            out.skipped.push(id.to_string());
            continue;
        };
        let image = image_features
            .variants_of(id)
            .iter()
            .map(|&variant| FeatureRecord {
                key: id.to_string(),
                variant,
                vector: image_features.get(id, variant).unwrap().to_vec(),
            })
            .collect();
        out.joined.push(JoinedSample {
            sample: s.clone(),
            image,
            text: FeatureRecord {
                key: id.to_string(),
                variant: 0,
                vector: text.to_vec(),
            },
        });
    }
    Ok(out)
}
