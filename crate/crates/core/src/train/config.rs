use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::head::{GateInput, HeadArch, LossWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Adam,
    Sgd,
}

/// Per-epoch learning-rate multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Multiply by `factor` every `every_epochs` epochs.
    StepDecay { every_epochs: usize, factor: f64 },
}

impl LrSchedule {
    /// Learning rate for the zero-based `epoch`.
    pub fn rate(&self, base: f64, epoch: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::StepDecay {
                every_epochs,
                factor,
            } => base * factor.powi((epoch / every_epochs.max(1)) as i32),
        }
    }
}

/// Training hyperparameters and head wiring. The JSON config file uses these
/// field names; missing fields take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    /// Draw one stored image variant per sample and epoch.
    pub variant_sampling: bool,
    /// Stop after this many epochs without validation improvement.
    pub early_stop_patience: Option<usize>,
    pub optimizer: Optimizer,
    pub lr_schedule: LrSchedule,
    pub hidden_dims: Vec<usize>,
    pub trunk_relu: bool,
    pub gate_input: GateInput,
    pub answer_loss_weight: f64,
    pub type_loss_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 64,
            epochs: 30,
            dropout_rate: 0.5,
            seed: 42,
            variant_sampling: true,
            early_stop_patience: None,
            optimizer: Optimizer::Adam,
            lr_schedule: LrSchedule::Constant,
            hidden_dims: vec![512],
            trunk_relu: false,
            gate_input: GateInput::Logits,
            answer_loss_weight: 1.0,
            type_loss_weight: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::validation(msg.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if self.adam_eps.is_nan() || self.adam_eps < 0.0 {
            return bad("adam_eps must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return bad("hidden_dims must be non-empty and positive");
        }
        if let LrSchedule::StepDecay {
            every_epochs,
            factor,
        } = self.lr_schedule
        {
            if every_epochs == 0 || factor.is_nan() || factor <= 0.0 {
                return bad("step decay needs every_epochs >= 1 and factor > 0");
            }
        }
        if self.answer_loss_weight < 0.0 || self.type_loss_weight < 0.0 {
            return bad("loss weights must be non-negative");
        }
        Ok(())
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            answer: self.answer_loss_weight,
            answer_type: self.type_loss_weight,
        }
    }

    pub fn arch(&self, image_dim: usize, text_dim: usize, answers: usize, types: usize) -> HeadArch {
        HeadArch {
            image_dim,
            text_dim,
            hidden_dims: self.hidden_dims.clone(),
            num_answers: answers,
            num_types: types,
            trunk_relu: self.trunk_relu,
            gate_input: self.gate_input,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::json(e, text))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&fsutil::read_text(path)?)
    }
}
