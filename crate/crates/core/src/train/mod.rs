//! Mini-batch training of the gated head.

mod adam;
mod config;
mod fit;

pub use adam::{adam_step, sgd_step, AdamHyper, AdamState};
pub use config::{LrSchedule, Optimizer, TrainConfig};
pub use fit::{
    fit, fit_with_validator, train_accuracy, train_epoch, EpochLog, EpochStats, FitOutcome,
    TrainExample, ValidationExample, Validator,
};
