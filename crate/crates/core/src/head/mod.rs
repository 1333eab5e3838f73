//! The gated dual-head classifier.
//!
//! ```text
//! x = [image ; text] -> LayerNorm -> dropout -> trunk linear(s) -> LayerNorm -> dropout = h
//! z_ans  = h W_ans  + b_ans
//! z_type = h W_type + b_type
//! gate   = sigmoid(z_type W_gate + b_gate)
//! logits = gate * z_ans
//! ```
//!
//! Training minimises `CE(logits, answer) + CE(z_type, type)`; the type head
//! therefore receives gradient both from its own loss and through the gate.

mod checkpoint;
mod forward;
mod params;
mod predict;

pub use checkpoint::{Checkpoint, CheckpointMeta, CKP1_MAGIC, CKP1_VERSION};
pub use forward::{
    backward, backward_into, cross_entropy, forward, forward_with_masks, loss, softmax,
    DropoutMasks, ForwardTrace, LossParts, LossWeights, LN_EPS,
};
pub use params::{init_params, GateInput, GatedHeadParams, HeadArch, LayerNorm, Linear, Matrix};
pub use predict::{argmax, predict, AnswerabilityPolicy, AnswerabilityPolicyKind, HeadOutput};
