use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::params::{GateInput, GatedHeadParams, LayerNorm};

pub const LN_EPS: f64 = 1e-5;

/// Inverted-dropout factors (0 or 1/(1-rate)) for the two dropout sites.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub input: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl DropoutMasks {
    pub fn sample<R: Rng + ?Sized>(input: usize, hidden: usize, rate: f64, rng: &mut R) -> Self {
        let keep = 1.0 / (1.0 - rate);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
                .collect()
        };
        let input = draw(input);
        let hidden = draw(hidden);
        Self { input, hidden }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LnCache {
    normed: Vec<f64>,
    inv_std: f64,
}

/// Intermediate activations of one forward pass, kept for [`backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    ln_in: LnCache,
    ln_in_out: Vec<f64>,
    masks: Option<DropoutMasks>,
    trunk_inputs: Vec<Vec<f64>>,
    trunk_pre: Vec<Vec<f64>>,
    ln_hidden: LnCache,
    hidden: Vec<f64>,
    answer_logits: Vec<f64>,
    type_logits: Vec<f64>,
    gate_input: Vec<f64>,
    gate: Vec<f64>,
    gated_logits: Vec<f64>,
}

impl ForwardTrace {
    /// Layer-normalised concatenated input, before dropout.
    pub fn normalized_input(&self) -> &[f64] {
        &self.ln_in_out
    }

    pub fn masks(&self) -> Option<&DropoutMasks> {
        self.masks.as_ref()
    }

    /// Trunk output after the hidden layer norm and dropout.
    pub fn hidden(&self) -> &[f64] {
        &self.hidden
    }

    pub fn answer_logits(&self) -> &[f64] {
        &self.answer_logits
    }

    pub fn type_logits(&self) -> &[f64] {
        &self.type_logits
    }

    pub fn gate(&self) -> &[f64] {
        &self.gate
    }

    pub fn gated_logits(&self) -> &[f64] {
        &self.gated_logits
    }
}

fn layer_norm(x: &[f64], ln: &LayerNorm) -> (Vec<f64>, LnCache) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + LN_EPS).sqrt();
    let normed: Vec<f64> = x.iter().map(|v| (v - mean) * inv_std).collect();
    let out = normed
        .iter()
        .zip(ln.gamma.iter().zip(&ln.beta))
        .map(|(xn, (g, b))| g * xn + b)
        .collect();
    (out, LnCache { normed, inv_std })
}

fn layer_norm_backward(
    dy: &[f64],
    cache: &LnCache,
    ln: &LayerNorm,
    grad: &mut LayerNorm,
    scale: f64,
) -> Vec<f64> {
    let n = dy.len() as f64;
    let dxn: Vec<f64> = dy.iter().zip(&ln.gamma).map(|(d, g)| d * g).collect();
    for ((d, x), (g, b)) in dy.iter().zip(&cache.normed).zip(grad.gamma.iter_mut().zip(grad.beta.iter_mut())) {
        *g += scale * d * x;
        *b += scale * d;
    }
    let mean_dxn = dxn.iter().sum::<f64>() / n;
    let mean_dxn_xn = dxn
        .iter()
        .zip(&cache.normed)
        .map(|(d, x)| d * x)
        .sum::<f64>()
        / n;
    dxn.iter()
        .zip(&cache.normed)
        .map(|(d, x)| cache.inv_std * (d - mean_dxn - x * mean_dxn_xn))
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax (max subtracted first).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `-log softmax(logits)[target]` via log-sum-exp. The arg-max term is
/// split out so near-certain predictions keep full relative precision.
pub fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    let (top, m) = logits
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, z)| if z > acc.1 { (i, z) } else { acc });
    let rest: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, z)| (z - m).exp())
        .sum();
    rest.ln_1p() - (logits[target] - m)
}

fn check_inputs(params: &GatedHeadParams, image: &[f64], text: &[f64]) -> Result<()> {
    let arch = &params.arch;
    if image.len() != arch.image_dim || text.len() != arch.text_dim {
        return Err(Error::Dimension(format!(
            "inputs are {}+{}, head expects {}+{}",
            image.len(),
            text.len(),
            arch.image_dim,
            arch.text_dim
        )));
    }
    if image.iter().chain(text).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("head input".into()));
    }
    Ok(())
}

/// Forward pass. In train mode with a positive rate, fresh dropout masks are
/// drawn from `rng` (input mask first, then hidden); eval mode never touches
/// `rng`.
pub fn forward<R: Rng + ?Sized>(
    params: &GatedHeadParams,
    image: &[f64],
    text: &[f64],
    dropout_rate: f64,
    train_mode: bool,
    rng: &mut R,
) -> Result<ForwardTrace> {
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(Error::validation(format!(
            "dropout rate {dropout_rate} outside [0, 1)"
        )));
    }
    check_inputs(params, image, text)?;
    let masks = (train_mode && dropout_rate > 0.0).then(|| {
        DropoutMasks::sample(
            params.arch.input_dim(),
            params.arch.hidden_dim(),
            dropout_rate,
            rng,
        )
    });
    forward_with_masks(params, image, text, masks)
}

/// Forward pass with explicit dropout masks (`None` is eval mode).
pub fn forward_with_masks(
    params: &GatedHeadParams,
    image: &[f64],
    text: &[f64],
    masks: Option<DropoutMasks>,
) -> Result<ForwardTrace> {
    check_inputs(params, image, text)?;
    let arch = &params.arch;
    if let Some(m) = &masks {
        if m.input.len() != arch.input_dim() || m.hidden.len() != arch.hidden_dim() {
            return Err(Error::Dimension("dropout masks do not match the head".into()));
        }
    }
    let x: Vec<f64> = image.iter().chain(text).copied().collect();
    let (ln_in_out, ln_in) = layer_norm(&x, &params.ln_in);

    let mut current = match &masks {
        Some(m) => ln_in_out.iter().zip(&m.input).map(|(a, k)| a * k).collect(),
        None => ln_in_out.clone(),
    };
    let mut trunk_inputs = Vec::with_capacity(params.trunk.len());
    let mut trunk_pre = Vec::with_capacity(params.trunk.len());
    for layer in &params.trunk {
        let pre = layer.apply(&current);
        let out = if arch.trunk_relu {
            pre.iter().map(|v| v.max(0.0)).collect()
        } else {
            pre.clone()
        };
        trunk_inputs.push(std::mem::replace(&mut current, out));
        trunk_pre.push(pre);
    }
    let (ln_hidden_out, ln_hidden) = layer_norm(&current, &params.ln_hidden);
    let hidden: Vec<f64> = match &masks {
        Some(m) => ln_hidden_out.iter().zip(&m.hidden).map(|(a, k)| a * k).collect(),
        None => ln_hidden_out,
    };

    let answer_logits = params.answer.apply(&hidden);
    let type_logits = params.answer_type.apply(&hidden);
    let gate_input = match arch.gate_input {
        GateInput::Logits => type_logits.clone(),
        GateInput::Probabilities => softmax(&type_logits),
    };
    let gate: Vec<f64> = params.gate.apply(&gate_input).into_iter().map(sigmoid).collect();
    let gated_logits = gate.iter().zip(&answer_logits).map(|(g, z)| g * z).collect();

    Ok(ForwardTrace {
        ln_in,
        ln_in_out,
        masks,
        trunk_inputs,
        trunk_pre,
        ln_hidden,
        hidden,
        answer_logits,
        type_logits,
        gate_input,
        gate,
        gated_logits,
    })
}

/// Weights of the two cross-entropy terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub answer: f64,
    pub answer_type: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            answer: 1.0,
            answer_type: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub answer: f64,
    pub answer_type: f64,
}

fn check_targets(trace: &ForwardTrace, class: usize, answer_type: usize) -> Result<()> {
    if class >= trace.gated_logits.len() {
        return Err(Error::validation(format!(
            "target class {class} out of range for {} answers",
            trace.gated_logits.len()
        )));
    }
    if answer_type >= trace.type_logits.len() {
        return Err(Error::validation(format!(
            "target type {answer_type} out of range for {} types",
            trace.type_logits.len()
        )));
    }
    Ok(())
}

pub fn loss(
    trace: &ForwardTrace,
    class: usize,
    answer_type: usize,
    weights: &LossWeights,
) -> Result<LossParts> {
    check_targets(trace, class, answer_type)?;
    let answer = cross_entropy(&trace.gated_logits, class);
    let answer_type = cross_entropy(&trace.type_logits, answer_type);
    Ok(LossParts {
        total: weights.answer * answer + weights.answer_type * answer_type,
        answer,
        answer_type,
    })
}

/// Gradient of the weighted loss with respect to every parameter.
pub fn backward(
    trace: &ForwardTrace,
    params: &GatedHeadParams,
    class: usize,
    answer_type: usize,
    weights: &LossWeights,
) -> Result<GatedHeadParams> {
    let mut grads = params.zeros_like();
    backward_into(trace, params, class, answer_type, weights, 1.0, &mut grads)?;
    Ok(grads)
}

/// Adds `scale ×` the gradient into `grads`.
pub fn backward_into(
    trace: &ForwardTrace,
    params: &GatedHeadParams,
    class: usize,
    answer_type: usize,
    weights: &LossWeights,
    scale: f64,
    grads: &mut GatedHeadParams,
) -> Result<()> {
    check_targets(trace, class, answer_type)?;
    params.check_same_shape(grads)?;
    let arch = &params.arch;
    if trace.gated_logits.len() != arch.num_answers
        || trace.type_logits.len() != arch.num_types
        || trace.ln_in_out.len() != arch.input_dim()
        || trace.trunk_inputs.len() != params.trunk.len()
    {
        return Err(Error::Dimension("trace was produced by a different head".into()));
    }

    // answer cross entropy on the gated logits
    let mut d_gated = softmax(&trace.gated_logits);
    d_gated[class] -= 1.0;
    d_gated.iter_mut().for_each(|d| *d *= weights.answer);

    let d_answer: Vec<f64> = d_gated.iter().zip(&trace.gate).map(|(d, g)| d * g).collect();
    let d_gate_pre: Vec<f64> = d_gated
        .iter()
        .zip(trace.answer_logits.iter().zip(&trace.gate))
        .map(|(d, (z, g))| d * z * g * (1.0 - g))
        .collect();
    grads.gate.accumulate(&trace.gate_input, &d_gate_pre, scale);
    let d_gate_input = params.gate.back(&d_gate_pre);

    // type cross entropy plus the path through the gate
    let mut d_type = softmax(&trace.type_logits);
    d_type[answer_type] -= 1.0;
    d_type.iter_mut().for_each(|d| *d *= weights.answer_type);
    match arch.gate_input {
        GateInput::Logits => {
            for (d, g) in d_type.iter_mut().zip(&d_gate_input) {
                *d += g;
            }
        }
        GateInput::Probabilities => {
            let p = &trace.gate_input;
            let dot: f64 = p.iter().zip(&d_gate_input).map(|(a, b)| a * b).sum();
            for ((d, g), pi) in d_type.iter_mut().zip(&d_gate_input).zip(p) {
                *d += pi * (g - dot);
            }
        }
    }

    grads.answer.accumulate(&trace.hidden, &d_answer, scale);
    grads.answer_type.accumulate(&trace.hidden, &d_type, scale);
    let mut d_hidden = params.answer.back(&d_answer);
    for (d, e) in d_hidden.iter_mut().zip(params.answer_type.back(&d_type)) {
        *d += e;
    }

    if let Some(m) = &trace.masks {
        d_hidden.iter_mut().zip(&m.hidden).for_each(|(d, k)| *d *= k);
    }
    let mut d = layer_norm_backward(
        &d_hidden,
        &trace.ln_hidden,
        &params.ln_hidden,
        &mut grads.ln_hidden,
        scale,
    );
    for (i, layer) in params.trunk.iter().enumerate().rev() {
        if arch.trunk_relu {
            d.iter_mut()
                .zip(&trace.trunk_pre[i])
                .for_each(|(d, pre)| {
                    if *pre <= 0.0 {
                        *d = 0.0;
                    }
                });
        }
        grads.trunk[i].accumulate(&trace.trunk_inputs[i], &d, scale);
        d = layer.back(&d);
    }
    if let Some(m) = &trace.masks {
        d.iter_mut().zip(&m.input).for_each(|(d, k)| *d *= k);
    }
    layer_norm_backward(&d, &trace.ln_in, &params.ln_in, &mut grads.ln_in, scale);
    Ok(())
}
