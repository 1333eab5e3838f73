use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::head::{
    argmax, backward_into, forward, forward_with_masks, init_params, loss, Checkpoint, CheckpointMeta,
    GatedHeadParams,
};
use crate::ingest::JoinedSample;
use crate::vocab::{normalize_answer, vqa_score, Targets, Vocabulary};

use super::adam::{adam_step, sgd_step, AdamHyper, AdamState};
use super::config::{Optimizer, TrainConfig};

/// Samples per gradient partial sum. Fixed so that results do not depend on
/// the number of worker threads.
const CHUNK: usize = 16;

/// One training sample with its features widened to f64.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub sample_id: String,
    /// Canonical variant first.
    pub image_variants: Vec<Vec<f64>>,
    pub text: Vec<f64>,
    pub target_class: usize,
    pub target_type: usize,
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

impl TrainExample {
    pub fn from_joined(joined: &[JoinedSample], targets: &Targets, vocab: &Vocabulary) -> Result<Vec<Self>> {
        joined
            .iter()
            .map(|j| {
                let id = &j.sample.sample_id;
                let class = *targets.get(id).ok_or_else(|| {
                    Error::validation(format!("no training target for sample {id:?}"))
                })?;
                if class >= vocab.len() {
                    return Err(Error::VocabularyMismatch(format!(
                        "target {class} of sample {id:?} outside {} classes",
                        vocab.len()
                    )));
                }
                Ok(Self {
                    sample_id: id.clone(),
                    image_variants: j.image.iter().map(|r| widen(&r.vector)).collect(),
                    text: widen(&j.text.vector),
                    target_class: class,
                    target_type: vocab.class_type(class).0,
                })
            })
            .collect()
    }
}

/// A held-out sample scored by VQA accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationExample {
    pub image: Vec<f64>,
    pub text: Vec<f64>,
    /// Normalized crowd answers.
    pub crowd: Vec<String>,
}

impl ValidationExample {
    pub fn from_joined(joined: &[JoinedSample]) -> Result<Vec<Self>> {
        joined
            .iter()
            .map(|j| {
                if j.sample.answers.is_empty() {
                    return Err(Error::validation(format!(
                        "validation sample {:?} has no answers",
                        j.sample.sample_id
                    )));
                }
                Ok(Self {
                    image: widen(&j.image_canonical().vector),
                    text: widen(&j.text.vector),
                    crowd: j.sample.answers.iter().map(|a| normalize_answer(a)).collect(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub loss_total: f64,
    pub loss_answer: f64,
    pub loss_type: f64,
    /// Fraction of samples whose train-mode arg-max matched the target.
    pub train_accuracy: f64,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_answer: f64,
    pub loss_type: f64,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
    pub learning_rate: f64,
    pub wall_time_secs: f64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the dropout masks and variant draw of the sample at `position`
/// of the shuffled epoch order.
fn sample_seed(seed: u64, epoch: u64, position: u64) -> u64 {
    splitmix(seed ^ splitmix(epoch ^ splitmix(position)))
}

struct Partial {
    grads: GatedHeadParams,
    loss: [f64; 3],
    correct: usize,
}

/// One pass over `data`: seeded shuffle (`seed ^ epoch`), mean-reduced loss
/// per batch, one optimizer step per batch.
pub fn train_epoch(
    params: &mut GatedHeadParams,
    state: &mut AdamState,
    data: &[TrainExample],
    config: &TrainConfig,
    epoch: usize,
) -> Result<EpochStats> {
    if data.is_empty() {
        return Err(Error::validation("training set is empty"));
    }
    config.validate()?;
    let weights = config.loss_weights();
    let lr = config.lr_schedule.rate(config.learning_rate, epoch);
    let hyper = AdamHyper {
        learning_rate: lr,
        beta1: config.adam_beta1,
        beta2: config.adam_beta2,
        eps: config.adam_eps,
    };

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed ^ epoch as u64));

    let mut sums = [0.0f64; 3];
    let mut batches = 0usize;
    let mut correct = 0usize;
    for (b, batch) in order.chunks(config.batch_size).enumerate() {
        let base = b * config.batch_size;
        let scale = 1.0 / batch.len() as f64;
        let frozen: &GatedHeadParams = params;
        let partials = batch
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| -> Result<Partial> {
                let mut part = Partial {
                    grads: frozen.zeros_like(),
                    loss: [0.0; 3],
                    correct: 0,
                };
                for (k, &idx) in chunk.iter().enumerate() {
                    let ex = &data[idx];
                    let position = (base + c * CHUNK + k) as u64;
                    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(config.seed, epoch as u64, position));
                    let variants = ex.image_variants.len();
                    let v = if config.variant_sampling && variants > 1 {
                        rng.gen_range(0..variants)
                    } else {
                        0
                    };
                    let trace = forward(
                        frozen,
                        &ex.image_variants[v],
                        &ex.text,
                        config.dropout_rate,
                        true,
                        &mut rng,
                    )?;
                    let l = loss(&trace, ex.target_class, ex.target_type, &weights)?;
                    part.loss[0] += l.total;
                    part.loss[1] += l.answer;
                    part.loss[2] += l.answer_type;
                    if argmax(trace.gated_logits()) == ex.target_class {
                        part.correct += 1;
                    }
                    backward_into(&trace, frozen, ex.target_class, ex.target_type, &weights, scale, &mut part.grads)?;
                }
                Ok(part)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut parts = partials.into_iter();
        let first = parts.next().expect("batch is non-empty");
        let mut grads = first.grads;
        let mut batch_loss = first.loss;
        correct += first.correct;
        for p in parts {
            grads.add_scaled(&p.grads, 1.0);
            for (s, l) in batch_loss.iter_mut().zip(p.loss) {
                *s += l;
            }
            correct += p.correct;
        }
        for (s, l) in sums.iter_mut().zip(batch_loss) {
            *s += l * scale;
        }
        batches += 1;

        match config.optimizer {
            Optimizer::Adam => adam_step(params, &grads, state, &hyper)?,
            Optimizer::Sgd => {
                sgd_step(params, &grads, lr)?;
                state.t += 1;
            }
        }
    }
    if !params.is_finite() {
        return Err(Error::NonFinite(format!("parameters after epoch {epoch}")));
    }
    let n = batches as f64;
    Ok(EpochStats {
        loss_total: sums[0] / n,
        loss_answer: sums[1] / n,
        loss_type: sums[2] / n,
        train_accuracy: correct as f64 / data.len() as f64,
    })
}

/// Eval-mode accuracy of `params` against the training targets.
pub fn train_accuracy(params: &GatedHeadParams, data: &[TrainExample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::validation("training set is empty"));
    }
    let hits = data
        .par_iter()
        .map(|ex| {
            let tr = forward_with_masks(params, &ex.image_variants[0], &ex.text, None)?;
            Ok(usize::from(argmax(tr.gated_logits()) == ex.target_class))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / data.len() as f64)
}

fn validation_accuracy(
    params: &GatedHeadParams,
    vocab: &Vocabulary,
    data: &[ValidationExample],
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::validation("validation set is empty"));
    }
    let scores = data
        .par_iter()
        .map(|ex| {
            let tr = forward_with_masks(params, &ex.image, &ex.text, None)?;
            let answer = &vocab.classes()[argmax(tr.gated_logits())];
            vqa_score(answer, &ex.crowd, vocab.score_mode())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(scores.iter().sum::<f64>() / data.len() as f64)
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    /// Eval-mode train accuracy of the returned checkpoint.
    pub final_train_accuracy: f64,
}

/// Trains from a fresh initialisation. With a validation split, the
/// parameters of the epoch with the best validation VQA accuracy are kept.
pub fn fit(
    train: &[TrainExample],
    vocab: &Vocabulary,
    config: &TrainConfig,
    validation: Option<&[ValidationExample]>,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<FitOutcome> {
    match validation {
        Some(val) => {
            let mut validator = |p: &GatedHeadParams| validation_accuracy(p, vocab, val);
            fit_with_validator(train, vocab, config, Some(&mut validator), on_epoch)
        }
        None => fit_with_validator(train, vocab, config, None, on_epoch),
    }
}

/// Scores parameters after each epoch; higher is better.
pub type Validator<'a> = &'a mut dyn FnMut(&GatedHeadParams) -> Result<f64>;

pub fn fit_with_validator(
    train: &[TrainExample],
    vocab: &Vocabulary,
    config: &TrainConfig,
    mut validator: Option<Validator<'_>>,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<FitOutcome> {
    config.validate()?;
    let first = train
        .first()
        .ok_or_else(|| Error::validation("training set is empty"))?;
    let arch = config.arch(
        first.image_variants[0].len(),
        first.text.len(),
        vocab.len(),
        vocab.type_names().len(),
    );
    let mut params = init_params(&arch, config.seed)?;
    let mut state = AdamState::new(&params);
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, GatedHeadParams)> = None;

    for epoch in 0..config.epochs {
        let started = Instant::now();
        let stats = train_epoch(&mut params, &mut state, train, config, epoch)?;
        let val_accuracy = match validator.as_mut() {
            Some(v) => Some(v(&params)?),
            None => None,
        };
        if let Some(acc) = val_accuracy {
            if best.as_ref().is_none_or(|(_, b, _)| acc > *b) {
                best = Some((epoch + 1, acc, params.clone()));
            }
        }
        let log = EpochLog {
            epoch: epoch + 1,
            loss_total: stats.loss_total,
            loss_answer: stats.loss_answer,
            loss_type: stats.loss_type,
            train_accuracy: stats.train_accuracy,
            val_accuracy,
            learning_rate: config.lr_schedule.rate(config.learning_rate, epoch),
            wall_time_secs: started.elapsed().as_secs_f64(),
        };
        on_epoch(&log);
        history.push(log);
        if let (Some(patience), Some((best_epoch, _, _))) = (config.early_stop_patience, &best) {
            if epoch + 1 - best_epoch >= patience {
                break;
            }
        }
    }

    let epochs_trained = history.len();
    let (best_epoch, kept) = match best {
        Some((e, _, p)) => (Some(e), p),
        None => (None, params),
    };
    let meta = CheckpointMeta {
        arch,
        vocab_hash: vocab.hash(),
        type_names: vocab.type_names().to_vec(),
        seed: config.seed,
        dropout_rate: config.dropout_rate,
        epochs_trained,
        best_epoch,
    };
    let checkpoint = Checkpoint::new(meta, kept)?;
    let final_train_accuracy = train_accuracy(&checkpoint.params, train)?;
    Ok(FitOutcome {
        checkpoint,
        history,
        best_epoch,
        final_train_accuracy,
    })
}
