use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use clipvqa::eval::{evaluate as run_evaluation, predict_split, write_predictions, ModelSplit};
use clipvqa::train::ValidationExample;
use clipvqa::vocab::{targets_for, FrequencyCount, VocabOptions};
use clipvqa::{
    build_vocabulary, fit, join_split, parse_annotations, read_feature_file, write_atomic, Checkpoint,
    EnsembleMode, Error, EvalOptions, JoinMode, JoinedSample, ParseMode, PositiveClass,
    Result, TrainConfig, TrainExample, TypeScheme, Vocabulary,
};
use serde_json::json;

use crate::{BuildVocabArgs, EnsembleArg, EvaluateArgs, InspectArgs, ModelArgs, PositiveArg, PredictArgs, TrainArgs};

fn load_split(annotations: &Path, image: &Path, text: &Path, parse: ParseMode, join: JoinMode) -> Result<(Vec<clipvqa::AnnotatedSample>, Vec<JoinedSample>)> {
    let samples = parse_annotations(annotations, parse)?;
    let image = read_feature_file(image)?;
    let text = read_feature_file(text)?;
    let outcome = join_split(&samples, &image, &text, join)?;
    if !outcome.skipped.is_empty() {
        eprintln!(
            "{}: {} samples without features skipped",
            annotations.display(),
            outcome.skipped.len()
        );
    }
    Ok((samples, outcome.joined))
}

pub fn build_vocab(args: BuildVocabArgs) -> Result<()> {
    let samples = parse_annotations(
        &args.annotations,
        ParseMode::Train {
            answers_per_sample: args.answers_per_sample,
        },
    )?;
    let scheme = match &args.type_rules {
        Some(p) => TypeScheme::read(p)?,
        None => TypeScheme::default(),
    };
    let options = VocabOptions {
        score_mode: args.score_mode,
        frequency: if args.per_sample_frequency {
            FrequencyCount::PerSample
        } else {
            FrequencyCount::AllAnswers
        },
        scheme,
    };
    let (vocab, _) = build_vocabulary(&samples, &options)?;
    vocab.write(&args.out)?;
    eprintln!(
        "{} classes from {} samples, vocabulary {} -> {}",
        vocab.len(),
        samples.len(),
        &vocab.hash()[..12],
        args.out.display()
    );
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => TrainConfig::read(p)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    let vocab = Vocabulary::read(&args.vocab)?;
    let parse = ParseMode::Train {
        answers_per_sample: args.answers_per_sample,
    };
    let (samples, joined) = load_split(&args.annotations, &args.image_features, &args.text_features, parse, JoinMode::Train)?;
    let targets = targets_for(&samples, &vocab)?;
    let data = TrainExample::from_joined(&joined, &targets, &vocab)?;

    let validation = match (&args.val_annotations, &args.val_image_features, &args.val_text_features) {
        (Some(a), Some(i), Some(t)) => {
            let (_, joined) = load_split(a, i, t, ParseMode::Infer, JoinMode::Infer)?;
            Some(ValidationExample::from_joined(&joined)?)
        }
        _ => None,
    };

    let stdout = std::io::stdout();
    let mut write_failed = None;
    let mut on_epoch = |log: &clipvqa::train::EpochLog| {
        let line = serde_json::to_string(log).expect("epoch log serializes");
        if let Err(e) = writeln!(stdout.lock(), "{line}") {
            write_failed.get_or_insert(e);
        }
    };
    let outcome = fit(&data, &vocab, &config, validation.as_deref(), &mut on_epoch)?;
    if let Some(e) = write_failed {
        return Err(Error::io("<stdout>", e));
    }
    outcome.checkpoint.write(&args.out)?;
    eprintln!(
        "{} epochs (seed {}), train accuracy {:.4}{} -> {}",
        outcome.history.len(),
        config.seed,
        outcome.final_train_accuracy,
        outcome.best_epoch.map(|e| format!(", kept epoch {e}")).unwrap_or_default(),
        args.out.display()
    );
    Ok(())
}

struct Loaded {
    samples: Vec<clipvqa::AnnotatedSample>,
    vocab: Vocabulary,
    checkpoints: Vec<Checkpoint>,
    joined: Vec<Vec<JoinedSample>>,
}

impl Loaded {
    fn splits(&self) -> Vec<ModelSplit<'_>> {
        self.checkpoints
            .iter()
            .zip(&self.joined)
            .map(|(checkpoint, joined)| ModelSplit { checkpoint, joined })
            .collect()
    }
}

fn load_models(args: &ModelArgs) -> Result<Loaded> {
    let n = args.checkpoint.len();
    for (flag, paths) in [("--image-features", &args.image_features), ("--text-features", &args.text_features)] {
        if paths.len() != 1 && paths.len() != n {
            return Err(Error::validation(format!(
                "{flag} given {} times for {n} checkpoints (expected 1 or {n})",
                paths.len()
            )));
        }
    }
    let samples = parse_annotations(&args.annotations, ParseMode::Infer)?;
    let vocab = Vocabulary::read(&args.vocab)?;
    let checkpoints = args
        .checkpoint
        .iter()
        .map(|p| Checkpoint::read(p))
        .collect::<Result<Vec<_>>>()?;

    // a single feature file is shared by every member
    let images = args.image_features.iter().map(|p| read_feature_file(p)).collect::<Result<Vec<_>>>()?;
    let texts = args.text_features.iter().map(|p| read_feature_file(p)).collect::<Result<Vec<_>>>()?;
    let mut joined = Vec::with_capacity(n);
    for i in 0..n {
        let image = &images[i.min(images.len() - 1)];
        let text = &texts[i.min(texts.len() - 1)];
        joined.push(join_split(&samples, image, text, JoinMode::Infer)?.joined);
    }
    Ok(Loaded {
        samples,
        vocab,
        checkpoints,
        joined,
    })
}

fn eval_options(args: &ModelArgs) -> EvalOptions {
    EvalOptions {
        policy: args.answerability_policy,
        ensemble: match args.ensemble {
            EnsembleArg::ProbabilityMean => EnsembleMode::ProbabilityMean,
            EnsembleArg::LogitMean => EnsembleMode::LogitMean,
        },
        weights: args.weights.clone(),
        ..EvalOptions::default()
    }
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let loaded = load_models(&args.model)?;
    let options = eval_options(&args.model);
    let (predictions, skipped) = predict_split(&loaded.splits(), &loaded.samples, &loaded.vocab, &options)?;
    write_predictions(&args.out, &predictions)?;
    eprintln!(
        "{} predictions ({} skipped for missing features) -> {}",
        predictions.len(),
        skipped.len(),
        args.out.display()
    );
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let loaded = load_models(&args.model)?;
    let mut options = eval_options(&args.model);
    options.score_mode = args.score_mode;
    options.positive_class = match args.positive_class {
        PositiveArg::Answerable => PositiveClass::Answerable,
        PositiveArg::Unanswerable => PositiveClass::Unanswerable,
    };
    if let Some(p) = &args.type_rules {
        options.scheme = TypeScheme::read(p)?;
    }
    if options.scheme.rule_table_hash() != loaded.vocab.rule_table_hash() {
        eprintln!("warning: per-type breakdown uses a different rule table than the vocabulary");
    }
    let (report, predictions) = run_evaluation(&loaded.splits(), &loaded.samples, &loaded.vocab, &options)?;
    if let Some(p) = &args.predictions {
        write_predictions(p, &predictions)?;
    }
    match &args.out {
        Some(p) => {
            let mut text = report.to_json();
            text.push('\n');
            write_atomic(p, text.as_bytes())?;
        }
        None => println!("{}", report.to_json()),
    }
    if let Some(note) = &report.answerability_note {
        eprintln!("note: {note}");
    }
    Ok(())
}

pub fn inspect_features(args: InspectArgs) -> Result<()> {
    for path in &args.files {
        let set = read_feature_file(path)?;
        let mut variants: BTreeMap<u32, usize> = BTreeMap::new();
        let mut norm_sum = 0.0f64;
        let (mut norm_min, mut norm_max) = (f64::INFINITY, 0.0f64);
        for (_, variant, vector) in set.iter() {
            *variants.entry(variant).or_default() += 1;
            let norm = vector.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
            norm_sum += norm;
            norm_min = norm_min.min(norm);
            norm_max = norm_max.max(norm);
        }
        let summary = json!({
            "path": path.display().to_string(),
            "dim": set.dim(),
            "records": set.len(),
            "keys": set.key_count(),
            "records_per_variant": variants,
            "l2_norm": if set.is_empty() {
                serde_json::Value::Null
            } else {
                json!({"min": norm_min, "mean": norm_sum / set.len() as f64, "max": norm_max})
            },
        });
        println!("{summary}");
    }
    Ok(())
}
