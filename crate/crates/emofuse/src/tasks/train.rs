//! Training loop, evaluation, and corpus splitting.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::metrics::{compute_metrics, ConfusionMatrix, Metrics};
use super::model::{forward, InstanceBuilder, ModelMeta, PreparedInstance, Resources, Vocabulary};
use super::TrainConfig;
use crate::corpus::Conversation;
use crate::error::{Error, Result};
use crate::fusion::argmax;
use crate::nn::{fnv1a, Adam, AdamConfig, Ctx, ParamStore};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
}

pub struct TrainOutcome {
    pub store: ParamStore,
    pub meta: ModelMeta,
    pub trace: Vec<EpochStats>,
}

fn shared_label_set(conversations: &[Conversation]) -> Result<Vec<String>> {
    let first = conversations
        .first()
        .ok_or_else(|| Error::validation("corpus is empty"))?;
    for conv in conversations {
        if conv.label_set != first.label_set {
            return Err(Error::validation(format!(
                "conversation {:?} declares label set {:?}, expected {:?}",
                conv.id, conv.label_set, first.label_set
            )));
        }
    }
    Ok(first.label_set.clone())
}

fn prepare_all(
    conversations: &[Conversation],
    cfg: &TrainConfig,
    vocab: &Vocabulary,
    res: &Resources,
) -> Result<Vec<PreparedInstance>> {
    let mut builder = InstanceBuilder::new(vocab, res, cfg.modality);
    let mut instances = Vec::new();
    for conv in conversations {
        instances.extend(builder.prepare_conversation(conv, cfg.task, cfg.window)?);
    }
    Ok(instances)
}

/// Train a model from scratch. Deterministic for a fixed seed: the loss
/// trace and final parameters are bit-identical across runs.
pub fn train(conversations: &[Conversation], cfg: &TrainConfig, res: &Resources) -> Result<TrainOutcome> {
    let label_set = shared_label_set(conversations)?;
    let n_classes = label_set.len();
    let vocab = Vocabulary::build(conversations);
    let instances = prepare_all(conversations, cfg, &vocab, res)?;
    if instances.is_empty() {
        return Err(Error::validation(format!(
            "corpus yields no instances for task {:?}",
            cfg.task
        )));
    }

    let mut store = ParamStore::new(cfg.seed);
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.learning_rate));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..instances.len()).collect();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (batch_no, batch) in order.chunks(cfg.batch_size.max(1)).enumerate() {
            let mut grad_acc: IndexMap<String, Vec<f64>> = IndexMap::new();
            for &idx in batch {
                let inst = &instances[idx];
                let mut ctx = Ctx::new(&mut store, true);
                let out = forward(&mut ctx, inst, cfg, vocab.len(), n_classes);
                let loss = out.averaged.cross_entropy(inst.target);
                let loss_value = loss.value()[0];
                if !loss_value.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite loss in epoch {epoch} batch {batch_no} (instance {})",
                        inst.id
                    )));
                }
                loss_sum += loss_value;
                if argmax(&out.averaged.value()) == inst.target {
                    correct += 1;
                }
                loss.backward();
                for (name, grad) in ctx.grads() {
                    match grad_acc.get_mut(&name) {
                        Some(acc) => acc.iter_mut().zip(&grad).for_each(|(a, g)| *a += g),
                        None => {
                            grad_acc.insert(name, grad);
                        }
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            let grads: Vec<(String, Vec<f64>)> = grad_acc
                .into_iter()
                .map(|(name, mut g)| {
                    g.iter_mut().for_each(|v| *v *= scale);
                    (name, g)
                })
                .collect();
            adam.step(&mut store, &grads)?;
        }

        let stats = EpochStats {
            epoch,
            mean_loss: loss_sum / instances.len() as f64,
            train_accuracy: correct as f64 / instances.len() as f64,
        };
        trace.push(stats);
        if let Some(target_acc) = cfg.early_stop_train_acc {
            if stats.train_accuracy >= target_acc {
                break;
            }
        }
    }

    let meta = ModelMeta {
        config: cfg.clone(),
        label_set,
        vocab: vocab.tokens().to_vec(),
        audio: res.audio,
    };
    Ok(TrainOutcome { store, meta, trace })
}

#[derive(Clone, Debug, Serialize)]
pub struct Prediction {
    pub instance_id: String,
    pub true_label: usize,
    pub predicted: usize,
    pub logits: Vec<f64>,
}

#[derive(Debug)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<Prediction>,
}

impl Evaluation {
    /// The metrics JSON emitted by the CLI.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "uar": self.metrics.uar,
            "macro_f1": self.metrics.macro_f1,
            "accuracy": self.metrics.accuracy,
            "weighted_f1": self.metrics.weighted_f1,
            "confusion": self.confusion.to_rows(),
        })
    }
}

/// Evaluate checkpoint parameters on a corpus. The architecture, label set,
/// and vocabulary all come from the checkpoint's metadata; the corpus label
/// set must match.
pub fn evaluate(
    conversations: &[Conversation],
    store: &mut ParamStore,
    meta: &ModelMeta,
    res: &Resources,
) -> Result<Evaluation> {
    let label_set = shared_label_set(conversations)?;
    if label_set != meta.label_set {
        return Err(Error::validation(format!(
            "corpus label set {:?} does not match checkpoint label set {:?}",
            label_set, meta.label_set
        )));
    }
    let cfg = &meta.config;
    let vocab = Vocabulary::from_tokens(meta.vocab.clone());
    let instances = prepare_all(conversations, cfg, &vocab, res)?;
    if instances.is_empty() {
        return Err(Error::validation("no instances to evaluate"));
    }

    let n_classes = meta.label_set.len();
    let params_before = store.total_params();
    let mut confusion = ConfusionMatrix::new(n_classes);
    let mut predictions = Vec::with_capacity(instances.len());
    for inst in &instances {
        let mut ctx = Ctx::new(store, false);
        let out = forward(&mut ctx, inst, cfg, vocab.len(), n_classes);
        let logits = out.averaged.value();
        let predicted = argmax(&logits);
        confusion.record(inst.target, predicted);
        predictions.push(Prediction {
            instance_id: inst.id.clone(),
            true_label: inst.target,
            predicted,
            logits,
        });
    }
    if store.total_params() != params_before {
        return Err(Error::validation(
            "checkpoint is missing parameters for this configuration (dims or flags mismatch)"
                .to_string(),
        ));
    }
    Ok(Evaluation {
        metrics: compute_metrics(&confusion),
        confusion,
        predictions,
    })
}

/// Deterministic 70/15/15 split by conversation-id hash.
pub fn split_corpus(
    conversations: &[Conversation],
    seed: u64,
) -> (Vec<Conversation>, Vec<Conversation>, Vec<Conversation>) {
    let mut train = Vec::new();
    let mut dev = Vec::new();
    let mut test = Vec::new();
    for conv in conversations {
        let mut key = seed.to_le_bytes().to_vec();
        key.extend_from_slice(conv.id.as_bytes());
        match fnv1a(&key) % 100 {
            0..=69 => train.push(conv.clone()),
            70..=84 => dev.push(conv.clone()),
            _ => test.push(conv.clone()),
        }
    }
    (train, dev, test)
}
