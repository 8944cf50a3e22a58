//! Per-utterance SGD training and gold-label evaluation.

use super::{AnnotatorKind, AnnotatorModel};
use crate::corpus::Corpus;
use crate::encoder::softmax;
use crate::error::{EdaError, Result};
use crate::rng;

/// Training hyperparameters. `seed` drives only the epoch shuffles; the
/// parameter init seed lives with the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(EdaError::InvalidConfig("epochs must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(EdaError::InvalidConfig(format!(
                "learning rate must be a positive finite number, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

/// Outcome of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub kind: AnnotatorKind,
    pub epochs: usize,
    /// Gold-labelled utterances seen per epoch.
    pub examples: usize,
    /// Mean cross-entropy per epoch, in epoch order.
    pub loss_history: Vec<f64>,
    pub final_train_accuracy: f64,
}

/// Accuracy of a model against a corpus' gold labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

/// Positions of trainable examples: gold label present and mapped to a
/// class. Non-determinable golds are skipped (they are not a class);
/// golds outside the inventory are an error.
fn gold_positions(model: &AnnotatorModel, corpus: &Corpus) -> Result<Vec<(usize, usize, usize)>> {
    let inventory = model.inventory();
    let mut out = Vec::new();
    for (di, dialogue) in corpus.dialogues.iter().enumerate() {
        for (ui, utt) in dialogue.utterances.iter().enumerate() {
            let Some(code) = &utt.gold_da else { continue };
            if !inventory.contains(code) {
                return Err(EdaError::InventoryMismatch(format!(
                    "gold label '{code}' at {}:{} is not in the tag inventory",
                    utt.dialogue_id, utt.turn_index
                )));
            }
            if let Some(class) = inventory.class_index(code) {
                out.push((di, ui, class));
            }
        }
    }
    Ok(out)
}

/// Train `model` in place with plain per-utterance SGD on cross-entropy.
///
/// Deterministic: the same model (same init seed), corpus, and config
/// produce bit-identical parameters. A non-finite loss aborts the run.
pub fn train(model: &mut AnnotatorModel, corpus: &Corpus, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let mut examples = gold_positions(model, corpus)?;
    if examples.is_empty() {
        return Err(EdaError::EmptyCorpus);
    }
    let mut shuffle_rng = rng::derive(cfg.seed, "shuffle");
    let mut loss_history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        rng::shuffle(&mut shuffle_rng, &mut examples);
        let mut total_loss = 0.0;
        for &(di, ui, gold) in &examples {
            let dialogue = &corpus.dialogues[di];
            let (logits, cache) = model.forward_at(dialogue, ui)?;
            let probs = softmax(&logits);
            let loss = -probs[gold].ln();
            if !loss.is_finite() {
                return Err(EdaError::NonFiniteLoss { epoch });
            }
            total_loss += loss;
            let mut d_logits = probs;
            d_logits[gold] -= 1.0;
            let grads = model.backward_at(&cache, &d_logits);
            model.params.apply_gradients(&grads, cfg.lr);
        }
        let mean_loss = total_loss / examples.len() as f64;
        log::debug!(
            "{} epoch {}/{}: mean loss {:.6}",
            model.kind(),
            epoch + 1,
            cfg.epochs,
            mean_loss
        );
        loss_history.push(mean_loss);
    }
    if !model.params.is_finite() {
        return Err(EdaError::NonFiniteLoss {
            epoch: cfg.epochs - 1,
        });
    }

    let eval = evaluate(model, corpus)?;
    log::info!(
        "{}: trained {} epochs on {} examples, final train accuracy {:.4}",
        model.kind(),
        cfg.epochs,
        examples.len(),
        eval.accuracy
    );
    Ok(TrainReport {
        kind: model.kind(),
        epochs: cfg.epochs,
        examples: examples.len(),
        loss_history,
        final_train_accuracy: eval.accuracy,
    })
}

/// Accuracy of argmax predictions against the corpus' class golds.
pub fn evaluate(model: &AnnotatorModel, corpus: &Corpus) -> Result<EvalReport> {
    let examples = gold_positions(model, corpus)?;
    if examples.is_empty() {
        return Err(EdaError::EmptyCorpus);
    }
    let mut correct = 0usize;
    for &(di, ui, gold) in &examples {
        let p = model.predict(&corpus.dialogues[di], ui)?;
        if model.inventory().class_index(&p.label) == Some(gold) {
            correct += 1;
        }
    }
    Ok(EvalReport {
        correct,
        total: examples.len(),
        accuracy: correct as f64 / examples.len() as f64,
    })
}
