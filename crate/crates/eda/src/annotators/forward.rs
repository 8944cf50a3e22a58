//! Forward passes (with caches) and backpropagation for all five
//! architectures.
//!
//! Word embeddings are inputs, not parameters: gradients stop at the
//! embedding lookup. The word-level encoder of the context architectures is
//! shared across the window slots, so its gradients accumulate over slots.

use super::{AnnotatorKind, AnnotatorModel, ModelParameters, CONTEXT_PREDECESSORS};
use crate::corpus::{context_window, Dialogue};
use crate::encoder::attention::AttnForward;
use crate::encoder::linalg::add_assign;
use crate::encoder::rnn::GruForward;
use crate::encoder::{embed_tokens, Attention, GruCell};
use crate::error::{EdaError, Result};

/// Forward cache for one position; consumed by [`AnnotatorModel::backward_at`].
#[derive(Debug, Clone)]
pub(crate) struct Cache {
    /// Input of the output layer.
    pub encoding: Vec<f64>,
    pub detail: CacheDetail,
}

#[derive(Debug, Clone)]
pub(crate) enum CacheDetail {
    /// `utt-l1`; `None` when the utterance has no tokens (zero encoding).
    Utt1(Option<WordCache>),
    /// `utt-l2`: embeddings are frozen, nothing flows below the output layer.
    Utt2,
    /// The context architectures. `slots` holds the word-level caches for
    /// `con1`/`con3` (`None` for padding/empty slots) and is all-`None` for
    /// `con2`, which has no word-level encoder.
    Ctx {
        slots: Vec<Option<WordCache>>,
        gru: GruForward,
        attn: AttnForward,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct WordCache {
    pub gru: GruForward,
    pub attn: AttnForward,
}

impl AnnotatorModel {
    /// Class logits for the utterance at `dialogue[index]`, plus the cache
    /// needed to backpropagate from them.
    pub(crate) fn forward_at(&self, dialogue: &Dialogue, index: usize) -> Result<(Vec<f64>, Cache)> {
        if index >= dialogue.len() {
            return Err(EdaError::IndexOutOfRange {
                index,
                len: dialogue.len(),
            });
        }
        match self.kind() {
            AnnotatorKind::UttLevel1 => {
                let (encoding, cache) = self.encode_words(&dialogue.utterances[index].tokens)?;
                let logits = self.params.out.logits(&encoding);
                Ok((
                    logits,
                    Cache {
                        encoding,
                        detail: CacheDetail::Utt1(cache),
                    },
                ))
            }
            AnnotatorKind::UttLevel2 => {
                let encoding = self.mean_embedding(&dialogue.utterances[index].tokens);
                let logits = self.params.out.logits(&encoding);
                Ok((
                    logits,
                    Cache {
                        encoding,
                        detail: CacheDetail::Utt2,
                    },
                ))
            }
            AnnotatorKind::Context1 => {
                let window = context_window(dialogue, index, CONTEXT_PREDECESSORS)?;
                let mut inputs = Vec::with_capacity(window.len());
                let mut slots = Vec::with_capacity(window.len());
                for slot in &window {
                    let (u, cache) = self.encode_words(slot.tokens())?;
                    inputs.push(u);
                    slots.push(cache);
                }
                self.context_head(inputs, slots)
            }
            AnnotatorKind::Context2 => {
                let window = context_window(dialogue, index, CONTEXT_PREDECESSORS)?;
                let inputs: Vec<Vec<f64>> = window
                    .iter()
                    .map(|slot| self.mean_embedding(slot.tokens()))
                    .collect();
                let slots = vec![None; window.len()];
                self.context_head(inputs, slots)
            }
            AnnotatorKind::Context3 => {
                let window = context_window(dialogue, index, CONTEXT_PREDECESSORS)?;
                let mut inputs = Vec::with_capacity(window.len());
                let mut slots = Vec::with_capacity(window.len());
                for slot in &window {
                    let (mut v, cache) = self.encode_words(slot.tokens())?;
                    v.extend(self.mean_embedding(slot.tokens()));
                    inputs.push(v);
                    slots.push(cache);
                }
                self.context_head(inputs, slots)
            }
        }
    }

    /// Gradients of the loss with respect to every parameter, given the
    /// gradient on the logits.
    pub(crate) fn backward_at(&self, cache: &Cache, d_logits: &[f64]) -> ModelParameters {
        let mut grads = self.params.zeros_like();
        grads.out.w.add_outer(d_logits, &cache.encoding);
        add_assign(&mut grads.out.b.data, d_logits);
        let d_encoding = self.params.out.w.matvec_t(d_logits);

        match &cache.detail {
            CacheDetail::Utt2 => {}
            CacheDetail::Utt1(word) => {
                if let Some(wc) = word {
                    self.backprop_words(wc, &d_encoding, &mut grads);
                }
            }
            CacheDetail::Ctx { slots, gru, attn } => {
                let ctx_attn = self.params.ctx_attn.as_ref().expect("context head");
                let ctx_gru = self.params.ctx_gru.as_ref().expect("context head");
                let (attn_grads, d_states) = ctx_attn.backward(attn, &d_encoding);
                accumulate_attn(grads.ctx_attn.as_mut().expect("context head"), &attn_grads);
                let (gru_grads, d_inputs) = ctx_gru.backward(gru, &d_states);
                accumulate_gru(grads.ctx_gru.as_mut().expect("context head"), &gru_grads);
                let hidden = self.hidden_dim();
                for (slot, d_input) in slots.iter().zip(&d_inputs) {
                    if let Some(wc) = slot {
                        // For con3 the slot input is [word encoding | mean
                        // embedding]; only the first part backpropagates.
                        self.backprop_words(wc, &d_input[..hidden], &mut grads);
                    }
                }
            }
        }
        grads
    }

    /// Word-level encoding: GRU over token embeddings, additive attention
    /// over its states. Empty token lists (padding slots, empty utterances)
    /// encode to the zero vector and produce no cache.
    fn encode_words(&self, tokens: &[String]) -> Result<(Vec<f64>, Option<WordCache>)> {
        if tokens.is_empty() {
            return Ok((vec![0.0; self.hidden_dim()], None));
        }
        let gru = self.params.word_gru.as_ref().expect("word-level encoder");
        let attn = self.params.word_attn.as_ref().expect("word-level encoder");
        let embeddings = embed_tokens(self.provider(), tokens);
        let gru_fwd = gru.forward(&embeddings)?;
        let attn_fwd = attn.forward(&gru_fwd.hidden)?;
        let encoding = attn_fwd.context.clone();
        Ok((
            encoding,
            Some(WordCache {
                gru: gru_fwd,
                attn: attn_fwd,
            }),
        ))
    }

    /// Mean of the token embeddings; zero vector when there are no tokens.
    fn mean_embedding(&self, tokens: &[String]) -> Vec<f64> {
        if tokens.is_empty() {
            return vec![0.0; self.embed_dim()];
        }
        let embeddings = embed_tokens(self.provider(), tokens);
        crate::encoder::mean_pool(&embeddings).expect("nonempty embeddings")
    }

    /// Context GRU + attention + output layer over per-slot input vectors.
    fn context_head(
        &self,
        inputs: Vec<Vec<f64>>,
        slots: Vec<Option<WordCache>>,
    ) -> Result<(Vec<f64>, Cache)> {
        let gru = self.params.ctx_gru.as_ref().expect("context head");
        let attn = self.params.ctx_attn.as_ref().expect("context head");
        let gru_fwd = gru.forward(&inputs)?;
        let attn_fwd = attn.forward(&gru_fwd.hidden)?;
        let encoding = attn_fwd.context.clone();
        let logits = self.params.out.logits(&encoding);
        Ok((
            logits,
            Cache {
                encoding,
                detail: CacheDetail::Ctx {
                    slots,
                    gru: gru_fwd,
                    attn: attn_fwd,
                },
            },
        ))
    }

    fn backprop_words(&self, wc: &WordCache, d_context: &[f64], grads: &mut ModelParameters) {
        let word_attn = self.params.word_attn.as_ref().expect("word-level encoder");
        let word_gru = self.params.word_gru.as_ref().expect("word-level encoder");
        let (attn_grads, d_states) = word_attn.backward(&wc.attn, d_context);
        accumulate_attn(grads.word_attn.as_mut().expect("word-level encoder"), &attn_grads);
        // Gradients on the token embeddings are discarded: embeddings are
        // not trainable.
        let (gru_grads, _d_embeddings) = word_gru.backward(&wc.gru, &d_states);
        accumulate_gru(grads.word_gru.as_mut().expect("word-level encoder"), &gru_grads);
    }
}

fn accumulate_gru(into: &mut GruCell, g: &GruCell) {
    let src = g.tensors();
    for (i, (_, t)) in into.tensors_mut().into_iter().enumerate() {
        t.add_scaled(src[i].1, 1.0);
    }
}

fn accumulate_attn(into: &mut Attention, g: &Attention) {
    let src = g.tensors();
    for (i, (_, t)) in into.tensors_mut().into_iter().enumerate() {
        t.add_scaled(src[i].1, 1.0);
    }
}
