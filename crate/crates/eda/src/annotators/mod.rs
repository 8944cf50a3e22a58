//! The five neural dialogue-act annotators.
//!
//! All five share the same contract — given a position in a dialogue they
//! produce a probability distribution over the tag inventory's trainable
//! classes — but differ in what they read and how they encode it:
//!
//! | kind      | reads                   | encoder                                          |
//! |-----------|-------------------------|--------------------------------------------------|
//! | `utt-l1`  | the utterance           | word GRU + additive attention                    |
//! | `utt-l2`  | the utterance           | mean of word embeddings, affine                  |
//! | `con1`    | 2 prior turns + current | per-turn (GRU+attention), context GRU + attention |
//! | `con2`    | 2 prior turns + current | per-turn mean embedding, context GRU + attention |
//! | `con3`    | 2 prior turns + current | concat of both per-turn encodings, context GRU + attention |
//!
//! Training is plain per-utterance SGD on cross-entropy with hand-rolled
//! backpropagation; [`check::gradient_check`] verifies every parameter
//! against central differences, and [`checkpoint`] round-trips models to
//! disk bit-exactly.

mod check;
mod checkpoint;
mod forward;
mod train;

pub use check::{gradient_check, GradCheckFailure, GradientCheckReport};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use train::{evaluate, train, EvalReport, TrainConfig, TrainReport};

use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dialogue, TagInventory};
use crate::encoder::{softmax, Attention, EmbeddingProvider, GruCell, Tensor};
use crate::error::{EdaError, Result};
use crate::rng;

/// Number of turns preceding the target in a context window.
pub const CONTEXT_PREDECESSORS: usize = 2;

/// Parameter init range: uniform in `[-INIT_SCALE, INIT_SCALE]`.
pub const INIT_SCALE: f64 = 0.08;

/// Identity of one annotator architecture.
///
/// The declaration order here is the canonical ordering used everywhere an
/// array of per-annotator values appears (prediction bundles, reliability
/// rater columns, report rows).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnnotatorKind {
    UttLevel1,
    UttLevel2,
    Context1,
    Context2,
    Context3,
}

impl AnnotatorKind {
    pub const ALL: [AnnotatorKind; 5] = [
        AnnotatorKind::UttLevel1,
        AnnotatorKind::UttLevel2,
        AnnotatorKind::Context1,
        AnnotatorKind::Context2,
        AnnotatorKind::Context3,
    ];

    /// Stable short name used in CLI arguments, file names, and reports.
    pub fn label(self) -> &'static str {
        match self {
            AnnotatorKind::UttLevel1 => "utt-l1",
            AnnotatorKind::UttLevel2 => "utt-l2",
            AnnotatorKind::Context1 => "con1",
            AnnotatorKind::Context2 => "con2",
            AnnotatorKind::Context3 => "con3",
        }
    }

    pub fn parse(s: &str) -> Option<AnnotatorKind> {
        AnnotatorKind::ALL.into_iter().find(|k| k.label() == s)
    }

    /// Position in the canonical ordering.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn uses_context(self) -> bool {
        matches!(
            self,
            AnnotatorKind::Context1 | AnnotatorKind::Context2 | AnnotatorKind::Context3
        )
    }

    /// Tie-break rank for fusion when confidences are exactly equal:
    /// context annotators outrank utterance-level ones, and within each
    /// group the lower-numbered architecture wins. Lower rank is stronger.
    pub fn tie_rank(self) -> usize {
        match self {
            AnnotatorKind::Context1 => 0,
            AnnotatorKind::Context2 => 1,
            AnnotatorKind::Context3 => 2,
            AnnotatorKind::UttLevel1 => 3,
            AnnotatorKind::UttLevel2 => 4,
        }
    }
}

impl std::fmt::Display for AnnotatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Affine map from an encoding to class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputLayer {
    pub w: Tensor,
    pub b: Tensor,
}

impl OutputLayer {
    fn zeros(input_dim: usize, classes: usize) -> Self {
        OutputLayer {
            w: Tensor::zeros(classes, input_dim),
            b: Tensor::vector(classes),
        }
    }

    fn init(input_dim: usize, classes: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut out = Self::zeros(input_dim, classes);
        for v in out.w.data.iter_mut().chain(out.b.data.iter_mut()) {
            *v = rng::uniform(rng, -INIT_SCALE, INIT_SCALE);
        }
        out
    }

    pub fn logits(&self, encoding: &[f64]) -> Vec<f64> {
        let mut l = self.w.matvec(encoding);
        for (li, bi) in l.iter_mut().zip(&self.b.data) {
            *li += bi;
        }
        l
    }
}

/// The trainable parameters of one annotator. Components not used by the
/// architecture are `None`; [`ModelParameters::tensors`] exposes every
/// present tensor under a stable dotted name (`"word_gru.wz"`, `"out.b"`, …)
/// used by SGD updates, gradient checking, and checkpoints alike.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub word_gru: Option<GruCell>,
    pub word_attn: Option<Attention>,
    pub ctx_gru: Option<GruCell>,
    pub ctx_attn: Option<Attention>,
    pub out: OutputLayer,
}

impl ModelParameters {
    /// Component layout for a given architecture.
    fn shape(kind: AnnotatorKind, embed_dim: usize, hidden_dim: usize) -> ParamShape {
        let word = (embed_dim, hidden_dim);
        match kind {
            AnnotatorKind::UttLevel1 => ParamShape {
                word: Some(word),
                ctx: None,
                out_in: hidden_dim,
            },
            AnnotatorKind::UttLevel2 => ParamShape {
                word: None,
                ctx: None,
                out_in: embed_dim,
            },
            AnnotatorKind::Context1 => ParamShape {
                word: Some(word),
                ctx: Some((hidden_dim, hidden_dim)),
                out_in: hidden_dim,
            },
            AnnotatorKind::Context2 => ParamShape {
                word: None,
                ctx: Some((embed_dim, hidden_dim)),
                out_in: hidden_dim,
            },
            AnnotatorKind::Context3 => ParamShape {
                word: Some(word),
                ctx: Some((hidden_dim + embed_dim, hidden_dim)),
                out_in: hidden_dim,
            },
        }
    }

    pub fn zeros(kind: AnnotatorKind, embed_dim: usize, hidden_dim: usize, classes: usize) -> Self {
        let s = Self::shape(kind, embed_dim, hidden_dim);
        ModelParameters {
            word_gru: s.word.map(|(i, h)| GruCell::zeros(i, h)),
            word_attn: s.word.map(|(_, h)| Attention::zeros(h)),
            ctx_gru: s.ctx.map(|(i, h)| GruCell::zeros(i, h)),
            ctx_attn: s.ctx.map(|(_, h)| Attention::zeros(h)),
            out: OutputLayer::zeros(s.out_in, classes),
        }
    }

    pub fn init(
        kind: AnnotatorKind,
        embed_dim: usize,
        hidden_dim: usize,
        classes: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let s = Self::shape(kind, embed_dim, hidden_dim);
        ModelParameters {
            word_gru: s.word.map(|(i, h)| GruCell::init(i, h, rng, INIT_SCALE)),
            word_attn: s.word.map(|(_, h)| Attention::init(h, rng, INIT_SCALE)),
            ctx_gru: s.ctx.map(|(i, h)| GruCell::init(i, h, rng, INIT_SCALE)),
            ctx_attn: s.ctx.map(|(_, h)| Attention::init(h, rng, INIT_SCALE)),
            out: OutputLayer::init(s.out_in, classes, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        ModelParameters {
            word_gru: self.word_gru.as_ref().map(GruCell::zeros_like),
            word_attn: self.word_attn.as_ref().map(Attention::zeros_like),
            ctx_gru: self.ctx_gru.as_ref().map(GruCell::zeros_like),
            ctx_attn: self.ctx_attn.as_ref().map(Attention::zeros_like),
            out: OutputLayer::zeros(self.out.w.cols, self.out.w.rows),
        }
    }

    /// Every present tensor under its stable dotted name, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        if let Some(g) = &self.word_gru {
            for (n, t) in g.tensors() {
                out.push((format!("word_gru.{n}"), t));
            }
        }
        if let Some(a) = &self.word_attn {
            for (n, t) in a.tensors() {
                out.push((format!("word_attn.{n}"), t));
            }
        }
        if let Some(g) = &self.ctx_gru {
            for (n, t) in g.tensors() {
                out.push((format!("ctx_gru.{n}"), t));
            }
        }
        if let Some(a) = &self.ctx_attn {
            for (n, t) in a.tensors() {
                out.push((format!("ctx_attn.{n}"), t));
            }
        }
        out.push(("out.w".into(), &self.out.w));
        out.push(("out.b".into(), &self.out.b));
        out
    }

    /// Mutable variant of [`ModelParameters::tensors`]; same names, same order.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::new();
        if let Some(g) = &mut self.word_gru {
            for (n, t) in g.tensors_mut() {
                out.push((format!("word_gru.{n}"), t));
            }
        }
        if let Some(a) = &mut self.word_attn {
            for (n, t) in a.tensors_mut() {
                out.push((format!("word_attn.{n}"), t));
            }
        }
        if let Some(g) = &mut self.ctx_gru {
            for (n, t) in g.tensors_mut() {
                out.push((format!("ctx_gru.{n}"), t));
            }
        }
        if let Some(a) = &mut self.ctx_attn {
            for (n, t) in a.tensors_mut() {
                out.push((format!("ctx_attn.{n}"), t));
            }
        }
        out.push(("out.w".into(), &mut self.out.w));
        out.push(("out.b".into(), &mut self.out.b));
        out
    }

    /// In-place SGD step: `theta -= lr * grad`.
    pub fn apply_gradients(&mut self, grads: &ModelParameters, lr: f64) {
        let g = grads.tensors();
        for (i, (name, t)) in self.tensors_mut().into_iter().enumerate() {
            debug_assert_eq!(name, g[i].0);
            t.add_scaled(g[i].1, -lr);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_finite())
    }
}

struct ParamShape {
    /// `(input_dim, hidden_dim)` of the word-level encoder, if any.
    word: Option<(usize, usize)>,
    /// `(input_dim, hidden_dim)` of the context-level encoder, if any.
    ctx: Option<(usize, usize)>,
    /// Input width of the output layer.
    out_in: usize,
}

/// One annotator: architecture, parameters, tag inventory, and the token
/// embedding provider it was built with.
#[derive(Debug, Clone)]
pub struct AnnotatorModel {
    kind: AnnotatorKind,
    hidden_dim: usize,
    inventory: TagInventory,
    provider: EmbeddingProvider,
    pub params: ModelParameters,
}

impl AnnotatorModel {
    /// Freshly initialized model. `seed` fixes the parameter init; pass a
    /// per-kind derived seed (see [`crate::rng::derive_seed`]) when building
    /// a pool so the five initializations are decoupled.
    pub fn new(
        kind: AnnotatorKind,
        inventory: &TagInventory,
        provider: EmbeddingProvider,
        hidden_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        if hidden_dim == 0 {
            return Err(EdaError::InvalidConfig("hidden dimension must be positive".into()));
        }
        let mut rng = rng::derive(seed, "init");
        let params = ModelParameters::init(
            kind,
            provider.dim(),
            hidden_dim,
            inventory.num_classes(),
            &mut rng,
        );
        Ok(AnnotatorModel {
            kind,
            hidden_dim,
            inventory: inventory.clone(),
            provider,
            params,
        })
    }

    pub(crate) fn from_parts(
        kind: AnnotatorKind,
        hidden_dim: usize,
        inventory: TagInventory,
        provider: EmbeddingProvider,
        params: ModelParameters,
    ) -> Self {
        AnnotatorModel {
            kind,
            hidden_dim,
            inventory,
            provider,
            params,
        }
    }

    pub fn kind(&self) -> AnnotatorKind {
        self.kind
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn embed_dim(&self) -> usize {
        self.provider.dim()
    }

    pub fn num_classes(&self) -> usize {
        self.inventory.num_classes()
    }

    pub fn inventory(&self) -> &TagInventory {
        &self.inventory
    }

    pub fn provider(&self) -> &EmbeddingProvider {
        &self.provider
    }

    /// Annotate one position: distribution over classes, the argmax label,
    /// and its probability. The label is always a trainable class code,
    /// never the non-determinable placeholder.
    pub fn predict(&self, dialogue: &Dialogue, index: usize) -> Result<Prediction> {
        let (logits, _) = self.forward_at(dialogue, index)?;
        let distribution = softmax(&logits);
        let class = crate::encoder::argmax(&distribution);
        Ok(Prediction {
            kind: self.kind,
            label: self.inventory.class_code(class).to_string(),
            confidence: distribution[class],
            distribution,
        })
    }
}

/// One annotator's verdict on one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub kind: AnnotatorKind,
    /// Argmax class code. Never the suite's non-determinable placeholder:
    /// individual annotators always commit to a class.
    pub label: String,
    /// Probability of `label` under `distribution`.
    pub confidence: f64,
    /// Probability over the inventory's classes; nonnegative, sums to 1.
    pub distribution: Vec<f64>,
}
