//! Conversational data model: utterances, dialogues, corpora, label schemes,
//! context windows, the JSONL corpus format, and a synthetic-corpus generator.

pub(crate) mod jsonl;
mod synthetic;
pub mod tags;
mod tokenize;

pub use jsonl::{parse_corpus, serialize_corpus};
pub use synthetic::{generate_synthetic, holdout_split, SyntheticConfig, VocabSpec};
pub use tags::{default_inventory, DialogueActTag, TagInventory, XX};
pub use tokenize::tokenize;

use serde::{Deserialize, Serialize};

use crate::error::{EdaError, Result};

/// Marker used wherever a missing-context slot is reported textually
/// (e.g. the previous-DA column of case tables at dialogue starts).
pub const PAD_MARKER: &str = "<pad>";

/// Discrete emotion classes across the supported schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Joy,
    Sadness,
    Fear,
    Surprise,
    Disgust,
    Anger,
    Neutral,
    Frustration,
    Excited,
}

impl Emotion {
    pub fn code(self) -> &'static str {
        match self {
            Emotion::Joy => "joy",
            Emotion::Sadness => "sadness",
            Emotion::Fear => "fear",
            Emotion::Surprise => "surprise",
            Emotion::Disgust => "disgust",
            Emotion::Anger => "anger",
            Emotion::Neutral => "neutral",
            Emotion::Frustration => "frustration",
            Emotion::Excited => "excited",
        }
    }
}

/// Utterance-level sentiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Positive,
    Negative,
    Neutral,
}

impl Sentiment {
    pub fn code(self) -> &'static str {
        match self {
            Sentiment::Positive => "positive",
            Sentiment::Negative => "negative",
            Sentiment::Neutral => "neutral",
        }
    }

    pub const ALL: [Sentiment; 3] = [Sentiment::Positive, Sentiment::Negative, Sentiment::Neutral];
}

/// Declared emotion scheme of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionScheme {
    /// Seven discrete emotion classes plus Frustration and Excited.
    Iemocap,
    /// Seven discrete emotion classes.
    Meld,
}

impl EmotionScheme {
    pub fn emotions(self) -> &'static [Emotion] {
        match self {
            EmotionScheme::Iemocap => &[
                Emotion::Joy,
                Emotion::Sadness,
                Emotion::Fear,
                Emotion::Surprise,
                Emotion::Disgust,
                Emotion::Anger,
                Emotion::Neutral,
                Emotion::Frustration,
                Emotion::Excited,
            ],
            EmotionScheme::Meld => &[
                Emotion::Joy,
                Emotion::Sadness,
                Emotion::Fear,
                Emotion::Surprise,
                Emotion::Disgust,
                Emotion::Anger,
                Emotion::Neutral,
            ],
        }
    }

    pub fn contains(self, emotion: Emotion) -> bool {
        self.emotions().contains(&emotion)
    }
}

/// What label kinds a corpus declares; parsing validates against this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub emotion: Option<EmotionScheme>,
    pub sentiment: bool,
}

impl SchemeSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_emotion(scheme: EmotionScheme) -> Self {
        Self {
            emotion: Some(scheme),
            sentiment: false,
        }
    }

    /// MELD-style declaration: emotions plus sentiment.
    pub fn with_emotion_and_sentiment(scheme: EmotionScheme) -> Self {
        Self {
            emotion: Some(scheme),
            sentiment: true,
        }
    }
}

/// One speaker turn.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub dialogue_id: String,
    pub turn_index: usize,
    pub speaker: String,
    pub text: String,
    /// Always exactly `tokenize(text)`; derived, never stored on disk.
    pub tokens: Vec<String>,
    pub gold_da: Option<String>,
    pub emotion: Option<Emotion>,
    pub sentiment: Option<Sentiment>,
}

impl Utterance {
    pub fn new(dialogue_id: impl Into<String>, turn_index: usize, speaker: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Self {
            dialogue_id: dialogue_id.into(),
            turn_index,
            speaker: speaker.into(),
            text,
            tokens,
            gold_da: None,
            emotion: None,
            sentiment: None,
        }
    }

    pub fn with_gold(mut self, da: impl Into<String>) -> Self {
        self.gold_da = Some(da.into());
        self
    }
}

/// Ordered utterances sharing a dialogue id.
#[derive(Debug, Clone, PartialEq)]
pub struct Dialogue {
    pub id: String,
    pub utterances: Vec<Utterance>,
}

impl Dialogue {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }
}

/// A sequence of dialogues with their declared label schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub dialogues: Vec<Dialogue>,
    pub scheme: SchemeSpec,
}

impl Corpus {
    pub fn num_utterances(&self) -> usize {
        self.dialogues.iter().map(Dialogue::len).sum()
    }

    /// Iterate utterances in corpus order.
    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.dialogues.iter().flat_map(|d| d.utterances.iter())
    }

    /// Iterate `(dialogue index, utterance index)` pairs in corpus order.
    pub fn positions(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_utterances());
        for (di, d) in self.dialogues.iter().enumerate() {
            for ui in 0..d.len() {
                out.push((di, ui));
            }
        }
        out
    }
}

/// One slot of a context window: a real utterance or dialogue-start padding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContextSlot<'a> {
    Pad,
    Utt(&'a Utterance),
}

impl<'a> ContextSlot<'a> {
    pub fn is_pad(&self) -> bool {
        matches!(self, ContextSlot::Pad)
    }

    /// Tokens of the slot; empty for padding.
    pub fn tokens(&self) -> &'a [String] {
        match self {
            ContextSlot::Pad => &[],
            ContextSlot::Utt(u) => &u.tokens,
        }
    }
}

/// The target utterance plus its `width` predecessors, oldest first.
/// Positions before the dialogue start come back as [`ContextSlot::Pad`].
pub fn context_window<'a>(
    dialogue: &'a Dialogue,
    index: usize,
    width: usize,
) -> Result<Vec<ContextSlot<'a>>> {
    if index >= dialogue.len() {
        return Err(EdaError::IndexOutOfRange {
            index,
            len: dialogue.len(),
        });
    }
    let mut window = Vec::with_capacity(width + 1);
    for offset in (0..=width).rev() {
        if index >= offset {
            window.push(ContextSlot::Utt(&dialogue.utterances[index - offset]));
        } else {
            window.push(ContextSlot::Pad);
        }
    }
    Ok(window)
}
