//! Deterministic synthetic-corpus generator for desk-scale experiments.
//!
//! Each utterance carries a *topic cue* word and a *shift* word. With
//! `context_rule` off, the gold dialogue act is simply the topic, so a
//! bag-of-cues lookup recovers every label from the utterance alone. With
//! `context_rule` on, the gold act of turn `t` is
//! `(topic(t-1) + shift(t)) mod classes` (topic `0` before the dialogue
//! start), so the label is only decodable with the preceding utterance in
//! view and utterance-only annotators hit a ceiling below 100%.

use rand_chacha::ChaCha8Rng;

use super::tags::TagInventory;
use super::{Corpus, Dialogue, Emotion, EmotionScheme, SchemeSpec, Sentiment, Utterance};
use crate::error::{EdaError, Result};
use crate::rng;

/// Token pools used to build synthetic utterance texts.
#[derive(Debug, Clone)]
pub struct VocabSpec {
    /// One cue word per class; at least `classes` entries.
    pub cue_words: Vec<String>,
    /// Two shift words encoding shift 0 / shift 1.
    pub shift_words: [String; 2],
    /// Neutral filler words shared by all classes.
    pub fillers: Vec<String>,
}

impl Default for VocabSpec {
    fn default() -> Self {
        let cues = [
            "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india",
            "juliett", "kilo", "lima", "mike", "november", "oscar", "papa", "quebec", "romeo",
            "sierra", "tango", "uniform", "victor", "whiskey", "zulu",
        ];
        VocabSpec {
            cue_words: cues.iter().map(|s| s.to_string()).collect(),
            shift_words: ["indeed".into(), "however".into()],
            fillers: ["well", "yeah", "so", "you", "know", "right"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

/// Configuration for [`generate_synthetic`].
#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    /// Number of dialogue act classes drawn from the inventory (xx excluded).
    pub classes: usize,
    pub dialogues: usize,
    /// Inclusive range of utterances per dialogue.
    pub turns: (usize, usize),
    pub vocab: VocabSpec,
    /// Couple each gold label to the preceding utterance (see module docs).
    pub context_rule: bool,
    pub seed: u64,
    /// Optionally attach emotion labels (deterministic function of the gold
    /// act and template variant, so act/emotion co-occurrence is structured).
    pub emotion_scheme: Option<EmotionScheme>,
    /// Also attach sentiment labels (requires an emotion scheme).
    pub sentiment: bool,
}

impl SyntheticConfig {
    pub fn new(classes: usize, dialogues: usize, seed: u64) -> Self {
        SyntheticConfig {
            classes,
            dialogues,
            turns: (4, 8),
            vocab: VocabSpec::default(),
            context_rule: false,
            seed,
            emotion_scheme: None,
            sentiment: false,
        }
    }

    fn validate(&self, inventory: &TagInventory) -> Result<()> {
        if self.classes < 2 {
            return Err(EdaError::InvalidConfig("need at least 2 classes".into()));
        }
        if self.classes > inventory.num_classes() {
            return Err(EdaError::InvalidConfig(format!(
                "{} classes requested but the inventory has only {} (xx excluded)",
                self.classes,
                inventory.num_classes()
            )));
        }
        if self.dialogues == 0 {
            return Err(EdaError::InvalidConfig("need at least 1 dialogue".into()));
        }
        if self.turns.0 == 0 || self.turns.0 > self.turns.1 {
            return Err(EdaError::InvalidConfig(format!(
                "bad turns range {:?}",
                self.turns
            )));
        }
        if self.vocab.cue_words.len() < self.classes {
            return Err(EdaError::InvalidConfig(format!(
                "{} cue words for {} classes",
                self.vocab.cue_words.len(),
                self.classes
            )));
        }
        if self.vocab.fillers.is_empty() {
            return Err(EdaError::InvalidConfig("need at least one filler word".into()));
        }
        let mut all: Vec<&String> = self.vocab.cue_words[..self.classes]
            .iter()
            .chain(self.vocab.shift_words.iter())
            .chain(self.vocab.fillers.iter())
            .collect();
        all.sort();
        let before = all.len();
        all.dedup();
        if all.len() != before {
            return Err(EdaError::InvalidConfig(
                "cue, shift, and filler words must be disjoint".into(),
            ));
        }
        if self.sentiment && self.emotion_scheme.is_none() {
            return Err(EdaError::InvalidConfig(
                "sentiment labels require an emotion scheme".into(),
            ));
        }
        Ok(())
    }
}

const TEMPLATES: usize = 3;

fn build_text(vocab: &VocabSpec, topic: usize, shift: usize, variant: usize) -> String {
    let cue = &vocab.cue_words[topic];
    let sw = &vocab.shift_words[shift];
    let f = |i: usize| &vocab.fillers[i % vocab.fillers.len()];
    match variant {
        0 => format!("{cue} {sw}"),
        1 => format!("{} {cue} {sw} {}", f(0), f(1)),
        _ => format!("{} {cue} {} {} {sw}", f(2), f(3), f(4)),
    }
}

fn emotion_for(scheme: EmotionScheme, gold: usize, variant: usize) -> Emotion {
    let emotions = scheme.emotions();
    emotions[(gold + usize::from(variant == 2)) % emotions.len()]
}

fn sentiment_for(emotion: Emotion) -> Sentiment {
    match emotion {
        Emotion::Joy | Emotion::Excited | Emotion::Surprise => Sentiment::Positive,
        Emotion::Neutral => Sentiment::Neutral,
        _ => Sentiment::Negative,
    }
}

/// Generate a corpus; bit-reproducible for a given config.
pub fn generate_synthetic(config: &SyntheticConfig, inventory: &TagInventory) -> Result<Corpus> {
    config.validate(inventory)?;
    let mut rng: ChaCha8Rng = rng::seeded(config.seed);
    let c = config.classes;

    let mut dialogues = Vec::with_capacity(config.dialogues);
    for di in 0..config.dialogues {
        let id = format!("d{di:04}");
        let len = config.turns.0 + rng::below(&mut rng, config.turns.1 - config.turns.0 + 1);
        let mut utterances = Vec::with_capacity(len);
        let mut prev_topic = 0usize;
        for turn in 0..len {
            let topic = rng::below(&mut rng, c);
            let shift = rng::below(&mut rng, 2);
            let variant = rng::below(&mut rng, TEMPLATES);
            let gold = if config.context_rule {
                (prev_topic + shift) % c
            } else {
                topic
            };
            let speaker = if turn % 2 == 0 { "A" } else { "B" };
            let text = build_text(&config.vocab, topic, shift, variant);
            let mut utt = Utterance::new(id.clone(), turn, speaker, text)
                .with_gold(inventory.class_code(gold));
            if let Some(scheme) = config.emotion_scheme {
                let emotion = emotion_for(scheme, gold, variant);
                utt.emotion = Some(emotion);
                if config.sentiment {
                    utt.sentiment = Some(sentiment_for(emotion));
                }
            }
            utterances.push(utt);
            prev_topic = topic;
        }
        dialogues.push(Dialogue { id, utterances });
    }

    Ok(Corpus {
        dialogues,
        scheme: SchemeSpec {
            emotion: config.emotion_scheme,
            sentiment: config.sentiment,
        },
    })
}

/// Deterministic train/held-out split: every `every`-th dialogue is held out.
pub fn holdout_split(corpus: &Corpus, every: usize) -> (Corpus, Corpus) {
    assert!(every >= 2, "holdout_split needs every >= 2");
    let mut train = Vec::new();
    let mut held = Vec::new();
    for (i, d) in corpus.dialogues.iter().enumerate() {
        if (i + 1) % every == 0 {
            held.push(d.clone());
        } else {
            train.push(d.clone());
        }
    }
    (
        Corpus {
            dialogues: train,
            scheme: corpus.scheme,
        },
        Corpus {
            dialogues: held,
            scheme: corpus.scheme,
        },
    )
}
