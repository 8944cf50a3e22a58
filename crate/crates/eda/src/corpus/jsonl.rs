//! JSONL corpus format: one object per utterance, UTF-8, LF-terminated.
//!
//! Fields: `dialogue_id`, `turn_index`, `speaker`, `text`, plus optional
//! `da`, `emotion`, `sentiment`. Tokens are derived on parse, never stored.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::tags::TagInventory;
use super::{Corpus, Dialogue, Emotion, SchemeSpec, Sentiment, Utterance};
use crate::error::{EdaError, Result};

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct UtteranceRecord {
    pub(crate) dialogue_id: String,
    pub(crate) turn_index: usize,
    pub(crate) speaker: String,
    pub(crate) text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub(crate) da: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub(crate) emotion: Option<Emotion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub(crate) sentiment: Option<Sentiment>,
}

impl UtteranceRecord {
    pub(crate) fn from_utterance(utt: &Utterance) -> Self {
        UtteranceRecord {
            dialogue_id: utt.dialogue_id.clone(),
            turn_index: utt.turn_index,
            speaker: utt.speaker.clone(),
            text: utt.text.clone(),
            da: utt.gold_da.clone(),
            emotion: utt.emotion,
            sentiment: utt.sentiment,
        }
    }
}

/// Parse and validate a JSONL corpus.
///
/// Dialogues may interleave in the stream; within each dialogue the
/// `turn_index` values must appear consecutively from 0. Tag codes must be
/// in `inventory`, and emotion/sentiment labels must obey `scheme`.
pub fn parse_corpus(bytes: &[u8], scheme: SchemeSpec, inventory: &TagInventory) -> Result<Corpus> {
    let mut records = Vec::new();
    for (lineno, line) in decode_lines(bytes)? {
        let rec: UtteranceRecord =
            serde_json::from_str(line).map_err(|e| EdaError::MalformedLine {
                line: lineno,
                message: e.to_string(),
            })?;
        records.push((lineno, rec));
    }
    assemble_corpus(records, scheme, inventory)
}

/// Split a byte stream into `(line number, line)` pairs, skipping blank
/// lines. Line numbers are 1-based positions in the original stream.
pub(crate) fn decode_lines(bytes: &[u8]) -> Result<Vec<(usize, &str)>> {
    let text = std::str::from_utf8(bytes).map_err(|e| EdaError::MalformedLine {
        line: 0,
        message: format!("corpus is not valid utf-8: {e}"),
    })?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| (i + 1, line))
        .collect())
}

/// Validate decoded records (tag codes, scheme conformance, duplicates,
/// turn sequencing) and assemble them into dialogues, preserving the order
/// of first appearance.
pub(crate) fn assemble_corpus(
    records: Vec<(usize, UtteranceRecord)>,
    scheme: SchemeSpec,
    inventory: &TagInventory,
) -> Result<Corpus> {
    let mut dialogues: Vec<Dialogue> = Vec::new();
    let mut index_of: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut seen: HashSet<(String, usize)> = HashSet::new();

    for (lineno, rec) in records {
        if let Some(code) = &rec.da {
            if !inventory.contains(code) {
                return Err(EdaError::UnknownTag {
                    code: code.clone(),
                    line: lineno,
                });
            }
        }
        match (rec.emotion, scheme.emotion) {
            (Some(_), None) => {
                return Err(EdaError::SchemeViolation {
                    line: lineno,
                    message: "emotion label present but corpus declares no emotion scheme".into(),
                })
            }
            (Some(e), Some(s)) if !s.contains(e) => {
                return Err(EdaError::SchemeViolation {
                    line: lineno,
                    message: format!("emotion \"{}\" is not in the declared scheme", e.code()),
                })
            }
            _ => {}
        }
        if rec.sentiment.is_some() && !scheme.sentiment {
            return Err(EdaError::SchemeViolation {
                line: lineno,
                message: "sentiment label present but corpus does not declare sentiment".into(),
            });
        }

        if !seen.insert((rec.dialogue_id.clone(), rec.turn_index)) {
            return Err(EdaError::DuplicateTurn {
                dialogue_id: rec.dialogue_id,
                turn_index: rec.turn_index,
            });
        }

        let di = *index_of.entry(rec.dialogue_id.clone()).or_insert_with(|| {
            dialogues.push(Dialogue {
                id: rec.dialogue_id.clone(),
                utterances: Vec::new(),
            });
            dialogues.len() - 1
        });
        let expected = dialogues[di].utterances.len();
        if rec.turn_index != expected {
            return Err(EdaError::Sequencing {
                dialogue_id: rec.dialogue_id,
                expected,
                found: rec.turn_index,
            });
        }

        let mut utt = Utterance::new(rec.dialogue_id, rec.turn_index, rec.speaker, rec.text);
        utt.gold_da = rec.da;
        utt.emotion = rec.emotion;
        utt.sentiment = rec.sentiment;
        dialogues[di].utterances.push(utt);
    }

    Ok(Corpus { dialogues, scheme })
}

/// Serialize a corpus back to JSONL, one utterance per line, LF-terminated.
pub fn serialize_corpus(corpus: &Corpus) -> Vec<u8> {
    let mut out = Vec::new();
    for utt in corpus.utterances() {
        let rec = UtteranceRecord::from_utterance(utt);
        out.extend_from_slice(serde_json::to_string(&rec).expect("record serializes").as_bytes());
        out.push(b'\n');
    }
    out
}
