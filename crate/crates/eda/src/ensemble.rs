//! Multi-stage fusion of the five annotators' predictions into one label per
//! utterance, with match-category accounting.
//!
//! Per utterance the [`fuse`] decision tree runs four stages in order:
//!
//! 1. **AM** (absolute match): all five annotators agree.
//! 2. **CM** (context match): the three context annotators agree; or exactly
//!    two of them agree and at least one utterance-level annotator backs the
//!    same label.
//! 3. **BM** (bound match): rank the five votes by confidence (ties broken
//!    by a fixed annotator priority); a label held by at least two of the
//!    top three wins.
//! 4. **NM** (no match): the utterance is labelled with the
//!    non-determinable placeholder [`XX`].
//!
//! [`annotate_corpus`] applies this to every utterance and reports
//! per-category statistics; [`ensemble_accuracy`] scores fused labels
//! against gold ones. Round-trippable on-disk forms: annotated JSONL
//! (corpus fields plus `eda` and `eda_category`), a per-annotator
//! predictions sidecar (JSONL), and a category-statistics CSV.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::annotators::{AnnotatorKind, AnnotatorModel, Prediction};
use crate::corpus::jsonl::{assemble_corpus, decode_lines, UtteranceRecord};
use crate::corpus::{Corpus, Dialogue, TagInventory, Utterance, XX};
use crate::error::{EdaError, Result};

/// Outcome class of the fusion decision tree for one utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecisionCategory {
    /// Absolute match: all five annotators agreed.
    Am,
    /// Context match: decided by agreement among the context annotators.
    Cm,
    /// Bound match: decided by confidence ranking.
    Bm,
    /// No match: no rule fired; the utterance is labelled [`XX`].
    Nm,
}

impl DecisionCategory {
    pub const ALL: [DecisionCategory; 4] = [
        DecisionCategory::Am,
        DecisionCategory::Cm,
        DecisionCategory::Bm,
        DecisionCategory::Nm,
    ];

    pub fn code(self) -> &'static str {
        match self {
            DecisionCategory::Am => "AM",
            DecisionCategory::Cm => "CM",
            DecisionCategory::Bm => "BM",
            DecisionCategory::Nm => "NM",
        }
    }

    pub fn parse(s: &str) -> Option<DecisionCategory> {
        DecisionCategory::ALL.into_iter().find(|c| c.code() == s)
    }

    /// Position in [`DecisionCategory::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for DecisionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One annotator's committed label and its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Vote {
    pub kind: AnnotatorKind,
    pub label: String,
    pub confidence: f64,
}

/// Exactly one [`Vote`] per annotator kind, stored in canonical kind order.
///
/// Construction validates the bundle, so [`fuse`] itself is total.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBundle {
    votes: Vec<Vote>,
}

impl PredictionBundle {
    /// Build a bundle from five votes in any order.
    ///
    /// Rejects: wrong count, duplicate or missing kinds, the
    /// non-determinable placeholder as a label (individual annotators always
    /// commit to a class), and confidences outside `[0, 1]` or non-finite.
    pub fn new(votes: Vec<Vote>) -> Result<Self> {
        if votes.len() != AnnotatorKind::ALL.len() {
            return Err(EdaError::InvalidConfig(format!(
                "a prediction bundle needs exactly {} votes, got {}",
                AnnotatorKind::ALL.len(),
                votes.len()
            )));
        }
        let mut slots: [Option<Vote>; 5] = Default::default();
        for vote in votes {
            if vote.label == XX {
                return Err(EdaError::InvalidConfig(format!(
                    "annotator {} voted \"{XX}\", which individual annotators never produce",
                    vote.kind
                )));
            }
            if !vote.confidence.is_finite() || !(0.0..=1.0).contains(&vote.confidence) {
                return Err(EdaError::InvalidConfig(format!(
                    "annotator {} has confidence {} outside [0, 1]",
                    vote.kind, vote.confidence
                )));
            }
            let slot = &mut slots[vote.kind.index()];
            if slot.is_some() {
                return Err(EdaError::InvalidConfig(format!(
                    "duplicate vote for annotator {}",
                    vote.kind
                )));
            }
            *slot = Some(vote);
        }
        Ok(PredictionBundle {
            votes: slots
                .into_iter()
                .map(|s| s.expect("five distinct kinds fill all slots"))
                .collect(),
        })
    }

    pub fn from_predictions(predictions: &[Prediction]) -> Result<Self> {
        Self::new(
            predictions
                .iter()
                .map(|p| Vote {
                    kind: p.kind,
                    label: p.label.clone(),
                    confidence: p.confidence,
                })
                .collect(),
        )
    }

    /// The five votes in canonical kind order.
    pub fn votes(&self) -> &[Vote] {
        &self.votes
    }

    pub fn vote(&self, kind: AnnotatorKind) -> &Vote {
        &self.votes[kind.index()]
    }

    /// The five labels in canonical kind order.
    pub fn labels(&self) -> Vec<String> {
        self.votes.iter().map(|v| v.label.clone()).collect()
    }

    /// The five confidences in canonical kind order.
    pub fn confidences(&self) -> Vec<f64> {
        self.votes.iter().map(|v| v.confidence).collect()
    }
}

/// The fused label for one utterance and how it was reached.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleDecision {
    /// A class code, or [`XX`] iff `category` is [`DecisionCategory::Nm`].
    pub label: String,
    pub category: DecisionCategory,
}

/// Run the fusion decision tree on one bundle.
pub fn fuse(bundle: &PredictionBundle) -> EnsembleDecision {
    let votes = bundle.votes();

    // Stage 1 — AM: unanimous.
    if votes.iter().all(|v| v.label == votes[0].label) {
        return EnsembleDecision {
            label: votes[0].label.clone(),
            category: DecisionCategory::Am,
        };
    }

    // Stage 2 — CM: context agreement, full or backed-pair.
    let ctx: Vec<&Vote> = votes.iter().filter(|v| v.kind.uses_context()).collect();
    let non_ctx: Vec<&Vote> = votes.iter().filter(|v| !v.kind.uses_context()).collect();
    if ctx[0].label == ctx[1].label && ctx[1].label == ctx[2].label {
        return EnsembleDecision {
            label: ctx[0].label.clone(),
            category: DecisionCategory::Cm,
        };
    }
    let pair_label = if ctx[0].label == ctx[1].label || ctx[0].label == ctx[2].label {
        Some(&ctx[0].label)
    } else if ctx[1].label == ctx[2].label {
        Some(&ctx[1].label)
    } else {
        None
    };
    if let Some(label) = pair_label {
        if non_ctx.iter().any(|v| &v.label == label) {
            return EnsembleDecision {
                label: label.clone(),
                category: DecisionCategory::Cm,
            };
        }
    }

    // Stage 3 — BM: a label held by ≥2 of the top three votes by
    // confidence. Confidence ties are broken by the fixed annotator
    // priority (context annotators first).
    let mut ranked: Vec<&Vote> = votes.iter().collect();
    ranked.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.kind.tie_rank().cmp(&b.kind.tie_rank()))
    });
    let top = &ranked[..3];
    let mut candidates: Vec<(&str, f64)> = Vec::new();
    for vote in top {
        if candidates.iter().any(|(label, _)| *label == vote.label) {
            continue;
        }
        let held: Vec<&&Vote> = top.iter().filter(|w| w.label == vote.label).collect();
        if held.len() >= 2 {
            let summed = held.iter().map(|w| w.confidence).sum();
            candidates.push((&vote.label, summed));
        }
    }
    if let Some((label, _)) = candidates
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
    {
        return EnsembleDecision {
            label: label.to_string(),
            category: DecisionCategory::Bm,
        };
    }

    // Stage 4 — NM.
    EnsembleDecision {
        label: XX.to_string(),
        category: DecisionCategory::Nm,
    }
}

/// The five trained annotators, one per kind, sharing a tag inventory.
#[derive(Debug, Clone)]
pub struct AnnotatorPool {
    models: Vec<AnnotatorModel>,
}

impl AnnotatorPool {
    /// Build a pool from five models in any order; they are stored in
    /// canonical kind order. All five must use the same tag inventory.
    pub fn new(models: Vec<AnnotatorModel>) -> Result<Self> {
        if models.len() != AnnotatorKind::ALL.len() {
            return Err(EdaError::InvalidConfig(format!(
                "an annotator pool needs exactly {} models, got {}",
                AnnotatorKind::ALL.len(),
                models.len()
            )));
        }
        let mut slots: [Option<AnnotatorModel>; 5] = Default::default();
        let mut hash: Option<u64> = None;
        for model in models {
            let h = model.inventory().content_hash();
            if *hash.get_or_insert(h) != h {
                return Err(EdaError::InventoryMismatch(
                    "pool models disagree on the tag inventory".into(),
                ));
            }
            let slot = &mut slots[model.kind().index()];
            if slot.is_some() {
                return Err(EdaError::InvalidConfig(format!(
                    "duplicate model for annotator {}",
                    model.kind()
                )));
            }
            *slot = Some(model);
        }
        Ok(AnnotatorPool {
            models: slots
                .into_iter()
                .map(|s| s.expect("five distinct kinds fill all slots"))
                .collect(),
        })
    }

    /// The five models in canonical kind order.
    pub fn models(&self) -> &[AnnotatorModel] {
        &self.models
    }

    pub fn model(&self, kind: AnnotatorKind) -> &AnnotatorModel {
        &self.models[kind.index()]
    }

    pub fn inventory(&self) -> &TagInventory {
        self.models[0].inventory()
    }

    /// All five annotators' predictions for one utterance.
    pub fn predict_bundle(&self, dialogue: &Dialogue, index: usize) -> Result<PredictionBundle> {
        let mut predictions = Vec::with_capacity(self.models.len());
        for model in &self.models {
            predictions.push(model.predict(dialogue, index)?);
        }
        PredictionBundle::from_predictions(&predictions)
    }
}

/// Fused decision for one utterance, with the votes behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    /// A class code, or [`XX`] iff `category` is [`DecisionCategory::Nm`].
    pub label: String,
    pub category: DecisionCategory,
    /// The per-annotator votes behind this decision. `None` when the
    /// annotation was read back from disk, where the per-annotator detail
    /// lives in the optional predictions sidecar.
    pub votes: Option<PredictionBundle>,
}

/// A corpus plus one [`Annotation`] per utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedCorpus {
    pub corpus: Corpus,
    /// Parallel to `corpus.dialogues`, one inner vector per dialogue.
    pub annotations: Vec<Vec<Annotation>>,
}

impl AnnotatedCorpus {
    /// Iterate `(utterance, annotation)` pairs in corpus order.
    pub fn iter(&self) -> impl Iterator<Item = (&Utterance, &Annotation)> {
        self.corpus
            .dialogues
            .iter()
            .zip(&self.annotations)
            .flat_map(|(d, anns)| d.utterances.iter().zip(anns.iter()))
    }

    pub fn num_utterances(&self) -> usize {
        self.corpus.num_utterances()
    }

    /// Category counts over all utterances.
    pub fn stats(&self) -> EnsembleStats {
        EnsembleStats::from_categories(self.iter().map(|(_, a)| a.category))
    }
}

/// Per-category counts over an annotated corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnsembleStats {
    counts: [usize; 4],
    total: usize,
}

impl EnsembleStats {
    pub fn from_categories(categories: impl IntoIterator<Item = DecisionCategory>) -> Self {
        let mut counts = [0usize; 4];
        let mut total = 0usize;
        for c in categories {
            counts[c.index()] += 1;
            total += 1;
        }
        EnsembleStats { counts, total }
    }

    pub fn count(&self, category: DecisionCategory) -> usize {
        self.counts[category.index()]
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Share of `category` in percent; 0 for an empty corpus.
    pub fn percent(&self, category: DecisionCategory) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(category) as f64 * 100.0 / self.total as f64
        }
    }
}

/// Smallest number of worker threads that is pointless to exceed.
const MAX_ANNOTATE_THREADS: usize = 8;

/// Fuse every utterance of `corpus` using `pool`.
///
/// Dialogues are annotated in parallel; each utterance's decision depends
/// only on its own dialogue, so the result is deterministic regardless of
/// scheduling. Errors if the corpus carries gold labels outside the pool's
/// inventory.
pub fn annotate_corpus(
    pool: &AnnotatorPool,
    corpus: &Corpus,
) -> Result<(AnnotatedCorpus, EnsembleStats)> {
    for utt in corpus.utterances() {
        if let Some(code) = &utt.gold_da {
            if !pool.inventory().contains(code) {
                return Err(EdaError::InventoryMismatch(format!(
                    "corpus gold label \"{code}\" is not in the pool's inventory"
                )));
            }
        }
    }

    let dialogues = &corpus.dialogues;
    let mut results: Vec<Result<Vec<Annotation>>> =
        (0..dialogues.len()).map(|_| Ok(Vec::new())).collect();
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(dialogues.len())
        .min(MAX_ANNOTATE_THREADS);
    if workers <= 1 {
        for (slot, dialogue) in results.iter_mut().zip(dialogues) {
            *slot = annotate_dialogue(pool, dialogue);
        }
    } else {
        let chunk = dialogues.len().div_ceil(workers);
        std::thread::scope(|scope| {
            for (slots, chunk_dialogues) in results.chunks_mut(chunk).zip(dialogues.chunks(chunk)) {
                scope.spawn(move || {
                    for (slot, dialogue) in slots.iter_mut().zip(chunk_dialogues) {
                        *slot = annotate_dialogue(pool, dialogue);
                    }
                });
            }
        });
    }

    let mut annotations = Vec::with_capacity(dialogues.len());
    for result in results {
        annotations.push(result?);
    }
    let annotated = AnnotatedCorpus {
        corpus: corpus.clone(),
        annotations,
    };
    let stats = annotated.stats();
    Ok((annotated, stats))
}

fn annotate_dialogue(pool: &AnnotatorPool, dialogue: &Dialogue) -> Result<Vec<Annotation>> {
    (0..dialogue.len())
        .map(|index| {
            let bundle = pool.predict_bundle(dialogue, index)?;
            let decision = fuse(&bundle);
            Ok(Annotation {
                label: decision.label,
                category: decision.category,
                votes: Some(bundle),
            })
        })
        .collect()
}

/// Exact-match score of fused labels against gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleAccuracy {
    /// `correct / compared`; 0 when nothing was compared.
    pub accuracy: f64,
    pub correct: usize,
    pub compared: usize,
    /// Utterances whose fused label was [`XX`] and were left out of the
    /// comparison (always 0 when `count_xx_as_error` is set).
    pub excluded_xx: usize,
}

/// Score fused labels against gold ones.
///
/// Only utterances with a usable gold label participate (a gold of [`XX`]
/// is not a class and is skipped, as in training). With
/// `count_xx_as_error` set (the default in the command-line tool), a fused
/// [`XX`] counts as a miss; otherwise those utterances are excluded and
/// counted in `excluded_xx`. Errors if no utterance has a usable gold
/// label.
pub fn ensemble_accuracy(
    annotated: &AnnotatedCorpus,
    count_xx_as_error: bool,
) -> Result<EnsembleAccuracy> {
    let mut gold_bearing = 0usize;
    let mut compared = 0usize;
    let mut correct = 0usize;
    let mut excluded_xx = 0usize;
    for (utt, ann) in annotated.iter() {
        let Some(gold) = &utt.gold_da else { continue };
        if gold == XX {
            continue;
        }
        gold_bearing += 1;
        if ann.label == XX {
            if count_xx_as_error {
                compared += 1;
            } else {
                excluded_xx += 1;
            }
            continue;
        }
        compared += 1;
        if &ann.label == gold {
            correct += 1;
        }
    }
    if gold_bearing == 0 {
        return Err(EdaError::EmptyCorpus);
    }
    Ok(EnsembleAccuracy {
        accuracy: if compared == 0 {
            0.0
        } else {
            correct as f64 / compared as f64
        },
        correct,
        compared,
        excluded_xx,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotatedRecord {
    #[serde(flatten)]
    base: UtteranceRecord,
    eda: String,
    eda_category: String,
}

/// Annotated corpus as JSONL: the corpus fields plus `eda` and
/// `eda_category` per line, LF-terminated.
pub fn serialize_annotated(annotated: &AnnotatedCorpus) -> Vec<u8> {
    let mut out = Vec::new();
    for (utt, ann) in annotated.iter() {
        let rec = AnnotatedRecord {
            base: UtteranceRecord::from_utterance(utt),
            eda: ann.label.clone(),
            eda_category: ann.category.code().to_string(),
        };
        out.extend_from_slice(serde_json::to_string(&rec).expect("record serializes").as_bytes());
        out.push(b'\n');
    }
    out
}

/// Parse an annotated JSONL corpus, validating both the underlying corpus
/// and the fused labels (`eda` in the inventory, known `eda_category`,
/// label [`XX`] exactly for category NM). The per-annotation `votes` come
/// back as `None`; per-annotator detail lives in the predictions sidecar.
pub fn parse_annotated(
    bytes: &[u8],
    scheme: crate::corpus::SchemeSpec,
    inventory: &TagInventory,
) -> Result<AnnotatedCorpus> {
    let mut base_records = Vec::new();
    let mut fused: HashMap<(String, usize), Annotation> = HashMap::new();
    for (lineno, line) in decode_lines(bytes)? {
        let rec: AnnotatedRecord =
            serde_json::from_str(line).map_err(|e| EdaError::MalformedLine {
                line: lineno,
                message: e.to_string(),
            })?;
        if !inventory.contains(&rec.eda) {
            return Err(EdaError::UnknownTag {
                code: rec.eda,
                line: lineno,
            });
        }
        let category =
            DecisionCategory::parse(&rec.eda_category).ok_or_else(|| EdaError::MalformedLine {
                line: lineno,
                message: format!("unknown decision category \"{}\"", rec.eda_category),
            })?;
        if (rec.eda == XX) != (category == DecisionCategory::Nm) {
            return Err(EdaError::MalformedLine {
                line: lineno,
                message: format!(
                    "label \"{}\" is inconsistent with category {category}",
                    rec.eda
                ),
            });
        }
        fused.insert(
            (rec.base.dialogue_id.clone(), rec.base.turn_index),
            Annotation {
                label: rec.eda,
                category,
                votes: None,
            },
        );
        base_records.push((lineno, rec.base));
    }

    let corpus = assemble_corpus(base_records, scheme, inventory)?;
    let annotations = corpus
        .dialogues
        .iter()
        .map(|d| {
            d.utterances
                .iter()
                .map(|u| {
                    fused
                        .remove(&(u.dialogue_id.clone(), u.turn_index))
                        .expect("every assembled utterance came from an annotated record")
                })
                .collect()
        })
        .collect();
    Ok(AnnotatedCorpus {
        corpus,
        annotations,
    })
}

/// One line of the per-annotator predictions sidecar: the five labels and
/// confidences for one utterance, in canonical kind order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub dialogue_id: String,
    pub turn_index: usize,
    pub labels: Vec<String>,
    pub confidences: Vec<f64>,
}

/// Per-annotator predictions as JSONL, one utterance per line in corpus
/// order. Requires the annotations to still carry their votes (i.e. the
/// corpus was annotated in this process, not read back from disk).
pub fn serialize_predictions(annotated: &AnnotatedCorpus) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for (utt, ann) in annotated.iter() {
        let bundle = ann.votes.as_ref().ok_or_else(|| {
            EdaError::InvalidConfig(
                "annotated corpus lacks per-annotator votes; re-annotate to emit a sidecar".into(),
            )
        })?;
        let rec = PredictionRecord {
            dialogue_id: utt.dialogue_id.clone(),
            turn_index: utt.turn_index,
            labels: bundle.labels(),
            confidences: bundle.confidences(),
        };
        out.extend_from_slice(serde_json::to_string(&rec).expect("record serializes").as_bytes());
        out.push(b'\n');
    }
    Ok(out)
}

/// Parse a predictions sidecar: five class-code labels and five
/// confidences in `[0, 1]` per line.
pub fn parse_predictions(bytes: &[u8], inventory: &TagInventory) -> Result<Vec<PredictionRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in decode_lines(bytes)? {
        let rec: PredictionRecord =
            serde_json::from_str(line).map_err(|e| EdaError::MalformedLine {
                line: lineno,
                message: e.to_string(),
            })?;
        if rec.labels.len() != AnnotatorKind::ALL.len()
            || rec.confidences.len() != AnnotatorKind::ALL.len()
        {
            return Err(EdaError::MalformedLine {
                line: lineno,
                message: format!(
                    "expected {} labels and confidences, got {} and {}",
                    AnnotatorKind::ALL.len(),
                    rec.labels.len(),
                    rec.confidences.len()
                ),
            });
        }
        for label in &rec.labels {
            if inventory.class_index(label).is_none() {
                return Err(EdaError::UnknownTag {
                    code: label.clone(),
                    line: lineno,
                });
            }
        }
        for &c in &rec.confidences {
            if !c.is_finite() || !(0.0..=1.0).contains(&c) {
                return Err(EdaError::MalformedLine {
                    line: lineno,
                    message: format!("confidence {c} outside [0, 1]"),
                });
            }
        }
        records.push(rec);
    }
    Ok(records)
}

/// Re-attach per-annotator votes from a predictions sidecar to an
/// annotated corpus read back from disk.
///
/// Every utterance must have exactly one record and vice versa, and
/// re-running [`fuse`] on the attached votes must reproduce the stored
/// fused label and category — a mismatch means the sidecar does not belong
/// to this annotated corpus.
pub fn attach_predictions(
    annotated: &mut AnnotatedCorpus,
    records: &[PredictionRecord],
) -> Result<()> {
    let mut by_key: HashMap<(&str, usize), &PredictionRecord> = HashMap::new();
    for rec in records {
        if by_key
            .insert((rec.dialogue_id.as_str(), rec.turn_index), rec)
            .is_some()
        {
            return Err(EdaError::InvalidConfig(format!(
                "duplicate prediction record for ({}, {})",
                rec.dialogue_id, rec.turn_index
            )));
        }
    }
    for (dialogue, annotations) in annotated
        .corpus
        .dialogues
        .iter()
        .zip(annotated.annotations.iter_mut())
    {
        for (utt, ann) in dialogue.utterances.iter().zip(annotations.iter_mut()) {
            let rec = by_key
                .remove(&(utt.dialogue_id.as_str(), utt.turn_index))
                .ok_or_else(|| {
                    EdaError::InvalidConfig(format!(
                        "no prediction record for ({}, {})",
                        utt.dialogue_id, utt.turn_index
                    ))
                })?;
            let bundle = PredictionBundle::new(
                AnnotatorKind::ALL
                    .iter()
                    .zip(&rec.labels)
                    .zip(&rec.confidences)
                    .map(|((kind, label), confidence)| Vote {
                        kind: *kind,
                        label: label.clone(),
                        confidence: *confidence,
                    })
                    .collect(),
            )?;
            let refused = fuse(&bundle);
            if refused.label != ann.label || refused.category != ann.category {
                return Err(EdaError::InvalidConfig(format!(
                    "sidecar disagrees with the annotated corpus at ({}, {}): \
                     fusing its votes gives ({}, {}), the corpus says ({}, {})",
                    utt.dialogue_id,
                    utt.turn_index,
                    refused.label,
                    refused.category,
                    ann.label,
                    ann.category
                )));
            }
            ann.votes = Some(bundle);
        }
    }
    if let Some(((id, turn), _)) = by_key.into_iter().next() {
        return Err(EdaError::InvalidConfig(format!(
            "prediction record for unknown utterance ({id}, {turn})"
        )));
    }
    Ok(())
}

const STATS_HEADER: [&str; 3] = ["category", "count", "percent"];

/// Category statistics as CSV: `category,count,percent`, one row per
/// category in AM, CM, BM, NM order.
pub fn emit_stats_csv(stats: &EnsembleStats) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(STATS_HEADER).expect("write to memory");
    for category in DecisionCategory::ALL {
        w.write_record([
            category.code(),
            &stats.count(category).to_string(),
            &stats.percent(category).to_string(),
        ])
        .expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

/// Parse a category-statistics CSV produced by [`emit_stats_csv`].
/// Percentages are recomputed from the counts.
pub fn parse_stats_csv(bytes: &[u8]) -> Result<EnsembleStats> {
    let mut reader = csv::ReaderBuilder::new().from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| EdaError::Csv(e.to_string()))?
        .clone();
    if header != STATS_HEADER.to_vec() {
        return Err(EdaError::Csv(format!(
            "expected header {:?}, got {:?}",
            STATS_HEADER.join(","),
            header
        )));
    }
    let mut counts = [0usize; 4];
    let mut seen = [false; 4];
    for row in reader.records() {
        let row = row.map_err(|e| EdaError::Csv(e.to_string()))?;
        if row.len() != 3 {
            return Err(EdaError::Csv(format!("expected 3 fields, got {}", row.len())));
        }
        let category = DecisionCategory::parse(&row[0])
            .ok_or_else(|| EdaError::Csv(format!("unknown category \"{}\"", &row[0])))?;
        if seen[category.index()] {
            return Err(EdaError::Csv(format!("duplicate row for category {category}")));
        }
        seen[category.index()] = true;
        counts[category.index()] = row[1]
            .parse::<usize>()
            .map_err(|e| EdaError::Csv(format!("bad count \"{}\": {e}", &row[1])))?;
        row[2]
            .parse::<f64>()
            .map_err(|e| EdaError::Csv(format!("bad percent \"{}\": {e}", &row[2])))?;
    }
    if let Some(missing) = DecisionCategory::ALL.iter().find(|c| !seen[c.index()]) {
        return Err(EdaError::Csv(format!("missing row for category {missing}")));
    }
    let total = counts.iter().sum();
    Ok(EnsembleStats { counts, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{
        default_inventory, generate_synthetic, parse_corpus, serialize_corpus, SchemeSpec,
        SyntheticConfig,
    };
    use crate::encoder::EmbeddingProvider;
    use crate::rng;

    fn bundle(labels: [&str; 5], confidences: [f64; 5]) -> PredictionBundle {
        PredictionBundle::new(
            AnnotatorKind::ALL
                .iter()
                .zip(labels)
                .zip(confidences)
                .map(|((kind, label), confidence)| Vote {
                    kind: *kind,
                    label: label.to_string(),
                    confidence,
                })
                .collect(),
        )
        .unwrap()
    }

    const EVEN: [f64; 5] = [0.5, 0.5, 0.5, 0.5, 0.5];

    #[test]
    fn unanimous_is_am() {
        let d = fuse(&bundle(["sd"; 5], EVEN));
        assert_eq!(d.label, "sd");
        assert_eq!(d.category, DecisionCategory::Am);
    }

    #[test]
    fn full_context_agreement_is_cm() {
        // Labels in kind order: utt-l1, utt-l2, con1, con2, con3.
        let d = fuse(&bundle(["ba", "sd", "fc", "fc", "fc"], EVEN));
        assert_eq!(d.label, "fc");
        assert_eq!(d.category, DecisionCategory::Cm);
    }

    #[test]
    fn backed_context_pair_is_cm() {
        let d = fuse(&bundle(["sd", "fa", "^q", "sd", "sd"], EVEN));
        assert_eq!(d.label, "sd");
        assert_eq!(d.category, DecisionCategory::Cm);
    }

    #[test]
    fn distinct_top_three_is_nm() {
        let d = fuse(&bundle(
            ["b", "b", "ba", "fc", "b"],
            [0.3, 0.2, 0.9, 0.8, 0.7],
        ));
        assert_eq!(d.label, XX);
        assert_eq!(d.category, DecisionCategory::Nm);
    }

    #[test]
    fn repeated_label_in_top_three_is_bm() {
        let d = fuse(&bundle(
            ["qy", "sd", "qw", "sd", "b"],
            [0.5, 0.9, 0.4, 0.85, 0.3],
        ));
        assert_eq!(d.label, "sd");
        assert_eq!(d.category, DecisionCategory::Bm);
    }

    #[test]
    fn unbacked_context_pair_falls_through_to_bm_ranking() {
        // Contexts pair on "fc" but neither utterance-level annotator backs
        // it, so CM cannot fire; ranking still finds "fc" twice up top.
        let d = fuse(&bundle(
            ["sd", "ba", "fc", "fc", "qy"],
            [0.2, 0.1, 0.9, 0.8, 0.95],
        ));
        assert_eq!(d.label, "fc");
        assert_eq!(d.category, DecisionCategory::Bm);
    }

    #[test]
    fn confidence_ties_rank_context_annotators_first() {
        // All confidences equal: the top three are con1, con2, con3 by the
        // fixed priority. Two of them share "qy", so BM picks it over the
        // utterance-level pair on "sd".
        let d = fuse(&bundle(["sd", "sd", "qy", "qy", "b"], EVEN));
        assert_eq!(d.label, "qy");
        assert_eq!(d.category, DecisionCategory::Bm);
    }

    fn random_bundle(r: &mut rand_chacha::ChaCha8Rng, labels: &[&str]) -> PredictionBundle {
        PredictionBundle::new(
            AnnotatorKind::ALL
                .iter()
                .map(|kind| Vote {
                    kind: *kind,
                    label: labels[rng::below(r, labels.len())].to_string(),
                    confidence: rng::uniform(r, 0.0, 1.0),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn fused_invariants_hold_on_random_bundles() {
        let labels = ["sd", "b", "qy", "fc"];
        let mut r = rng::seeded(2024);
        for _ in 0..2000 {
            let b = random_bundle(&mut r, &labels);
            let d = fuse(&b);
            let unanimous = b.votes().iter().all(|v| v.label == b.votes()[0].label);
            assert_eq!(d.category == DecisionCategory::Am, unanimous);
            assert_eq!(d.category == DecisionCategory::Nm, d.label == XX);
            if d.label != XX {
                let holders = b.votes().iter().filter(|v| v.label == d.label).count();
                assert!(holders >= 2, "label {} held by {} < 2", d.label, holders);
            }
        }
    }

    #[test]
    fn am_and_cm_are_invariant_under_within_group_permutations() {
        let labels = ["sd", "b", "qy"];
        let mut r = rng::seeded(77);
        let ctx_orders: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        for _ in 0..300 {
            let b = random_bundle(&mut r, &labels);
            let base = fuse(&b);
            let ctx: Vec<&Vote> = b.votes().iter().filter(|v| v.kind.uses_context()).collect();
            let non_ctx: Vec<&Vote> =
                b.votes().iter().filter(|v| !v.kind.uses_context()).collect();
            for order in ctx_orders {
                for swap_non_ctx in [false, true] {
                    let mut votes = Vec::new();
                    for (slot, &src) in order.iter().enumerate() {
                        votes.push(Vote {
                            kind: ctx[slot].kind,
                            label: ctx[src].label.clone(),
                            confidence: ctx[src].confidence,
                        });
                    }
                    let (a, z) = if swap_non_ctx { (1, 0) } else { (0, 1) };
                    votes.push(Vote {
                        kind: non_ctx[0].kind,
                        label: non_ctx[a].label.clone(),
                        confidence: non_ctx[a].confidence,
                    });
                    votes.push(Vote {
                        kind: non_ctx[1].kind,
                        label: non_ctx[z].label.clone(),
                        confidence: non_ctx[z].confidence,
                    });
                    let permuted = fuse(&PredictionBundle::new(votes).unwrap());
                    let early = |c: DecisionCategory| {
                        c == DecisionCategory::Am || c == DecisionCategory::Cm
                    };
                    assert_eq!(early(base.category), early(permuted.category));
                    if early(base.category) {
                        assert_eq!(base.category, permuted.category);
                        assert_eq!(base.label, permuted.label);
                    }
                }
            }
        }
    }

    #[test]
    fn bundle_validation_rejects_malformed_input() {
        let ok = |kind: AnnotatorKind| Vote {
            kind,
            label: "sd".into(),
            confidence: 0.5,
        };
        // Wrong count.
        assert!(matches!(
            PredictionBundle::new(vec![ok(AnnotatorKind::UttLevel1)]),
            Err(EdaError::InvalidConfig(_))
        ));
        // Duplicate kind.
        let mut votes: Vec<Vote> = AnnotatorKind::ALL.iter().map(|k| ok(*k)).collect();
        votes[1].kind = AnnotatorKind::UttLevel1;
        assert!(matches!(
            PredictionBundle::new(votes),
            Err(EdaError::InvalidConfig(_))
        ));
        // Placeholder label.
        let mut votes: Vec<Vote> = AnnotatorKind::ALL.iter().map(|k| ok(*k)).collect();
        votes[2].label = XX.into();
        assert!(matches!(
            PredictionBundle::new(votes),
            Err(EdaError::InvalidConfig(_))
        ));
        // Confidence out of range / non-finite.
        for bad in [-0.1, 1.5, f64::NAN] {
            let mut votes: Vec<Vote> = AnnotatorKind::ALL.iter().map(|k| ok(*k)).collect();
            votes[3].confidence = bad;
            assert!(matches!(
                PredictionBundle::new(votes),
                Err(EdaError::InvalidConfig(_))
            ));
        }
    }

    fn fresh_model(kind: AnnotatorKind, seed: u64) -> AnnotatorModel {
        AnnotatorModel::new(
            kind,
            &default_inventory(),
            EmbeddingProvider::pseudo(7, 6),
            5,
            seed,
        )
        .unwrap()
    }

    fn fresh_pool(seed: u64) -> AnnotatorPool {
        AnnotatorPool::new(
            AnnotatorKind::ALL
                .iter()
                .map(|k| fresh_model(*k, rng::derive_seed(seed, k.label())))
                .collect(),
        )
        .unwrap()
    }

    /// A model whose every parameter is zero except one output bias, so it
    /// predicts the same class with the same confidence for any input.
    fn constant_model(kind: AnnotatorKind, class: usize, seed: u64) -> AnnotatorModel {
        let mut model = fresh_model(kind, seed);
        for (_, tensor) in model.params.tensors_mut() {
            tensor.data.iter_mut().for_each(|v| *v = 0.0);
        }
        model.params.out.b.data[class] = 3.0;
        model
    }

    fn constant_pool(class: usize) -> AnnotatorPool {
        AnnotatorPool::new(
            AnnotatorKind::ALL
                .iter()
                .map(|k| constant_model(*k, class, 11))
                .collect(),
        )
        .unwrap()
    }

    fn synthetic(dialogues: usize, seed: u64) -> Corpus {
        generate_synthetic(&SyntheticConfig::new(3, dialogues, seed), &default_inventory())
            .unwrap()
    }

    #[test]
    fn pool_rejects_duplicates_wrong_counts_and_mixed_inventories() {
        assert!(matches!(
            AnnotatorPool::new(vec![fresh_model(AnnotatorKind::Context1, 1)]),
            Err(EdaError::InvalidConfig(_))
        ));
        let mut models: Vec<AnnotatorModel> =
            AnnotatorKind::ALL.iter().map(|k| fresh_model(*k, 1)).collect();
        models[0] = fresh_model(AnnotatorKind::UttLevel2, 9);
        assert!(matches!(
            AnnotatorPool::new(models),
            Err(EdaError::InvalidConfig(_))
        ));

        let tag = |code: &str, name: &str| crate::corpus::DialogueActTag {
            code: code.into(),
            name: name.into(),
        };
        let other_inventory = TagInventory::new(vec![
            tag("aa", "Alpha"),
            tag("bb", "Beta"),
            tag(XX, "Non-determinable"),
        ])
        .unwrap();
        let mut models: Vec<AnnotatorModel> =
            AnnotatorKind::ALL.iter().map(|k| fresh_model(*k, 1)).collect();
        models[4] = AnnotatorModel::new(
            AnnotatorKind::Context3,
            &other_inventory,
            EmbeddingProvider::pseudo(7, 6),
            5,
            1,
        )
        .unwrap();
        assert!(matches!(
            AnnotatorPool::new(models),
            Err(EdaError::InventoryMismatch(_))
        ));
    }

    #[test]
    fn pool_stores_models_in_canonical_order() {
        let mut models: Vec<AnnotatorModel> =
            AnnotatorKind::ALL.iter().map(|k| fresh_model(*k, 3)).collect();
        models.reverse();
        let pool = AnnotatorPool::new(models).unwrap();
        for (i, kind) in AnnotatorKind::ALL.iter().enumerate() {
            assert_eq!(pool.models()[i].kind(), *kind);
        }
    }

    #[test]
    fn predict_bundle_holds_one_vote_per_kind() {
        let pool = fresh_pool(5);
        let corpus = synthetic(2, 40);
        let bundle = pool.predict_bundle(&corpus.dialogues[0], 1).unwrap();
        for (i, kind) in AnnotatorKind::ALL.iter().enumerate() {
            assert_eq!(bundle.votes()[i].kind, *kind);
        }
    }

    #[test]
    fn identical_constant_annotators_yield_all_am() {
        let pool = constant_pool(2);
        let corpus = synthetic(4, 77);
        let (annotated, stats) = annotate_corpus(&pool, &corpus).unwrap();
        assert_eq!(stats.count(DecisionCategory::Am), corpus.num_utterances());
        assert_eq!(stats.total(), corpus.num_utterances());
        let expected = default_inventory().class_code(2).to_string();
        for (_, ann) in annotated.iter() {
            assert_eq!(ann.label, expected);
            assert_eq!(ann.category, DecisionCategory::Am);
        }
        assert!((stats.percent(DecisionCategory::Am) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn empty_corpus_annotates_to_empty_stats() {
        let pool = fresh_pool(6);
        let corpus = Corpus {
            dialogues: Vec::new(),
            scheme: SchemeSpec::none(),
        };
        let (annotated, stats) = annotate_corpus(&pool, &corpus).unwrap();
        assert_eq!(annotated.num_utterances(), 0);
        assert_eq!(stats.total(), 0);
        for c in DecisionCategory::ALL {
            assert_eq!(stats.percent(c), 0.0);
        }
    }

    #[test]
    fn stats_partition_the_corpus_and_percentages_sum_to_100() {
        let pool = fresh_pool(8);
        let corpus = synthetic(20, 123);
        let (_, stats) = annotate_corpus(&pool, &corpus).unwrap();
        let count_sum: usize = DecisionCategory::ALL.iter().map(|c| stats.count(*c)).sum();
        assert_eq!(count_sum, corpus.num_utterances());
        let percent_sum: f64 = DecisionCategory::ALL.iter().map(|c| stats.percent(*c)).sum();
        assert!((percent_sum - 100.0).abs() < 0.01, "sum {percent_sum}");
    }

    #[test]
    fn annotation_is_deterministic_across_runs() {
        let pool = fresh_pool(9);
        let corpus = synthetic(12, 321);
        let (a1, s1) = annotate_corpus(&pool, &corpus).unwrap();
        let (a2, s2) = annotate_corpus(&pool, &corpus).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn gold_labels_outside_the_pool_inventory_are_rejected() {
        let pool = fresh_pool(10);
        let mut corpus = synthetic(2, 5);
        corpus.dialogues[0].utterances[0].gold_da = Some("zz".into());
        assert!(matches!(
            annotate_corpus(&pool, &corpus),
            Err(EdaError::InventoryMismatch(_))
        ));
    }

    /// Annotated corpus with hand-chosen fused labels over a tiny corpus.
    fn hand_annotated(fused: &[(&str, DecisionCategory)]) -> AnnotatedCorpus {
        let corpus = synthetic(1, 60);
        let utts = corpus.num_utterances();
        assert!(fused.len() >= utts, "need {utts} fused labels");
        let annotations = vec![corpus.dialogues[0]
            .utterances
            .iter()
            .enumerate()
            .map(|(i, _)| Annotation {
                label: fused[i].0.to_string(),
                category: fused[i].1,
                votes: None,
            })
            .collect()];
        AnnotatedCorpus {
            corpus,
            annotations,
        }
    }

    #[test]
    fn perfect_constant_corpus_scores_accuracy_one() {
        let pool = constant_pool(0);
        let mut corpus = synthetic(3, 15);
        let code = default_inventory().class_code(0).to_string();
        for d in &mut corpus.dialogues {
            for u in &mut d.utterances {
                u.gold_da = Some(code.clone());
            }
        }
        let (annotated, _) = annotate_corpus(&pool, &corpus).unwrap();
        let acc = ensemble_accuracy(&annotated, true).unwrap();
        assert_eq!(acc.accuracy, 1.0);
        assert_eq!(acc.compared, corpus.num_utterances());
        assert_eq!(acc.excluded_xx, 0);
    }

    #[test]
    fn all_nm_scores_zero_with_flag_and_excludes_without() {
        let corpus = synthetic(1, 60);
        let n = corpus.num_utterances();
        let annotated = hand_annotated(&vec![(XX, DecisionCategory::Nm); n]);
        let strict = ensemble_accuracy(&annotated, true).unwrap();
        assert_eq!(strict.accuracy, 0.0);
        assert_eq!(strict.compared, n);
        assert_eq!(strict.excluded_xx, 0);
        let lenient = ensemble_accuracy(&annotated, false).unwrap();
        assert_eq!(lenient.accuracy, 0.0);
        assert_eq!(lenient.compared, 0);
        assert_eq!(lenient.excluded_xx, n);
    }

    #[test]
    fn accuracy_requires_gold_labels() {
        let mut annotated = hand_annotated(&[("sd", DecisionCategory::Am); 12]);
        for d in &mut annotated.corpus.dialogues {
            for u in &mut d.utterances {
                u.gold_da = None;
            }
        }
        assert!(matches!(
            ensemble_accuracy(&annotated, true),
            Err(EdaError::EmptyCorpus)
        ));
    }

    #[test]
    fn gold_placeholder_utterances_are_skipped_in_accuracy() {
        let mut annotated = hand_annotated(&[("sd", DecisionCategory::Am); 12]);
        let n = annotated.num_utterances();
        {
            let utts = &mut annotated.corpus.dialogues[0].utterances;
            utts[0].gold_da = Some(XX.into());
            for u in utts.iter_mut().skip(1) {
                u.gold_da = Some("sd".into());
            }
        }
        let acc = ensemble_accuracy(&annotated, true).unwrap();
        assert_eq!(acc.compared, n - 1);
        assert_eq!(acc.accuracy, 1.0);
    }

    #[test]
    fn annotated_jsonl_round_trips() {
        let pool = fresh_pool(14);
        let mut config = SyntheticConfig::new(3, 6, 99);
        config.emotion_scheme = Some(crate::corpus::EmotionScheme::Meld);
        let inventory = default_inventory();
        let corpus = generate_synthetic(&config, &inventory).unwrap();
        let (annotated, _) = annotate_corpus(&pool, &corpus).unwrap();

        let bytes = serialize_annotated(&annotated);
        let back = parse_annotated(&bytes, corpus.scheme, &inventory).unwrap();
        assert_eq!(back.corpus, annotated.corpus);
        for ((_, a), (_, b)) in annotated.iter().zip(back.iter()) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.category, b.category);
            assert_eq!(b.votes, None);
        }
        // Second generation is byte-stable.
        assert_eq!(bytes, serialize_annotated(&annotated));
    }

    #[test]
    fn parse_annotated_rejects_bad_category_and_inconsistency() {
        let inventory = default_inventory();
        let line_of = |eda: &str, cat: &str| {
            format!(
                "{{\"dialogue_id\":\"d0\",\"turn_index\":0,\"speaker\":\"A\",\"text\":\"Hi\",\"eda\":\"{eda}\",\"eda_category\":\"{cat}\"}}\n"
            )
        };
        assert!(matches!(
            parse_annotated(line_of("sd", "ZZ").as_bytes(), SchemeSpec::none(), &inventory),
            Err(EdaError::MalformedLine { line: 1, .. })
        ));
        assert!(matches!(
            parse_annotated(line_of("sd", "NM").as_bytes(), SchemeSpec::none(), &inventory),
            Err(EdaError::MalformedLine { line: 1, .. })
        ));
        assert!(matches!(
            parse_annotated(line_of(XX, "AM").as_bytes(), SchemeSpec::none(), &inventory),
            Err(EdaError::MalformedLine { line: 1, .. })
        ));
        assert!(matches!(
            parse_annotated(line_of("zz", "AM").as_bytes(), SchemeSpec::none(), &inventory),
            Err(EdaError::UnknownTag { line: 1, .. })
        ));
    }

    #[test]
    fn annotated_jsonl_extends_the_plain_corpus_format() {
        let pool = fresh_pool(21);
        let corpus = synthetic(3, 42);
        let (annotated, _) = annotate_corpus(&pool, &corpus).unwrap();
        let bytes = serialize_annotated(&annotated);
        // Dropping the two ensemble fields must give back the plain corpus.
        let plain: Vec<u8> = String::from_utf8(bytes)
            .unwrap()
            .lines()
            .map(|line| {
                let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
                let obj = v.as_object_mut().unwrap();
                obj.remove("eda");
                obj.remove("eda_category");
                serde_json::to_string(&v).unwrap() + "\n"
            })
            .collect::<String>()
            .into_bytes();
        let reparsed = parse_corpus(&plain, corpus.scheme, &default_inventory()).unwrap();
        assert_eq!(reparsed, corpus);
        assert_eq!(serialize_corpus(&reparsed), serialize_corpus(&corpus));
    }

    #[test]
    fn predictions_sidecar_round_trips() {
        let pool = fresh_pool(17);
        let corpus = synthetic(4, 33);
        let inventory = default_inventory();
        let (annotated, _) = annotate_corpus(&pool, &corpus).unwrap();
        let bytes = serialize_predictions(&annotated).unwrap();
        let records = parse_predictions(&bytes, &inventory).unwrap();
        assert_eq!(records.len(), corpus.num_utterances());
        for ((utt, ann), rec) in annotated.iter().zip(&records) {
            assert_eq!(rec.dialogue_id, utt.dialogue_id);
            assert_eq!(rec.turn_index, utt.turn_index);
            let bundle = ann.votes.as_ref().unwrap();
            assert_eq!(rec.labels, bundle.labels());
            assert_eq!(rec.confidences, bundle.confidences());
        }
    }

    #[test]
    fn sidecar_requires_votes_and_validates_on_parse() {
        let annotated = hand_annotated(&[("sd", DecisionCategory::Am); 12]);
        assert!(matches!(
            serialize_predictions(&annotated),
            Err(EdaError::InvalidConfig(_))
        ));

        let inventory = default_inventory();
        let bad_len =
            br#"{"dialogue_id":"d0","turn_index":0,"labels":["sd"],"confidences":[0.5]}"#;
        assert!(matches!(
            parse_predictions(bad_len, &inventory),
            Err(EdaError::MalformedLine { line: 1, .. })
        ));
        let bad_label = format!(
            "{{\"dialogue_id\":\"d0\",\"turn_index\":0,\"labels\":[\"sd\",\"sd\",\"sd\",\"sd\",\"{XX}\"],\"confidences\":[0.5,0.5,0.5,0.5,0.5]}}\n"
        );
        assert!(matches!(
            parse_predictions(bad_label.as_bytes(), &inventory),
            Err(EdaError::UnknownTag { line: 1, .. })
        ));
        let bad_conf = br#"{"dialogue_id":"d0","turn_index":0,"labels":["sd","sd","sd","sd","sd"],"confidences":[0.5,0.5,0.5,0.5,1.5]}"#;
        assert!(matches!(
            parse_predictions(bad_conf, &inventory),
            Err(EdaError::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn attach_predictions_restores_votes_and_verifies_consistency() {
        let pool = fresh_pool(23);
        let corpus = synthetic(5, 88);
        let inventory = default_inventory();
        let (annotated, _) = annotate_corpus(&pool, &corpus).unwrap();
        let annotated_bytes = serialize_annotated(&annotated);
        let sidecar_bytes = serialize_predictions(&annotated).unwrap();

        let mut reread = parse_annotated(&annotated_bytes, corpus.scheme, &inventory).unwrap();
        let records = parse_predictions(&sidecar_bytes, &inventory).unwrap();
        attach_predictions(&mut reread, &records).unwrap();
        assert_eq!(reread, annotated);

        // One record too few.
        let mut reread = parse_annotated(&annotated_bytes, corpus.scheme, &inventory).unwrap();
        assert!(matches!(
            attach_predictions(&mut reread, &records[1..]),
            Err(EdaError::InvalidConfig(_))
        ));
        // A record for an utterance that does not exist.
        let mut extra = records.clone();
        extra.push(PredictionRecord {
            dialogue_id: "ghost".into(),
            turn_index: 0,
            labels: records[0].labels.clone(),
            confidences: records[0].confidences.clone(),
        });
        let mut reread = parse_annotated(&annotated_bytes, corpus.scheme, &inventory).unwrap();
        assert!(matches!(
            attach_predictions(&mut reread, &extra),
            Err(EdaError::InvalidConfig(_))
        ));
        // A fused label the sidecar's votes cannot reproduce.
        let mut reread = parse_annotated(&annotated_bytes, corpus.scheme, &inventory).unwrap();
        let original = reread.annotations[0][0].label.clone();
        let other = if original == "qh" { "ft" } else { "qh" };
        reread.annotations[0][0].label = other.into();
        assert!(matches!(
            attach_predictions(&mut reread, &records),
            Err(EdaError::InvalidConfig(_))
        ));
    }

    #[test]
    fn stats_csv_round_trips() {
        let stats = EnsembleStats::from_categories([
            DecisionCategory::Am,
            DecisionCategory::Am,
            DecisionCategory::Cm,
            DecisionCategory::Bm,
            DecisionCategory::Nm,
            DecisionCategory::Am,
        ]);
        let bytes = emit_stats_csv(&stats);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("category,count,percent\n"));
        assert_eq!(text.lines().count(), 5);
        let back = parse_stats_csv(&bytes).unwrap();
        assert_eq!(back, stats);

        let empty = EnsembleStats::from_categories([]);
        let back = parse_stats_csv(&emit_stats_csv(&empty)).unwrap();
        assert_eq!(back, empty);
        assert_eq!(back.total(), 0);
    }

    #[test]
    fn stats_csv_parse_rejects_malformed_input() {
        assert!(matches!(
            parse_stats_csv(b"nope,count,percent\nAM,1,100\n"),
            Err(EdaError::Csv(_))
        ));
        assert!(matches!(
            parse_stats_csv(b"category,count,percent\nZZ,1,100\n"),
            Err(EdaError::Csv(_))
        ));
        assert!(matches!(
            parse_stats_csv(b"category,count,percent\nAM,1,50\nAM,1,50\n"),
            Err(EdaError::Csv(_))
        ));
        assert!(matches!(
            parse_stats_csv(b"category,count,percent\nAM,1,100\n"),
            Err(EdaError::Csv(_))
        ));
        assert!(matches!(
            parse_stats_csv(b"category,count,percent\nAM,x,100\nCM,0,0\nBM,0,0\nNM,0,0\n"),
            Err(EdaError::Csv(_))
        ));
    }
}
