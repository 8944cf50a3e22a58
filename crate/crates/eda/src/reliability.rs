//! Inter-annotator agreement metrics over aligned label sequences:
//! Krippendorff's α (nominal level, coincidence-matrix formulation),
//! Fleiss' κ, and Spearman rank correlation, plus a corpus-level report.
//!
//! All three metrics treat labels nominally except Spearman, which needs a
//! numeric coding: labels are coded by their canonical inventory index, so
//! reported correlations depend on the inventory order (documented on
//! [`spearman`]).
//!
//! Degenerate inputs (a single label everywhere) leave α and κ without a
//! defined chance term; both are reported as `1.0` with a `degenerate`
//! flag rather than an error, so pipelines survive unanimous corpora.
//! A zero-variance Spearman input likewise comes back as a flagged
//! not-a-value instead of a crash.

use crate::annotators::AnnotatorKind;
use crate::corpus::TagInventory;
use crate::error::{EdaError, Result};

/// A metric value plus a flag marking degenerate input (e.g. a chance term
/// that removes the denominator). Flagged α/κ values are `1.0`; a flagged
/// Spearman value is a not-a-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub value: f64,
    pub degenerate: bool,
}

impl MetricValue {
    fn of(value: f64) -> Self {
        MetricValue {
            value,
            degenerate: false,
        }
    }

    fn degenerate(value: f64) -> Self {
        MetricValue {
            value,
            degenerate: true,
        }
    }
}

/// N items × R raters of label indices into one inventory; no missing
/// cells, R ≥ 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    rows: Vec<Vec<usize>>,
    raters: usize,
    num_labels: usize,
}

impl LabelMatrix {
    /// Build from item-major rows of label indices in `0..num_labels`.
    pub fn new(rows: Vec<Vec<usize>>, num_labels: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(EdaError::EmptyInput("label matrix"));
        }
        let raters = rows[0].len();
        if raters < 2 {
            return Err(EdaError::InvalidConfig(format!(
                "agreement needs at least 2 raters, got {raters}"
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != raters {
                return Err(EdaError::DimensionMismatch {
                    context: format!("label matrix row {i}"),
                    expected: raters,
                    found: row.len(),
                });
            }
            for &label in row {
                if label >= num_labels {
                    return Err(EdaError::IndexOutOfRange {
                        index: label,
                        len: num_labels,
                    });
                }
            }
        }
        Ok(LabelMatrix {
            rows,
            raters,
            num_labels,
        })
    }

    /// Build from rater-major code sequences (one sequence per rater, all
    /// the same length), coded by canonical inventory index.
    pub fn from_codes(sequences: &[Vec<String>], inventory: &TagInventory) -> Result<Self> {
        if sequences.len() < 2 {
            return Err(EdaError::InvalidConfig(format!(
                "agreement needs at least 2 raters, got {}",
                sequences.len()
            )));
        }
        let items = sequences[0].len();
        for (r, seq) in sequences.iter().enumerate() {
            if seq.len() != items {
                return Err(EdaError::DimensionMismatch {
                    context: format!("rater {r} sequence"),
                    expected: items,
                    found: seq.len(),
                });
            }
        }
        if items == 0 {
            return Err(EdaError::EmptyInput("label matrix"));
        }
        let mut rows = vec![Vec::with_capacity(sequences.len()); items];
        for seq in sequences {
            for (i, code) in seq.iter().enumerate() {
                let index = inventory.index(code).ok_or_else(|| EdaError::UnknownTag {
                    code: code.clone(),
                    line: i + 1,
                })?;
                rows[i].push(index);
            }
        }
        LabelMatrix::new(rows, inventory.len())
    }

    pub fn num_items(&self) -> usize {
        self.rows.len()
    }

    pub fn num_raters(&self) -> usize {
        self.raters
    }

    /// Item-major rows of label indices.
    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    /// Label counts per item, one `num_labels`-wide histogram per row.
    fn histograms(&self) -> Vec<Vec<usize>> {
        self.rows
            .iter()
            .map(|row| {
                let mut counts = vec![0usize; self.num_labels];
                for &label in row {
                    counts[label] += 1;
                }
                counts
            })
            .collect()
    }
}

/// Krippendorff's α at the nominal level via the coincidence matrix:
/// `α = 1 − D_o/D_e` with observed disagreement `D_o` and expected
/// disagreement `D_e`. Perfect agreement gives 1.
///
/// When every cell holds the same label, `D_e = 0` and α has no defined
/// value; the result is `1.0` with the `degenerate` flag set.
pub fn krippendorff_alpha(matrix: &LabelMatrix) -> MetricValue {
    let m = matrix.num_raters() as f64;
    let mut marginals = vec![0.0f64; matrix.num_labels];
    let mut disagreeing_pairs = 0.0f64; // Σ_{c≠k} o_ck
    for counts in matrix.histograms() {
        let mut same = 0.0f64;
        for (label, &count) in counts.iter().enumerate() {
            let c = count as f64;
            marginals[label] += c;
            same += c * (c - 1.0);
        }
        disagreeing_pairs += (m * (m - 1.0) - same) / (m - 1.0);
    }
    let n: f64 = marginals.iter().sum();
    let sum_sq: f64 = marginals.iter().map(|&c| c * c).sum();
    let expected_pairs = n * n - sum_sq; // Σ_{c≠k} n_c n_k
    if expected_pairs == 0.0 {
        return MetricValue::degenerate(1.0);
    }
    // D_o/D_e = (Σo_ck/n) / (Σn_c n_k / (n(n−1))).
    MetricValue::of(1.0 - disagreeing_pairs * (n - 1.0) / expected_pairs)
}

/// Fleiss' κ: `(P̄ − P̄_e)/(1 − P̄_e)`, with per-item agreement
/// `P_i = (Σ_j n_ij² − R)/(R(R−1))`.
///
/// When a single label fills the whole matrix, `P̄_e = 1` and the
/// denominator vanishes; the result is `1.0` with the `degenerate` flag.
pub fn fleiss_kappa(matrix: &LabelMatrix) -> MetricValue {
    let r = matrix.num_raters() as f64;
    let n_items = matrix.num_items() as f64;
    let mut p_bar = 0.0f64;
    let mut label_totals = vec![0.0f64; matrix.num_labels];
    for counts in matrix.histograms() {
        let mut sq = 0.0f64;
        for (label, &count) in counts.iter().enumerate() {
            let c = count as f64;
            label_totals[label] += c;
            sq += c * c;
        }
        p_bar += (sq - r) / (r * (r - 1.0));
    }
    p_bar /= n_items;
    let total = n_items * r;
    let p_e: f64 = label_totals.iter().map(|&c| (c / total) * (c / total)).sum();
    if 1.0 - p_e == 0.0 {
        return MetricValue::degenerate(1.0);
    }
    MetricValue::of((p_bar - p_e) / (1.0 - p_e))
}

/// Spearman rank correlation between two label sequences.
///
/// Labels are integer-coded by canonical inventory index — the one
/// ordering everything in this crate agrees on — so the value depends on
/// that order; ties get average ranks, then the ranks are Pearson-
/// correlated. A constant sequence has zero rank variance and no defined
/// correlation: the result is a not-a-value with the `degenerate` flag.
pub fn spearman(
    seq_a: &[String],
    seq_b: &[String],
    inventory: &TagInventory,
) -> Result<MetricValue> {
    let code = |seq: &[String]| -> Result<Vec<usize>> {
        seq.iter()
            .enumerate()
            .map(|(i, code)| {
                inventory.index(code).ok_or_else(|| EdaError::UnknownTag {
                    code: code.clone(),
                    line: i + 1,
                })
            })
            .collect()
    };
    spearman_coded(&code(seq_a)?, &code(seq_b)?)
}

/// [`spearman`] over already-coded sequences.
pub fn spearman_coded(seq_a: &[usize], seq_b: &[usize]) -> Result<MetricValue> {
    if seq_a.len() != seq_b.len() {
        return Err(EdaError::DimensionMismatch {
            context: "spearman sequences".into(),
            expected: seq_a.len(),
            found: seq_b.len(),
        });
    }
    if seq_a.is_empty() {
        return Err(EdaError::EmptyInput("spearman sequence"));
    }
    let constant = |s: &[usize]| s.iter().all(|&v| v == s[0]);
    if constant(seq_a) || constant(seq_b) {
        return Ok(MetricValue::degenerate(f64::NAN));
    }
    let ra = average_ranks(seq_a);
    let rb = average_ranks(seq_b);
    let n = ra.len() as f64;
    let mean_a: f64 = ra.iter().sum::<f64>() / n;
    let mean_b: f64 = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0f64;
    let mut var_a = 0.0f64;
    let mut var_b = 0.0f64;
    for (&x, &y) in ra.iter().zip(&rb) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    Ok(MetricValue::of(cov / (var_a.sqrt() * var_b.sqrt())))
}

/// 1-based ranks with ties averaged.
fn average_ranks(values: &[usize]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by_key(|&i| values[i]);
    let mut ranks = vec![0.0f64; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        // Positions start..=end share the average of ranks start+1..=end+1.
        let average = (start + 1 + end + 1) as f64 / 2.0;
        for &i in &order[start..=end] {
            ranks[i] = average;
        }
        start = end + 1;
    }
    ranks
}

/// Corpus-level agreement over the five annotators' label sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityReport {
    /// Krippendorff's α over all five raters.
    pub alpha: MetricValue,
    /// Fleiss' κ over all five raters.
    pub kappa: MetricValue,
    /// Spearman correlation between the Context1 and Context2 sequences.
    pub spearman_context: MetricValue,
}

/// Assemble the [`ReliabilityReport`] from the five annotators' label
/// sequences, given in canonical kind order and aligned by utterance.
pub fn reliability_report(
    sequences: &[Vec<String>],
    inventory: &TagInventory,
) -> Result<ReliabilityReport> {
    if sequences.len() != AnnotatorKind::ALL.len() {
        return Err(EdaError::InvalidConfig(format!(
            "a reliability report needs {} sequences (one per annotator), got {}",
            AnnotatorKind::ALL.len(),
            sequences.len()
        )));
    }
    let matrix = LabelMatrix::from_codes(sequences, inventory)?;
    let scc = spearman(
        &sequences[AnnotatorKind::Context1.index()],
        &sequences[AnnotatorKind::Context2.index()],
        inventory,
    )?;
    Ok(ReliabilityReport {
        alpha: krippendorff_alpha(&matrix),
        kappa: fleiss_kappa(&matrix),
        spearman_context: scc,
    })
}

/// All pairwise Spearman correlations between raters' sequences
/// (symmetric, with the self-correlations on the diagonal).
pub fn spearman_pairwise(
    sequences: &[Vec<String>],
    inventory: &TagInventory,
) -> Result<Vec<Vec<MetricValue>>> {
    if sequences.len() < 2 {
        return Err(EdaError::InvalidConfig(format!(
            "pairwise correlation needs at least 2 raters, got {}",
            sequences.len()
        )));
    }
    let n = sequences.len();
    let mut matrix = vec![vec![MetricValue::of(0.0); n]; n];
    for a in 0..n {
        for b in a..n {
            let value = spearman(&sequences[a], &sequences[b], inventory)?;
            matrix[a][b] = value;
            matrix[b][a] = value;
        }
    }
    Ok(matrix)
}

const REPORT_HEADER: [&str; 3] = ["metric", "value", "degenerate_flag"];
const REPORT_METRICS: [&str; 3] = ["alpha", "kappa", "scc"];

fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        v.to_string()
    }
}

/// Reliability report as CSV: `metric,value,degenerate_flag` with rows
/// `alpha`, `kappa`, `scc`. Undefined values print as `nan`.
pub fn emit_report_csv(report: &ReliabilityReport) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_HEADER).expect("write to memory");
    for (name, metric) in REPORT_METRICS.iter().zip([
        report.alpha,
        report.kappa,
        report.spearman_context,
    ]) {
        w.write_record([
            name.to_string(),
            format_value(metric.value),
            metric.degenerate.to_string(),
        ])
        .expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

/// Parse a reliability-report CSV produced by [`emit_report_csv`].
pub fn parse_report_csv(bytes: &[u8]) -> Result<ReliabilityReport> {
    let mut reader = csv::ReaderBuilder::new().from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| EdaError::Csv(e.to_string()))?
        .clone();
    if header != REPORT_HEADER.to_vec() {
        return Err(EdaError::Csv(format!(
            "expected header {:?}, got {:?}",
            REPORT_HEADER.join(","),
            header
        )));
    }
    let mut values: [Option<MetricValue>; 3] = [None; 3];
    for row in reader.records() {
        let row = row.map_err(|e| EdaError::Csv(e.to_string()))?;
        if row.len() != 3 {
            return Err(EdaError::Csv(format!("expected 3 fields, got {}", row.len())));
        }
        let slot = REPORT_METRICS
            .iter()
            .position(|m| *m == &row[0])
            .ok_or_else(|| EdaError::Csv(format!("unknown metric \"{}\"", &row[0])))?;
        if values[slot].is_some() {
            return Err(EdaError::Csv(format!("duplicate metric \"{}\"", &row[0])));
        }
        let value = if &row[1] == "nan" {
            f64::NAN
        } else {
            row[1]
                .parse::<f64>()
                .map_err(|e| EdaError::Csv(format!("bad value \"{}\": {e}", &row[1])))?
        };
        let degenerate = match &row[2] {
            "true" => true,
            "false" => false,
            other => {
                return Err(EdaError::Csv(format!("bad degenerate flag \"{other}\"")));
            }
        };
        values[slot] = Some(MetricValue { value, degenerate });
    }
    match values {
        [Some(alpha), Some(kappa), Some(spearman_context)] => Ok(ReliabilityReport {
            alpha,
            kappa,
            spearman_context,
        }),
        _ => {
            let missing = REPORT_METRICS
                .iter()
                .zip(&values)
                .find(|(_, v)| v.is_none())
                .map(|(m, _)| *m)
                .unwrap_or("?");
            Err(EdaError::Csv(format!("missing metric \"{missing}\"")))
        }
    }
}
