//! Analytics over an annotated corpus: dialogue-act × emotion (or
//! sentiment) co-occurrence, per-act distribution tables, and case-study
//! extraction, with CSV and SVG grouped-bar-chart emission.
//!
//! Co-occurrence rows cover the full tag inventory (including the
//! non-determinable placeholder) so charts align across corpora;
//! all-zero rows are flagged, never dropped or turned into NaNs.

use serde::{Deserialize, Serialize};

use crate::annotators::AnnotatorKind;
use crate::corpus::{Sentiment, TagInventory, Utterance, PAD_MARKER};
use crate::ensemble::{AnnotatedCorpus, Annotation, DecisionCategory};
use crate::error::{EdaError, Result};

/// Which per-utterance label the co-occurrence analysis pairs with the
/// fused dialogue act.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisAxis {
    Emotion,
    Sentiment,
}

impl AnalysisAxis {
    pub fn label(self) -> &'static str {
        match self {
            AnalysisAxis::Emotion => "emotion",
            AnalysisAxis::Sentiment => "sentiment",
        }
    }

    pub fn parse(s: &str) -> Option<AnalysisAxis> {
        match s {
            "emotion" => Some(AnalysisAxis::Emotion),
            "sentiment" => Some(AnalysisAxis::Sentiment),
            _ => None,
        }
    }
}

impl std::fmt::Display for AnalysisAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Dialogue-act × axis-label counts plus the row-normalized matrix.
///
/// Rows are every tag of the inventory in canonical order (including the
/// placeholder); columns are the axis codes the corpus scheme declares.
/// Only utterances that carry the axis label are counted.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceMatrix {
    axis: AnalysisAxis,
    da_codes: Vec<String>,
    axis_codes: Vec<String>,
    counts: Vec<Vec<usize>>,
    normalized: Vec<Vec<f64>>,
}

impl CooccurrenceMatrix {
    pub fn axis(&self) -> AnalysisAxis {
        self.axis
    }

    pub fn da_codes(&self) -> &[String] {
        &self.da_codes
    }

    pub fn axis_codes(&self) -> &[String] {
        &self.axis_codes
    }

    /// Row-major counts, `da_codes × axis_codes`.
    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    /// Row-stochastic matrix; all-zero rows stay all-zero (see
    /// [`CooccurrenceMatrix::is_zero_row`]).
    pub fn normalized(&self) -> &[Vec<f64>] {
        &self.normalized
    }

    pub fn row_total(&self, row: usize) -> usize {
        self.counts[row].iter().sum()
    }

    /// True when no counted utterance carried this dialogue act. Flagged
    /// rather than dropped so charts align across corpora.
    pub fn is_zero_row(&self, row: usize) -> bool {
        self.row_total(row) == 0
    }

    /// Total count over all cells = number of axis-labelled utterances.
    pub fn total(&self) -> usize {
        (0..self.da_codes.len()).map(|r| self.row_total(r)).sum()
    }
}

/// Cross-tabulate fused dialogue acts against emotion or sentiment labels.
///
/// Errors if the corpus scheme does not declare the chosen axis.
/// Utterances without the axis label are skipped (the label is optional
/// per utterance even when the scheme declares it).
pub fn cooccurrence(
    annotated: &AnnotatedCorpus,
    axis: AnalysisAxis,
    inventory: &TagInventory,
) -> Result<CooccurrenceMatrix> {
    let axis_codes: Vec<String> = match axis {
        AnalysisAxis::Emotion => match annotated.corpus.scheme.emotion {
            Some(scheme) => scheme.emotions().iter().map(|e| e.code().to_string()).collect(),
            None => {
                return Err(EdaError::AxisUnavailable {
                    axis: axis.label().into(),
                })
            }
        },
        AnalysisAxis::Sentiment => {
            if !annotated.corpus.scheme.sentiment {
                return Err(EdaError::AxisUnavailable {
                    axis: axis.label().into(),
                });
            }
            Sentiment::ALL.iter().map(|s| s.code().to_string()).collect()
        }
    };
    let da_codes: Vec<String> = inventory.tags().iter().map(|t| t.code.clone()).collect();
    let mut counts = vec![vec![0usize; axis_codes.len()]; da_codes.len()];
    for (utt, ann) in annotated.iter() {
        let col = match axis {
            AnalysisAxis::Emotion => utt.emotion.map(|e| e.code()),
            AnalysisAxis::Sentiment => utt.sentiment.map(|s| s.code()),
        };
        let Some(col_code) = col else { continue };
        let row = inventory.index(&ann.label).ok_or_else(|| {
            EdaError::InventoryMismatch(format!(
                "fused label \"{}\" is not in the inventory",
                ann.label
            ))
        })?;
        let col = axis_codes
            .iter()
            .position(|c| c == col_code)
            .expect("scheme-validated label is in the axis code list");
        counts[row][col] += 1;
    }
    let normalized = counts
        .iter()
        .map(|row| {
            let total: usize = row.iter().sum();
            if total == 0 {
                vec![0.0; row.len()]
            } else {
                row.iter().map(|&c| c as f64 / total as f64).collect()
            }
        })
        .collect();
    Ok(CooccurrenceMatrix {
        axis,
        da_codes,
        axis_codes,
        counts,
        normalized,
    })
}

/// Per-dialogue-act utterance counts over the full inventory (placeholder
/// included), with percentages of the total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DADistribution {
    da_codes: Vec<String>,
    counts: Vec<usize>,
    total: usize,
}

impl DADistribution {
    pub fn da_codes(&self) -> &[String] {
        &self.da_codes
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Share of row `i` in percent of all utterances.
    pub fn percent(&self, i: usize) -> f64 {
        self.counts[i] as f64 * 100.0 / self.total as f64
    }
}

/// Count fused labels per tag code. Errors on an empty corpus.
pub fn da_distribution(
    annotated: &AnnotatedCorpus,
    inventory: &TagInventory,
) -> Result<DADistribution> {
    let da_codes: Vec<String> = inventory.tags().iter().map(|t| t.code.clone()).collect();
    let mut counts = vec![0usize; da_codes.len()];
    let mut total = 0usize;
    for (_, ann) in annotated.iter() {
        let row = inventory.index(&ann.label).ok_or_else(|| {
            EdaError::InventoryMismatch(format!(
                "fused label \"{}\" is not in the inventory",
                ann.label
            ))
        })?;
        counts[row] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(EdaError::EmptyCorpus);
    }
    Ok(DADistribution {
        da_codes,
        counts,
        total,
    })
}

/// Which utterances a case table should contain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaseFilter {
    /// All utterances fused with this decision category.
    Category(DecisionCategory),
    /// Utterances whose gold label is `expected` but whose fused label is
    /// `fused` — i.e. a specific confusion.
    Confusion { expected: String, fused: String },
}

impl CaseFilter {
    /// Parse `category:<AM|CM|BM|NM>` or `confusion:<gold>><fused>`
    /// (e.g. `confusion:sd>fc`).
    pub fn parse(s: &str) -> Result<CaseFilter> {
        if let Some(code) = s.strip_prefix("category:") {
            let category = DecisionCategory::parse(code)
                .ok_or_else(|| EdaError::UnknownFilter(s.to_string()))?;
            return Ok(CaseFilter::Category(category));
        }
        if let Some(pattern) = s.strip_prefix("confusion:") {
            if let Some((expected, fused)) = pattern.split_once('>') {
                if !expected.is_empty() && !fused.is_empty() {
                    return Ok(CaseFilter::Confusion {
                        expected: expected.to_string(),
                        fused: fused.to_string(),
                    });
                }
            }
        }
        Err(EdaError::UnknownFilter(s.to_string()))
    }

    fn matches(&self, utt: &Utterance, ann: &Annotation) -> bool {
        match self {
            CaseFilter::Category(category) => ann.category == *category,
            CaseFilter::Confusion { expected, fused } => {
                utt.gold_da.as_deref() == Some(expected.as_str()) && ann.label == *fused
            }
        }
    }
}

impl std::fmt::Display for CaseFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CaseFilter::Category(c) => write!(f, "category:{c}"),
            CaseFilter::Confusion { expected, fused } => {
                write!(f, "confusion:{expected}>{fused}")
            }
        }
    }
}

/// One row of a case table: the utterance, its per-annotator labels, the
/// fused outcome, and the previous utterance's fused dialogue act.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseRow {
    pub dialogue_id: String,
    pub turn_index: usize,
    pub text: String,
    /// Emotion code, when the utterance has one.
    pub emotion: Option<String>,
    /// The five annotator labels in canonical kind order.
    pub annotator_labels: Vec<String>,
    pub fused: String,
    pub category: DecisionCategory,
    /// The previous utterance's fused label; [`PAD_MARKER`] at turn 0.
    pub previous_da: String,
}

/// Collect the utterances matching `filter` as case-table rows, in corpus
/// order.
///
/// Needs per-annotator votes on every annotation (annotate in-process or
/// attach the predictions sidecar first).
pub fn extract_cases(annotated: &AnnotatedCorpus, filter: &CaseFilter) -> Result<Vec<CaseRow>> {
    let mut rows = Vec::new();
    for (dialogue, annotations) in annotated.corpus.dialogues.iter().zip(&annotated.annotations) {
        for (i, (utt, ann)) in dialogue.utterances.iter().zip(annotations).enumerate() {
            if !filter.matches(utt, ann) {
                continue;
            }
            let bundle = ann.votes.as_ref().ok_or_else(|| {
                EdaError::InvalidConfig(
                    "case extraction needs per-annotator labels; \
                     attach the predictions sidecar first"
                        .into(),
                )
            })?;
            let previous_da = if i == 0 {
                PAD_MARKER.to_string()
            } else {
                annotations[i - 1].label.clone()
            };
            rows.push(CaseRow {
                dialogue_id: utt.dialogue_id.clone(),
                turn_index: utt.turn_index,
                text: utt.text.clone(),
                emotion: utt.emotion.map(|e| e.code().to_string()),
                annotator_labels: bundle.labels(),
                fused: ann.label.clone(),
                category: ann.category,
                previous_da,
            });
        }
    }
    Ok(rows)
}

fn csv_error(e: impl std::fmt::Display) -> EdaError {
    EdaError::Csv(e.to_string())
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &[String]) -> Result<()> {
    let header = reader.headers().map_err(csv_error)?;
    if header.len() != expected.len() || header.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(EdaError::Csv(format!(
            "expected header {:?}, got {:?}",
            expected.join(","),
            header
        )));
    }
    Ok(())
}

const COOCCURRENCE_HEADER: [&str; 4] = ["da", "emotion", "count", "normalized"];

/// One nonzero cell of a co-occurrence CSV. The `emotion` column holds the
/// axis label — sentiment codes under the sentiment axis; the header is
/// fixed either way.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceCell {
    pub da: String,
    pub emotion: String,
    pub count: usize,
    pub normalized: f64,
}

/// Co-occurrence matrix as CSV (`da,emotion,count,normalized`), one row
/// per nonzero cell in row-major order. An empty matrix emits the header
/// only.
pub fn emit_cooccurrence_csv(matrix: &CooccurrenceMatrix) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COOCCURRENCE_HEADER).expect("write to memory");
    for (r, da) in matrix.da_codes().iter().enumerate() {
        for (c, code) in matrix.axis_codes().iter().enumerate() {
            let count = matrix.counts()[r][c];
            if count == 0 {
                continue;
            }
            w.write_record([
                da.clone(),
                code.clone(),
                count.to_string(),
                matrix.normalized()[r][c].to_string(),
            ])
            .expect("write to memory");
        }
    }
    w.into_inner().expect("flush to memory")
}

/// Parse a co-occurrence CSV back into its nonzero cells.
pub fn parse_cooccurrence_csv(bytes: &[u8]) -> Result<Vec<CooccurrenceCell>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(bytes);
    check_header(
        &mut reader,
        &COOCCURRENCE_HEADER.map(String::from),
    )?;
    let mut cells = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        if row.len() != 4 {
            return Err(EdaError::Csv(format!("expected 4 fields, got {}", row.len())));
        }
        let count: usize = row[2]
            .parse()
            .map_err(|e| EdaError::Csv(format!("bad count \"{}\": {e}", &row[2])))?;
        let normalized: f64 = row[3]
            .parse()
            .map_err(|e| EdaError::Csv(format!("bad normalized value \"{}\": {e}", &row[3])))?;
        if !(0.0..=1.0).contains(&normalized) {
            return Err(EdaError::Csv(format!(
                "normalized value {normalized} outside [0, 1]"
            )));
        }
        cells.push(CooccurrenceCell {
            da: row[0].to_string(),
            emotion: row[1].to_string(),
            count,
            normalized,
        });
    }
    Ok(cells)
}

const DISTRIBUTION_HEADER: [&str; 3] = ["da", "count", "percent"];

/// Distribution as CSV (`da,count,percent`), one row per inventory tag in
/// canonical order, zero-count rows included.
pub fn emit_distribution_csv(distribution: &DADistribution) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(DISTRIBUTION_HEADER).expect("write to memory");
    for (i, da) in distribution.da_codes().iter().enumerate() {
        w.write_record([
            da.clone(),
            distribution.counts()[i].to_string(),
            distribution.percent(i).to_string(),
        ])
        .expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

/// Parse a distribution CSV produced by [`emit_distribution_csv`].
/// Percentages are recomputed from the counts.
pub fn parse_distribution_csv(bytes: &[u8]) -> Result<DADistribution> {
    let mut reader = csv::ReaderBuilder::new().from_reader(bytes);
    check_header(&mut reader, &DISTRIBUTION_HEADER.map(String::from))?;
    let mut da_codes = Vec::new();
    let mut counts = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        if row.len() != 3 {
            return Err(EdaError::Csv(format!("expected 3 fields, got {}", row.len())));
        }
        if da_codes.iter().any(|c| c == &row[0]) {
            return Err(EdaError::Csv(format!("duplicate tag row \"{}\"", &row[0])));
        }
        da_codes.push(row[0].to_string());
        counts.push(
            row[1]
                .parse::<usize>()
                .map_err(|e| EdaError::Csv(format!("bad count \"{}\": {e}", &row[1])))?,
        );
        row[2]
            .parse::<f64>()
            .map_err(|e| EdaError::Csv(format!("bad percent \"{}\": {e}", &row[2])))?;
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(EdaError::EmptyCorpus);
    }
    Ok(DADistribution {
        da_codes,
        counts,
        total,
    })
}

fn cases_header() -> Vec<String> {
    let mut header = vec!["dialogue_id".to_string(), "turn_index".into(), "text".into(), "emotion".into()];
    header.extend(AnnotatorKind::ALL.iter().map(|k| k.label().to_string()));
    header.extend(["fused".to_string(), "category".into(), "p_da".into()]);
    header
}

/// Case table as CSV: utterance coordinates, text, emotion, the five
/// annotator labels (columns named by annotator), fused label, category,
/// and previous-utterance dialogue act.
pub fn emit_cases_csv(rows: &[CaseRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(cases_header()).expect("write to memory");
    for row in rows {
        let mut record = vec![
            row.dialogue_id.clone(),
            row.turn_index.to_string(),
            row.text.clone(),
            row.emotion.clone().unwrap_or_default(),
        ];
        record.extend(row.annotator_labels.iter().cloned());
        record.extend([
            row.fused.clone(),
            row.category.code().to_string(),
            row.previous_da.clone(),
        ]);
        w.write_record(record).expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

/// Parse a case-table CSV produced by [`emit_cases_csv`].
pub fn parse_cases_csv(bytes: &[u8]) -> Result<Vec<CaseRow>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(bytes);
    let header = cases_header();
    check_header(&mut reader, &header)?;
    let kinds = AnnotatorKind::ALL.len();
    let mut rows = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        if row.len() != header.len() {
            return Err(EdaError::Csv(format!(
                "expected {} fields, got {}",
                header.len(),
                row.len()
            )));
        }
        let turn_index: usize = row[1]
            .parse()
            .map_err(|e| EdaError::Csv(format!("bad turn index \"{}\": {e}", &row[1])))?;
        let emotion = if row[3].is_empty() {
            None
        } else {
            Some(row[3].to_string())
        };
        let annotator_labels = (0..kinds).map(|i| row[4 + i].to_string()).collect();
        let category = DecisionCategory::parse(&row[4 + kinds + 1])
            .ok_or_else(|| EdaError::Csv(format!("unknown category \"{}\"", &row[4 + kinds + 1])))?;
        rows.push(CaseRow {
            dialogue_id: row[0].to_string(),
            turn_index,
            text: row[2].to_string(),
            emotion,
            annotator_labels,
            fused: row[4 + kinds].to_string(),
            category,
            previous_da: row[4 + kinds + 2].to_string(),
        });
    }
    Ok(rows)
}

/// Every layout constant of the SVG chart in one place.
mod chart {
    /// Room for the y-axis tick labels and caption.
    pub const MARGIN_LEFT: f64 = 64.0;
    pub const MARGIN_RIGHT: f64 = 16.0;
    /// Room for the legend row.
    pub const MARGIN_TOP: f64 = 52.0;
    /// Room for the per-group tag labels.
    pub const MARGIN_BOTTOM: f64 = 40.0;
    pub const PLOT_HEIGHT: f64 = 220.0;
    pub const BAR_WIDTH: f64 = 9.0;
    pub const BAR_GAP: f64 = 2.0;
    pub const GROUP_GAP: f64 = 16.0;
    pub const FONT_SIZE: f64 = 11.0;
    pub const LEGEND_SWATCH: f64 = 10.0;
    /// Approximate glyph advance used to space legend entries.
    pub const GLYPH_WIDTH: f64 = 6.5;
    pub const PALETTE: [&str; 9] = [
        "#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#eeca3b", "#b279a2",
        "#9d755d", "#bab0ac",
    ];
    pub const AXIS_COLOR: &str = "#333333";
    pub const GRID_COLOR: &str = "#dddddd";
    pub const MUTED_COLOR: &str = "#999999";
    pub const BACKGROUND: &str = "#ffffff";
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Grouped-bar SVG chart of the normalized co-occurrence matrix: one group
/// per dialogue act, one bar per axis label, bar height = normalized
/// share. `top_k` keeps only the k acts with the most counted utterances
/// (ties by inventory order); acts are always displayed in inventory
/// order. The output is a single self-contained SVG document.
pub fn emit_cooccurrence_svg(matrix: &CooccurrenceMatrix, top_k: Option<usize>) -> Vec<u8> {
    use std::fmt::Write as _;

    let mut row_indices: Vec<usize> = (0..matrix.da_codes().len()).collect();
    if let Some(k) = top_k {
        let mut by_total = row_indices.clone();
        // Stable sort: ties keep inventory order.
        by_total.sort_by_key(|&r| std::cmp::Reverse(matrix.row_total(r)));
        by_total.truncate(k);
        by_total.sort_unstable();
        row_indices = by_total;
    }

    let cols = matrix.axis_codes().len();
    let group_width =
        cols as f64 * chart::BAR_WIDTH + cols.saturating_sub(1) as f64 * chart::BAR_GAP;
    let groups = row_indices.len();
    let width = chart::MARGIN_LEFT
        + chart::GROUP_GAP
        + groups as f64 * (group_width + chart::GROUP_GAP)
        + chart::MARGIN_RIGHT;
    let height = chart::MARGIN_TOP + chart::PLOT_HEIGHT + chart::MARGIN_BOTTOM;
    let bottom = chart::MARGIN_TOP + chart::PLOT_HEIGHT;
    let right = width - chart::MARGIN_RIGHT;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.2}\" height=\"{height:.2}\" \
         viewBox=\"0 0 {width:.2} {height:.2}\" font-family=\"Helvetica, Arial, sans-serif\" \
         font-size=\"{:.1}\">",
        chart::FONT_SIZE
    );
    let _ = writeln!(
        svg,
        "  <rect x=\"0\" y=\"0\" width=\"{width:.2}\" height=\"{height:.2}\" fill=\"{}\"/>",
        chart::BACKGROUND
    );

    // Gridlines and y-axis tick labels at fixed normalized values.
    for tick in [0.0f64, 0.25, 0.5, 0.75, 1.0] {
        let y = bottom - tick * chart::PLOT_HEIGHT;
        let _ = writeln!(
            svg,
            "  <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{right:.2}\" y2=\"{y:.2}\" \
             stroke=\"{}\" stroke-width=\"1\"/>",
            chart::MARGIN_LEFT,
            chart::GRID_COLOR
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" fill=\"{}\">{tick:.2}</text>",
            chart::MARGIN_LEFT - 6.0,
            y + 3.5,
            chart::AXIS_COLOR
        );
    }
    // Axis lines.
    let _ = writeln!(
        svg,
        "  <line x1=\"{l:.2}\" y1=\"{t:.2}\" x2=\"{l:.2}\" y2=\"{b:.2}\" stroke=\"{c}\" \
         stroke-width=\"1\"/>",
        l = chart::MARGIN_LEFT,
        t = chart::MARGIN_TOP,
        b = bottom,
        c = chart::AXIS_COLOR
    );
    let _ = writeln!(
        svg,
        "  <line x1=\"{l:.2}\" y1=\"{b:.2}\" x2=\"{r:.2}\" y2=\"{b:.2}\" stroke=\"{c}\" \
         stroke-width=\"1\"/>",
        l = chart::MARGIN_LEFT,
        b = bottom,
        r = right,
        c = chart::AXIS_COLOR
    );
    // Y-axis caption.
    let mid_y = chart::MARGIN_TOP + chart::PLOT_HEIGHT / 2.0;
    let _ = writeln!(
        svg,
        "  <text transform=\"rotate(-90 14 {mid_y:.2})\" x=\"14\" y=\"{mid_y:.2}\" \
         text-anchor=\"middle\" fill=\"{}\">normalized co-occurrence</text>",
        chart::AXIS_COLOR
    );

    // Legend: one swatch per axis code.
    let mut legend_x = chart::MARGIN_LEFT;
    let legend_y = 20.0;
    for (c, code) in matrix.axis_codes().iter().enumerate() {
        let color = chart::PALETTE[c % chart::PALETTE.len()];
        let _ = writeln!(
            svg,
            "  <rect x=\"{legend_x:.2}\" y=\"{:.2}\" width=\"{s:.1}\" height=\"{s:.1}\" \
             fill=\"{color}\"/>",
            legend_y - chart::LEGEND_SWATCH + 1.0,
            s = chart::LEGEND_SWATCH
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{legend_y:.2}\" fill=\"{}\">{}</text>",
            legend_x + chart::LEGEND_SWATCH + 4.0,
            chart::AXIS_COLOR,
            xml_escape(code)
        );
        legend_x += chart::LEGEND_SWATCH + 4.0 + code.len() as f64 * chart::GLYPH_WIDTH + 14.0;
    }

    // Bars, one group per dialogue act.
    for (g, &r) in row_indices.iter().enumerate() {
        let group_x =
            chart::MARGIN_LEFT + chart::GROUP_GAP + g as f64 * (group_width + chart::GROUP_GAP);
        for (c, code) in matrix.axis_codes().iter().enumerate() {
            let value = matrix.normalized()[r][c];
            if value <= 0.0 {
                continue;
            }
            let bar_height = value * chart::PLOT_HEIGHT;
            let x = group_x + c as f64 * (chart::BAR_WIDTH + chart::BAR_GAP);
            let color = chart::PALETTE[c % chart::PALETTE.len()];
            let _ = writeln!(
                svg,
                "  <rect class=\"bar\" x=\"{x:.2}\" y=\"{:.2}\" width=\"{:.1}\" \
                 height=\"{bar_height:.2}\" fill=\"{color}\"><title>{}</title></rect>",
                bottom - bar_height,
                chart::BAR_WIDTH,
                xml_escape(&format!(
                    "{} × {}: {} ({})",
                    matrix.da_codes()[r],
                    code,
                    matrix.counts()[r][c],
                    value
                ))
            );
        }
        let label_color = if matrix.is_zero_row(r) {
            chart::MUTED_COLOR
        } else {
            chart::AXIS_COLOR
        };
        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" fill=\"{label_color}\">{}</text>",
            group_x + group_width / 2.0,
            bottom + 16.0,
            xml_escape(&matrix.da_codes()[r])
        );
    }

    svg.push_str("</svg>\n");
    svg.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotators::AnnotatorKind;
    use crate::corpus::{
        default_inventory, Corpus, Dialogue, Emotion, EmotionScheme, SchemeSpec, XX,
    };
    use crate::ensemble::{PredictionBundle, Vote};

    /// A bundle whose fuse outcome is (label, AM): all five agree.
    fn unanimous_bundle(label: &str) -> PredictionBundle {
        PredictionBundle::new(
            AnnotatorKind::ALL
                .iter()
                .map(|k| Vote {
                    kind: *k,
                    label: label.into(),
                    confidence: 0.8,
                })
                .collect(),
        )
        .unwrap()
    }

    /// The no-match bundle from the fusion examples: fuses to (xx, NM).
    fn nm_bundle() -> PredictionBundle {
        let labels = ["b", "b", "ba", "fc", "b"];
        let confidences = [0.3, 0.2, 0.9, 0.8, 0.7];
        PredictionBundle::new(
            AnnotatorKind::ALL
                .iter()
                .zip(labels)
                .zip(confidences)
                .map(|((kind, label), confidence)| Vote {
                    kind: *kind,
                    label: label.into(),
                    confidence,
                })
                .collect(),
        )
        .unwrap()
    }

    struct Row {
        text: &'static str,
        gold: Option<&'static str>,
        emotion: Option<Emotion>,
        fused: &'static str,
        category: DecisionCategory,
    }

    fn row(text: &'static str, fused: &'static str, category: DecisionCategory) -> Row {
        Row {
            text,
            gold: None,
            emotion: None,
            fused,
            category,
        }
    }

    /// Single-dialogue annotated corpus built from row specs; every
    /// annotation carries a consistent vote bundle.
    fn annotated_from(rows: Vec<Row>, scheme: SchemeSpec) -> AnnotatedCorpus {
        let mut utterances = Vec::new();
        let mut annotations = Vec::new();
        for (i, spec) in rows.iter().enumerate() {
            let mut utt = crate::corpus::Utterance::new("d0", i, "A", spec.text);
            utt.gold_da = spec.gold.map(String::from);
            utt.emotion = spec.emotion;
            utterances.push(utt);
            let votes = if spec.category == DecisionCategory::Nm {
                assert_eq!(spec.fused, XX);
                nm_bundle()
            } else {
                assert_eq!(spec.category, DecisionCategory::Am);
                unanimous_bundle(spec.fused)
            };
            annotations.push(Annotation {
                label: spec.fused.into(),
                category: spec.category,
                votes: Some(votes),
            });
        }
        AnnotatedCorpus {
            corpus: Corpus {
                dialogues: vec![Dialogue {
                    id: "d0".into(),
                    utterances,
                }],
                scheme,
            },
            annotations: vec![annotations],
        }
    }

    fn emotion_row(
        text: &'static str,
        fused: &'static str,
        emotion: Emotion,
    ) -> Row {
        Row {
            text,
            gold: None,
            emotion: Some(emotion),
            fused,
            category: DecisionCategory::Am,
        }
    }

    #[test]
    fn single_utterance_matrix_counts_one_full_cell() {
        let annotated = annotated_from(
            vec![emotion_row("Great news!", "sd", Emotion::Joy)],
            SchemeSpec::with_emotion(EmotionScheme::Meld),
        );
        let inventory = default_inventory();
        let m = cooccurrence(&annotated, AnalysisAxis::Emotion, &inventory).unwrap();
        let sd = inventory.index("sd").unwrap();
        let joy = m.axis_codes().iter().position(|c| c == "joy").unwrap();
        assert_eq!(m.counts()[sd][joy], 1);
        assert_eq!(m.normalized()[sd][joy], 1.0);
        assert_eq!(m.total(), 1);
        assert!(!m.is_zero_row(sd));
        for (r, _) in m.da_codes().iter().enumerate() {
            if r != sd {
                assert!(m.is_zero_row(r));
                assert!(m.normalized()[r].iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn rows_cover_the_full_inventory_and_normalized_rows_are_stochastic() {
        let annotated = annotated_from(
            vec![
                emotion_row("One.", "sd", Emotion::Joy),
                emotion_row("Two.", "sd", Emotion::Anger),
                emotion_row("Three.", "sd", Emotion::Joy),
                emotion_row("Four.", "qy", Emotion::Neutral),
                emotion_row("Unlabelled.", "qy", Emotion::Sadness),
            ],
            SchemeSpec::with_emotion(EmotionScheme::Meld),
        );
        let inventory = default_inventory();
        let m = cooccurrence(&annotated, AnalysisAxis::Emotion, &inventory).unwrap();
        assert_eq!(m.da_codes().len(), inventory.len());
        assert_eq!(m.axis_codes().len(), EmotionScheme::Meld.emotions().len());
        assert_eq!(m.total(), 5);
        for r in 0..m.da_codes().len() {
            if m.is_zero_row(r) {
                continue;
            }
            let sum: f64 = m.normalized()[r].iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "row {r} sums to {sum}");
        }
        let sd = inventory.index("sd").unwrap();
        let joy = m.axis_codes().iter().position(|c| c == "joy").unwrap();
        assert!((m.normalized()[sd][joy] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn utterances_without_the_axis_label_are_skipped() {
        let mut rows = vec![
            emotion_row("Labelled.", "sd", Emotion::Joy),
            row("Unlabelled.", "sd", DecisionCategory::Am),
        ];
        rows[1].emotion = None;
        let annotated =
            annotated_from(rows, SchemeSpec::with_emotion(EmotionScheme::Meld));
        let m = cooccurrence(&annotated, AnalysisAxis::Emotion, &default_inventory()).unwrap();
        assert_eq!(m.total(), 1);
    }

    #[test]
    fn missing_axis_is_an_error() {
        let annotated = annotated_from(
            vec![row("Hi.", "sd", DecisionCategory::Am)],
            SchemeSpec::none(),
        );
        let inventory = default_inventory();
        assert!(matches!(
            cooccurrence(&annotated, AnalysisAxis::Emotion, &inventory),
            Err(EdaError::AxisUnavailable { .. })
        ));
        assert!(matches!(
            cooccurrence(&annotated, AnalysisAxis::Sentiment, &inventory),
            Err(EdaError::AxisUnavailable { .. })
        ));
    }

    #[test]
    fn sentiment_axis_counts_sentiment_labels() {
        let mut annotated = annotated_from(
            vec![
                emotion_row("Good.", "sd", Emotion::Joy),
                emotion_row("Bad.", "sd", Emotion::Anger),
            ],
            SchemeSpec::with_emotion_and_sentiment(EmotionScheme::Meld),
        );
        annotated.corpus.dialogues[0].utterances[0].sentiment = Some(Sentiment::Positive);
        annotated.corpus.dialogues[0].utterances[1].sentiment = Some(Sentiment::Negative);
        let inventory = default_inventory();
        let m = cooccurrence(&annotated, AnalysisAxis::Sentiment, &inventory).unwrap();
        assert_eq!(m.axis_codes(), ["positive", "negative", "neutral"]);
        let sd = inventory.index("sd").unwrap();
        assert_eq!(m.counts()[sd], vec![1, 1, 0]);
        assert_eq!(m.total(), 2);
    }

    #[test]
    fn distribution_counts_percentages_and_placeholder() {
        let annotated = annotated_from(
            vec![
                row("A.", "sd", DecisionCategory::Am),
                row("B.", "sd", DecisionCategory::Am),
                row("C.", "qy", DecisionCategory::Am),
                row("D.", XX, DecisionCategory::Nm),
            ],
            SchemeSpec::none(),
        );
        let inventory = default_inventory();
        let d = da_distribution(&annotated, &inventory).unwrap();
        assert_eq!(d.total(), 4);
        let idx = |code: &str| inventory.index(code).unwrap();
        assert_eq!(d.counts()[idx("sd")], 2);
        assert_eq!(d.counts()[idx("qy")], 1);
        assert_eq!(d.counts()[idx(XX)], 1);
        assert_eq!(d.percent(idx("sd")), 50.0);
        assert_eq!(d.percent(idx(XX)), 25.0);
        let sum: f64 = (0..d.da_codes().len()).map(|i| d.percent(i)).sum();
        assert!((sum - 100.0).abs() < 0.01);
    }

    #[test]
    fn distribution_is_invariant_under_utterance_order() {
        let a = annotated_from(
            vec![
                row("A.", "sd", DecisionCategory::Am),
                row("B.", "qy", DecisionCategory::Am),
                row("C.", "b", DecisionCategory::Am),
            ],
            SchemeSpec::none(),
        );
        let b = annotated_from(
            vec![
                row("C.", "b", DecisionCategory::Am),
                row("A.", "sd", DecisionCategory::Am),
                row("B.", "qy", DecisionCategory::Am),
            ],
            SchemeSpec::none(),
        );
        let inventory = default_inventory();
        let da = da_distribution(&a, &inventory).unwrap();
        let db = da_distribution(&b, &inventory).unwrap();
        assert_eq!(da.counts(), db.counts());
    }

    #[test]
    fn distribution_of_empty_corpus_is_an_error() {
        let annotated = AnnotatedCorpus {
            corpus: Corpus {
                dialogues: Vec::new(),
                scheme: SchemeSpec::none(),
            },
            annotations: Vec::new(),
        };
        assert!(matches!(
            da_distribution(&annotated, &default_inventory()),
            Err(EdaError::EmptyCorpus)
        ));
    }

    fn mixed_annotated() -> AnnotatedCorpus {
        let mut rows = vec![
            emotion_row("All agree here.", "sd", Emotion::Joy),
            emotion_row("Still unanimous.", "b", Emotion::Neutral),
            row("Nobody agrees.", XX, DecisionCategory::Nm),
            emotion_row("Unanimous again.", "sd", Emotion::Anger),
        ];
        rows[0].gold = Some("sd");
        rows[1].gold = Some("qy");
        rows[2].gold = Some("b");
        rows[3].gold = Some("qy");
        annotated_from(rows, SchemeSpec::with_emotion(EmotionScheme::Meld))
    }

    #[test]
    fn category_filter_selects_matching_rows_with_previous_da() {
        let annotated = mixed_annotated();
        let rows = extract_cases(&annotated, &CaseFilter::Category(DecisionCategory::Nm)).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!(r.text, "Nobody agrees.");
        assert_eq!(r.fused, XX);
        assert_eq!(r.category, DecisionCategory::Nm);
        assert_eq!(r.annotator_labels, ["b", "b", "ba", "fc", "b"]);
        // Previous utterance was fused to "b".
        assert_eq!(r.previous_da, "b");

        let rows = extract_cases(&annotated, &CaseFilter::Category(DecisionCategory::Am)).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.category == DecisionCategory::Am));
        assert_eq!(rows[0].previous_da, PAD_MARKER);
        assert_eq!(rows[0].turn_index, 0);
    }

    #[test]
    fn nm_filter_on_all_am_corpus_is_empty() {
        let annotated = annotated_from(
            vec![
                row("A.", "sd", DecisionCategory::Am),
                row("B.", "sd", DecisionCategory::Am),
            ],
            SchemeSpec::none(),
        );
        let rows = extract_cases(&annotated, &CaseFilter::Category(DecisionCategory::Nm)).unwrap();
        assert!(rows.is_empty());
    }

    #[test]
    fn confusion_filter_matches_gold_fused_pairs() {
        let annotated = mixed_annotated();
        // Gold qy fused as sd: the last row only.
        let filter = CaseFilter::parse("confusion:qy>sd").unwrap();
        let rows = extract_cases(&annotated, &filter).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].text, "Unanimous again.");
        // Gold sd fused as sd is also expressible (a "correct" pattern).
        let rows = extract_cases(&annotated, &CaseFilter::parse("confusion:sd>sd").unwrap())
            .unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].turn_index, 0);
    }

    #[test]
    fn filter_parsing_accepts_both_forms_and_rejects_junk() {
        assert_eq!(
            CaseFilter::parse("category:NM").unwrap(),
            CaseFilter::Category(DecisionCategory::Nm)
        );
        assert_eq!(
            CaseFilter::parse("confusion:sd>fc").unwrap(),
            CaseFilter::Confusion {
                expected: "sd".into(),
                fused: "fc".into()
            }
        );
        for bad in [
            "category:zz",
            "confusion:sd",
            "confusion:>fc",
            "confusion:sd>",
            "cases:NM",
            "",
        ] {
            assert!(
                matches!(CaseFilter::parse(bad), Err(EdaError::UnknownFilter(_))),
                "{bad:?} should be rejected"
            );
        }
        let shown = CaseFilter::parse("confusion:sd>fc").unwrap().to_string();
        assert_eq!(shown, "confusion:sd>fc");
    }

    #[test]
    fn extraction_without_votes_is_an_error() {
        let mut annotated = annotated_from(
            vec![row("A.", "sd", DecisionCategory::Am)],
            SchemeSpec::none(),
        );
        annotated.annotations[0][0].votes = None;
        assert!(matches!(
            extract_cases(&annotated, &CaseFilter::Category(DecisionCategory::Am)),
            Err(EdaError::InvalidConfig(_))
        ));
    }

    #[test]
    fn cooccurrence_csv_round_trips_nonzero_cells() {
        let annotated = mixed_annotated();
        let inventory = default_inventory();
        let m = cooccurrence(&annotated, AnalysisAxis::Emotion, &inventory).unwrap();
        let bytes = emit_cooccurrence_csv(&m);
        let cells = parse_cooccurrence_csv(&bytes).unwrap();
        let mut expected = Vec::new();
        for (r, da) in m.da_codes().iter().enumerate() {
            for (c, code) in m.axis_codes().iter().enumerate() {
                if m.counts()[r][c] > 0 {
                    expected.push(CooccurrenceCell {
                        da: da.clone(),
                        emotion: code.clone(),
                        count: m.counts()[r][c],
                        normalized: m.normalized()[r][c],
                    });
                }
            }
        }
        assert_eq!(cells, expected);
        let total: usize = cells.iter().map(|c| c.count).sum();
        assert_eq!(total, m.total());
    }

    #[test]
    fn empty_matrix_emits_header_only() {
        let annotated = annotated_from(
            vec![row("No emotion label.", "sd", DecisionCategory::Am)],
            SchemeSpec::with_emotion(EmotionScheme::Meld),
        );
        let m = cooccurrence(&annotated, AnalysisAxis::Emotion, &default_inventory()).unwrap();
        assert_eq!(m.total(), 0);
        let bytes = emit_cooccurrence_csv(&m);
        assert_eq!(String::from_utf8(bytes).unwrap(), "da,emotion,count,normalized\n");
    }

    #[test]
    fn distribution_csv_round_trips() {
        let annotated = mixed_annotated();
        let inventory = default_inventory();
        let d = da_distribution(&annotated, &inventory).unwrap();
        let bytes = emit_distribution_csv(&d);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("da,count,percent\n"));
        // Header plus one row per inventory tag.
        assert_eq!(text.lines().count(), 1 + inventory.len());
        let back = parse_distribution_csv(&bytes).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn cases_csv_round_trips_with_awkward_text() {
        let mut annotated = mixed_annotated();
        annotated.corpus.dialogues[0].utterances[0].text =
            "Well, \"quoted\", with commas,\nand a newline".into();
        let rows = extract_cases(&annotated, &CaseFilter::Category(DecisionCategory::Am)).unwrap();
        let bytes = emit_cases_csv(&rows);
        let back = parse_cases_csv(&bytes).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn csv_parsers_reject_malformed_input() {
        assert!(matches!(
            parse_cooccurrence_csv(b"a,b\n"),
            Err(EdaError::Csv(_))
        ));
        assert!(matches!(
            parse_cooccurrence_csv(b"da,emotion,count,normalized\nsd,joy,x,0.5\n"),
            Err(EdaError::Csv(_))
        ));
        assert!(matches!(
            parse_cooccurrence_csv(b"da,emotion,count,normalized\nsd,joy,1,1.5\n"),
            Err(EdaError::Csv(_))
        ));
        assert!(matches!(
            parse_distribution_csv(b"da,count,percent\nsd,1,50\nsd,1,50\n"),
            Err(EdaError::Csv(_))
        ));
        assert!(matches!(
            parse_cases_csv(b"dialogue_id,turn_index\n"),
            Err(EdaError::Csv(_))
        ));
    }

    /// Minimal XML well-formedness check: every open tag is closed in
    /// order, self-closing tags allowed, attribute values never contain
    /// the tag delimiters (true for everything this module emits).
    fn assert_well_formed_xml(text: &str) {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = text;
        while let Some(open) = rest.find('<') {
            let between = &rest[..open];
            assert!(
                !between.contains('>'),
                "stray '>' outside a tag near {between:?}"
            );
            let after = &rest[open + 1..];
            let close = after.find('>').expect("unclosed tag");
            let tag = &after[..close];
            rest = &after[close + 1..];
            if tag.starts_with('?') || tag.starts_with('!') {
                continue;
            }
            if let Some(name) = tag.strip_prefix('/') {
                let top = stack.pop().unwrap_or_else(|| panic!("unmatched </{name}>"));
                assert_eq!(top, name.trim(), "mismatched close tag");
            } else if tag.ends_with('/') {
                // Self-closing.
            } else {
                let name = tag
                    .split_whitespace()
                    .next()
                    .expect("tag has a name")
                    .to_string();
                stack.push(name);
            }
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
    }

    #[test]
    fn svg_chart_is_well_formed_and_draws_every_nonzero_cell() {
        let annotated = mixed_annotated();
        let m = cooccurrence(&annotated, AnalysisAxis::Emotion, &default_inventory()).unwrap();
        let svg = String::from_utf8(emit_cooccurrence_svg(&m, None)).unwrap();
        assert_well_formed_xml(&svg);
        assert!(svg.starts_with("<svg "));
        let nonzero: usize = m
            .counts()
            .iter()
            .map(|row| row.iter().filter(|&&c| c > 0).count())
            .sum();
        let bars = svg.matches("class=\"bar\"").count();
        assert_eq!(bars, nonzero);
        // One group label per inventory tag plus one legend entry per axis
        // code; the caption adds one more text element.
        let texts = svg.matches("<text").count();
        assert_eq!(
            texts,
            m.da_codes().len() + m.axis_codes().len() + 5 /* ticks */ + 1 /* caption */
        );
    }

    #[test]
    fn svg_top_k_keeps_the_most_frequent_groups_in_inventory_order() {
        let annotated = mixed_annotated();
        let inventory = default_inventory();
        let m = cooccurrence(&annotated, AnalysisAxis::Emotion, &inventory).unwrap();
        let svg = String::from_utf8(emit_cooccurrence_svg(&m, Some(1))).unwrap();
        assert_well_formed_xml(&svg);
        // "sd" has the most labelled utterances; only its group remains.
        let texts = svg.matches("<text").count();
        assert_eq!(texts, 1 + m.axis_codes().len() + 5 + 1);
        assert!(svg.contains(">sd</text>"));
        assert!(!svg.contains(">b</text>"));

        // k larger than the row count keeps everything.
        let svg = String::from_utf8(emit_cooccurrence_svg(&m, Some(1000))).unwrap();
        assert_eq!(
            svg.matches("<text").count(),
            m.da_codes().len() + m.axis_codes().len() + 5 + 1
        );
    }

    #[test]
    fn svg_escapes_markup_sensitive_codes() {
        // The inventory's quotation tag contains '^'; craft a matrix with
        // a title that needs escaping by using text in the da code path.
        let annotated = annotated_from(
            vec![emotion_row("Quoted.", "^q", Emotion::Joy)],
            SchemeSpec::with_emotion(EmotionScheme::Meld),
        );
        let m = cooccurrence(&annotated, AnalysisAxis::Emotion, &default_inventory()).unwrap();
        let svg = String::from_utf8(emit_cooccurrence_svg(&m, None)).unwrap();
        assert_well_formed_xml(&svg);
        assert!(svg.contains("^q"));
    }
}
