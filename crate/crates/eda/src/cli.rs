//! Command-line entry point wiring the pipeline: synthesize or parse
//! corpora, train the annotator pool, fuse labels, report reliability
//! metrics, and emit analytics.
//!
//! One binary, six subcommands (`synth`, `train`, `annotate`, `metrics`,
//! `analyze`, `gradcheck`). All randomness flows from one `--seed` flag
//! per run; every run writes a `run.json` manifest sufficient to
//! reproduce it bit-for-bit. Exit codes: 0 success, 1 usage error,
//! 2 data error, 3 numeric failure. Set `EDA_LOG` to control logging.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{
    cooccurrence, da_distribution, emit_cases_csv, emit_cooccurrence_csv, emit_cooccurrence_svg,
    emit_distribution_csv, extract_cases, AnalysisAxis, CaseFilter,
};
use crate::annotators::{
    gradient_check, load_checkpoint, save_checkpoint, train, AnnotatorKind, AnnotatorModel,
    TrainConfig,
};
use crate::corpus::{
    default_inventory, generate_synthetic, holdout_split, parse_corpus, serialize_corpus, Corpus,
    EmotionScheme, SchemeSpec, SyntheticConfig, TagInventory,
};
use crate::encoder::EmbeddingProvider;
use crate::ensemble::{
    annotate_corpus, attach_predictions, emit_stats_csv, ensemble_accuracy, parse_annotated,
    parse_predictions, serialize_annotated, serialize_predictions, AnnotatedCorpus, AnnotatorPool,
    DecisionCategory, EnsembleStats,
};
use crate::error::{EdaError, Result};
use crate::reliability::{emit_report_csv, reliability_report, MetricValue, ReliabilityReport};
use crate::rng;

/// Gradient-check perturbation; central differences at this step size
/// resolve relative errors well below the default threshold.
const CHECK_EPSILON: f64 = 1e-5;
const CHECK_THRESHOLD: f64 = 1e-4;

/// Initialize logging from the `EDA_LOG` environment variable
/// (`error|warn|info|debug|trace`; default `warn`). Safe to call twice.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("EDA_LOG", "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

/// Run the CLI on an argv-style argument list (`args[0]` is the program
/// name) and return the process exit code.
pub fn run<I, S>(args: I) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let manifest_args: Vec<String> = argv.iter().skip(1).cloned().collect();
    let outcome = match cli.command {
        Command::Synth(a) => cmd_synth(a, manifest_args),
        Command::Train(a) => cmd_train(a, manifest_args),
        Command::Annotate(a) => cmd_annotate(a, manifest_args),
        Command::Metrics(a) => cmd_metrics(a, manifest_args),
        Command::Analyze(a) => cmd_analyze(a, manifest_args),
        Command::Gradcheck(a) => cmd_gradcheck(a, manifest_args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code() as u8
        }
    }
}

#[derive(Parser)]
#[command(
    name = "eda",
    version,
    about = "Ensemble dialogue-act annotation toolkit",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic corpus as JSONL.
    Synth(SynthArgs),
    /// Train one annotator or the whole five-model pool.
    Train(TrainArgs),
    /// Annotate a corpus with a trained pool and fuse the labels.
    Annotate(AnnotateArgs),
    /// Compute inter-annotator reliability metrics.
    Metrics(MetricsArgs),
    /// Emit co-occurrence, distribution, and case-study analytics.
    Analyze(AnalyzeArgs),
    /// Verify analytic gradients against central differences.
    Gradcheck(GradcheckArgs),
}

/// Which annotators a command addresses: one kind or the whole pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KindSelection {
    All,
    One(AnnotatorKind),
}

impl KindSelection {
    fn kinds(self) -> Vec<AnnotatorKind> {
        match self {
            KindSelection::All => AnnotatorKind::ALL.to_vec(),
            KindSelection::One(kind) => vec![kind],
        }
    }
}

fn parse_kind_selection(s: &str) -> std::result::Result<KindSelection, String> {
    if s == "all" {
        return Ok(KindSelection::All);
    }
    AnnotatorKind::parse(s).map(KindSelection::One).ok_or_else(|| {
        let labels: Vec<&str> = AnnotatorKind::ALL.iter().map(|k| k.label()).collect();
        format!("expected one of {} or 'all'", labels.join(", "))
    })
}

fn parse_axis(s: &str) -> std::result::Result<AnalysisAxis, String> {
    AnalysisAxis::parse(s).ok_or_else(|| "expected 'emotion' or 'sentiment'".to_string())
}

fn parse_emotion_scheme(s: &str) -> std::result::Result<EmotionScheme, String> {
    match s {
        "iemocap" => Ok(EmotionScheme::Iemocap),
        "meld" => Ok(EmotionScheme::Meld),
        _ => Err("expected 'iemocap' or 'meld'".to_string()),
    }
}

/// Parse a `--scheme` string: `none`, `iemocap`, `meld`, `sentiment`,
/// or `<emotions>+sentiment` (e.g. `meld+sentiment`).
fn parse_scheme(s: &str) -> std::result::Result<SchemeSpec, String> {
    let mut spec = SchemeSpec::none();
    if s == "none" {
        return Ok(spec);
    }
    for part in s.split('+') {
        match part {
            "iemocap" | "meld" if spec.emotion.is_some() => {
                return Err("at most one emotion scheme".to_string())
            }
            "iemocap" => spec.emotion = Some(EmotionScheme::Iemocap),
            "meld" => spec.emotion = Some(EmotionScheme::Meld),
            "sentiment" if spec.sentiment => return Err("'sentiment' given twice".to_string()),
            "sentiment" => spec.sentiment = true,
            other => {
                return Err(format!(
                    "unknown scheme part '{other}' (expected none, iemocap, meld, \
                     sentiment, or e.g. meld+sentiment)"
                ))
            }
        }
    }
    Ok(spec)
}

#[derive(Args)]
struct SynthArgs {
    /// Number of dialogue-act classes to draw from the inventory.
    #[arg(long, default_value_t = 5)]
    classes: usize,
    /// Number of dialogues to generate.
    #[arg(long, default_value_t = 200)]
    dialogues: usize,
    /// Minimum utterances per dialogue.
    #[arg(long, default_value_t = 4)]
    min_turns: usize,
    /// Maximum utterances per dialogue.
    #[arg(long, default_value_t = 8)]
    max_turns: usize,
    /// Couple each gold act to the previous topic (context-sensitive rule).
    #[arg(long)]
    context_rule: bool,
    /// Attach emotion labels under this scheme.
    #[arg(long, value_parser = parse_emotion_scheme)]
    emotions: Option<EmotionScheme>,
    /// Attach sentiment labels.
    #[arg(long)]
    sentiment: bool,
    /// Tag inventory JSON (defaults to the built-in SWBD-DAMSL set).
    #[arg(long)]
    inventory: Option<PathBuf>,
    /// Master random seed.
    #[arg(long, default_value_t = 17)]
    seed: u64,
    /// Output corpus path (JSONL).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Annotator kind to train, or `all` for the five-model pool.
    #[arg(value_parser = parse_kind_selection, default_value = "all")]
    kind: KindSelection,
    /// Gold-labelled corpus (JSONL).
    #[arg(long)]
    corpus: PathBuf,
    /// Tag inventory JSON (defaults to the built-in SWBD-DAMSL set).
    #[arg(long)]
    inventory: Option<PathBuf>,
    /// Label scheme of the corpus (`none`, `iemocap`, `meld`, `sentiment`,
    /// `meld+sentiment`, ...).
    #[arg(long, value_parser = parse_scheme, default_value = "none")]
    scheme: SchemeSpec,
    /// Master random seed; per-kind streams are derived from it.
    #[arg(long, default_value_t = 17)]
    seed: u64,
    /// Training epochs.
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    /// Learning rate.
    #[arg(long, default_value_t = 0.2)]
    lr: f64,
    /// Hidden state width of the recurrent encoders.
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    /// Embedding dimension (pseudo-embeddings; ignored with --embeddings).
    #[arg(long, default_value_t = 16)]
    dim: usize,
    /// Embedding file (`d=<dim>` header, then `token v1..vd` lines).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Hold out every n-th dialogue and evaluate on it.
    #[arg(long)]
    holdout_every: Option<usize>,
    /// Directory for the `<kind>.dana` checkpoints.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnnotateArgs {
    /// Directory holding the five `<kind>.dana` checkpoints.
    #[arg(long)]
    checkpoints: PathBuf,
    /// Corpus to annotate (JSONL).
    #[arg(long)]
    corpus: PathBuf,
    /// Tag inventory JSON (defaults to the built-in SWBD-DAMSL set).
    #[arg(long)]
    inventory: Option<PathBuf>,
    /// Label scheme of the corpus.
    #[arg(long, value_parser = parse_scheme, default_value = "none")]
    scheme: SchemeSpec,
    /// Output path for the annotated JSONL.
    #[arg(long)]
    out: PathBuf,
    /// Decision-category stats CSV (default: `<out>.stats.csv`).
    #[arg(long)]
    stats_out: Option<PathBuf>,
    /// Also write the per-annotator predictions sidecar (JSONL).
    #[arg(long)]
    predictions_out: Option<PathBuf>,
    /// When scoring against gold labels, count fused `xx` as an error
    /// instead of excluding those utterances.
    #[arg(long)]
    count_xx_as_error: bool,
}

#[derive(Args)]
struct MetricsArgs {
    /// Per-rater label files, one tag code per line; exactly five, in
    /// canonical annotator order. Alternative to --predictions.
    raters: Vec<PathBuf>,
    /// Predictions sidecar written by `annotate --predictions-out`.
    #[arg(long, conflicts_with = "raters")]
    predictions: Option<PathBuf>,
    /// Tag inventory JSON (defaults to the built-in SWBD-DAMSL set).
    #[arg(long)]
    inventory: Option<PathBuf>,
    /// Write the three-row reliability report CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Annotated corpus (JSONL with `eda`/`eda_category` fields).
    #[arg(long)]
    annotated: PathBuf,
    /// Predictions sidecar; required for case extraction.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Tag inventory JSON (defaults to the built-in SWBD-DAMSL set).
    #[arg(long)]
    inventory: Option<PathBuf>,
    /// Label scheme of the corpus.
    #[arg(long, value_parser = parse_scheme, default_value = "none")]
    scheme: SchemeSpec,
    /// Co-occurrence axis.
    #[arg(long, value_parser = parse_axis, default_value = "emotion")]
    axis: AnalysisAxis,
    /// Keep only the k most frequent dialogue acts in the chart.
    #[arg(long)]
    top_k: Option<usize>,
    /// Case filter (`category:<AM|CM|BM|NM>` or `confusion:<gold>><fused>`);
    /// writes `cases.csv`.
    #[arg(long)]
    cases: Option<String>,
    /// Output directory for `cooccurrence.csv`, `distribution.csv`,
    /// `chart.svg`, and optionally `cases.csv`.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Annotator kind to check, or `all`.
    #[arg(value_parser = parse_kind_selection, default_value = "all")]
    kind: KindSelection,
    /// Random seed for the probe model and corpus.
    #[arg(long, default_value_t = 17)]
    seed: u64,
    /// Hidden state width of the probe models.
    #[arg(long, default_value_t = 4)]
    hidden: usize,
    /// Embedding dimension of the probe models.
    #[arg(long, default_value_t = 8)]
    dim: usize,
    /// Number of dialogue-act classes in the probe inventory.
    #[arg(long, default_value_t = 3)]
    classes: usize,
    /// Maximum tolerated relative error.
    #[arg(long, default_value_t = CHECK_THRESHOLD)]
    threshold: f64,
    /// Directory for the run manifest.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Everything needed to reproduce a run bit-for-bit: the tool version,
/// the exact arguments, the seed, and the file endpoints, plus per-stage
/// wall-clock timings.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    tool_version: String,
    command: String,
    args: Vec<String>,
    seed: Option<u64>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    timings_ms: Vec<StageTiming>,
}

#[derive(Debug, Serialize)]
struct StageTiming {
    stage: String,
    ms: u64,
}

impl RunManifest {
    fn new(command: &str, args: Vec<String>, seed: Option<u64>) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings_ms: Vec::new(),
        }
    }

    fn input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Run `f`, recording its wall-clock time under `stage`.
    fn stage<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let result = f();
        self.timings_ms.push(StageTiming {
            stage: stage.to_string(),
            ms: start.elapsed().as_millis() as u64,
        });
        result
    }

    /// Write the manifest as `run.json` into `dir`.
    fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("run.json");
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_bytes(&path, format!("{json}\n").as_bytes())
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| EdaError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| EdaError::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| EdaError::io(path, e))
}

fn load_inventory(path: &Option<PathBuf>) -> Result<TagInventory> {
    match path {
        Some(p) => TagInventory::load(p),
        None => Ok(default_inventory()),
    }
}

/// Directory the manifest lands in: the parent of a file output.
fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn cmd_synth(a: SynthArgs, args: Vec<String>) -> Result<()> {
    let mut manifest = RunManifest::new("synth", args, Some(a.seed));
    let inventory = load_inventory(&a.inventory)?;
    if let Some(p) = &a.inventory {
        manifest.input(p);
    }
    let mut config = SyntheticConfig::new(a.classes, a.dialogues, a.seed);
    config.turns = (a.min_turns, a.max_turns);
    config.context_rule = a.context_rule;
    config.emotion_scheme = a.emotions;
    config.sentiment = a.sentiment;
    let corpus = manifest.stage("generate", || generate_synthetic(&config, &inventory))?;
    manifest.stage("write", || {
        write_bytes(&a.out, &serialize_corpus(&corpus))
    })?;
    manifest.output(&a.out);
    manifest.write(&parent_dir(&a.out))?;
    println!(
        "wrote {} dialogues / {} utterances to {}",
        corpus.dialogues.len(),
        corpus.num_utterances(),
        a.out.display()
    );
    Ok(())
}

/// Predicted and gold class codes over every usable gold position.
fn predictions_vs_gold(
    model: &AnnotatorModel,
    corpus: &Corpus,
) -> Result<(Vec<String>, Vec<String>)> {
    let inventory = model.inventory();
    let mut predicted = Vec::new();
    let mut gold = Vec::new();
    for dialogue in &corpus.dialogues {
        for (i, utt) in dialogue.utterances.iter().enumerate() {
            let Some(code) = &utt.gold_da else { continue };
            if inventory.index(code).is_none() {
                return Err(EdaError::InventoryMismatch(format!(
                    "gold label \"{code}\" is not in the inventory"
                )));
            }
            if inventory.class_index(code).is_none() {
                continue; // non-determinable gold: not a class
            }
            predicted.push(model.predict(dialogue, i)?.label);
            gold.push(code.clone());
        }
    }
    Ok((predicted, gold))
}

fn fmt_metric(m: MetricValue) -> String {
    if m.value.is_nan() {
        "nan".to_string()
    } else {
        format!("{:.4}", m.value)
    }
}

fn cmd_train(a: TrainArgs, args: Vec<String>) -> Result<()> {
    let mut manifest = RunManifest::new("train", args, Some(a.seed));
    let inventory = load_inventory(&a.inventory)?;
    if let Some(p) = &a.inventory {
        manifest.input(p);
    }
    manifest.input(&a.corpus);
    let corpus = manifest.stage("parse", || -> Result<Corpus> {
        parse_corpus(&read_bytes(&a.corpus)?, a.scheme, &inventory)
    })?;
    let (train_corpus, eval_corpus) = match a.holdout_every {
        Some(every) => {
            if every < 2 {
                return Err(EdaError::InvalidConfig(
                    "--holdout-every must be at least 2".into(),
                ));
            }
            let (t, h) = holdout_split(&corpus, every);
            (t, Some(h))
        }
        None => (corpus, None),
    };

    let provider = match &a.embeddings {
        Some(path) => {
            manifest.input(path);
            EmbeddingProvider::from_file(path)?
        }
        None => EmbeddingProvider::pseudo(rng::derive_seed(a.seed, "embeddings"), a.dim),
    };

    let kinds = a.kind.kinds();
    // The five kinds are independent: train them on their own threads,
    // each under its own derived seed, and merge in canonical order.
    let trained = manifest.stage("train", || -> Result<Vec<(AnnotatorModel, crate::annotators::TrainReport)>> {
        let mut slots: Vec<Option<Result<_>>> = (0..kinds.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (slot, &kind) in slots.iter_mut().zip(&kinds) {
                let provider = provider.clone();
                let inventory = &inventory;
                let train_corpus = &train_corpus;
                let a = &a;
                handles.push(scope.spawn(move || {
                    let kind_seed = rng::derive_seed(a.seed, kind.label());
                    let run = || -> Result<_> {
                        let mut model =
                            AnnotatorModel::new(kind, inventory, provider, a.hidden, kind_seed)?;
                        let cfg = TrainConfig {
                            epochs: a.epochs,
                            lr: a.lr,
                            seed: kind_seed,
                        };
                        let report = train(&mut model, train_corpus, &cfg)?;
                        Ok((model, report))
                    };
                    *slot = Some(run());
                }));
            }
            for handle in handles {
                handle.join().expect("training thread panicked");
            }
        });
        slots
            .into_iter()
            .map(|slot| slot.expect("every kind trained"))
            .collect()
    })?;

    for (_, report) in &trained {
        for (epoch, loss) in report.loss_history.iter().enumerate() {
            log::info!(
                "{} epoch {:>3} mean loss {loss:.6}",
                report.kind.label(),
                epoch + 1
            );
        }
    }

    let checkpoint_paths: Vec<PathBuf> = trained
        .iter()
        .map(|(model, _)| a.out.join(format!("{}.dana", model.kind().label())))
        .collect();
    manifest.stage("checkpoint", || -> Result<()> {
        std::fs::create_dir_all(&a.out).map_err(|e| EdaError::io(&a.out, e))?;
        for ((model, _), path) in trained.iter().zip(&checkpoint_paths) {
            save_checkpoint(model, path)?;
        }
        Ok(())
    })?;
    for path in &checkpoint_paths {
        manifest.output(path);
    }

    let table_corpus = eval_corpus.as_ref().unwrap_or(&train_corpus);
    let table_name = if eval_corpus.is_some() { "held-out" } else { "training" };
    manifest.stage("evaluate", || -> Result<()> {
        println!("{table_name} set: {} utterances", table_corpus.num_utterances());
        println!("{:<8} {:>9} {:>8}", "model", "accuracy", "sc");
        for (model, _) in &trained {
            let (predicted, gold) = predictions_vs_gold(model, table_corpus)?;
            if predicted.is_empty() {
                return Err(EdaError::EmptyCorpus);
            }
            let correct = predicted.iter().zip(&gold).filter(|(p, g)| p == g).count();
            let accuracy = correct as f64 / predicted.len() as f64;
            let sc = crate::reliability::spearman(&predicted, &gold, &inventory)?;
            println!(
                "{:<8} {:>9.4} {:>8}",
                model.kind().label(),
                accuracy,
                fmt_metric(sc)
            );
        }
        Ok(())
    })?;
    manifest.write(&a.out)?;
    Ok(())
}

/// Load the five `<kind>.dana` checkpoints from a directory.
fn load_pool(dir: &Path, inventory: &TagInventory) -> Result<AnnotatorPool> {
    let mut models = Vec::new();
    for kind in AnnotatorKind::ALL {
        let path = dir.join(format!("{}.dana", kind.label()));
        if !path.exists() {
            return Err(EdaError::MissingCheckpoint(format!(
                "{} ({})",
                kind.label(),
                path.display()
            )));
        }
        models.push(load_checkpoint(&path, inventory)?);
    }
    AnnotatorPool::new(models)
}

fn print_stats_table(stats: &EnsembleStats) {
    println!("{:<9} {:>6} {:>8}", "category", "count", "percent");
    for category in DecisionCategory::ALL {
        println!(
            "{:<9} {:>6} {:>8.2}",
            category.code(),
            stats.count(category),
            stats.percent(category)
        );
    }
}

fn cmd_annotate(a: AnnotateArgs, args: Vec<String>) -> Result<()> {
    let mut manifest = RunManifest::new("annotate", args, None);
    let inventory = load_inventory(&a.inventory)?;
    if let Some(p) = &a.inventory {
        manifest.input(p);
    }
    manifest.input(&a.corpus);
    let corpus = manifest.stage("parse", || -> Result<Corpus> {
        parse_corpus(&read_bytes(&a.corpus)?, a.scheme, &inventory)
    })?;
    let pool = manifest.stage("load-pool", || load_pool(&a.checkpoints, &inventory))?;
    for kind in AnnotatorKind::ALL {
        manifest.input(&a.checkpoints.join(format!("{}.dana", kind.label())));
    }
    let (annotated, stats) = manifest.stage("annotate", || annotate_corpus(&pool, &corpus))?;

    let stats_path = a
        .stats_out
        .clone()
        .unwrap_or_else(|| a.out.with_extension("stats.csv"));
    manifest.stage("write", || -> Result<()> {
        write_bytes(&a.out, &serialize_annotated(&annotated))?;
        write_bytes(&stats_path, &emit_stats_csv(&stats))?;
        if let Some(path) = &a.predictions_out {
            write_bytes(path, &serialize_predictions(&annotated)?)?;
        }
        Ok(())
    })?;
    manifest.output(&a.out);
    manifest.output(&stats_path);
    if let Some(path) = &a.predictions_out {
        manifest.output(path);
    }

    print_stats_table(&stats);
    match ensemble_accuracy(&annotated, a.count_xx_as_error) {
        Ok(score) => println!(
            "ensemble accuracy {:.4} ({}/{} correct, {} excluded as non-determinable)",
            score.accuracy, score.correct, score.compared, score.excluded_xx
        ),
        Err(EdaError::EmptyCorpus) => {
            log::info!("no gold labels; skipping ensemble accuracy");
        }
        Err(e) => return Err(e),
    }
    manifest.write(&parent_dir(&a.out))?;
    Ok(())
}

fn print_report_table(report: &ReliabilityReport) {
    let rows = [
        ("alpha", report.alpha),
        ("kappa", report.kappa),
        ("scc", report.spearman_context),
    ];
    for (name, metric) in rows {
        let note = if metric.degenerate { "  (degenerate)" } else { "" };
        println!("{:<6} {:>8}{note}", name, fmt_metric(metric));
    }
}

fn cmd_metrics(a: MetricsArgs, args: Vec<String>) -> Result<()> {
    let mut manifest = RunManifest::new("metrics", args, None);
    let inventory = load_inventory(&a.inventory)?;
    if let Some(p) = &a.inventory {
        manifest.input(p);
    }
    if let Some(path) = &a.predictions {
        manifest.input(path);
    }
    for path in &a.raters {
        manifest.input(path);
    }
    let sequences: Vec<Vec<String>> = manifest.stage("parse", || -> Result<_> {
        if let Some(path) = &a.predictions {
            let records = parse_predictions(&read_bytes(path)?, &inventory)?;
            if records.is_empty() {
                return Err(EdaError::EmptyInput("predictions file"));
            }
            Ok(AnnotatorKind::ALL
                .iter()
                .map(|k| records.iter().map(|r| r.labels[k.index()].clone()).collect())
                .collect())
        } else {
            if a.raters.len() != AnnotatorKind::ALL.len() {
                return Err(EdaError::InvalidConfig(format!(
                    "pass --predictions <file>, or exactly {} per-rater files in \
                     canonical annotator order; got {}",
                    AnnotatorKind::ALL.len(),
                    a.raters.len()
                )));
            }
            a.raters
                .iter()
                .map(|path| -> Result<Vec<String>> {
                    let text = String::from_utf8(read_bytes(path)?).map_err(|e| {
                        EdaError::MalformedLine {
                            line: 0,
                            message: format!("{}: {e}", path.display()),
                        }
                    })?;
                    let mut lines: Vec<String> = text
                        .lines()
                        .map(|l| l.trim_end_matches('\r').to_string())
                        .collect();
                    while lines.last().is_some_and(|l| l.is_empty()) {
                        lines.pop();
                    }
                    Ok(lines)
                })
                .collect()
        }
    })?;

    let report = manifest.stage("metrics", || reliability_report(&sequences, &inventory))?;
    if let Some(out) = &a.out {
        manifest.stage("write", || write_bytes(out, &emit_report_csv(&report)))?;
        manifest.output(out);
    }
    print_report_table(&report);
    let manifest_dir = a
        .out
        .as_ref()
        .map(|p| parent_dir(p))
        .unwrap_or_else(|| PathBuf::from("."));
    manifest.write(&manifest_dir)?;
    Ok(())
}

fn cmd_analyze(a: AnalyzeArgs, args: Vec<String>) -> Result<()> {
    let mut manifest = RunManifest::new("analyze", args, None);
    let inventory = load_inventory(&a.inventory)?;
    if let Some(p) = &a.inventory {
        manifest.input(p);
    }
    manifest.input(&a.annotated);
    let mut annotated: AnnotatedCorpus = manifest.stage("parse", || -> Result<_> {
        parse_annotated(&read_bytes(&a.annotated)?, a.scheme, &inventory)
    })?;
    if let Some(path) = &a.predictions {
        manifest.input(path);
        let records = parse_predictions(&read_bytes(path)?, &inventory)?;
        attach_predictions(&mut annotated, &records)?;
    }

    let matrix = manifest.stage("cooccurrence", || {
        cooccurrence(&annotated, a.axis, &inventory)
    })?;
    let distribution = manifest.stage("distribution", || da_distribution(&annotated, &inventory))?;
    let coocc_path = a.out_dir.join("cooccurrence.csv");
    let dist_path = a.out_dir.join("distribution.csv");
    let chart_path = a.out_dir.join("chart.svg");
    manifest.stage("write", || -> Result<()> {
        write_bytes(&coocc_path, &emit_cooccurrence_csv(&matrix))?;
        write_bytes(&dist_path, &emit_distribution_csv(&distribution))?;
        write_bytes(&chart_path, &emit_cooccurrence_svg(&matrix, a.top_k))?;
        Ok(())
    })?;
    manifest.output(&coocc_path);
    manifest.output(&dist_path);
    manifest.output(&chart_path);

    if let Some(filter) = &a.cases {
        let filter = CaseFilter::parse(filter)?;
        let rows = manifest.stage("cases", || extract_cases(&annotated, &filter))?;
        let path = a.out_dir.join("cases.csv");
        write_bytes(&path, &emit_cases_csv(&rows))?;
        manifest.output(&path);
        println!("{} case rows match {filter}", rows.len());
    }

    println!(
        "{} axis: {} labelled utterances across {} dialogue acts",
        a.axis,
        matrix.total(),
        (0..matrix.da_codes().len())
            .filter(|&r| !matrix.is_zero_row(r))
            .count()
    );
    manifest.write(&a.out_dir)?;
    Ok(())
}

/// The first `classes` tags of the default inventory plus the
/// non-determinable placeholder: a small probe inventory for checks.
fn truncated_inventory(classes: usize) -> Result<TagInventory> {
    let full = default_inventory();
    if classes == 0 || classes > full.num_classes() {
        return Err(EdaError::InvalidConfig(format!(
            "--classes must be in 1..={}",
            full.num_classes()
        )));
    }
    let mut tags: Vec<_> = full.tags()[..classes].to_vec();
    tags.push(full.tags()[full.len() - 1].clone());
    TagInventory::new(tags)
}

fn cmd_gradcheck(a: GradcheckArgs, args: Vec<String>) -> Result<()> {
    let mut manifest = RunManifest::new("gradcheck", args, Some(a.seed));
    if !(a.threshold.is_finite() && a.threshold > 0.0) {
        return Err(EdaError::InvalidConfig(
            "--threshold must be a positive finite number".into(),
        ));
    }
    let inventory = truncated_inventory(a.classes)?;
    let mut config = SyntheticConfig::new(a.classes, 2, rng::derive_seed(a.seed, "probe"));
    config.turns = (4, 6);
    let corpus = generate_synthetic(&config, &inventory)?;
    let dialogue = &corpus.dialogues[0];
    // A mid-dialogue position, so context models see real predecessors.
    let position = 2.min(dialogue.len() - 1);
    let gold_class = dialogue.utterances[position]
        .gold_da
        .as_ref()
        .and_then(|code| inventory.class_index(code))
        .expect("synthetic utterances carry class golds");

    let provider = EmbeddingProvider::pseudo(rng::derive_seed(a.seed, "embeddings"), a.dim);
    let mut failed_kinds = 0usize;
    let kinds = a.kind.kinds();
    for &kind in &kinds {
        let model = AnnotatorModel::new(
            kind,
            &inventory,
            provider.clone(),
            a.hidden,
            rng::derive_seed(a.seed, kind.label()),
        )?;
        let report = manifest.stage(kind.label(), || {
            gradient_check(
                &model,
                dialogue,
                position,
                gold_class,
                CHECK_EPSILON,
                a.threshold,
            )
        })?;
        let verdict = if report.passed() { "PASS" } else { "FAIL" };
        println!(
            "== {} ({} params, max rel error {:.3e}): {verdict}",
            kind.label(),
            report.params_checked,
            report.max_rel_error
        );
        for (name, tensor) in model.params.tensors() {
            println!("   {:<14} {:>3} x {:<3}", name, tensor.rows, tensor.cols);
        }
        for failure in &report.failures {
            println!(
                "   FAIL {}[{}] analytic {:+.6e} numeric {:+.6e} rel {:.3e}",
                failure.tensor, failure.index, failure.analytic, failure.numeric, failure.rel_error
            );
        }
        if !report.passed() {
            failed_kinds += 1;
        }
    }
    manifest.write(&a.out)?;
    if failed_kinds > 0 {
        return Err(EdaError::GradientCheck(format!(
            "{failed_kinds} of {} kinds exceeded threshold {:e}",
            kinds.len(),
            a.threshold
        )));
    }
    Ok(())
}
