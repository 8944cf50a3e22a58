//! End-to-end checks of the `eda` binary: the full pipeline on a small
//! synthetic corpus, rerun determinism, and the exit-code contract
//! (0 success, 1 usage, 2 data, 3 numeric).

use std::path::Path;
use std::process::{Command, Output};

use eda::corpus::{default_inventory, parse_corpus, EmotionScheme, SchemeSpec};
use eda::ensemble::parse_annotated;

fn eda_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eda"))
}

fn run(args: &[&str]) -> Output {
    eda_bin().args(args).output().expect("binary runs")
}

fn assert_status(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn path_str(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

#[test]
fn full_pipeline_runs_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let corpus = root.join("corpus.jsonl");

    // Synthesize a small context-rule corpus with emotion labels.
    let synth_args = |out: &Path| {
        vec![
            "synth".to_string(),
            "--classes".into(),
            "4".into(),
            "--dialogues".into(),
            "24".into(),
            "--context-rule".into(),
            "--emotions".into(),
            "meld".into(),
            "--seed".into(),
            "9".into(),
            "--out".into(),
            out.display().to_string(),
        ]
    };
    let out = eda_bin().args(synth_args(&corpus)).output().unwrap();
    assert_status(&out, 0);
    assert!(root.join("run.json").exists());
    let corpus_bytes = std::fs::read(&corpus).unwrap();
    let parsed = parse_corpus(
        &corpus_bytes,
        SchemeSpec::with_emotion(EmotionScheme::Meld),
        &default_inventory(),
    )
    .unwrap();
    assert_eq!(parsed.dialogues.len(), 24);

    // Same flags, second file: byte-identical.
    let corpus_again = root.join("corpus-again.jsonl");
    let out = eda_bin().args(synth_args(&corpus_again)).output().unwrap();
    assert_status(&out, 0);
    assert_eq!(std::fs::read(&corpus_again).unwrap(), corpus_bytes);

    // Train the five-model pool, twice, into separate directories.
    let train_args = |ckpt: &Path| {
        vec![
            "train".to_string(),
            "all".into(),
            "--corpus".into(),
            corpus.display().to_string(),
            "--scheme".into(),
            "meld".into(),
            "--seed".into(),
            "9".into(),
            "--epochs".into(),
            "4".into(),
            "--hidden".into(),
            "8".into(),
            "--dim".into(),
            "8".into(),
            "--out".into(),
            ckpt.display().to_string(),
        ]
    };
    let ckpt = root.join("ckpt");
    let out = eda_bin().args(train_args(&ckpt)).output().unwrap();
    assert_status(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("model"), "missing report header: {stdout}");
    for kind in ["utt-l1", "utt-l2", "con1", "con2", "con3"] {
        assert!(ckpt.join(format!("{kind}.dana")).exists());
        assert!(stdout.contains(kind), "missing {kind} row: {stdout}");
    }
    assert!(ckpt.join("run.json").exists());

    let ckpt2 = root.join("ckpt2");
    let out = eda_bin().args(train_args(&ckpt2)).output().unwrap();
    assert_status(&out, 0);
    for kind in ["utt-l1", "utt-l2", "con1", "con2", "con3"] {
        let name = format!("{kind}.dana");
        assert_eq!(
            std::fs::read(ckpt.join(&name)).unwrap(),
            std::fs::read(ckpt2.join(&name)).unwrap(),
            "checkpoint {name} differs between identical runs"
        );
    }

    // Annotate, twice; outputs must match byte-for-byte.
    let annotated = root.join("annotated.jsonl");
    let predictions = root.join("predictions.jsonl");
    let annotate_args = |out_file: &Path, preds: &Path| {
        vec![
            "annotate".to_string(),
            "--checkpoints".into(),
            ckpt.display().to_string(),
            "--corpus".into(),
            corpus.display().to_string(),
            "--scheme".into(),
            "meld".into(),
            "--out".into(),
            out_file.display().to_string(),
            "--predictions-out".into(),
            preds.display().to_string(),
        ]
    };
    let out = eda_bin()
        .args(annotate_args(&annotated, &predictions))
        .output()
        .unwrap();
    assert_status(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    for category in ["AM", "CM", "BM", "NM"] {
        assert!(stdout.contains(category), "missing {category}: {stdout}");
    }
    assert!(stdout.contains("ensemble accuracy"));
    let stats = root.join("annotated.stats.csv");
    assert!(stats.exists());

    let annotated_bytes = std::fs::read(&annotated).unwrap();
    let reparsed = parse_annotated(
        &annotated_bytes,
        SchemeSpec::with_emotion(EmotionScheme::Meld),
        &default_inventory(),
    )
    .unwrap();
    assert_eq!(reparsed.corpus.num_utterances(), parsed.num_utterances());

    let annotated2 = root.join("annotated2.jsonl");
    let predictions2 = root.join("predictions2.jsonl");
    let out = eda_bin()
        .args(annotate_args(&annotated2, &predictions2))
        .output()
        .unwrap();
    assert_status(&out, 0);
    assert_eq!(std::fs::read(&annotated2).unwrap(), annotated_bytes);
    assert_eq!(
        std::fs::read(&predictions2).unwrap(),
        std::fs::read(&predictions).unwrap()
    );

    // Reliability metrics from the predictions sidecar.
    let report = root.join("report.csv");
    let out = run(&[
        "metrics",
        "--predictions",
        path_str(&predictions),
        "--out",
        path_str(&report),
    ]);
    assert_status(&out, 0);
    let report_text = std::fs::read_to_string(&report).unwrap();
    assert_eq!(report_text.lines().count(), 4, "header plus three metric rows");
    assert!(report_text.starts_with("metric,value,degenerate_flag"));
    for metric in ["alpha", "kappa", "scc"] {
        assert!(report_text.contains(metric));
    }

    // Analytics: co-occurrence, distribution, chart, and case table.
    let analysis_dir = root.join("analysis");
    let out = run(&[
        "analyze",
        "--annotated",
        path_str(&annotated),
        "--predictions",
        path_str(&predictions),
        "--scheme",
        "meld",
        "--axis",
        "emotion",
        "--top-k",
        "3",
        "--cases",
        "category:AM",
        "--out-dir",
        path_str(&analysis_dir),
    ]);
    assert_status(&out, 0);
    for name in ["cooccurrence.csv", "distribution.csv", "chart.svg", "cases.csv", "run.json"] {
        assert!(analysis_dir.join(name).exists(), "missing {name}");
    }
    let svg = std::fs::read_to_string(analysis_dir.join("chart.svg")).unwrap();
    assert!(svg.starts_with("<svg "));
}

#[test]
fn exit_codes_follow_the_contract() {
    // Usage errors: missing required flag, unknown subcommand.
    assert_status(&run(&["synth"]), 1);
    assert_status(&run(&["frobnicate"]), 1);

    // Data errors: missing input files.
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    assert_status(
        &run(&[
            "train",
            "--corpus",
            "/nonexistent/corpus.jsonl",
            "--out",
            path_str(&out_dir),
        ]),
        2,
    );
    assert_status(
        &run(&["metrics", "--predictions", "/nonexistent/p.jsonl"]),
        2,
    );

    // Scheme error: sentiment axis on a corpus without sentiment labels.
    let corpus = dir.path().join("corpus.jsonl");
    assert_status(
        &run(&[
            "synth",
            "--classes",
            "3",
            "--dialogues",
            "4",
            "--seed",
            "3",
            "--out",
            path_str(&corpus),
        ]),
        0,
    );
    let ckpt = dir.path().join("ckpt");
    assert_status(
        &run(&[
            "train",
            "all",
            "--corpus",
            path_str(&corpus),
            "--epochs",
            "2",
            "--hidden",
            "4",
            "--dim",
            "4",
            "--out",
            path_str(&ckpt),
        ]),
        0,
    );
    let annotated = dir.path().join("annotated.jsonl");
    assert_status(
        &run(&[
            "annotate",
            "--checkpoints",
            path_str(&ckpt),
            "--corpus",
            path_str(&corpus),
            "--out",
            path_str(&annotated),
        ]),
        0,
    );
    let analysis_dir = dir.path().join("analysis");
    assert_status(
        &run(&[
            "analyze",
            "--annotated",
            path_str(&annotated),
            "--axis",
            "sentiment",
            "--out-dir",
            path_str(&analysis_dir),
        ]),
        2,
    );

    // Missing checkpoint kind is a data error.
    std::fs::remove_file(ckpt.join("con2.dana")).unwrap();
    assert_status(
        &run(&[
            "annotate",
            "--checkpoints",
            path_str(&ckpt),
            "--corpus",
            path_str(&corpus),
            "--out",
            path_str(&annotated),
        ]),
        2,
    );

    // Numeric failure: an impossible gradient-check threshold.
    let gradcheck_dir = dir.path().join("gradcheck");
    std::fs::create_dir_all(&gradcheck_dir).unwrap();
    let out = run(&[
        "gradcheck",
        "con3",
        "--hidden",
        "2",
        "--dim",
        "4",
        "--threshold",
        "1e-18",
        "--out",
        path_str(&gradcheck_dir),
    ]);
    assert_status(&out, 3);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL"));
}

#[test]
fn gradcheck_reports_every_tensor_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "gradcheck",
        "con1",
        "--hidden",
        "3",
        "--dim",
        "4",
        "--seed",
        "21",
        "--out",
        path_str(dir.path()),
    ]);
    assert_status(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS"));
    // Every parameter tensor of the hierarchical model is listed.
    for tensor in ["word_gru.wz", "word_attn.v", "ctx_gru.wz", "ctx_attn.v", "out.w", "out.b"] {
        assert!(stdout.contains(tensor), "missing tensor {tensor}: {stdout}");
    }
    assert!(dir.path().join("run.json").exists());
}
