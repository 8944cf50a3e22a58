//! Annotate a corpus with a trained five-model pool and fuse the votes.
//!
//! Every utterance gets five independent labels; the fusion tree resolves
//! them in stages — unanimous agreement (AM), context-model consensus
//! (CM), confidence-ranked best-of-three (BM), or non-determinable (NM,
//! labelled "xx"). The annotated corpus, the per-category statistics,
//! and the raw per-annotator votes are all written as files.
//!
//! Run with: `cargo run --example annotate_corpus`

use eda::annotators::{train, AnnotatorKind, AnnotatorModel, TrainConfig};
use eda::corpus::{default_inventory, generate_synthetic, EmotionScheme, SyntheticConfig};
use eda::encoder::EmbeddingProvider;
use eda::ensemble::{
    annotate_corpus, emit_stats_csv, ensemble_accuracy, serialize_annotated,
    serialize_predictions, AnnotatorPool, DecisionCategory,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = std::env::temp_dir().join("eda_example_annotate_corpus");
    std::fs::create_dir_all(&out_dir)?;
    let inventory = default_inventory();

    let mut config = SyntheticConfig::new(4, 100, 7);
    config.context_rule = true;
    config.emotion_scheme = Some(EmotionScheme::Meld);
    let corpus = generate_synthetic(&config, &inventory)?;

    // Train the pool to convergence on the context rule: the three
    // context models master it while the utterance-level two cannot, so
    // the fusion stages all see real work.
    let provider = EmbeddingProvider::pseudo(7 ^ 0xE1B0, 16);
    let mut models = Vec::new();
    for kind in AnnotatorKind::ALL {
        let kind_seed = 7u64.wrapping_mul(31).wrapping_add(kind.index() as u64 + 1);
        let mut model = AnnotatorModel::new(kind, &inventory, provider.clone(), 16, kind_seed)?;
        train(
            &mut model,
            &corpus,
            &TrainConfig {
                epochs: 12,
                lr: 0.3,
                seed: kind_seed,
            },
        )?;
        models.push(model);
    }
    let pool = AnnotatorPool::new(models)?;

    let (annotated, stats) = annotate_corpus(&pool, &corpus)?;

    // How the decisions were reached.
    println!("{:<9} {:>6} {:>9}", "category", "count", "percent");
    for category in DecisionCategory::ALL {
        println!(
            "{:<9} {:>6} {:>8.2}%",
            category.code(),
            stats.count(category),
            stats.percent(category)
        );
    }
    let accuracy = ensemble_accuracy(&annotated, true)?;
    println!(
        "\nensemble accuracy vs gold: {:.4} ({}/{})",
        accuracy.accuracy, accuracy.correct, accuracy.compared
    );

    // A few fused rows: the five votes and what the tree made of them.
    println!("\n{:<6} {:<24} {:<7} {:<9} votes", "turn", "text", "fused", "category");
    for (utt, ann) in annotated.iter().take(6) {
        let votes = ann.votes.as_ref().unwrap().labels().join(" ");
        let mut text = utt.text.clone();
        if text.len() > 22 {
            text.truncate(22);
            text.push('…');
        }
        println!(
            "{:<6} {:<24} {:<7} {:<9} {}",
            utt.turn_index,
            text,
            ann.label,
            ann.category.code(),
            votes
        );
    }

    // Persist all three artifacts.
    let annotated_path = out_dir.join("annotated.jsonl");
    std::fs::write(&annotated_path, serialize_annotated(&annotated))?;
    let stats_path = out_dir.join("annotated.stats.csv");
    std::fs::write(&stats_path, emit_stats_csv(&stats))?;
    let predictions_path = out_dir.join("predictions.jsonl");
    std::fs::write(&predictions_path, serialize_predictions(&annotated)?)?;
    println!(
        "\nwrote {}\n      {}\n      {}",
        annotated_path.display(),
        stats_path.display(),
        predictions_path.display()
    );

    Ok(())
}
