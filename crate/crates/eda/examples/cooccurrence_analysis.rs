//! Cross-tabulate fused dialogue acts against emotion labels and render
//! the result as CSV tables and a grouped SVG bar chart.
//!
//! The synthetic generator couples emotions to acts, so the normalized
//! co-occurrence rows have visible structure rather than being flat.
//! Both analysis axes are shown: the emotion inventory and the coarse
//! sentiment polarity.
//!
//! Run with: `cargo run --example cooccurrence_analysis`

use eda::analysis::{
    cooccurrence, da_distribution, emit_cooccurrence_csv, emit_cooccurrence_svg,
    emit_distribution_csv, AnalysisAxis,
};
use eda::annotators::{train, AnnotatorKind, AnnotatorModel, TrainConfig};
use eda::corpus::{default_inventory, generate_synthetic, EmotionScheme, SyntheticConfig};
use eda::encoder::EmbeddingProvider;
use eda::ensemble::{annotate_corpus, AnnotatorPool};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = std::env::temp_dir().join("eda_example_cooccurrence");
    std::fs::create_dir_all(&out_dir)?;
    let inventory = default_inventory();

    let mut config = SyntheticConfig::new(5, 60, 31);
    config.emotion_scheme = Some(EmotionScheme::Meld);
    config.sentiment = true;
    let corpus = generate_synthetic(&config, &inventory)?;

    let provider = EmbeddingProvider::pseudo(31 ^ 0xE1B0, 8);
    let mut models = Vec::new();
    for kind in AnnotatorKind::ALL {
        let kind_seed = 31u64.wrapping_mul(31).wrapping_add(kind.index() as u64 + 1);
        let mut model = AnnotatorModel::new(kind, &inventory, provider.clone(), 8, kind_seed)?;
        train(
            &mut model,
            &corpus,
            &TrainConfig {
                epochs: 6,
                lr: 0.3,
                seed: kind_seed,
            },
        )?;
        models.push(model);
    }
    let pool = AnnotatorPool::new(models)?;
    let (annotated, _) = annotate_corpus(&pool, &corpus)?;

    // How often each fused act is annotated at all.
    let distribution = da_distribution(&annotated, &inventory)?;
    println!("{:<5} {:>6} {:>9}", "act", "count", "percent");
    for (i, code) in distribution.da_codes().iter().enumerate() {
        if distribution.counts()[i] > 0 {
            println!(
                "{:<5} {:>6} {:>8.2}%",
                code,
                distribution.counts()[i],
                distribution.percent(i)
            );
        }
    }

    // Acts × emotions, row-normalized: each row answers "given this act,
    // which emotions does it come with?".
    let matrix = cooccurrence(&annotated, AnalysisAxis::Emotion, &inventory)?;
    println!("\nact × emotion (row-normalized):");
    print!("{:>5}", "");
    for code in matrix.axis_codes() {
        print!("{code:>10}");
    }
    println!();
    for (i, da) in matrix.da_codes().iter().enumerate() {
        if matrix.is_zero_row(i) {
            continue;
        }
        print!("{da:>5}");
        for j in 0..matrix.axis_codes().len() {
            print!("{:>10.3}", matrix.normalized()[i][j]);
        }
        println!();
    }

    // The same table along the coarse sentiment axis.
    let sentiment = cooccurrence(&annotated, AnalysisAxis::Sentiment, &inventory)?;
    println!("\nact × sentiment (row-normalized):");
    print!("{:>5}", "");
    for code in sentiment.axis_codes() {
        print!("{code:>10}");
    }
    println!();
    for (i, da) in sentiment.da_codes().iter().enumerate() {
        if sentiment.is_zero_row(i) {
            continue;
        }
        print!("{da:>5}");
        for j in 0..sentiment.axis_codes().len() {
            print!("{:>10.3}", sentiment.normalized()[i][j]);
        }
        println!();
    }

    // Persist: sparse co-occurrence CSV, dense distribution CSV, and the
    // grouped bar chart (top 4 acts by frequency).
    let coocc_path = out_dir.join("cooccurrence.csv");
    std::fs::write(&coocc_path, emit_cooccurrence_csv(&matrix))?;
    let dist_path = out_dir.join("distribution.csv");
    std::fs::write(&dist_path, emit_distribution_csv(&distribution))?;
    let chart_path = out_dir.join("chart.svg");
    std::fs::write(&chart_path, emit_cooccurrence_svg(&matrix, Some(4)))?;
    println!(
        "\nwrote {}\n      {}\n      {}",
        coocc_path.display(),
        dist_path.display(),
        chart_path.display()
    );

    Ok(())
}
