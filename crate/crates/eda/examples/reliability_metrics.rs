//! Inter-annotator reliability: Krippendorff's α, Fleiss' κ, and Spearman
//! rank correlation over the pool's label sequences.
//!
//! First the metrics are exercised on tiny hand-built matrices with known
//! closed-form values, then on the five annotators' actual labels for a
//! freshly annotated corpus, including the full pairwise correlation
//! table.
//!
//! Run with: `cargo run --example reliability_metrics`

use eda::annotators::{train, AnnotatorKind, AnnotatorModel, TrainConfig};
use eda::corpus::{default_inventory, generate_synthetic, SyntheticConfig};
use eda::encoder::EmbeddingProvider;
use eda::ensemble::{annotate_corpus, AnnotatorPool};
use eda::reliability::{
    fleiss_kappa, krippendorff_alpha, reliability_report, spearman_pairwise, LabelMatrix,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Known closed-form cases first. Each row is one item, each entry one
    // rater's label index.
    let perfect = LabelMatrix::new(vec![vec![0, 0, 0], vec![1, 1, 1], vec![0, 0, 0]], 2)?;
    println!(
        "three raters, always the same label:  α = {:.4}, κ = {:.4}",
        krippendorff_alpha(&perfect).value,
        fleiss_kappa(&perfect).value
    );

    // Two raters who never agree on two symmetric labels: the classic
    // systematic-disagreement values α = −1/2 and κ = −1.
    let swapped = LabelMatrix::new(vec![vec![0, 1], vec![1, 0]], 2)?;
    println!(
        "two raters, systematic disagreement:  α = {:.4}, κ = {:.4}",
        krippendorff_alpha(&swapped).value,
        fleiss_kappa(&swapped).value
    );

    // Agreement on one item out of two lands κ exactly on −1/3.
    let partial = LabelMatrix::new(vec![vec![0, 0], vec![0, 1]], 2)?;
    println!(
        "two raters, one agreement of two:     α = {:+.4}, κ = {:+.4}",
        krippendorff_alpha(&partial).value,
        fleiss_kappa(&partial).value
    );

    // Now the real thing: annotate a corpus and measure how much the five
    // annotators agree with each other.
    let inventory = default_inventory();
    let mut config = SyntheticConfig::new(4, 80, 13);
    config.context_rule = true;
    let corpus = generate_synthetic(&config, &inventory)?;

    let provider = EmbeddingProvider::pseudo(13 ^ 0xE1B0, 16);
    let mut models = Vec::new();
    for kind in AnnotatorKind::ALL {
        let kind_seed = 13u64.wrapping_mul(31).wrapping_add(kind.index() as u64 + 1);
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
    let (annotated, _) = annotate_corpus(&pool, &corpus)?;

    // One label sequence per annotator, aligned by utterance.
    let mut sequences: Vec<Vec<String>> = vec![Vec::new(); AnnotatorKind::ALL.len()];
    for (_, ann) in annotated.iter() {
        let bundle = ann.votes.as_ref().unwrap();
        for kind in AnnotatorKind::ALL {
            sequences[kind.index()].push(bundle.vote(kind).label.clone());
        }
    }

    let report = reliability_report(&sequences, &inventory)?;
    println!(
        "\npool of five on {} utterances:\n  Krippendorff α          = {:.4}\n  Fleiss κ                = {:.4}\n  Spearman (con1 vs con2) = {:.4}",
        annotated.num_utterances(),
        report.alpha.value,
        report.kappa.value,
        report.spearman_context.value
    );

    println!("\npairwise Spearman correlations:");
    print!("{:>8}", "");
    for kind in AnnotatorKind::ALL {
        print!("{:>8}", kind.label());
    }
    println!();
    let pairwise = spearman_pairwise(&sequences, &inventory)?;
    for (i, row) in pairwise.iter().enumerate() {
        print!("{:>8}", AnnotatorKind::ALL[i].label());
        for metric in row {
            print!("{:>8.3}", metric.value);
        }
        println!();
    }

    Ok(())
}
