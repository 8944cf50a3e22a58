//! Pull qualitative case tables out of an annotated corpus: the
//! utterances the ensemble could not determine, and a chosen
//! gold-vs-fused confusion, each row carrying the five votes and the
//! previous turn's fused act.
//!
//! An untrained pool is used on purpose — freshly initialized annotators
//! disagree often, which is exactly what makes the non-determinable and
//! confusion tables interesting to read.
//!
//! Run with: `cargo run --example case_studies`

use eda::analysis::{emit_cases_csv, extract_cases, CaseFilter};
use eda::annotators::{AnnotatorKind, AnnotatorModel};
use eda::corpus::{
    default_inventory, generate_synthetic, EmotionScheme, SyntheticConfig, TagInventory,
};
use eda::encoder::EmbeddingProvider;
use eda::ensemble::{annotate_corpus, AnnotatorPool, DecisionCategory};

fn print_rows(rows: &[eda::analysis::CaseRow], limit: usize) {
    println!(
        "{:<8} {:<5} {:<22} {:<8} {:<22} {:<6} {:<5}",
        "dialogue", "turn", "text", "emotion", "votes", "fused", "p-da"
    );
    for row in rows.iter().take(limit) {
        let mut text = row.text.clone();
        if text.len() > 20 {
            text.truncate(20);
            text.push('…');
        }
        println!(
            "{:<8} {:<5} {:<22} {:<8} {:<22} {:<6} {:<5}",
            row.dialogue_id,
            row.turn_index,
            text,
            row.emotion.as_deref().unwrap_or("-"),
            row.annotator_labels.join(" "),
            row.fused,
            row.previous_da,
        );
    }
    if rows.len() > limit {
        println!("… and {} more", rows.len() - limit);
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = std::env::temp_dir().join("eda_example_case_studies");
    std::fs::create_dir_all(&out_dir)?;

    // Restrict the inventory to the corpus' five classes (plus the
    // placeholder) so even random annotators stay on-topic enough to
    // produce readable confusions rather than pure noise.
    let full = default_inventory();
    let mut tags: Vec<_> = full.tags()[..5].to_vec();
    tags.push(full.tags()[full.len() - 1].clone());
    let inventory = TagInventory::new(tags)?;

    let mut config = SyntheticConfig::new(5, 30, 5);
    config.emotion_scheme = Some(EmotionScheme::Iemocap);
    let corpus = generate_synthetic(&config, &inventory)?;

    // Untrained models: random initializations that commit to whatever
    // class their random weights prefer.
    let provider = EmbeddingProvider::pseudo(5 ^ 0xE1B0, 8);
    let models = AnnotatorKind::ALL
        .iter()
        .map(|&kind| {
            AnnotatorModel::new(
                kind,
                &inventory,
                provider.clone(),
                8,
                5u64.wrapping_mul(31).wrapping_add(kind.index() as u64 + 1),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pool = AnnotatorPool::new(models)?;
    let (annotated, stats) = annotate_corpus(&pool, &corpus)?;
    println!(
        "annotated {} utterances; {} non-determinable",
        annotated.num_utterances(),
        stats.count(DecisionCategory::Nm)
    );

    // Case table 1: where the fusion tree gave up.
    let nm_filter = CaseFilter::parse("category:NM")?;
    let nm_rows = extract_cases(&annotated, &nm_filter)?;
    println!("\nnon-determinable cases ({}):", nm_rows.len());
    print_rows(&nm_rows, 5);

    // Case table 2: a concrete confusion, taken from the first fused
    // label that contradicts its gold.
    let confusion = annotated
        .iter()
        .find_map(|(utt, ann)| {
            let gold = utt.gold_da.as_deref()?;
            (ann.label != gold && ann.label != eda::corpus::XX).then(|| CaseFilter::Confusion {
                expected: gold.to_string(),
                fused: ann.label.clone(),
            })
        })
        .expect("an untrained pool always produces some confusion");
    let confusion_rows = extract_cases(&annotated, &confusion)?;
    println!("\n{confusion} cases ({}):", confusion_rows.len());
    print_rows(&confusion_rows, 5);

    let path = out_dir.join("cases.csv");
    std::fs::write(&path, emit_cases_csv(&nm_rows))?;
    println!("\nwrote {}", path.display());

    Ok(())
}
