//! Generate synthetic conversational corpora and write them as JSONL.
//!
//! Two corpora are produced: one whose gold dialogue act depends only on
//! the utterance itself, and one whose gold act is coupled to the
//! *previous* turn — the configuration that separates context-aware
//! annotators from utterance-only ones. The second corpus also carries
//! emotion and sentiment labels.
//!
//! Run with: `cargo run --example synth_corpus`

use eda::corpus::{
    default_inventory, generate_synthetic, holdout_split, serialize_corpus, EmotionScheme,
    SyntheticConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = std::env::temp_dir().join("eda_example_synth_corpus");
    std::fs::create_dir_all(&out_dir)?;
    let inventory = default_inventory();

    // An utterance-only corpus: the gold act is recoverable from the cue
    // word inside each utterance.
    let mut config = SyntheticConfig::new(4, 30, 42);
    config.emotion_scheme = Some(EmotionScheme::Meld);
    config.sentiment = true;
    let flat = generate_synthetic(&config, &inventory)?;
    println!(
        "utterance-rule corpus: {} dialogues, {} utterances",
        flat.dialogues.len(),
        flat.num_utterances()
    );

    // A context-rule corpus: the gold act of turn t is a function of the
    // *previous* turn's topic, so reading turn t alone is not enough.
    let mut config = SyntheticConfig::new(4, 30, 42);
    config.context_rule = true;
    config.emotion_scheme = Some(EmotionScheme::Meld);
    config.sentiment = true;
    let contextual = generate_synthetic(&config, &inventory)?;
    println!(
        "context-rule corpus:   {} dialogues, {} utterances",
        contextual.dialogues.len(),
        contextual.num_utterances()
    );

    // A close look at one dialogue.
    println!("\nfirst dialogue of the context-rule corpus:");
    println!(
        "{:<5} {:<8} {:<5} {:<9} {:<9}  text",
        "turn", "speaker", "act", "emotion", "sentiment"
    );
    for utt in &contextual.dialogues[0].utterances {
        println!(
            "{:<5} {:<8} {:<5} {:<9} {:<9}  {}",
            utt.turn_index,
            utt.speaker,
            utt.gold_da.as_deref().unwrap_or("-"),
            utt.emotion.map(|e| e.code()).unwrap_or("-"),
            utt.sentiment.map(|s| s.code()).unwrap_or("-"),
            utt.text,
        );
    }

    // Hold out every fifth dialogue for evaluation.
    let (train, held) = holdout_split(&contextual, 5);
    println!(
        "\nholdout split (every 5th): {} train / {} held-out dialogues",
        train.dialogues.len(),
        held.dialogues.len()
    );

    // The JSONL serialization round-trips bit-for-bit; regenerating with
    // the same seed reproduces it exactly.
    let path = out_dir.join("contextual.jsonl");
    let bytes = serialize_corpus(&contextual);
    std::fs::write(&path, &bytes)?;
    println!("\nwrote {} ({} bytes)", path.display(), bytes.len());
    let first_line = bytes.split(|&b| b == b'\n').next().unwrap();
    println!("first record: {}", String::from_utf8_lossy(first_line));

    Ok(())
}
