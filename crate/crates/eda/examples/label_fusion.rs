//! Walk the four-stage fusion tree on hand-built vote bundles.
//!
//! Five annotators each commit to a label with a confidence; fusion
//! resolves them in strict stage order:
//!
//! 1. AM — all five agree.
//! 2. CM — the three context models agree; or exactly one context pair
//!    agrees and at least one utterance-level model backs it.
//! 3. BM — among the three most confident votes, a label appearing at
//!    least twice wins (ties broken by summed confidence).
//! 4. NM — nothing above fired; the utterance is marked "xx".
//!
//! Run with: `cargo run --example label_fusion`

use eda::annotators::AnnotatorKind;
use eda::ensemble::{fuse, PredictionBundle, Vote};

/// Labels and confidences in canonical kind order:
/// utt-l1, utt-l2, con1, con2, con3.
fn bundle(labels: [&str; 5], confidences: [f64; 5]) -> PredictionBundle {
    let votes = AnnotatorKind::ALL
        .iter()
        .zip(labels)
        .zip(confidences)
        .map(|((&kind, label), confidence)| Vote {
            kind,
            label: label.to_string(),
            confidence,
        })
        .collect();
    PredictionBundle::new(votes).expect("valid bundle")
}

fn show(name: &str, b: &PredictionBundle) {
    let decision = fuse(b);
    let votes: Vec<String> = b
        .votes()
        .iter()
        .map(|v| format!("{}:{}@{:.2}", v.kind.label(), v.label, v.confidence))
        .collect();
    println!("{name}\n  votes  {}", votes.join("  "));
    println!("  fused  {} ({})\n", decision.label, decision.category.code());
}

fn main() {
    let even = [0.5; 5];

    // Stage 1: unanimity needs no tie-breaking at all.
    show("all five agree", &bundle(["sd"; 5], even));

    // Stage 2a: the context trio agrees; the utterance-level dissent is
    // overruled regardless of confidence.
    show(
        "context trio agrees",
        &bundle(["ba", "sd", "fc", "fc", "fc"], even),
    );

    // Stage 2b: con1 and con3 agree on "sv" and utt-l2 backs them; the
    // lone pair with utterance-level support carries the decision.
    show(
        "one context pair with utterance backing",
        &bundle(["qy", "sv", "sv", "b", "sv"], even),
    );

    // Stage 3: no context consensus, so the three most confident votes
    // (utt-l2 0.9, con2 0.85, utt-l1 0.5) are consulted; "sd" appears
    // twice among them and wins.
    show(
        "best-of-three by confidence",
        &bundle(
            ["qy", "sd", "qw", "sd", "b"],
            [0.5, 0.9, 0.4, 0.85, 0.3],
        ),
    );

    // Stage 4: three distinct labels in the confident top-3 — nothing to
    // agree on, the utterance is non-determinable.
    show(
        "no agreement anywhere",
        &bundle(
            ["b", "b", "ba", "fc", "b"],
            [0.3, 0.2, 0.9, 0.8, 0.7],
        ),
    );

    // Equal confidences are resolved by a fixed annotator precedence
    // (context models first), keeping fusion fully deterministic.
    show(
        "tie broken by annotator precedence",
        &bundle(["qy", "qw", "sd", "sd", "b"], even),
    );
}
