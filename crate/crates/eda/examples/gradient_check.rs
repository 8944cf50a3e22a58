//! Verify every hand-rolled backward pass against central differences.
//!
//! For each of the five architectures, the analytic gradient of the
//! cross-entropy loss at one utterance is compared element-by-element
//! with `(L(θ+ε) − L(θ−ε)) / 2ε`. All parameter tensors are covered —
//! GRU gates, attention projections, and the output layer.
//!
//! Run with: `cargo run --example gradient_check`

use eda::annotators::{gradient_check, AnnotatorKind, AnnotatorModel};
use eda::corpus::{default_inventory, generate_synthetic, SyntheticConfig, TagInventory};
use eda::encoder::EmbeddingProvider;

const EPSILON: f64 = 1e-5;
const THRESHOLD: f64 = 1e-4;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A small instrument keeps the finite-difference sweep quick: three
    // classes, hidden size 4, embedding size 8.
    let full = default_inventory();
    let mut tags: Vec<_> = full.tags()[..3].to_vec();
    tags.push(full.tags()[full.len() - 1].clone()); // keep the xx placeholder
    let small = TagInventory::new(tags)?;

    let mut config = SyntheticConfig::new(3, 2, 4105);
    config.turns = (4, 6);
    let corpus = generate_synthetic(&config, &small)?;
    let dialogue = &corpus.dialogues[0];
    let position = 2.min(dialogue.len() - 1);
    let gold = small
        .class_index(dialogue.utterances[position].gold_da.as_deref().unwrap())
        .unwrap();

    let provider = EmbeddingProvider::pseudo(4105, 8);

    println!(
        "checking ∂L/∂θ at turn {position}, ε = {EPSILON:.0e}, threshold = {THRESHOLD:.0e}\n"
    );
    println!("{:<8} {:>8} {:>14}  result", "model", "params", "max rel err");
    let mut all_passed = true;
    for kind in AnnotatorKind::ALL {
        let model = AnnotatorModel::new(kind, &small, provider.clone(), 4, 91)?;
        let report = gradient_check(&model, dialogue, position, gold, EPSILON, THRESHOLD)?;
        all_passed &= report.passed();
        println!(
            "{:<8} {:>8} {:>14.3e}  {}",
            kind.label(),
            report.params_checked,
            report.max_rel_error,
            if report.passed() { "PASS" } else { "FAIL" }
        );
        for failure in &report.failures {
            println!(
                "    {}[{}]: analytic {:+.3e} vs numeric {:+.3e} (rel {:.3e})",
                failure.tensor, failure.index, failure.analytic, failure.numeric, failure.rel_error
            );
        }
    }

    // The tensors behind one of those parameter counts.
    let model = AnnotatorModel::new(AnnotatorKind::Context3, &small, provider, 4, 91)?;
    println!("\ncon3 parameter tensors:");
    for (name, tensor) in model.params.tensors() {
        println!("    {:<14} {:>2} x {}", name, tensor.rows, tensor.cols);
    }

    assert!(all_passed, "a gradient check failed");
    println!("\nall five architectures match central differences.");
    Ok(())
}
