//! Self-correction helps when low confidence marks wrong answers and hurts
//! when it marks right ones.
//!
//! cargo run --example self_correction

use tokbrier::apps::{expected_self_correction, simulate_self_correction, SimPolicy};
use tokbrier::synthetic::{bayes_optimal_records, confidence_records, generate, EtaFunction};
use tokbrier::ConfidenceScale;

fn main() -> tokbrier::Result<()> {
    let scale = ConfidenceScale::new(10)?;
    let data = generate(&"piecewise:0:0.1,1".parse::<EtaFunction>()?, 2_000, 2, 5)?;
    let calibrated = bayes_optimal_records(&data, scale)?;
    let inverted = confidence_records(&data, "inverted", |e| Ok(1.0 - e))?;
    let policy = SimPolicy {
        seed: 1,
        ..SimPolicy::self_correct()
    };

    for (name, records) in [("calibrated", &calibrated), ("inverted", &inverted)] {
        let sampled = simulate_self_correction(records, &policy)?;
        let conf: Vec<f64> = records.iter().map(|r| r.confidence()).collect();
        let (_, expected) = expected_self_correction(&conf, &data.true_eta, &policy)?;
        println!(
            "{name:<10}: accuracy {:.3} -> {:.3} (expected {expected:.3}), refined {}",
            sampled.accuracy_before, sampled.accuracy_after, sampled.triggered_count
        );
    }
    Ok(())
}
