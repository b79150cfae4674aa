//! Vertex risks and a sampled properness check at a few correctness
//! probabilities.
//!
//! cargo run --example verify_properness

use tokbrier::psr::{verify_properness, verify_rule, RiskProfile, ScoringRule};
use tokbrier::ConfidenceScale;

fn main() -> tokbrier::Result<()> {
    let scale = ConfidenceScale::new(10)?;
    for eta in [0.0, 0.33, 0.65, 0.667, 1.0] {
        let profile = RiskProfile::new(eta, scale)?;
        let report = verify_properness(eta, scale, 20_000, 7)?;
        println!(
            "eta {eta:<5}: nearest token {:>2}, optimal vertices {:?}, margin {:.2e}, best sample {:.6} vs vertex {:.6} -> {}",
            report.nearest_token,
            profile.argmin_vertices(),
            profile.runner_up_gap().unwrap_or(0.0),
            report.best_sampled_risk,
            report.min_risk,
            if report.holds { "holds" } else { "FAILS" }
        );
    }

    // The expected absolute error is not proper: it pushes mass to the ends.
    let bad = verify_rule(ScoringRule::TokenizedAbsolute, 0.65, scale, 1000, 7)?;
    println!(
        "absolute error at eta 0.65: optimal vertices {:?}, nearest {} -> {}",
        bad.argmin_vertices,
        bad.nearest_token,
        if bad.holds { "holds" } else { "fails" }
    );
    Ok(())
}
