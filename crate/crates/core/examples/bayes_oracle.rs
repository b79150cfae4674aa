//! The verbalizer that always reports the token nearest to the true
//! correctness probability is calibrated and ranks answers as well as
//! possible.
//!
//! cargo run --example bayes_oracle

use tokbrier::metrics::{auroc, ece};
use tokbrier::synthetic::{bayes_optimal_records, confidence_records, generate, EtaFunction};
use tokbrier::ConfidenceScale;

fn main() -> tokbrier::Result<()> {
    let scale = ConfidenceScale::new(10)?;
    let eta: EtaFunction = "piecewise:-0.5,0.5:0.2,0.5,0.9".parse()?;
    let data = generate(&eta, 50_000, 2, 1)?;

    let oracle = bayes_optimal_records(&data, scale)?;
    let overconfident = confidence_records(&data, "overconfident", |e| Ok((e + 0.2).min(1.0)))?;
    let flipped = confidence_records(&data, "flipped", |e| Ok(1.0 - e))?;

    for (name, records) in [
        ("oracle", &oracle),
        ("overconfident", &overconfident),
        ("flipped", &flipped),
    ] {
        println!("{name:<14} ECE {:.4}  AUROC {:.4}", ece(records, 10)?, auroc(records)?);
    }
    Ok(())
}
