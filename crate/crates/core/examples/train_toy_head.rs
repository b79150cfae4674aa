//! Train a small confidence head on a two-region task and watch calibration
//! appear from the loss alone.
//!
//! cargo run --release --example train_toy_head

use tokbrier::synthetic::{generate, EtaFunction};
use tokbrier::toy::{train, ToyConfidenceHead, TrainConfig, DEFAULT_HIDDEN, DEFAULT_INPUT_DIM};
use tokbrier::ConfidenceScale;

fn main() -> tokbrier::Result<()> {
    let scale = ConfidenceScale::new(10)?;
    let eta = EtaFunction::two_region();
    let train_set = generate(&eta, 20_000, DEFAULT_INPUT_DIM, 1)?;
    let heldout = generate(&eta, 5_000, DEFAULT_INPUT_DIM, 2)?;
    let mut head = ToyConfidenceHead::new(DEFAULT_INPUT_DIM, DEFAULT_HIDDEN, scale, 3)?;

    let report = train(&mut head, &train_set, &heldout, &TrainConfig::default())?;
    for (epoch, (loss, norm)) in report.epoch_loss.iter().zip(&report.epoch_grad_norm).enumerate() {
        if epoch % 5 == 0 || epoch + 1 == report.epoch_loss.len() {
            println!("epoch {:>2}: loss {loss:.5}, gradient norm {norm:.2e}", epoch + 1);
        }
    }
    println!(
        "held-out ECE {:.4} (untrained {:.4}, oracle {:.4}); greedy token matches the oracle on {:.1}%",
        report.final_ece,
        report.untrained_ece,
        report.oracle_ece,
        100.0 * report.oracle_token_agreement
    );
    for x0 in [-1.0, 1.0] {
        println!(
            "x0 = {x0:+}: says {}",
            scale.value(head.predict_token(&[x0, 0.0, 0.0, 0.0])?)
        );
    }
    Ok(())
}
