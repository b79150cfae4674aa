//! Loss and gradient for one set of confidence-token logits.
//!
//! cargo run --example tokenized_brier

use tokbrier::score::tokenized_brier_with_grad;
use tokbrier::{classical_brier, restricted_softmax, ConfidenceScale, CorrectnessLabel, LogitVector};

fn main() -> tokbrier::Result<()> {
    let scale = ConfidenceScale::new(10)?;
    // A model leaning towards "70%" with some mass on the neighbours.
    let logits = LogitVector::for_scale(vec![-2.0, -2.0, -1.5, -1.0, 0.0, 0.5, 1.5, 2.5, 1.5, 0.0, -1.0], scale)?;
    let q = restricted_softmax(&logits);
    println!("q = {:.3?}", q.values());

    for y in [CorrectnessLabel::Correct, CorrectnessLabel::Incorrect] {
        let (loss, grad) = tokenized_brier_with_grad(&logits, y, scale)?;
        let greedy = scale.value(q.argmax());
        println!(
            "y = {}: loss {loss:.4} (greedy {greedy} scores {:.4}), gradient {:+.3?}",
            y.as_f64(),
            classical_brier(greedy, y)?,
            grad
        );
    }
    Ok(())
}
