//! Descending the conditional risk from random logits ends on the vertex
//! nearest to eta.
//!
//! cargo run --example descent_to_vertex

use tokbrier::psr::{minimize_risk_descent, DEFAULT_DESCENT_STEPS, DEFAULT_DESCENT_STEP_SIZE};
use tokbrier::ConfidenceScale;

fn main() -> tokbrier::Result<()> {
    let scale = ConfidenceScale::PERCENT;
    for (seed, eta) in [0.05, 0.333, 0.667, 0.904, 0.97].into_iter().enumerate() {
        let q = minimize_risk_descent(
            eta,
            scale,
            DEFAULT_DESCENT_STEPS,
            DEFAULT_DESCENT_STEP_SIZE,
            seed as u64,
        )?;
        let top = q.argmax();
        println!(
            "eta {eta:<5} -> token {top:>3} ({}%) with mass {:.6}; nearest token {}",
            top,
            q.values()[top],
            scale.nearest_token(eta)?
        );
    }
    Ok(())
}
