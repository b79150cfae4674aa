//! ECE, AUROC and a reliability diagram for a handful of records.
//!
//! cargo run --example calibration_metrics

use tokbrier::metrics::{evaluate, DEFAULT_BINS};
use tokbrier::{CalibrationRecord, CorrectnessLabel};

fn main() -> tokbrier::Result<()> {
    let raw = [
        (0.95, true),
        (0.9, true),
        (0.9, false),
        (0.8, true),
        (0.75, true),
        (0.6, false),
        (0.55, true),
        (0.4, false),
        (0.3, true),
        (0.1, false),
    ];
    let records = raw
        .iter()
        .enumerate()
        .map(|(i, &(c, y))| CalibrationRecord::with_confidence(format!("q{i}"), c, CorrectnessLabel::from(y)))
        .collect::<tokbrier::Result<Vec<_>>>()?;

    let (report, diagram) = evaluate(&records, DEFAULT_BINS)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    diagram.write_csv(std::io::stdout())?;
    Ok(())
}
