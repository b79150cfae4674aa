//! Render a reliability diagram and a cascade curve to SVG files.
//!
//! cargo run --example reliability_svg -- [out_dir]

use std::path::PathBuf;

use tokbrier::apps::CurvePoint;
use tokbrier::cli::svg::{curve_svg, reliability_svg};
use tokbrier::cli::write_atomic;
use tokbrier::metrics::reliability_diagram;
use tokbrier::synthetic::{confidence_records, generate, EtaFunction};

fn main() -> tokbrier::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let data = generate(&EtaFunction::logistic(vec![2.0], 0.0)?, 5_000, 1, 3)?;
    // Overconfident: pushes every confidence halfway towards 1.
    let records = confidence_records(&data, "overconfident", |e| Ok((e + 1.0) / 2.0))?;
    let diagram = reliability_diagram(&records, 10)?;
    write_atomic(&out.join("reliability.svg"), reliability_svg(diagram.bins()).as_bytes())?;

    let curve: Vec<CurvePoint> = (0..=4)
        .map(|k| CurvePoint {
            budget: 100 * k,
            expected_accuracy: 0.55 + 0.065 * k as f64 - 0.005 * (k * k) as f64,
        })
        .collect();
    write_atomic(&out.join("curve.svg"), curve_svg(&curve).as_bytes())?;
    println!(
        "ECE {:.4}; wrote reliability.svg and curve.svg to {}",
        diagram.ece(),
        out.display()
    );
    Ok(())
}
