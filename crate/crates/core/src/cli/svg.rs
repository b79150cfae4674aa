//! Static SVG rendering of reliability diagrams and accuracy curves.

use std::fmt::Write as _;

use crate::apps::{CurvePoint, CURVE_COLUMNS};
use crate::error::{Error, Result};
use crate::metrics::{BinSummary, DIAGRAM_COLUMNS};

const SIZE: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// Bars narrower than this gap are drawn without a gap marker.
const GAP_EPSILON: f64 = 1e-9;

fn x(v: f64) -> f64 {
    MARGIN + v * SIZE
}

fn y(v: f64) -> f64 {
    MARGIN + (1.0 - v) * SIZE
}

fn header(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let full = SIZE + 2.0 * MARGIN;
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" viewBox="0 0 {full} {full}">"#
    );
    let _ = writeln!(out, r#"<title>{title}</title>"#);
    let _ = writeln!(
        out,
        r##"<rect class="frame" x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="#333"/>"##
    );
    for t in 0..=5 {
        let v = t as f64 / 5.0;
        let _ = writeln!(
            out,
            r#"<text class="tick" x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{v:.1}</text>"#,
            x(v),
            y(0.0) + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text class="tick" x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{v:.1}</text>"#,
            x(0.0) - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text class="label" x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{x_label}</text>"#,
        x(0.5),
        y(0.0) + 36.0
    );
    let _ = writeln!(
        out,
        r#"<text class="label" x="14" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {:.1})">{y_label}</text>"#,
        y(0.5),
        y(0.5)
    );
}

/// Accuracy bars per non-empty bin against the identity line. Each bar whose
/// accuracy differs from its mean confidence gets a `gap` rectangle spanning
/// the difference.
pub fn reliability_svg(bins: &[BinSummary]) -> String {
    let mut out = String::new();
    header(&mut out, "Reliability diagram", "confidence", "accuracy");
    for b in bins {
        let (Some(acc), Some(conf)) = (b.accuracy, b.mean_confidence) else {
            continue;
        };
        let width = (b.upper - b.lower) * SIZE;
        let _ = writeln!(
            out,
            r##"<rect class="bar" x="{:.3}" y="{:.3}" width="{width:.3}" height="{:.3}" fill="#4a78b5" stroke="#fff"><title>n={}</title></rect>"##,
            x(b.lower),
            y(acc),
            acc * SIZE,
            b.count
        );
        if (acc - conf).abs() > GAP_EPSILON {
            let _ = writeln!(
                out,
                r##"<rect class="gap" x="{:.3}" y="{:.3}" width="{width:.3}" height="{:.3}" fill="#d9534f" fill-opacity="0.4"/>"##,
                x(b.lower),
                y(acc.max(conf)),
                (acc - conf).abs() * SIZE
            );
        }
    }
    let _ = writeln!(
        out,
        r##"<line class="identity" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#888" stroke-dasharray="6 4"/>"##,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    );
    out.push_str("</svg>\n");
    out
}

/// Expected accuracy against budget, budgets scaled to the plot width.
pub fn curve_svg(points: &[CurvePoint]) -> String {
    let mut out = String::new();
    header(
        &mut out,
        "Expected accuracy vs. budget",
        "budget (fraction of max)",
        "expected accuracy",
    );
    let max_budget = points.iter().map(|p| p.budget).max().unwrap_or(0).max(1) as f64;
    let coords: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (x(p.budget as f64 / max_budget), y(p.expected_accuracy.clamp(0.0, 1.0))))
        .collect();
    let path: Vec<String> = coords.iter().map(|(a, b)| format!("{a:.3},{b:.3}")).collect();
    let _ = writeln!(
        out,
        r##"<polyline class="curve" points="{}" fill="none" stroke="#4a78b5" stroke-width="2"/>"##,
        path.join(" ")
    );
    for ((cx, cy), p) in coords.iter().zip(points) {
        let _ = writeln!(
            out,
            r##"<circle class="point" cx="{cx:.3}" cy="{cy:.3}" r="3" fill="#4a78b5"><title>budget {}: {:.4}</title></circle>"##,
            p.budget, p.expected_accuracy
        );
    }
    out.push_str("</svg>\n");
    out
}

/// A plot input parsed from one of the two CSV schemas.
#[derive(Debug, Clone, PartialEq)]
pub enum PlotData {
    Diagram(Vec<BinSummary>),
    Curve(Vec<CurvePoint>),
}

impl PlotData {
    pub fn to_svg(&self) -> String {
        match self {
            PlotData::Diagram(bins) => reliability_svg(bins),
            PlotData::Curve(points) => curve_svg(points),
        }
    }
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, index: usize, name: &str, line: usize) -> Result<T> {
    let raw = row.get(index).unwrap_or("");
    raw.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("column {name}: cannot parse {raw:?}"),
    })
}

fn optional(row: &csv::StringRecord, index: usize, name: &str, line: usize) -> Result<Option<f64>> {
    if row.get(index).unwrap_or("").trim().is_empty() {
        Ok(None)
    } else {
        field(row, index, name, line).map(Some)
    }
}

/// Detects the schema from the header row; on mismatch the error lists the
/// columns found and what each schema expects.
pub fn parse_plot_csv(text: &str) -> Result<PlotData> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let rows = reader.records();
    if header == DIAGRAM_COLUMNS {
        let mut bins = Vec::new();
        for (i, row) in rows.enumerate() {
            let row = row?;
            let line = i + 2;
            bins.push(BinSummary {
                lower: field(&row, 0, "bin_lower", line)?,
                upper: field(&row, 1, "bin_upper", line)?,
                count: field(&row, 2, "count", line)?,
                mean_confidence: optional(&row, 3, "mean_confidence", line)?,
                accuracy: optional(&row, 4, "accuracy", line)?,
            });
        }
        Ok(PlotData::Diagram(bins))
    } else if header == CURVE_COLUMNS {
        let mut points = Vec::new();
        for (i, row) in rows.enumerate() {
            let row = row?;
            let line = i + 2;
            points.push(CurvePoint {
                budget: field(&row, 0, "budget", line)?,
                expected_accuracy: field(&row, 1, "expected_accuracy", line)?,
            });
        }
        Ok(PlotData::Curve(points))
    } else {
        let missing = |expected: &[&str]| -> String {
            expected
                .iter()
                .filter(|c| !header.iter().any(|h| h == *c))
                .copied()
                .collect::<Vec<_>>()
                .join(",")
        };
        Err(Error::InvalidArgument(format!(
            "unrecognized CSV columns [{}]; a reliability diagram needs [{}] (missing: {}), a curve needs [{}] (missing: {})",
            header.join(","),
            DIAGRAM_COLUMNS.join(","),
            missing(&DIAGRAM_COLUMNS),
            CURVE_COLUMNS.join(","),
            missing(&CURVE_COLUMNS),
        )))
    }
}
