//! One calibration record per line:
//!
//! ```text
//! {"id": "q1", "confidence": 0.8, "correct": 1}
//! {"id": "q2", "logits": [0.1, 2.0, -1.0], "correct": 0, "method": "ft", "true_eta": 0.4}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::prob::LogitVector;
use crate::record::{CalibrationRecord, Prediction};
use crate::scale::ConfidenceScale;
use crate::score::CorrectnessLabel;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    logits: Option<Vec<f64>>,
    correct: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    true_eta: Option<f64>,
}

fn confidence_value(v: &Value) -> std::result::Result<f64, String> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| format!("confidence {n} is not representable")),
        Value::String(s) if s.trim_end().ends_with('%') => Err(format!(
            "confidence {s:?} looks like a percent; write it as a fraction in [0, 1] (e.g. 0.8 for 80%)"
        )),
        other => Err(format!("confidence must be a number in [0, 1], got {other}")),
    }
}

fn label_value(v: &Value) -> std::result::Result<CorrectnessLabel, String> {
    match v.as_u64() {
        Some(0) => Ok(CorrectnessLabel::Incorrect),
        Some(1) => Ok(CorrectnessLabel::Correct),
        _ => Err(format!("correct must be 0 or 1, got {v}")),
    }
}

fn parse_line(text: &str, scale: Option<ConfidenceScale>) -> std::result::Result<CalibrationRecord, String> {
    let line: Line = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let label = label_value(&line.correct)?;
    let record = match (line.confidence, line.logits) {
        (Some(c), None) => {
            CalibrationRecord::with_confidence(line.id, confidence_value(&c)?, label).map_err(|e| e.to_string())?
        }
        (None, Some(logits)) => {
            let logits = match scale {
                Some(s) => LogitVector::for_scale(logits, s),
                None => LogitVector::new(logits),
            }
            .map_err(|e| format!("logits: {e}"))?;
            CalibrationRecord::with_logits(line.id, logits, label)
        }
        (Some(_), Some(_)) => return Err("record has both confidence and logits; give exactly one".into()),
        (None, None) => return Err("record needs either confidence or logits".into()),
    };
    let record = match line.method {
        Some(m) => record.method_tag(m),
        None => record,
    };
    match line.true_eta {
        Some(eta) => record.true_eta_value(eta).map_err(|e| e.to_string()),
        None => Ok(record),
    }
}

/// Parses JSONL text. Blank lines are skipped; logits lengths are checked
/// against `scale` when given.
pub fn parse_records(text: &str, scale: Option<ConfidenceScale>) -> Result<Vec<CalibrationRecord>> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_line(line, scale).map_err(|message| Error::Parse { line: i + 1, message })?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    Ok(records)
}

pub fn read_records(path: &Path, scale: Option<ConfidenceScale>) -> Result<Vec<CalibrationRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&text, scale)
}

pub fn record_line(record: &CalibrationRecord) -> Result<String> {
    let (confidence, logits) = match record.prediction() {
        Prediction::Confidence(c) => (Some(Value::from(*c)), None),
        Prediction::Logits(f) => (None, Some(f.values().to_vec())),
    };
    let line = Line {
        id: record.id().to_owned(),
        confidence,
        logits,
        correct: Value::from(u8::from(record.label())),
        method: record.method().map(str::to_owned),
        true_eta: record.true_eta(),
    };
    Ok(serde_json::to_string(&line)?)
}

pub fn records_to_string(records: &[CalibrationRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&record_line(r)?);
        out.push('\n');
    }
    Ok(out)
}
