//! Confidence-gated self-correction and budgeted model cascades.
//!
//! The stronger model's refinement is a Bernoulli oracle: a refined answer is
//! correct with probability `strong_accuracy`. Self-correction can also break
//! a correct answer, with probability `flip_risk`.
//!
//! Sampled simulators take records with realized labels. The closed-form
//! functions take per-record correctness probabilities, which may be the
//! labels themselves (as `0.0` / `1.0`) or a ground-truth `eta`.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::record::CalibrationRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    SelfCorrect,
    Cascade,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPolicy {
    pub mode: SimMode,
    /// Records with confidence at or below this are refined (self-correct).
    pub threshold: f64,
    /// Number of lowest-confidence records sent to the strong model (cascade).
    pub budget: usize,
    pub strong_accuracy: f64,
    pub flip_risk: f64,
    pub seed: u64,
}

impl SimPolicy {
    pub fn self_correct() -> Self {
        Self {
            mode: SimMode::SelfCorrect,
            threshold: 0.5,
            budget: 0,
            strong_accuracy: 0.9,
            flip_risk: 0.1,
            seed: 0,
        }
    }

    pub fn cascade(budget: usize) -> Self {
        Self {
            mode: SimMode::Cascade,
            budget,
            ..Self::self_correct()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("threshold", self.threshold)?;
        check_unit("strong_accuracy", self.strong_accuracy)?;
        check_unit("flip_risk", self.flip_risk)?;
        Ok(())
    }

    fn expect_mode(&self, mode: SimMode) -> Result<()> {
        self.validate()?;
        if self.mode != mode {
            return Err(Error::InvalidArgument(format!(
                "policy mode is {:?}, expected {mode:?}",
                self.mode
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Kept,
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub id: String,
    pub confidence: f64,
    pub decision: Decision,
    pub correct_before: bool,
    pub correct_after: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub mode: SimMode,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
    pub triggered_count: usize,
    pub trace: Vec<TraceEntry>,
}

impl SimOutcome {
    fn from_trace(mode: SimMode, trace: Vec<TraceEntry>) -> Self {
        let n = trace.len() as f64;
        let before = trace.iter().filter(|t| t.correct_before).count() as f64 / n;
        let after = trace.iter().filter(|t| t.correct_after).count() as f64 / n;
        let triggered_count = trace.iter().filter(|t| t.decision == Decision::Refined).count();
        Self {
            mode,
            accuracy_before: before,
            accuracy_after: after,
            triggered_count,
            trace,
        }
    }

    /// Accuracy after refinement, recomputed from the trace.
    pub fn recomputed_accuracy(&self) -> f64 {
        self.trace.iter().filter(|t| t.correct_after).count() as f64 / self.trace.len() as f64
    }
}

/// Scalar confidences of every record; logits-only records are rejected.
pub fn scalar_confidences(records: &[CalibrationRecord]) -> Result<Vec<f64>> {
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    records
        .iter()
        .map(|r| {
            r.scalar_confidence().ok_or_else(|| Error::InvalidRecord {
                id: r.id().to_owned(),
                message: "simulation needs a scalar confidence".into(),
            })
        })
        .collect()
}

/// Refines every record with confidence `<= threshold`; one uniform draw per
/// refined record, in input order.
pub fn simulate_self_correction(records: &[CalibrationRecord], policy: &SimPolicy) -> Result<SimOutcome> {
    policy.expect_mode(SimMode::SelfCorrect)?;
    let confidences = scalar_confidences(records)?;
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let trace = records
        .iter()
        .zip(confidences)
        .map(|(r, c)| {
            let before = r.is_correct();
            let (decision, after) = if c <= policy.threshold {
                let u: f64 = rng.random();
                let after = if before {
                    u >= policy.flip_risk
                } else {
                    u < policy.strong_accuracy
                };
                (Decision::Refined, after)
            } else {
                (Decision::Kept, before)
            };
            TraceEntry {
                id: r.id().to_owned(),
                confidence: c,
                decision,
                correct_before: before,
                correct_after: after,
            }
        })
        .collect();
    Ok(SimOutcome::from_trace(SimMode::SelfCorrect, trace))
}

/// Expected `(accuracy_before, accuracy_after)` of self-correction, given
/// each record's confidence and probability of being correct.
pub fn expected_self_correction(confidences: &[f64], correctness: &[f64], policy: &SimPolicy) -> Result<(f64, f64)> {
    policy.validate()?;
    check_pairs(confidences, correctness)?;
    let n = confidences.len() as f64;
    let before = correctness.iter().sum::<f64>() / n;
    let after = confidences
        .iter()
        .zip(correctness)
        .map(|(&c, &p)| {
            if c <= policy.threshold {
                p * (1.0 - policy.flip_risk) + (1.0 - p) * policy.strong_accuracy
            } else {
                p
            }
        })
        .sum::<f64>()
        / n;
    Ok((before, after))
}

fn check_pairs(confidences: &[f64], correctness: &[f64]) -> Result<()> {
    if confidences.is_empty() {
        return Err(Error::NoRecords);
    }
    if confidences.len() != correctness.len() {
        return Err(Error::LengthMismatch {
            expected: confidences.len(),
            found: correctness.len(),
        });
    }
    for &v in confidences {
        check_unit("confidence", v)?;
    }
    for &v in correctness {
        check_unit("correctness probability", v)?;
    }
    Ok(())
}

/// Record indices from lowest to highest confidence; equal confidences are
/// ordered by id.
pub fn lowest_confidence_order(confidences: &[f64], ids: &[&str]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..confidences.len()).collect();
    order.sort_by(|&a, &b| {
        confidences[a]
            .partial_cmp(&confidences[b])
            .unwrap_or(Ordering::Equal)
            .then_with(|| ids[a].cmp(ids[b]))
    });
    order
}

fn record_order(records: &[CalibrationRecord]) -> Result<Vec<usize>> {
    let confidences = scalar_confidences(records)?;
    let ids: Vec<&str> = records.iter().map(CalibrationRecord::id).collect();
    Ok(lowest_confidence_order(&confidences, &ids))
}

fn check_budget(budget: usize, count: usize) -> Result<()> {
    if budget > count {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} exceeds record count {count}"
        )));
    }
    Ok(())
}

/// Sends the `budget` lowest-confidence records to the strong model, whose
/// answer is correct with probability `strong_accuracy`.
pub fn simulate_cascade(records: &[CalibrationRecord], policy: &SimPolicy) -> Result<SimOutcome> {
    policy.expect_mode(SimMode::Cascade)?;
    let order = record_order(records)?;
    check_budget(policy.budget, records.len())?;
    let mut refined = vec![false; records.len()];
    for &i in &order[..policy.budget] {
        refined[i] = true;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let mut after = vec![false; records.len()];
    for (i, r) in records.iter().enumerate() {
        after[i] = r.is_correct();
    }
    for &i in &order[..policy.budget] {
        after[i] = rng.random::<f64>() < policy.strong_accuracy;
    }
    let trace = records
        .iter()
        .enumerate()
        .map(|(i, r)| TraceEntry {
            id: r.id().to_owned(),
            confidence: r.confidence(),
            decision: if refined[i] { Decision::Refined } else { Decision::Kept },
            correct_before: r.is_correct(),
            correct_after: after[i],
        })
        .collect();
    Ok(SimOutcome::from_trace(SimMode::Cascade, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub budget: usize,
    pub expected_accuracy: f64,
}

pub const CURVE_COLUMNS: [&str; 2] = ["budget", "expected_accuracy"];

fn check_budgets(budgets: &[usize], count: usize) -> Result<()> {
    if budgets.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("budgets must be sorted ascending".into()));
    }
    if let Some(&last) = budgets.last() {
        check_budget(last, count)?;
    }
    Ok(())
}

/// Closed-form cascade accuracy on the records' realized labels.
pub fn cascade_curve(records: &[CalibrationRecord], policy: &SimPolicy, budgets: &[usize]) -> Result<Vec<CurvePoint>> {
    policy.validate()?;
    let order = record_order(records)?;
    let labels: Vec<f64> = records.iter().map(|r| r.label().as_f64()).collect();
    expected_cascade_curve(&labels, &order, policy.strong_accuracy, budgets)
}

/// Expected accuracy when the first `b` records of `order` are refined, for
/// each `b` in `budgets`:
/// `(sum of correctness over unselected + b * strong_accuracy) / count`.
pub fn expected_cascade_curve(
    correctness: &[f64],
    order: &[usize],
    strong_accuracy: f64,
    budgets: &[usize],
) -> Result<Vec<CurvePoint>> {
    check_unit("strong_accuracy", strong_accuracy)?;
    if correctness.is_empty() {
        return Err(Error::NoRecords);
    }
    if order.len() != correctness.len() {
        return Err(Error::LengthMismatch {
            expected: correctness.len(),
            found: order.len(),
        });
    }
    check_budgets(budgets, correctness.len())?;
    let n = correctness.len() as f64;
    let total: f64 = correctness.iter().sum();
    let mut selected_sum = 0.0;
    let mut taken = 0;
    let mut curve = Vec::with_capacity(budgets.len());
    for &b in budgets {
        while taken < b {
            selected_sum += correctness[order[taken]];
            taken += 1;
        }
        curve.push(CurvePoint {
            budget: b,
            expected_accuracy: (total - selected_sum + b as f64 * strong_accuracy) / n,
        });
    }
    Ok(curve)
}

/// Expected accuracy when `b` records are chosen uniformly at random, which
/// is `mean + b * (strong_accuracy - mean) / count`.
pub fn random_selection_curve(correctness: &[f64], strong_accuracy: f64, budgets: &[usize]) -> Result<Vec<CurvePoint>> {
    check_unit("strong_accuracy", strong_accuracy)?;
    if correctness.is_empty() {
        return Err(Error::NoRecords);
    }
    check_budgets(budgets, correctness.len())?;
    let n = correctness.len() as f64;
    let mean = correctness.iter().sum::<f64>() / n;
    Ok(budgets
        .iter()
        .map(|&b| CurvePoint {
            budget: b,
            expected_accuracy: mean + b as f64 * (strong_accuracy - mean) / n,
        })
        .collect())
}

/// Expected accuracy after refining exactly the records in `selected`.
pub fn expected_accuracy_of_selection(correctness: &[f64], selected: &[usize], strong_accuracy: f64) -> f64 {
    let total: f64 = correctness.iter().sum();
    let removed: f64 = selected.iter().map(|&i| correctness[i]).sum();
    (total - removed + selected.len() as f64 * strong_accuracy) / correctness.len() as f64
}

/// Writes a curve as `budget,expected_accuracy` CSV.
pub fn write_curve_csv<W: std::io::Write>(curve: &[CurvePoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CURVE_COLUMNS)?;
    for p in curve {
        w.write_record([p.budget.to_string(), p.expected_accuracy.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
