//! The tokenized Brier score and its gradient with respect to the
//! confidence-token logits.
//!
//! For a distribution `q` over tokens `0..=n` and a correctness label `y`,
//!
//! ```text
//! loss(q, y) = sum_i q_i * (y - i/n)^2
//! ```
//!
//! which is the classical Brier score `(y - p)^2` averaged over the confidence
//! the model would verbalize. Through `q = softmax(f)` the gradient is
//! `dloss/df_j = q_j * (c_j - loss)` with `c_j = (y - j/n)^2`.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::prob::{restricted_softmax, softmax_into, LogitVector, ProbVector};
use crate::scale::ConfidenceScale;

/// Whether an answer was judged correct. Serialized as `0` / `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum CorrectnessLabel {
    Incorrect,
    Correct,
}

impl CorrectnessLabel {
    pub fn as_f64(self) -> f64 {
        match self {
            CorrectnessLabel::Incorrect => 0.0,
            CorrectnessLabel::Correct => 1.0,
        }
    }

    pub fn is_correct(self) -> bool {
        self == CorrectnessLabel::Correct
    }
}

impl From<bool> for CorrectnessLabel {
    fn from(correct: bool) -> Self {
        if correct {
            CorrectnessLabel::Correct
        } else {
            CorrectnessLabel::Incorrect
        }
    }
}

impl TryFrom<u8> for CorrectnessLabel {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(CorrectnessLabel::Incorrect),
            1 => Ok(CorrectnessLabel::Correct),
            other => Err(Error::InvalidArgument(format!(
                "correctness label must be 0 or 1, got {other}"
            ))),
        }
    }
}

impl From<CorrectnessLabel> for u8 {
    fn from(label: CorrectnessLabel) -> u8 {
        label as u8
    }
}

/// Per-token costs `c_i = (y - i/n)^2`.
pub fn token_costs(y: CorrectnessLabel, scale: ConfidenceScale) -> Vec<f64> {
    let y = y.as_f64();
    scale.grid().map(|p| squared_error(y, p)).collect()
}

#[inline]
fn squared_error(y: f64, p: f64) -> f64 {
    let d = y - p;
    d * d
}

/// `(y - p)^2`, the classical Brier score for a scalar confidence.
pub fn classical_brier(p: f64, y: CorrectnessLabel) -> Result<f64> {
    check_unit("confidence", p)?;
    Ok(squared_error(y.as_f64(), p))
}

/// Expected squared error of the verbalized confidence under `q`.
pub fn tokenized_brier(q: &ProbVector, y: CorrectnessLabel, scale: ConfidenceScale) -> Result<f64> {
    scale.check_len(q.len())?;
    let y = y.as_f64();
    Ok(q.values()
        .iter()
        .enumerate()
        .map(|(i, &qi)| qi * squared_error(y, scale.value(i)))
        .sum())
}

/// Gradient of the tokenized Brier score with respect to the logits that
/// produced `q` through the restricted softmax.
pub fn tokenized_brier_grad(logits: &LogitVector, y: CorrectnessLabel, scale: ConfidenceScale) -> Result<Vec<f64>> {
    scale.check_len(logits.len())?;
    let mut q = vec![0.0; logits.len()];
    let mut grad = vec![0.0; logits.len()];
    brier_loss_grad_into(logits.values(), y.as_f64(), scale, &mut q, &mut grad);
    Ok(grad)
}

/// Loss and gradient together, as used by training loops.
pub fn tokenized_brier_with_grad(
    logits: &LogitVector,
    y: CorrectnessLabel,
    scale: ConfidenceScale,
) -> Result<(f64, Vec<f64>)> {
    scale.check_len(logits.len())?;
    let mut q = vec![0.0; logits.len()];
    let mut grad = vec![0.0; logits.len()];
    let loss = brier_loss_grad_into(logits.values(), y.as_f64(), scale, &mut q, &mut grad);
    Ok((loss, grad))
}

/// Tokenized Brier loss evaluated straight from logits.
pub fn tokenized_brier_from_logits(logits: &LogitVector, y: CorrectnessLabel, scale: ConfidenceScale) -> Result<f64> {
    tokenized_brier(&restricted_softmax(logits), y, scale)
}

/// Allocation-free kernel: fills `q` with the softmax and `grad` with the
/// loss gradient, returns the loss.
pub(crate) fn brier_loss_grad_into(
    logits: &[f64],
    y: f64,
    scale: ConfidenceScale,
    q: &mut [f64],
    grad: &mut [f64],
) -> f64 {
    softmax_into(logits, q);
    let mut loss = 0.0;
    for (i, (&qi, g)) in q.iter().zip(grad.iter_mut()).enumerate() {
        let c = squared_error(y, scale.value(i));
        *g = c;
        loss += qi * c;
    }
    for (g, &qi) in grad.iter_mut().zip(q.iter()) {
        *g = qi * (*g - loss);
    }
    loss
}
