//! One evaluated sample: what the model said about its confidence and
//! whether its answer was correct.

use crate::error::{check_unit, Error, Result};
use crate::prob::LogitVector;
use crate::score::CorrectnessLabel;

/// What a record carries about the model's confidence.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    /// A verbalized confidence already read out as a fraction in `[0, 1]`.
    Confidence(f64),
    /// The confidence-token logits; read out greedily.
    Logits(LogitVector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRecord {
    id: String,
    prediction: Prediction,
    label: CorrectnessLabel,
    method: Option<String>,
    true_eta: Option<f64>,
}

impl CalibrationRecord {
    pub fn with_confidence(id: impl Into<String>, confidence: f64, label: CorrectnessLabel) -> Result<Self> {
        let id = id.into();
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidRecord {
                id,
                message: format!("confidence must lie in [0, 1], got {confidence}"),
            });
        }
        Ok(Self {
            id,
            prediction: Prediction::Confidence(confidence),
            label,
            method: None,
            true_eta: None,
        })
    }

    pub fn with_logits(id: impl Into<String>, logits: LogitVector, label: CorrectnessLabel) -> Self {
        Self {
            id: id.into(),
            prediction: Prediction::Logits(logits),
            label,
            method: None,
            true_eta: None,
        }
    }

    pub fn method_tag(mut self, method: impl Into<String>) -> Self {
        self.method = Some(method.into());
        self
    }

    /// Attach the ground-truth correctness probability (synthetic data only).
    pub fn true_eta_value(mut self, eta: f64) -> Result<Self> {
        check_unit("true_eta", eta)?;
        self.true_eta = Some(eta);
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn prediction(&self) -> &Prediction {
        &self.prediction
    }

    pub fn label(&self) -> CorrectnessLabel {
        self.label
    }

    pub fn is_correct(&self) -> bool {
        self.label.is_correct()
    }

    pub fn method(&self) -> Option<&str> {
        self.method.as_deref()
    }

    pub fn true_eta(&self) -> Option<f64> {
        self.true_eta
    }

    /// Scalar confidence. Logits resolve to the value of their argmax token,
    /// which is what greedy decoding would verbalize.
    pub fn confidence(&self) -> f64 {
        match &self.prediction {
            Prediction::Confidence(c) => *c,
            Prediction::Logits(f) => f.scale().value(f.argmax()),
        }
    }

    /// The confidence only if the record carries it as a scalar.
    pub fn scalar_confidence(&self) -> Option<f64> {
        match self.prediction {
            Prediction::Confidence(c) => Some(c),
            Prediction::Logits(_) => None,
        }
    }
}
