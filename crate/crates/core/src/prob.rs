//! Logits over the confidence tokens and the restricted softmax that turns
//! them into a distribution on the simplex.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scale::ConfidenceScale;

/// Absolute tolerance on `sum(q) == 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Unnormalized scores `f_0..f_n`, one per confidence token. All entries are
/// finite and there are at least two of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteLogit { index, value });
        }
        if values.len() < 2 {
            return Err(Error::InvalidScale(values.len().saturating_sub(1)));
        }
        Ok(Self(values))
    }

    /// Logits checked against a specific scale.
    pub fn for_scale(values: Vec<f64>, scale: ConfidenceScale) -> Result<Self> {
        scale.check_len(values.len())?;
        Self::new(values)
    }

    pub fn zeros(scale: ConfidenceScale) -> Self {
        Self(vec![0.0; scale.num_tokens()])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The scale implied by the vector length.
    pub fn scale(&self) -> ConfidenceScale {
        ConfidenceScale::new(self.0.len() - 1).expect("length checked at construction")
    }

    /// Greedy readout: the highest scoring token, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for LogitVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<LogitVector> for Vec<f64> {
    fn from(logits: LogitVector) -> Vec<f64> {
        logits.0
    }
}

/// A point `q` on the probability simplex over the confidence tokens.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::NotOnSimplex { sum: 0.0 });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0 && **v <= 1.0))
        {
            return Err(Error::InvalidProbability { index, value });
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::NotOnSimplex { sum });
        }
        Ok(Self(values))
    }

    pub fn one_hot(scale: ConfidenceScale, index: usize) -> Result<Self> {
        scale.check_token(index)?;
        let mut values = vec![0.0; scale.num_tokens()];
        values[index] = 1.0;
        Ok(Self(values))
    }

    pub fn uniform(scale: ConfidenceScale) -> Self {
        let k = scale.num_tokens();
        Self(vec![1.0 / k as f64; k])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self.0.iter().filter(|&&q| q > 0.0).map(|&q| q * q.ln()).sum::<f64>()
    }

    /// `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, other: &ProbVector, alpha: f64) -> Result<ProbVector> {
        crate::error::check_unit("alpha", alpha)?;
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        let values = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        ProbVector::new(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl<'de> Deserialize<'de> for ProbVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        ProbVector::new(values).map_err(serde::de::Error::custom)
    }
}

/// `q_i = exp(f_i) / sum_j exp(f_j)` over the confidence-token logits only.
pub fn restricted_softmax(logits: &LogitVector) -> ProbVector {
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits.values(), &mut out);
    ProbVector(out)
}

/// Max-subtracted softmax of `logits` written into `out`.
pub(crate) fn softmax_into(logits: &[f64], out: &mut [f64]) {
    debug_assert_eq!(logits.len(), out.len());
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &f) in out.iter_mut().zip(logits) {
        *o = (f - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// `ln(sum_j exp(f_j))`, stable for large logits.
pub(crate) fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&f| (f - max).exp()).sum::<f64>().ln()
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
