//! The confidence-token grid `{0, 1, ..., n}` where token `i` stands for the
//! probability `i / n`.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};

/// A uniform grid of `n + 1` verbalized confidence levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct ConfidenceScale {
    n: usize,
}

impl ConfidenceScale {
    /// Percent confidences, `0%..=100%`.
    pub const PERCENT: ConfidenceScale = ConfidenceScale { n: 100 };
    /// Single digit confidences `0..=9`.
    pub const DIGIT: ConfidenceScale = ConfidenceScale { n: 9 };

    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidScale(n));
        }
        Ok(Self { n })
    }

    /// The `n` in `{0, ..., n}`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of confidence tokens, `n + 1`.
    pub fn num_tokens(&self) -> usize {
        self.n + 1
    }

    /// Probability represented by token `i`.
    ///
    /// `i` is not range checked; callers iterate over `0..num_tokens()`.
    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn grid(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n + 1).map(move |i| self.value(i))
    }

    pub fn check_token(&self, index: usize) -> Result<usize> {
        if index > self.n {
            Err(Error::TokenOutOfRange { index, n: self.n })
        } else {
            Ok(index)
        }
    }

    pub(crate) fn check_len(&self, found: usize) -> Result<()> {
        if found != self.num_tokens() {
            return Err(Error::LengthMismatch {
                expected: self.num_tokens(),
                found,
            });
        }
        Ok(())
    }

    /// Token whose value is closest to `eta`. Exact ties go to the lower
    /// index.
    pub fn nearest_token(&self, eta: f64) -> Result<usize> {
        check_unit("eta", eta)?;
        let mut best = 0;
        let mut best_dist = eta.abs();
        for i in 1..=self.n {
            let dist = (eta - self.value(i)).abs();
            if dist < best_dist {
                best = i;
                best_dist = dist;
            }
        }
        Ok(best)
    }
}

impl TryFrom<usize> for ConfidenceScale {
    type Error = Error;

    fn try_from(n: usize) -> Result<Self> {
        Self::new(n)
    }
}

impl From<ConfidenceScale> for usize {
    fn from(scale: ConfidenceScale) -> usize {
        scale.n
    }
}

/// `argmin_i |eta - i/n|`, ties broken toward the lower index.
pub fn nearest_token(eta: f64, scale: ConfidenceScale) -> Result<usize> {
    scale.nearest_token(eta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_uniform_and_closed() {
        for n in [1, 2, 9, 10, 100] {
            let scale = ConfidenceScale::new(n).unwrap();
            let grid: Vec<f64> = scale.grid().collect();
            assert_eq!(grid.len(), n + 1);
            assert_eq!(grid[0], 0.0);
            assert_eq!(grid[n], 1.0);
            for w in grid.windows(2) {
                assert!(w[1] > w[0]);
                assert!((w[1] - w[0] - 1.0 / n as f64).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_scale_is_rejected() {
        assert!(matches!(ConfidenceScale::new(0), Err(Error::InvalidScale(0))));
    }

    #[test]
    fn nearest_token_examples() {
        assert_eq!(ConfidenceScale::PERCENT.nearest_token(0.667).unwrap(), 67);
        for n in [1, 9, 10, 100] {
            let scale = ConfidenceScale::new(n).unwrap();
            assert_eq!(scale.nearest_token(0.0).unwrap(), 0);
            assert_eq!(scale.nearest_token(1.0).unwrap(), n);
        }
        // |0.05 - 0| == |0.05 - 0.1| exactly; ties go low.
        let ten = ConfidenceScale::new(10).unwrap();
        assert_eq!(ten.nearest_token(0.05).unwrap(), 0);
        assert_eq!(ConfidenceScale::new(1).unwrap().nearest_token(0.5).unwrap(), 0);
    }

    #[test]
    fn nearest_token_round_trips_grid_points() {
        for n in 1..=120 {
            let scale = ConfidenceScale::new(n).unwrap();
            for i in 0..=n {
                assert_eq!(scale.nearest_token(scale.value(i)).unwrap(), i, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn nearest_token_rejects_out_of_range() {
        let scale = ConfidenceScale::new(10).unwrap();
        assert!(scale.nearest_token(-0.01).is_err());
        assert!(scale.nearest_token(1.01).is_err());
        assert!(scale.nearest_token(f64::NAN).is_err());
    }

    #[test]
    fn serde_uses_plain_integer() {
        let scale = ConfidenceScale::new(9).unwrap();
        assert_eq!(serde_json::to_string(&scale).unwrap(), "9");
        assert!(serde_json::from_str::<ConfidenceScale>("0").is_err());
    }
}
