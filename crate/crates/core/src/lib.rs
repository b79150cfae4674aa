//! The tokenized Brier score for verbalized confidence.
//!
//! A model states its confidence as one of the tokens `0..=N`, token `i`
//! meaning probability `i/N`. Training on the expected squared error of that
//! token under the model's own token distribution rewards reporting the grid
//! value nearest to the true probability of being correct.
//!
//! - [`score`]: the loss and its gradient through the restricted softmax
//! - [`psr`]: brute-force checks that the loss is proper on the token grid
//! - [`metrics`]: ECE, AUROC and reliability diagrams
//! - [`synthetic`]: populations with known correctness probability
//! - [`toy`]: a small confidence head trained with the loss
//! - [`apps`]: self-correction and cascade simulators
//! - [`cli`]: the `tokbrier` command line
//!
//! ```
//! use tokbrier::{tokenized_brier, ConfidenceScale, CorrectnessLabel, ProbVector};
//!
//! let scale = ConfidenceScale::new(10)?;
//! let q = ProbVector::uniform(scale);
//! let loss = tokenized_brier(&q, CorrectnessLabel::Incorrect, scale)?;
//! assert!((loss - 0.35).abs() < 1e-12);
//! # Ok::<(), tokbrier::Error>(())
//! ```

pub mod apps;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod prob;
pub mod psr;
pub mod record;
pub mod scale;
pub mod score;
pub mod synthetic;
pub mod toy;

pub use error::{Error, Result};
pub use prob::{restricted_softmax, LogitVector, ProbVector};
pub use record::{CalibrationRecord, Prediction};
pub use scale::{nearest_token, ConfidenceScale};
pub use score::{classical_brier, tokenized_brier, tokenized_brier_grad, CorrectnessLabel};
