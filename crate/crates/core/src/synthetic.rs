//! Synthetic populations whose correctness probability `eta(x)` is known by
//! construction.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::record::CalibrationRecord;
use crate::scale::ConfidenceScale;
use crate::score::CorrectnessLabel;

/// Ground-truth correctness probability as a function of the features.
///
/// `Piecewise` looks only at the first feature: with breakpoints
/// `b_0 < b_1 < ...`, an input with `x[0] < b_0` gets `levels[0]`, one with
/// `b_0 <= x[0] < b_1` gets `levels[1]`, and so on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EtaFunction {
    Constant { eta: f64 },
    Piecewise { breakpoints: Vec<f64>, levels: Vec<f64> },
    Logistic { weights: Vec<f64>, bias: f64 },
}

impl EtaFunction {
    pub fn constant(eta: f64) -> Result<Self> {
        check_unit("eta", eta)?;
        Ok(EtaFunction::Constant { eta })
    }

    pub fn piecewise(breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if levels.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "piecewise eta needs one more level than breakpoints ({} breakpoints, {} levels)",
                breakpoints.len(),
                levels.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) || breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "piecewise breakpoints must be finite and strictly increasing".into(),
            ));
        }
        for &level in &levels {
            check_unit("piecewise level", level)?;
        }
        Ok(EtaFunction::Piecewise { breakpoints, levels })
    }

    pub fn logistic(weights: Vec<f64>, bias: f64) -> Result<Self> {
        if weights.iter().chain(Some(&bias)).any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("logistic parameters must be finite".into()));
        }
        Ok(EtaFunction::Logistic { weights, bias })
    }

    /// The two-region task used throughout the tests: `eta = 0.2` for
    /// `x[0] < 0`, `0.8` otherwise.
    pub fn two_region() -> Self {
        EtaFunction::Piecewise {
            breakpoints: vec![0.0],
            levels: vec![0.2, 0.8],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            EtaFunction::Constant { eta } => *eta,
            EtaFunction::Piecewise { breakpoints, levels } => {
                let x0 = x.first().copied().unwrap_or(0.0);
                let region = breakpoints.iter().take_while(|&&b| b <= x0).count();
                levels[region]
            }
            EtaFunction::Logistic { weights, bias } => {
                let z: f64 = weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias;
                1.0 / (1.0 + (-z).exp())
            }
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if let EtaFunction::Logistic { weights, .. } = self {
            if weights.len() > dim {
                return Err(Error::InvalidArgument(format!(
                    "logistic eta has {} weights but features have dimension {dim}",
                    weights.len()
                )));
            }
        }
        Ok(())
    }
}

/// Parses `constant:0.7`, `piecewise:0:0.2,0.8` (breakpoints, then levels)
/// and `logistic:1.5,-1:0.3` (weights, then bias).
impl FromStr for EtaFunction {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidArgument(format!("eta spec {spec:?}: {why}"));
        let list = |s: &str| -> Result<Vec<f64>> {
            if s.trim().is_empty() {
                return Ok(Vec::new());
            }
            s.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| bad(&format!("{v:?} is not a number")))
                })
                .collect()
        };
        let parts: Vec<&str> = spec.trim().split(':').collect();
        match parts.as_slice() {
            ["constant", eta] => {
                let eta = eta.trim().parse().map_err(|_| bad("constant needs a number"))?;
                Self::constant(eta)
            }
            ["piecewise", breaks, levels] => Self::piecewise(list(breaks)?, list(levels)?),
            ["logistic", weights, bias] => {
                let bias = bias.trim().parse().map_err(|_| bad("bias is not a number"))?;
                Self::logistic(list(weights)?, bias)
            }
            _ => Err(bad(
                "expected constant:<eta>, piecewise:<breaks>:<levels> or logistic:<weights>:<bias>",
            )),
        }
    }
}

impl fmt::Display for EtaFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        match self {
            EtaFunction::Constant { eta } => write!(f, "constant:{eta}"),
            EtaFunction::Piecewise { breakpoints, levels } => {
                write!(f, "piecewise:{}:{}", join(breakpoints), join(levels))
            }
            EtaFunction::Logistic { weights, bias } => write!(f, "logistic:{}:{bias}", join(weights)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<CorrectnessLabel>,
    pub true_eta: Vec<f64>,
    pub seed: u64,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Zero-padded ids so lexicographic order matches sample order.
    pub fn record_id(&self, index: usize) -> String {
        let width = self.len().max(1).to_string().len();
        format!("s{index:0width$}")
    }
}

/// Standard-normal features, `eta = eta_fn(x)`, labels `~ Bernoulli(eta)`.
pub fn generate(eta_fn: &EtaFunction, count: usize, dim: usize, seed: u64) -> Result<SyntheticDataset> {
    if count == 0 || dim == 0 {
        return Err(Error::InvalidArgument("count and dim must be at least 1".into()));
    }
    eta_fn.check_dim(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    let mut true_eta = Vec::with_capacity(count);
    for index in 0..count {
        let x: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let eta = eta_fn.eval(&x);
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::EtaOutOfRange { index, value: eta });
        }
        let u: f64 = rng.random();
        labels.push(CorrectnessLabel::from(u < eta));
        true_eta.push(eta);
        features.push(x);
    }
    Ok(SyntheticDataset {
        features,
        labels,
        true_eta,
        seed,
    })
}

/// Records from the predictor that always verbalizes the token nearest to
/// the true `eta`.
pub fn bayes_optimal_records(dataset: &SyntheticDataset, scale: ConfidenceScale) -> Result<Vec<CalibrationRecord>> {
    confidence_records(
        dataset,
        "bayes_oracle",
        |eta| Ok(scale.value(scale.nearest_token(eta)?)),
    )
}

/// Records whose confidence is an arbitrary function of the true `eta`.
pub fn confidence_records(
    dataset: &SyntheticDataset,
    method: &str,
    mut confidence: impl FnMut(f64) -> Result<f64>,
) -> Result<Vec<CalibrationRecord>> {
    (0..dataset.len())
        .map(|i| {
            let eta = dataset.true_eta[i];
            CalibrationRecord::with_confidence(dataset.record_id(i), confidence(eta)?, dataset.labels[i])?
                .method_tag(method)
                .true_eta_value(eta)
        })
        .collect()
}
