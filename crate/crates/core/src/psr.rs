//! Numerical verification that the tokenized Brier score is a proper scoring
//! rule for verbalized confidence.
//!
//! Conditioned on an input with correctness probability `eta`, the expected
//! loss of a token distribution `q` is linear in `q`:
//!
//! ```text
//! R(q) = sum_i q_i f_i(eta),   f_i(eta) = eta (1 - i/n)^2 + (1 - eta) (i/n)^2
//! ```
//!
//! so its minimum over the simplex sits on a vertex, and since `f_i` is a
//! convex quadratic in `i/n` centred on `eta`, that vertex is the grid point
//! nearest to `eta`. This module checks both halves by brute force.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::prob::{softmax_into, ProbVector};
use crate::scale::ConfidenceScale;
use crate::score::CorrectnessLabel;

/// Two vertex risks closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;
/// A sampled interior point counts as a violation only if it beats the best
/// vertex by more than this.
pub const SAMPLE_SLACK: f64 = 1e-12;

pub const DEFAULT_DESCENT_STEPS: usize = 5000;
pub const DEFAULT_DESCENT_STEP_SIZE: f64 = 1.0;

/// Which per-token loss to verify.
///
/// `TokenizedAbsolute` (`sum_i q_i |y - i/n|`) is not proper: its vertex risk
/// is linear in `i/n`, so the minimum always sits at an end of the grid. It
/// exists as a negative control for the verifier.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringRule {
    #[default]
    TokenizedBrier,
    TokenizedAbsolute,
}

impl ScoringRule {
    #[inline]
    fn vertex_risk(self, eta: f64, p: f64) -> f64 {
        match self {
            ScoringRule::TokenizedBrier => eta * (1.0 - p) * (1.0 - p) + (1.0 - eta) * p * p,
            ScoringRule::TokenizedAbsolute => eta * (1.0 - p) + (1.0 - eta) * p,
        }
    }
}

impl std::str::FromStr for ScoringRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brier" | "tokenized_brier" => Ok(ScoringRule::TokenizedBrier),
            "absolute" | "tokenized_absolute" => Ok(ScoringRule::TokenizedAbsolute),
            other => Err(Error::InvalidArgument(format!(
                "unknown scoring rule {other:?} (expected brier or absolute)"
            ))),
        }
    }
}

/// `f_i(eta)`: expected tokenized Brier loss of always answering token `i`.
pub fn vertex_risk(eta: f64, index: usize, scale: ConfidenceScale) -> Result<f64> {
    check_unit("eta", eta)?;
    scale.check_token(index)?;
    Ok(ScoringRule::TokenizedBrier.vertex_risk(eta, scale.value(index)))
}

/// `R(q) = E[loss(q, Y)]` with `Y ~ Bernoulli(eta)`.
pub fn conditional_risk(q: &ProbVector, eta: f64, scale: ConfidenceScale) -> Result<f64> {
    check_unit("eta", eta)?;
    scale.check_len(q.len())?;
    Ok(q.values()
        .iter()
        .enumerate()
        .map(|(i, &qi)| qi * ScoringRule::TokenizedBrier.vertex_risk(eta, scale.value(i)))
        .sum())
}

/// All vertex risks for one `eta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskProfile {
    eta: f64,
    scale: ConfidenceScale,
    vertex_risks: Vec<f64>,
}

impl RiskProfile {
    pub fn new(eta: f64, scale: ConfidenceScale) -> Result<Self> {
        Self::for_rule(ScoringRule::TokenizedBrier, eta, scale)
    }

    pub fn for_rule(rule: ScoringRule, eta: f64, scale: ConfidenceScale) -> Result<Self> {
        check_unit("eta", eta)?;
        let vertex_risks = scale.grid().map(|p| rule.vertex_risk(eta, p)).collect();
        Ok(Self {
            eta,
            scale,
            vertex_risks,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn scale(&self) -> ConfidenceScale {
        self.scale
    }

    pub fn vertex_risks(&self) -> &[f64] {
        &self.vertex_risks
    }

    pub fn min_risk(&self) -> f64 {
        self.vertex_risks.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Vertices within [`TIE_TOLERANCE`] of the minimum, ascending.
    pub fn argmin_vertices(&self) -> Vec<usize> {
        let min = self.min_risk();
        (0..self.vertex_risks.len())
            .filter(|&i| self.vertex_risks[i] <= min + TIE_TOLERANCE)
            .collect()
    }

    /// Distance from the minimum to the best vertex outside the argmin set.
    pub fn runner_up_gap(&self) -> Option<f64> {
        let min = self.min_risk();
        self.vertex_risks
            .iter()
            .copied()
            .filter(|&r| r > min + TIE_TOLERANCE)
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r))))
            .map(|r| r - min)
    }

    /// Risk of an arbitrary distribution: `sum_i q_i f_i`.
    pub fn risk(&self, q: &[f64]) -> f64 {
        q.iter().zip(&self.vertex_risks).map(|(a, b)| a * b).sum()
    }
}

/// Outcome of a brute-force properness check at one `eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub eta: f64,
    pub n: usize,
    pub rule: ScoringRule,
    /// `nearest_token(eta)`, the vertex the theorem predicts.
    pub nearest_token: usize,
    pub argmin_vertices: Vec<usize>,
    /// More than one vertex attains the minimum (eta sits midway between
    /// grid points); `nearest_token` then follows the lower-index rule.
    pub tie: bool,
    pub min_risk: f64,
    pub runner_up_gap: Option<f64>,
    pub samples: usize,
    pub sampled_violations: usize,
    pub best_sampled_risk: f64,
    /// `nearest_token` is risk-optimal and no sample beat the vertex minimum.
    pub holds: bool,
}

/// Draw a point uniformly from the simplex by normalizing i.i.d.
/// exponentials.
pub fn sample_simplex<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    let mut sum = 0.0;
    for o in out.iter_mut() {
        *o = rng.sample::<f64, _>(Exp1);
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn verify_properness(eta: f64, scale: ConfidenceScale, samples: usize, seed: u64) -> Result<VerificationReport> {
    verify_rule(ScoringRule::TokenizedBrier, eta, scale, samples, seed)
}

pub fn verify_rule(
    rule: ScoringRule,
    eta: f64,
    scale: ConfidenceScale,
    samples: usize,
    seed: u64,
) -> Result<VerificationReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let profile = RiskProfile::for_rule(rule, eta, scale)?;
    let nearest = scale.nearest_token(eta)?;
    let argmin = profile.argmin_vertices();
    let min_risk = profile.min_risk();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let risks = profile.vertex_risks();
    let mut violations = 0;
    let mut best_sampled = f64::INFINITY;
    for _ in 0..samples {
        // Unnormalized exponentials; divide once instead of per coordinate.
        let mut total = 0.0;
        let mut weighted = 0.0;
        for &r in risks {
            let e: f64 = rng.sample(Exp1);
            total += e;
            weighted += e * r;
        }
        let risk = weighted / total;
        best_sampled = best_sampled.min(risk);
        if risk < min_risk - SAMPLE_SLACK {
            violations += 1;
        }
    }

    Ok(VerificationReport {
        eta,
        n: scale.n(),
        rule,
        nearest_token: nearest,
        tie: argmin.len() > 1,
        holds: argmin.contains(&nearest) && violations == 0,
        argmin_vertices: argmin,
        min_risk,
        runner_up_gap: profile.runner_up_gap(),
        samples,
        sampled_violations: violations,
        best_sampled_risk: best_sampled,
    })
}

/// Descend the conditional risk over unconstrained logits and return the
/// final token distribution.
///
/// Steps follow the sign of the logit gradient, `f_j -= step_size *
/// sign(q_j (f_j(eta) - R))`. The raw gradient carries a factor `q_j` and
/// neighbouring vertices differ in risk by `O(1/n^2)`, so fixed-size plain
/// steps stall long before the mass settles; the sign keeps every coordinate
/// moving while preserving the descent direction.
pub fn minimize_risk_descent(
    eta: f64,
    scale: ConfidenceScale,
    steps: usize,
    step_size: f64,
    seed: u64,
) -> Result<ProbVector> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "step_size must be positive, got {step_size}"
        )));
    }
    let profile = RiskProfile::new(eta, scale)?;
    let risks = profile.vertex_risks();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut logits: Vec<f64> = (0..scale.num_tokens()).map(|_| rng.sample(StandardNormal)).collect();
    let mut q = vec![0.0; logits.len()];
    for _ in 0..steps {
        softmax_into(&logits, &mut q);
        let risk = profile.risk(&q);
        for ((f, &qj), &rj) in logits.iter_mut().zip(&q).zip(risks) {
            let g = qj * (rj - risk);
            if g > 0.0 {
                *f -= step_size;
            } else if g < 0.0 {
                *f += step_size;
            }
        }
    }
    softmax_into(&logits, &mut q);
    ProbVector::new(q)
}

/// `E[loss(q, Y)]` expanded over the two labels; used to cross-check
/// [`conditional_risk`].
pub fn bernoulli_risk(q: &ProbVector, eta: f64, scale: ConfidenceScale) -> Result<f64> {
    check_unit("eta", eta)?;
    let correct = crate::score::tokenized_brier(q, CorrectnessLabel::Correct, scale)?;
    let incorrect = crate::score::tokenized_brier(q, CorrectnessLabel::Incorrect, scale)?;
    Ok(eta * correct + (1.0 - eta) * incorrect)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scale(n: usize) -> ConfidenceScale {
        ConfidenceScale::new(n).unwrap()
    }

    #[test]
    fn vertex_risk_examples() {
        assert_eq!(vertex_risk(1.0, 10, scale(10)).unwrap(), 0.0);
        assert!((vertex_risk(0.5, 5, scale(10)).unwrap() - 0.25).abs() < 1e-15);
        assert!((vertex_risk(0.5, 0, scale(10)).unwrap() - 0.5).abs() < 1e-15);
        assert!(vertex_risk(1.5, 0, scale(10)).is_err());
        assert!(vertex_risk(0.5, 11, scale(10)).is_err());
    }

    #[test]
    fn conditional_risk_examples() {
        let s = scale(10);
        let k = s.nearest_token(1.0).unwrap();
        let q = ProbVector::one_hot(s, k).unwrap();
        assert_eq!(conditional_risk(&q, 1.0, s).unwrap(), 0.0);

        let s1 = scale(1);
        let r = conditional_risk(&ProbVector::uniform(s1), 0.5, s1).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
        assert!(conditional_risk(&ProbVector::uniform(s1), 0.5, s).is_err());
    }

    #[test]
    fn discrete_second_difference_is_constant() {
        for n in [2, 9, 10, 100] {
            let s = scale(n);
            for eta in [0.0, 0.13, 0.5, 0.77, 1.0] {
                let p = RiskProfile::new(eta, s).unwrap();
                let f = p.vertex_risks();
                let expected = 2.0 / (n * n) as f64;
                for i in 1..n {
                    let d2 = f[i + 1] - 2.0 * f[i] + f[i - 1];
                    assert!((d2 - expected).abs() < 1e-15, "n={n} eta={eta} i={i}");
                }
            }
        }
    }

    #[test]
    fn verify_examples() {
        let r = verify_properness(0.667, ConfidenceScale::PERCENT, 1000, 1).unwrap();
        assert_eq!(r.argmin_vertices, vec![67]);
        assert!(r.holds && !r.tie);

        let r = verify_properness(0.5, scale(1), 1000, 1).unwrap();
        assert_eq!(r.argmin_vertices, vec![0, 1]);
        assert!(r.tie && r.holds);
        assert_eq!(r.nearest_token, 0);
        assert_eq!(r.runner_up_gap, None);
        assert!((r.min_risk - 0.5).abs() < 1e-15);

        let r = verify_properness(1.0, scale(10), 1000, 1).unwrap();
        assert_eq!(r.argmin_vertices, vec![10]);
        assert_eq!(r.min_risk, 0.0);
    }

    #[test]
    fn runner_up_gap_for_grid_eta() {
        // eta on the grid: neighbours are 1/n away, gap (1/n)^2.
        let r = verify_properness(0.3, scale(10), 10, 0).unwrap();
        assert!((r.runner_up_gap.unwrap() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn absolute_rule_is_caught() {
        let r = verify_rule(ScoringRule::TokenizedAbsolute, 0.7, scale(10), 100, 0).unwrap();
        assert_eq!(r.argmin_vertices, vec![10]);
        assert!(!r.holds);
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(verify_properness(0.3, scale(10), 0, 0).is_err());
    }

    #[test]
    fn sampled_simplex_points_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut q = vec![0.0; 12];
        for _ in 0..100 {
            sample_simplex(&mut rng, &mut q);
            ProbVector::new(q.clone()).unwrap();
        }
    }

    #[test]
    fn descent_examples() {
        for n in [1, 10, 100] {
            let q = minimize_risk_descent(0.0, scale(n), 5000, 1.0, 4).unwrap();
            assert!(q.values()[0] >= 0.99);
        }
        let q = minimize_risk_descent(0.667, ConfidenceScale::PERCENT, 5000, 1.0, 4).unwrap();
        assert!(q.values()[67] >= 0.99, "{}", q.values()[67]);

        let q = minimize_risk_descent(0.65, scale(10), 5000, 1.0, 4).unwrap();
        assert!(q.values()[6] + q.values()[7] >= 0.99);
    }

    #[test]
    fn descent_argument_validation() {
        assert!(minimize_risk_descent(0.5, scale(10), 0, 1.0, 0).is_err());
        assert!(minimize_risk_descent(0.5, scale(10), 10, 0.0, 0).is_err());
        assert!(minimize_risk_descent(1.5, scale(10), 10, 1.0, 0).is_err());
    }
}
