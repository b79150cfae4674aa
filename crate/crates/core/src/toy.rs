//! A one-hidden-layer confidence head trained with the tokenized Brier
//! score, optionally anchored to its own initial predictions.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{auroc, reliability_diagram, DEFAULT_BINS};
use crate::prob::{log_sum_exp, restricted_softmax, softmax_into, LogitVector};
use crate::record::CalibrationRecord;
use crate::scale::ConfidenceScale;
use crate::score::{brier_loss_grad_into, CorrectnessLabel};
use crate::synthetic::{bayes_optimal_records, SyntheticDataset};

pub const DEFAULT_HIDDEN: usize = 64;
pub const DEFAULT_INPUT_DIM: usize = 4;

/// Initial weights are drawn from `N(0, INIT_GAIN^2 / fan_in)`.
pub const INIT_GAIN: f64 = 0.1;

const HEAD_FORMAT: &str = "tokbrier-head";
const HEAD_VERSION: u32 = 1;

/// `x -> W2 tanh(W1 x + b1) + b2`, producing one logit per confidence token.
///
/// Weight matrices are row-major: `w1` is `hidden x input`, `w2` is
/// `(n + 1) x hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfidenceHead {
    input: usize,
    hidden: usize,
    scale: ConfidenceScale,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
    seed: u64,
}

impl ToyConfidenceHead {
    pub fn new(input: usize, hidden: usize, scale: ConfidenceScale, seed: u64) -> Result<Self> {
        let mut head = Self::zeros(input, hidden, scale)?;
        head.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s1 = INIT_GAIN / (input as f64).sqrt();
        let s2 = INIT_GAIN / (hidden as f64).sqrt();
        for w in &mut head.w1 {
            *w = s1 * rng.sample::<f64, _>(StandardNormal);
        }
        for w in &mut head.w2 {
            *w = s2 * rng.sample::<f64, _>(StandardNormal);
        }
        Ok(head)
    }

    /// All weights and biases zero: every input maps to uniform `q`.
    pub fn zeros(input: usize, hidden: usize, scale: ConfidenceScale) -> Result<Self> {
        if input == 0 || hidden == 0 {
            return Err(Error::InvalidArgument(
                "head input and hidden sizes must be at least 1".into(),
            ));
        }
        let output = scale.num_tokens();
        Ok(Self {
            input,
            hidden,
            scale,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; output * hidden],
            b2: vec![0.0; output],
            seed: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.b2.len()
    }

    pub fn scale(&self) -> ConfidenceScale {
        self.scale
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Flat parameters in the order `w1, b1, w2, b2`.
    pub fn params(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::LengthMismatch {
                expected: self.num_params(),
                found: params.len(),
            });
        }
        let mut rest = params;
        for part in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            let (head, tail) = rest.split_at(part.len());
            part.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    fn all_finite(&self) -> bool {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .all(|p| p.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input {
            return Err(Error::LengthMismatch {
                expected: self.input,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<LogitVector> {
        self.check_input(x)?;
        let mut h = vec![0.0; self.hidden];
        let mut f = vec![0.0; self.output_dim()];
        self.forward_into(x, &mut h, &mut f);
        LogitVector::new(f)
    }

    /// Greedy readout: the index of the largest logit.
    pub fn predict_token(&self, x: &[f64]) -> Result<usize> {
        Ok(self.forward(x)?.argmax())
    }

    fn forward_into(&self, x: &[f64], h: &mut [f64], f: &mut [f64]) {
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &self.w1[j * self.input..(j + 1) * self.input];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[j];
            *hj = z.tanh();
        }
        for (k, fk) in f.iter_mut().enumerate() {
            let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
            *fk = row.iter().zip(h.iter()).map(|(w, v)| w * v).sum::<f64>() + self.b2[k];
        }
    }

    /// Adds the parameter gradient for one sample to `grad` (laid out like
    /// [`params`](Self::params)) and returns that sample's loss.
    fn accumulate(&self, x: &[f64], y: f64, reg: Option<(f64, &[f64])>, ws: &mut Workspace, grad: &mut [f64]) -> f64 {
        self.forward_into(x, &mut ws.h, &mut ws.f);
        let mut loss = brier_loss_grad_into(&ws.f, y, self.scale, &mut ws.q, &mut ws.g);
        if let Some((lambda, anchor)) = reg {
            loss += lambda * anchor_penalty_grad(&ws.f, anchor, &ws.q, lambda, &mut ws.a, &mut ws.g);
        }

        let (gw1, rest) = grad.split_at_mut(self.w1.len());
        let (gb1, rest) = rest.split_at_mut(self.b1.len());
        let (gw2, gb2) = rest.split_at_mut(self.w2.len());
        ws.dz.iter_mut().for_each(|d| *d = 0.0);
        for (k, &gk) in ws.g.iter().enumerate() {
            gb2[k] += gk;
            let row = k * self.hidden..(k + 1) * self.hidden;
            for ((gw, &hj), (dz, &w)) in gw2[row.clone()]
                .iter_mut()
                .zip(ws.h.iter())
                .zip(ws.dz.iter_mut().zip(&self.w2[row]))
            {
                *gw += gk * hj;
                *dz += gk * w;
            }
        }
        for (j, (dz, &hj)) in ws.dz.iter().zip(ws.h.iter()).enumerate() {
            let d = dz * (1.0 - hj * hj);
            gb1[j] += d;
            for (gw, &xi) in gw1[j * self.input..(j + 1) * self.input].iter_mut().zip(x) {
                *gw += d * xi;
            }
        }
        loss
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&HeadFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::try_from(serde_json::from_str::<HeadFile>(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Writes `CE(a || q)` gradient `lambda * (q - a)` into `g` on top of what is
/// already there and returns `CE(a || q) = -sum_i a_i ln q_i`.
fn anchor_penalty_grad(f: &[f64], anchor_logits: &[f64], q: &[f64], lambda: f64, a: &mut [f64], g: &mut [f64]) -> f64 {
    softmax_into(anchor_logits, a);
    let lse = log_sum_exp(f);
    let mut ce = 0.0;
    for i in 0..f.len() {
        ce -= a[i] * (f[i] - lse);
        g[i] += lambda * (q[i] - a[i]);
    }
    ce
}

struct Workspace {
    h: Vec<f64>,
    dz: Vec<f64>,
    f: Vec<f64>,
    q: Vec<f64>,
    a: Vec<f64>,
    g: Vec<f64>,
}

impl Workspace {
    fn new(head: &ToyConfidenceHead) -> Self {
        let o = head.output_dim();
        Self {
            h: vec![0.0; head.hidden],
            dz: vec![0.0; head.hidden],
            f: vec![0.0; o],
            q: vec![0.0; o],
            a: vec![0.0; o],
            g: vec![0.0; o],
        }
    }
}

#[derive(Serialize, Deserialize)]
struct HeadFile {
    format: String,
    version: u32,
    /// `[input, hidden, output]`.
    dims: [usize; 3],
    seed: u64,
    w1: Vec<f64>,
    w2: Vec<f64>,
    b1: Vec<f64>,
    b2: Vec<f64>,
}

impl From<&ToyConfidenceHead> for HeadFile {
    fn from(h: &ToyConfidenceHead) -> Self {
        HeadFile {
            format: HEAD_FORMAT.into(),
            version: HEAD_VERSION,
            dims: [h.input, h.hidden, h.output_dim()],
            seed: h.seed,
            w1: h.w1.clone(),
            w2: h.w2.clone(),
            b1: h.b1.clone(),
            b2: h.b2.clone(),
        }
    }
}

impl TryFrom<HeadFile> for ToyConfidenceHead {
    type Error = Error;

    fn try_from(file: HeadFile) -> Result<Self> {
        if file.format != HEAD_FORMAT || file.version != HEAD_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported head file {} v{}",
                file.format, file.version
            )));
        }
        let [input, hidden, output] = file.dims;
        let scale = ConfidenceScale::new(output.saturating_sub(1))?;
        let mut head = ToyConfidenceHead::zeros(input, hidden, scale)?;
        head.seed = file.seed;
        head.set_params(&[file.w1, file.b1, file.w2, file.b2].concat())?;
        if !head.all_finite() {
            return Err(Error::InvalidArgument(
                "head file contains non-finite parameters".into(),
            ));
        }
        Ok(head)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "regularizer weight must be a finite non-negative number, got {lambda}"
        )));
    }
    Ok(())
}

/// Tokenized Brier loss of the head's prediction plus `lambda` times the
/// cross-entropy of that prediction against `softmax(anchor_logits)`.
pub fn loss_with_reg(
    head: &ToyConfidenceHead,
    x: &[f64],
    y: CorrectnessLabel,
    scale: ConfidenceScale,
    lambda: f64,
    anchor_logits: &LogitVector,
) -> Result<f64> {
    Ok(loss_and_grad(head, x, y, scale, lambda, anchor_logits)?.0)
}

/// [`loss_with_reg`] together with its gradient with respect to the flat
/// head parameters.
pub fn loss_and_grad(
    head: &ToyConfidenceHead,
    x: &[f64],
    y: CorrectnessLabel,
    scale: ConfidenceScale,
    lambda: f64,
    anchor_logits: &LogitVector,
) -> Result<(f64, Vec<f64>)> {
    check_lambda(lambda)?;
    if scale != head.scale {
        return Err(Error::LengthMismatch {
            expected: head.output_dim(),
            found: scale.num_tokens(),
        });
    }
    head.check_input(x)?;
    scale.check_len(anchor_logits.len())?;
    let mut grad = vec![0.0; head.num_params()];
    let reg = (lambda > 0.0).then_some((lambda, anchor_logits.values()));
    let loss = head.accumulate(x, y.as_f64(), reg, &mut Workspace::new(head), &mut grad);
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub reg_weight: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 128,
            reg_weight: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        check_lambda(self.reg_weight)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub scale_n: usize,
    pub config: TrainConfig,
    pub head_seed: u64,
    pub train_size: usize,
    pub heldout_size: usize,
    /// Mean loss over the full training set after each epoch.
    pub epoch_loss: Vec<f64>,
    /// Norm of the full-training-set mean gradient after each epoch.
    pub epoch_grad_norm: Vec<f64>,
    /// Epochs (1-based) whose full-set loss exceeded the previous epoch's.
    pub loss_increase_epochs: Vec<usize>,
    pub untrained_ece: f64,
    pub final_ece: f64,
    pub final_auroc: Option<f64>,
    /// Fraction of held-out inputs whose greedy token equals the token
    /// nearest to the true `eta`.
    pub oracle_token_agreement: f64,
    pub oracle_ece: f64,
    pub oracle_auroc: Option<f64>,
}

/// Greedy-readout records for every input of `data`.
pub fn head_records(head: &ToyConfidenceHead, data: &SyntheticDataset) -> Result<Vec<CalibrationRecord>> {
    (0..data.len())
        .map(|i| {
            let logits = head.forward(&data.features[i])?;
            CalibrationRecord::with_logits(data.record_id(i), logits, data.labels[i])
                .method_tag("toy_head")
                .true_eta_value(data.true_eta[i])
        })
        .collect()
}

fn optional_auroc(records: &[CalibrationRecord]) -> Result<Option<f64>> {
    match auroc(records) {
        Ok(a) => Ok(Some(a)),
        Err(Error::AurocUndefined) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Mean loss and mean gradient over a whole dataset.
fn full_loss_grad(
    head: &ToyConfidenceHead,
    data: &SyntheticDataset,
    anchor: Option<(f64, &ToyConfidenceHead)>,
    ws: &mut Workspace,
    grad: &mut [f64],
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut anchor_f = vec![0.0; head.output_dim()];
    let mut anchor_h = vec![0.0; head.hidden];
    let mut total = 0.0;
    for (x, y) in data.features.iter().zip(&data.labels) {
        let reg = anchor.map(|(lambda, a)| {
            a.forward_into(x, &mut anchor_h, &mut anchor_f);
            (lambda, &anchor_f[..])
        });
        total += head.accumulate(x, y.as_f64(), reg, ws, grad);
    }
    let m = data.len() as f64;
    grad.iter_mut().for_each(|g| *g /= m);
    total / m
}

/// Mini-batch gradient descent on [`loss_with_reg`] over `train`, with
/// calibration measured on `heldout`. When `reg_weight > 0` the anchor is a
/// frozen copy of `head` as passed in.
pub fn train(
    head: &mut ToyConfidenceHead,
    train: &SyntheticDataset,
    heldout: &SyntheticDataset,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if train.is_empty() || heldout.is_empty() {
        return Err(Error::InvalidArgument(
            "training and held-out sets must be non-empty".into(),
        ));
    }
    for data in [train, heldout] {
        head.check_input(&data.features[0])?;
    }
    let scale = head.scale;
    let untrained_ece = reliability_diagram(&head_records(head, heldout)?, DEFAULT_BINS)?.ece();

    let anchor_head = head.clone();
    let anchor = (config.reg_weight > 0.0).then_some((config.reg_weight, &anchor_head));
    let mut ws = Workspace::new(head);
    let mut anchor_h = vec![0.0; head.hidden];
    let mut anchor_f = vec![0.0; head.output_dim()];
    let mut grad = vec![0.0; head.num_params()];
    let mut params = head.params();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut epoch_loss = Vec::with_capacity(config.epochs);
    let mut epoch_grad_norm = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let x = &train.features[i];
                let reg = anchor.map(|(lambda, a)| {
                    a.forward_into(x, &mut anchor_h, &mut anchor_f);
                    (lambda, &anchor_f[..])
                });
                head.accumulate(x, train.labels[i].as_f64(), reg, &mut ws, &mut grad);
            }
            let step = config.learning_rate / batch.len() as f64;
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= step * g;
            }
            head.set_params(&params)?;
            if !head.all_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
        }
        let loss = full_loss_grad(head, train, anchor, &mut ws, &mut grad);
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        epoch_loss.push(loss);
        epoch_grad_norm.push(grad.iter().map(|g| g * g).sum::<f64>().sqrt());
    }

    let loss_increase_epochs = epoch_loss
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0])
        .map(|(i, _)| i + 2)
        .collect();

    let records = head_records(head, heldout)?;
    let oracle = bayes_optimal_records(heldout, scale)?;
    let agree = records
        .iter()
        .zip(&heldout.true_eta)
        .map(|(r, &eta)| match r.prediction() {
            crate::record::Prediction::Logits(f) => Ok(f.argmax() == scale.nearest_token(eta)?),
            crate::record::Prediction::Confidence(_) => unreachable!("head records carry logits"),
        })
        .collect::<Result<Vec<bool>>>()?;

    Ok(TrainReport {
        scale_n: scale.n(),
        config: config.clone(),
        head_seed: head.seed,
        train_size: train.len(),
        heldout_size: heldout.len(),
        epoch_loss,
        epoch_grad_norm,
        loss_increase_epochs,
        untrained_ece,
        final_ece: reliability_diagram(&records, DEFAULT_BINS)?.ece(),
        final_auroc: optional_auroc(&records)?,
        oracle_token_agreement: agree.iter().filter(|&&a| a).count() as f64 / agree.len() as f64,
        oracle_ece: reliability_diagram(&oracle, DEFAULT_BINS)?.ece(),
        oracle_auroc: optional_auroc(&oracle)?,
    })
}

/// The head's mean predicted distribution over a set of inputs.
pub fn mean_distribution(head: &ToyConfidenceHead, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut mean = vec![0.0; head.output_dim()];
    for x in inputs {
        for (m, q) in mean.iter_mut().zip(restricted_softmax(&head.forward(x)?).values()) {
            *m += q / inputs.len() as f64;
        }
    }
    Ok(mean)
}
