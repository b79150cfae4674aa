//! Flat `key = value` run configuration.
//!
//! Values are resolved in order: built-in defaults, the config file (from
//! `--config` or `$TOKBRIER_CONFIG`), then `--set key=value` overrides, then
//! subcommand flags.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::apps::SimPolicy;
use crate::error::{Error, Result};
use crate::scale::ConfidenceScale;
use crate::toy::{TrainConfig, DEFAULT_HIDDEN, DEFAULT_INPUT_DIM};

pub const CONFIG_ENV: &str = "TOKBRIER_CONFIG";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scale_n: usize,
    pub bins: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub reg_weight: f64,
    pub threshold: f64,
    pub strong_accuracy: f64,
    pub flip_risk: f64,
    pub budgets: Vec<usize>,
    pub budget: usize,
    pub dim: usize,
    pub hidden: usize,
    pub train_size: usize,
    pub test_size: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let sim = SimPolicy::self_correct();
        Self {
            scale_n: 100,
            bins: 10,
            seed: 0,
            learning_rate: train.learning_rate,
            epochs: train.epochs,
            batch_size: train.batch_size,
            reg_weight: train.reg_weight,
            threshold: sim.threshold,
            strong_accuracy: sim.strong_accuracy,
            flip_risk: sim.flip_risk,
            budgets: vec![0, 100, 200, 300, 400],
            budget: 0,
            dim: DEFAULT_INPUT_DIM,
            hidden: DEFAULT_HIDDEN,
            train_size: 20_000,
            test_size: 5_000,
        }
    }
}

/// Every recognized key with a one-line description.
pub const KEYS: [(&str, &str); 16] = [
    ("scale_n", "confidence grid size N (tokens 0..=N)"),
    ("bins", "reliability-diagram bins"),
    ("seed", "base random seed"),
    ("learning_rate", "training step size"),
    ("epochs", "training epochs"),
    ("batch_size", "training mini-batch size"),
    ("reg_weight", "anchor regularizer weight"),
    (
        "threshold",
        "self-correction trigger: refine at or below this confidence",
    ),
    ("strong_accuracy", "probability a refined answer is correct"),
    ("flip_risk", "probability self-correction breaks a correct answer"),
    (
        "budgets",
        "comma-separated cascade budgets for the expected-accuracy curve",
    ),
    ("budget", "cascade budget for the sampled simulation"),
    ("dim", "synthetic feature dimension"),
    ("hidden", "toy head hidden width"),
    ("train_size", "synthetic training samples"),
    ("test_size", "synthetic held-out samples"),
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scale_n" => self.scale_n = parse(key, value)?,
            "bins" => self.bins = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "reg_weight" => self.reg_weight = parse(key, value)?,
            "threshold" => self.threshold = parse(key, value)?,
            "strong_accuracy" => self.strong_accuracy = parse(key, value)?,
            "flip_risk" => self.flip_risk = parse(key, value)?,
            "budgets" => self.budgets = parse_budgets(value)?,
            "budget" => self.budget = parse(key, value)?,
            "dim" => self.dim = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "train_size" => self.train_size = parse(key, value)?,
            "test_size" => self.test_size = parse(key, value)?,
            other => {
                let known: Vec<&str> = KEYS.iter().map(|(k, _)| *k).collect();
                return Err(Error::Config(format!(
                    "unknown key {other:?}; known keys: {}",
                    known.join(", ")
                )));
            }
        }
        Ok(())
    }

    /// Applies a config file's contents on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |message: String| Error::Config(format!("line {}: {message}", i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected key = value, got {line:?}")))?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(at(format!("duplicate key {key:?}")));
            }
            seen.push(key);
            self.set(key, value).map_err(|e| at(e.to_string()))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    /// Defaults, then `file` (or `$TOKBRIER_CONFIG` when `file` is `None`),
    /// then each `key=value` override.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let env_path = std::env::var_os(CONFIG_ENV).filter(|p| !p.is_empty());
        let mut config = match file.or(env_path.as_deref().map(Path::new)) {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects key=value, got {item:?}")))?;
            config.set(key.trim(), value)?;
        }
        Ok(config)
    }

    pub fn scale(&self) -> Result<ConfidenceScale> {
        ConfidenceScale::new(self.scale_n)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            reg_weight: self.reg_weight,
            seed: self.seed,
        }
    }

    pub fn sim_policy(&self) -> SimPolicy {
        SimPolicy {
            threshold: self.threshold,
            budget: self.budget,
            strong_accuracy: self.strong_accuracy,
            flip_risk: self.flip_risk,
            seed: self.seed,
            ..SimPolicy::self_correct()
        }
    }

    /// The configuration as a config file, with key descriptions.
    pub fn to_text(&self) -> String {
        let budgets: Vec<String> = self.budgets.iter().map(usize::to_string).collect();
        let values = [
            self.scale_n.to_string(),
            self.bins.to_string(),
            self.seed.to_string(),
            self.learning_rate.to_string(),
            self.epochs.to_string(),
            self.batch_size.to_string(),
            self.reg_weight.to_string(),
            self.threshold.to_string(),
            self.strong_accuracy.to_string(),
            self.flip_risk.to_string(),
            budgets.join(","),
            self.budget.to_string(),
            self.dim.to_string(),
            self.hidden.to_string(),
            self.train_size.to_string(),
            self.test_size.to_string(),
        ];
        let mut out = String::new();
        for ((key, doc), value) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "# {doc}\n{key} = {value}");
        }
        out
    }
}

pub fn parse_budgets(value: &str) -> Result<Vec<usize>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|b| parse("budgets", b)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_and_comments() {
        let mut c = RunConfig::default();
        c.apply_text("# header\nscale_n = 10  # inline\n\nbudgets=0, 5,10\nreg_weight=0.5\n")
            .unwrap();
        assert_eq!(c.scale_n, 10);
        assert_eq!(c.budgets, [0, 5, 10]);
        assert_eq!(c.reg_weight, 0.5);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let err = RunConfig::default().apply_text("scale_n=10\nlr=0.1\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(err.to_string().contains("unknown key"), "{err}");
        assert!(RunConfig::default().apply_text("seed=1\nseed=2\n").is_err());
        assert!(RunConfig::default().apply_text("seed\n").is_err());
        assert!(RunConfig::default().apply_text("epochs=many\n").is_err());
    }

    #[test]
    fn rendered_defaults_parse_back() {
        let mut c = RunConfig::default();
        c.apply_text(&RunConfig::default().to_text()).unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn overrides_win() {
        let c = RunConfig::resolve(None, &["bins=5".into(), "threshold = 0.3".into()]);
        // $TOKBRIER_CONFIG may be set in the environment running the tests.
        if std::env::var_os(CONFIG_ENV).is_none() {
            let c = c.unwrap();
            assert_eq!((c.bins, c.threshold), (5, 0.3));
        }
        assert!(RunConfig::resolve(None, &["bins".into()]).is_err());
    }
}
