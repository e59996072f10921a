use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::evaluation::DevMetric;
use crate::model::{parse_value, ModelSettings};

/// Optimisation and model-selection settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Global gradient-norm ceiling; off by default.
    pub clip_norm: Option<f64>,
    pub seed: u64,
    pub dev_metric: DevMetric,
    /// Stop as soon as the dev metric reaches this value.
    pub target: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 50,
            patience: 5,
            clip_norm: None,
            seed: 0,
            dev_metric: DevMetric::CombinedF1,
            target: None,
        }
    }
}

fn optional(key: &str, value: &str) -> Result<Option<f64>> {
    match value.trim() {
        "none" | "" => Ok(None),
        v => parse_value(key, v).map(Some),
    }
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| String::from("none"), |x| format!("{x:?}"))
}

impl TrainConfig {
    pub const KEYS: [&'static str; 11] = [
        "learning_rate",
        "beta1",
        "beta2",
        "epsilon",
        "batch_size",
        "max_epochs",
        "patience",
        "clip_norm",
        "seed",
        "dev_metric",
        "target",
    ];

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        alloc::vec![
            ("learning_rate", format!("{:?}", self.learning_rate)),
            ("beta1", format!("{:?}", self.beta1)),
            ("beta2", format!("{:?}", self.beta2)),
            ("epsilon", format!("{:?}", self.epsilon)),
            ("batch_size", self.batch_size.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("clip_norm", show(self.clip_norm)),
            ("seed", self.seed.to_string()),
            ("dev_metric", self.dev_metric.name().to_string()),
            ("target", show(self.target)),
        ]
    }

    /// Applies one `key = value` setting; `Ok(false)` for keys it does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "learning_rate" => self.learning_rate = parse_value(key, value)?,
            "beta1" => self.beta1 = parse_value(key, value)?,
            "beta2" => self.beta2 = parse_value(key, value)?,
            "epsilon" => self.epsilon = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "max_epochs" => self.max_epochs = parse_value(key, value)?,
            "patience" => self.patience = parse_value(key, value)?,
            "clip_norm" => self.clip_norm = optional(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "dev_metric" => self.dev_metric = value.trim().parse()?,
            "target" => self.target = optional(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("epsilon", self.epsilon),
            ("clip_norm", self.clip_norm.unwrap_or(1.0)),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("{k} must be positive")));
        }
        for (k, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{k} must lie in [0, 1)")));
            }
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config("batch_size, max_epochs and patience must be positive".into()));
        }
        Ok(())
    }
}

/// Model and training settings together; the unit a grid point varies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Hyperparameters {
    pub model: ModelSettings,
    pub train: TrainConfig,
}

impl Hyperparameters {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if self.model.set(key, value)? || self.train.set(key, value)? {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown setting {key:?}")))
        }
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let mut v = self.model.to_pairs();
        v.extend(self.train.to_pairs());
        v
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_round_trip() {
        let mut h = Hyperparameters::default();
        h.set("clip_norm", "5").unwrap();
        h.set("dev_metric", "combined-em").unwrap();
        h.set("hidden", "16").unwrap();
        h.set("learning_rate", "0.01").unwrap();
        let mut back = Hyperparameters::default();
        for (k, v) in h.to_pairs() {
            back.set(k, &v).unwrap();
        }
        assert_eq!(back, h);
        assert!(back.set("nope", "1").is_err());
        assert_eq!(h.to_pairs().len(), ModelSettings::KEYS.len() + TrainConfig::KEYS.len());
    }

    #[test]
    fn validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let long_patience = TrainConfig {
            patience: 60,
            ..TrainConfig::default()
        };
        assert!(long_patience.validate().is_ok());
        let bad = TrainConfig {
            patience: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
