//! Experiment plans: defaults, plan-file parsing, and flag merging.
//!
//! A plan file is plain text, one `key=value` per line, `#` for comments.
//! `model` and `strategy` may repeat. Command-line flags override plan-file
//! values; unset keys fall back to the defaults below.

use std::path::PathBuf;

use bwft::dataset::{ShiftKind, SyntheticTaskSpec};
use bwft::engine::{TrainConfig, DESK_SCALE_EPOCHS, PAPER_EPOCHS};
use bwft::error::{Error, Result};
use bwft::model::ZooEntry;
use bwft::report::VarianceConvention;
use bwft::schedule::PlateauConfig;

/// One experiment strategy column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Baseline1,
    Baseline2,
    LayerWise,
    BlockWise,
    TopK(usize),
    SlidingWindow(usize),
    RandomLayers(usize),
}

impl Strategy {
    pub const DEFAULT_SET: [Strategy; 8] = [
        Strategy::Baseline1,
        Strategy::Baseline2,
        Strategy::LayerWise,
        Strategy::BlockWise,
        Strategy::TopK(3),
        Strategy::TopK(5),
        Strategy::SlidingWindow(3),
        Strategy::RandomLayers(3),
    ];

    pub fn name(&self) -> String {
        match self {
            Strategy::Baseline1 => "baseline1".into(),
            Strategy::Baseline2 => "baseline2".into(),
            Strategy::LayerWise => "lw".into(),
            Strategy::BlockWise => "bw".into(),
            Strategy::TopK(k) => format!("bwt{k}"),
            Strategy::SlidingWindow(_) => "bwsw".into(),
            Strategy::RandomLayers(n) => format!("random{n}"),
        }
    }

    pub fn from_name(name: &str) -> Result<Strategy> {
        match name {
            "baseline1" => Ok(Strategy::Baseline1),
            "baseline2" => Ok(Strategy::Baseline2),
            "lw" => Ok(Strategy::LayerWise),
            "bw" => Ok(Strategy::BlockWise),
            "bwsw" => Ok(Strategy::SlidingWindow(3)),
            _ => {
                if let Some(k) = name.strip_prefix("bwt") {
                    let k: usize = k.parse().map_err(|_| bad_strategy(name))?;
                    if k == 0 {
                        return Err(bad_strategy(name));
                    }
                    return Ok(Strategy::TopK(k));
                }
                if let Some(n) = name.strip_prefix("random") {
                    let n: usize = n.parse().map_err(|_| bad_strategy(name))?;
                    if n == 0 {
                        return Err(bad_strategy(name));
                    }
                    return Ok(Strategy::RandomLayers(n));
                }
                Err(bad_strategy(name))
            }
        }
    }
}

fn bad_strategy(name: &str) -> Error {
    Error::config(format!(
        "unknown strategy {name:?} (expected baseline1, baseline2, lw, bw, bwt<k>, bwsw, or random<n>)"
    ))
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub models: Vec<ZooEntry>,
    pub strategies: Vec<Strategy>,
    pub repeats: usize,
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f32,
    pub batch_size: usize,
    pub paper_protocol: bool,
    pub delimit_batchnorm: bool,
    pub variance: VarianceConvention,
    pub window: usize,
    pub samples_per_class: usize,
    pub image_size: usize,
    pub shift: ShiftKind,
    pub shift_magnitude: f32,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f32,
    pub pretrain_batch_size: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            models: ZooEntry::ALL.to_vec(),
            strategies: Strategy::DEFAULT_SET.to_vec(),
            repeats: 1,
            seed: 1,
            epochs: DESK_SCALE_EPOCHS,
            learning_rate: 5e-5,
            batch_size: 4,
            paper_protocol: false,
            delimit_batchnorm: false,
            variance: VarianceConvention::Sample,
            window: 3,
            samples_per_class: 100,
            image_size: 32,
            shift: ShiftKind::None,
            shift_magnitude: 0.0,
            pretrain_epochs: 20,
            pretrain_lr: 1e-3,
            pretrain_batch_size: 8,
            out_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentPlan {
    /// Applies one plan-file or flag assignment.
    pub fn apply(&mut self, key: &str, value: &str, explicit_models: &mut bool, explicit_strategies: &mut bool) -> Result<()> {
        let parse_err = |what: &str| Error::config(format!("plan key {key}={value}: invalid {what}"));
        match key {
            "model" => {
                if !*explicit_models {
                    self.models.clear();
                    *explicit_models = true;
                }
                let entry = ZooEntry::from_name(value)?;
                if !self.models.contains(&entry) {
                    self.models.push(entry);
                }
            }
            "strategy" => {
                if !*explicit_strategies {
                    self.strategies.clear();
                    *explicit_strategies = true;
                }
                let strategy = Strategy::from_name(value)?;
                if !self.strategies.contains(&strategy) {
                    self.strategies.push(strategy);
                }
            }
            "repeats" => self.repeats = value.parse().map_err(|_| parse_err("integer"))?,
            "seed" => self.seed = value.parse().map_err(|_| parse_err("integer"))?,
            "epochs" => self.epochs = value.parse().map_err(|_| parse_err("integer"))?,
            "learning_rate" | "lr" => {
                self.learning_rate = value.parse().map_err(|_| parse_err("number"))?
            }
            "batch_size" => self.batch_size = value.parse().map_err(|_| parse_err("integer"))?,
            "paper_protocol" => self.paper_protocol = parse_bool(key, value)?,
            "delimit_batchnorm" => self.delimit_batchnorm = parse_bool(key, value)?,
            "population_variance" => {
                self.variance = if parse_bool(key, value)? {
                    VarianceConvention::Population
                } else {
                    VarianceConvention::Sample
                }
            }
            "window" => self.window = value.parse().map_err(|_| parse_err("integer"))?,
            "samples_per_class" => {
                self.samples_per_class = value.parse().map_err(|_| parse_err("integer"))?
            }
            "image_size" => self.image_size = value.parse().map_err(|_| parse_err("integer"))?,
            "shift" => self.shift = ShiftKind::from_name(value)?,
            "shift_magnitude" => {
                self.shift_magnitude = value.parse().map_err(|_| parse_err("number"))?
            }
            "pretrain_epochs" => {
                self.pretrain_epochs = value.parse().map_err(|_| parse_err("integer"))?
            }
            "pretrain_lr" => self.pretrain_lr = value.parse().map_err(|_| parse_err("number"))?,
            "pretrain_batch_size" => {
                self.pretrain_batch_size = value.parse().map_err(|_| parse_err("integer"))?
            }
            "out" => self.out_dir = PathBuf::from(value),
            other => return Err(Error::config(format!("unknown plan key {other:?}"))),
        }
        Ok(())
    }

    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        let mut explicit_models = false;
        let mut explicit_strategies = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("plan line {}: expected key=value, got {raw:?}", lineno + 1))
            })?;
            self.apply(key.trim(), value.trim(), &mut explicit_models, &mut explicit_strategies)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.strategies.is_empty() {
            return Err(Error::config("plan needs at least one model and one strategy"));
        }
        if self.repeats == 0 {
            return Err(Error::config("repeats must be positive"));
        }
        self.train_config(0).validate()?;
        Ok(())
    }

    /// The run recipe; `--paper-protocol` restores the 50-epoch schedule.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: if self.paper_protocol { PAPER_EPOCHS } else { self.epochs },
            plateau: PlateauConfig::default(),
            seed,
        }
    }

    pub fn pretrain_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.pretrain_lr,
            batch_size: self.pretrain_batch_size,
            epochs: self.pretrain_epochs,
            plateau: PlateauConfig::default(),
            seed,
        }
    }

    pub fn source_task(&self, seed: u64) -> SyntheticTaskSpec {
        SyntheticTaskSpec {
            num_classes: 5,
            samples_per_class: self.samples_per_class,
            image_size: self.image_size,
            shift: ShiftKind::None,
            shift_magnitude: 0.0,
            seed,
        }
    }

    pub fn target_task(&self, seed: u64) -> SyntheticTaskSpec {
        SyntheticTaskSpec {
            num_classes: 5,
            samples_per_class: self.samples_per_class,
            image_size: self.image_size,
            shift: self.shift,
            shift_magnitude: self.shift_magnitude,
            seed,
        }
    }

    /// Deterministic echo of every setting, for the manifest.
    pub fn echo(&self) -> Vec<(String, String)> {
        let models: Vec<&str> = self.models.iter().map(|m| m.name()).collect();
        let strategies: Vec<String> = self.strategies.iter().map(|s| s.name()).collect();
        vec![
            ("model".into(), models.join(";")),
            ("strategy".into(), strategies.join(";")),
            ("repeats".into(), self.repeats.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("epochs".into(), self.epochs.to_string()),
            ("learning_rate".into(), format!("{}", self.learning_rate)),
            ("batch_size".into(), self.batch_size.to_string()),
            ("paper_protocol".into(), self.paper_protocol.to_string()),
            ("delimit_batchnorm".into(), self.delimit_batchnorm.to_string()),
            (
                "population_variance".into(),
                (self.variance == VarianceConvention::Population).to_string(),
            ),
            ("window".into(), self.window.to_string()),
            ("samples_per_class".into(), self.samples_per_class.to_string()),
            ("image_size".into(), self.image_size.to_string()),
            ("shift".into(), self.shift.name().into()),
            ("shift_magnitude".into(), format!("{}", self.shift_magnitude)),
            ("pretrain_epochs".into(), self.pretrain_epochs.to_string()),
            ("pretrain_lr".into(), format!("{}", self.pretrain_lr)),
            ("pretrain_batch_size".into(), self.pretrain_batch_size.to_string()),
        ]
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(format!("plan key {key}: expected a boolean, got {value:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_file_overrides_defaults_and_repeats_keys() {
        let mut plan = ExperimentPlan::default();
        plan.apply_file(
            "# comment\nmodel=mini-vgg\nmodel=mini-cnn-pool\nstrategy=bw\nseed=9\nepochs=3\nshift=frequency-shift\nshift_magnitude=0.5\n",
        )
        .unwrap();
        assert_eq!(plan.models, vec![ZooEntry::MiniVgg, ZooEntry::MiniCnnPool]);
        assert_eq!(plan.strategies, vec![Strategy::BlockWise]);
        assert_eq!(plan.seed, 9);
        assert_eq!(plan.epochs, 3);
        assert_eq!(plan.shift, ShiftKind::Frequency);
    }

    #[test]
    fn unknown_keys_and_values_are_config_errors() {
        let mut plan = ExperimentPlan::default();
        assert!(plan.apply_file("bogus=1\n").is_err());
        assert!(plan.apply_file("model=resnet50\n").is_err());
        assert!(plan.apply_file("strategy=bwt0\n").is_err());
        assert!(plan.apply_file("no equals sign\n").is_err());
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::DEFAULT_SET {
            assert_eq!(Strategy::from_name(&s.name()).unwrap(), s);
        }
    }

    #[test]
    fn paper_protocol_restores_fifty_epochs() {
        let plan = ExperimentPlan { paper_protocol: true, ..ExperimentPlan::default() };
        assert_eq!(plan.train_config(0).epochs, 50);
        let desk = ExperimentPlan::default();
        assert_eq!(desk.train_config(0).epochs, 15);
        assert_eq!(desk.train_config(0).learning_rate, 5e-5);
        assert_eq!(desk.train_config(0).batch_size, 4);
    }
}
