//! Experiment configuration: flat `key = value` lines with dotted sections.
//!
//! Blank lines and `#` comments are ignored. Every key is optional and falls
//! back to its default; unknown keys and repeated keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fnn_core::dataset::DatasetKind;
use fnn_core::engine::{FinetuneOn, ForgetLayers, OptimalCriterion, Schedule, UnlearnData};
use fnn_core::forgetting::{ForgettingPolicy, PolicyKind};
use fnn_core::mia::MiaConfig;

use crate::error::CliError;

/// Which classifier the experiment trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// Two conv blocks and two forget-gated dense layers.
    Cnn,
    /// A small dense-only network with the same forget-layer layout.
    Mlp,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Cnn => "cnn",
            Model::Mlp => "mlp",
        }
    }
}

impl FromStr for Model {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cnn" => Ok(Model::Cnn),
            "mlp" => Ok(Model::Mlp),
            _ => Err(format!("unknown model {s:?} (expected cnn or mlp)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    /// Root holding one directory per dataset; `None` defers to `FNN_DATA_DIR`.
    pub data_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub model: Model,
    pub layers: ForgetLayers,
    pub forget_per_class: usize,
    pub split_seed: u64,
    pub policy: ForgettingPolicy,
    pub schedule: Schedule,
    pub mia: MiaConfig,
    pub criterion: OptimalCriterion,
    pub stop_at_first_optimal: bool,
    pub finetune_on: FinetuneOn,
    pub pretrain_epochs: usize,
    /// Fine-tuning epochs; `None` matches the schedule's total epoch count.
    pub baseline_epochs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Digits,
            data_dir: None,
            output_dir: PathBuf::from("out"),
            model: Model::Cnn,
            layers: ForgetLayers::Two,
            forget_per_class: 1000,
            split_seed: 0,
            policy: ForgettingPolicy::default(),
            schedule: Schedule::default(),
            mia: MiaConfig::default(),
            criterion: OptimalCriterion::default(),
            stop_at_first_optimal: false,
            finetune_on: FinetuneOn::Forget,
            pretrain_epochs: 2,
            baseline_epochs: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("{key}: cannot parse {value:?}: {e}"))
}

fn parse_tau(key: &str, value: &str) -> Result<f64, String> {
    if value == "inf" {
        return Ok(f64::INFINITY);
    }
    parse(key, value)
}

fn fmt_real(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".into()
    } else {
        format!("{v}")
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| CliError::Validation(format!("config line {}: {msg}", n + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected `key = value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(at(format!("duplicate key {key:?}")));
            }
            cfg.set(key, value).map_err(at)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg = Self::parse(&text)?;
        // Relative data and output directories are taken from the config's location.
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(dir) = &cfg.data_dir {
            if dir.is_relative() {
                cfg.data_dir = Some(base.join(dir));
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "dataset" => self.dataset = parse(key, v)?,
            "data_dir" => self.data_dir = Some(PathBuf::from(v)),
            "output_dir" => self.output_dir = PathBuf::from(v),
            "model" => self.model = parse(key, v)?,
            "layers" => self.layers = parse(key, v)?,
            "split.forget_per_class" => self.forget_per_class = parse(key, v)?,
            "split.seed" => self.split_seed = parse(key, v)?,
            "policy.kind" => self.policy.kind = parse::<PolicyKind>(key, v)?,
            "policy.tau_fixed" => self.policy.tau_fixed = parse_tau(key, v)?,
            "policy.tau_min" => self.policy.tau_min = parse_tau(key, v)?,
            "policy.tau_max" => self.policy.tau_max = parse_tau(key, v)?,
            "policy.tau_rest" => self.policy.tau_rest = parse_tau(key, v)?,
            "policy.top_k" => self.policy.top_k = parse(key, v)?,
            "policy.seed" => self.policy.seed = parse(key, v)?,
            "schedule.turns" => self.schedule.turns = parse(key, v)?,
            "schedule.learn_epochs" => self.schedule.learn_epochs = parse(key, v)?,
            "schedule.unlearn_epochs" => self.schedule.unlearn_epochs = parse(key, v)?,
            "schedule.lr" => self.schedule.lr = parse(key, v)?,
            "schedule.batch_size" => self.schedule.batch_size = parse(key, v)?,
            "schedule.unlearn_data" => self.schedule.unlearn_data = parse::<UnlearnData>(key, v)?,
            "schedule.seed" => self.schedule.seed = parse(key, v)?,
            "mia.splits" => self.mia.n_splits = parse(key, v)?,
            "mia.split_fraction" => self.mia.split_fraction = parse(key, v)?,
            "mia.min_samples" => self.mia.min_samples = parse(key, v)?,
            "mia.seed" => self.mia.seed = parse(key, v)?,
            "optimal.target_accuracy" => self.criterion.target_accuracy = parse(key, v)?,
            "optimal.mia_tolerance" => self.criterion.mia_tolerance = parse(key, v)?,
            "optimal.stop_at_first" => self.stop_at_first_optimal = parse(key, v)?,
            "baseline.finetune_on" => self.finetune_on = parse(key, v)?,
            "baseline.pretrain_epochs" => self.pretrain_epochs = parse(key, v)?,
            "baseline.epochs" => {
                self.baseline_epochs = if v == "auto" { None } else { Some(parse(key, v)?) }
            }
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Every key in a fixed order; parsing this text yields `self` again.
    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("dataset", self.dataset.to_string());
        if let Some(dir) = &self.data_dir {
            kv("data_dir", dir.display().to_string());
        }
        kv("output_dir", self.output_dir.display().to_string());
        kv("model", self.model.as_str().into());
        kv("layers", self.layers.to_string());
        kv("split.forget_per_class", self.forget_per_class.to_string());
        kv("split.seed", self.split_seed.to_string());
        let p = &self.policy;
        kv("policy.kind", p.kind.to_string());
        kv("policy.tau_fixed", fmt_real(p.tau_fixed));
        kv("policy.tau_min", fmt_real(p.tau_min));
        kv("policy.tau_max", fmt_real(p.tau_max));
        kv("policy.tau_rest", fmt_real(p.tau_rest));
        kv("policy.top_k", p.top_k.to_string());
        kv("policy.seed", p.seed.to_string());
        let s = &self.schedule;
        kv("schedule.turns", s.turns.to_string());
        kv("schedule.learn_epochs", s.learn_epochs.to_string());
        kv("schedule.unlearn_epochs", s.unlearn_epochs.to_string());
        kv("schedule.lr", fmt_real(s.lr));
        kv("schedule.batch_size", s.batch_size.to_string());
        kv("schedule.unlearn_data", s.unlearn_data.to_string());
        kv("schedule.seed", s.seed.to_string());
        kv("mia.splits", self.mia.n_splits.to_string());
        kv("mia.split_fraction", fmt_real(self.mia.split_fraction));
        kv("mia.min_samples", self.mia.min_samples.to_string());
        kv("mia.seed", self.mia.seed.to_string());
        kv("optimal.target_accuracy", fmt_real(self.criterion.target_accuracy));
        kv("optimal.mia_tolerance", fmt_real(self.criterion.mia_tolerance));
        kv("optimal.stop_at_first", self.stop_at_first_optimal.to_string());
        kv("baseline.finetune_on", self.finetune_on.to_string());
        kv("baseline.pretrain_epochs", self.pretrain_epochs.to_string());
        kv(
            "baseline.epochs",
            self.baseline_epochs.map_or("auto".into(), |e| e.to_string()),
        );
        out
    }

    /// Replaces every seed in the config.
    pub fn override_seed(&mut self, seed: u64) {
        self.split_seed = seed;
        self.policy.seed = seed;
        self.schedule.seed = seed;
        self.mia.seed = seed;
    }

    pub fn baseline_epochs(&self) -> usize {
        self.baseline_epochs
            .unwrap_or_else(|| self.schedule.total_epochs())
    }

    /// Checks value ranges. Data files are checked when they are resolved.
    pub fn validate(&self) -> Result<(), CliError> {
        let v = |e: fnn_core::Error| CliError::Validation(e.to_string());
        self.policy.validate().map_err(v)?;
        self.schedule.validate().map_err(v)?;
        self.mia.validate().map_err(v)?;
        if self.forget_per_class == 0 {
            return Err(CliError::Validation(
                "split.forget_per_class must be at least 1".into(),
            ));
        }
        let c = &self.criterion;
        if !(0.0..=1.0).contains(&c.target_accuracy) || !(0.0..=0.5).contains(&c.mia_tolerance) {
            return Err(CliError::Validation(
                "optimal.target_accuracy must lie in [0, 1] and optimal.mia_tolerance in [0, 0.5]"
                    .into(),
            ));
        }
        Ok(())
    }
}
