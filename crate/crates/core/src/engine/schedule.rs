use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Data trained on during unlearning phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnlearnData {
    /// Retain set only.
    Retain,
    /// The whole training set, forget samples included.
    FullTrain,
}

impl UnlearnData {
    pub fn as_str(self) -> &'static str {
        match self {
            UnlearnData::Retain => "retain",
            UnlearnData::FullTrain => "full_train",
        }
    }
}

impl fmt::Display for UnlearnData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UnlearnData {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "retain" => Ok(UnlearnData::Retain),
            "full_train" => Ok(UnlearnData::FullTrain),
            _ => Err(Error::Argument(format!(
                "unknown unlearn data {s:?} (expected retain or full_train)"
            ))),
        }
    }
}

/// Learning/unlearning turn structure and SGD settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub turns: usize,
    pub learn_epochs: usize,
    pub unlearn_epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub unlearn_data: UnlearnData,
    pub seed: u64,
}

impl Default for Schedule {
    /// Five turns of two learning and four unlearning epochs.
    fn default() -> Self {
        Self {
            turns: 5,
            learn_epochs: 2,
            unlearn_epochs: 4,
            lr: 0.05,
            batch_size: 64,
            unlearn_data: UnlearnData::Retain,
            seed: 0,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.turns == 0 {
            return Err(Error::Argument("turns must be at least 1".into()));
        }
        if self.learn_epochs + self.unlearn_epochs == 0 {
            return Err(Error::Argument(
                "a turn needs at least one learning or unlearning epoch".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Argument(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn epochs_per_turn(&self) -> usize {
        self.learn_epochs + self.unlearn_epochs
    }

    pub fn total_epochs(&self) -> usize {
        self.turns * self.epochs_per_turn()
    }
}
