use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Learning,
    Unlearning,
    /// Evaluation of a baseline's starting model, before any fine-tuning.
    Initial,
    Finetune,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Learning => "learning",
            Phase::Unlearning => "unlearning",
            Phase::Initial => "initial",
            Phase::Finetune => "finetune",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [Phase::Learning, Phase::Unlearning, Phase::Initial, Phase::Finetune]
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Format(format!("unknown phase {s:?}")))
    }
}

/// Evaluation after one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub turn: usize,
    pub phase: Phase,
    pub epoch_in_phase: usize,
    pub global_epoch: usize,
    pub train_loss: f64,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub mia_score: f64,
    pub forget_accuracy: f64,
    /// Seconds since the run started; never written to CSV.
    pub wall_time: f64,
}

pub const CSV_HEADER: &str =
    "turn,phase,epoch_in_phase,global_epoch,train_loss,test_accuracy,mia_score,forget_accuracy";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub records: Vec<MetricsRecord>,
}

impl MetricsLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: MetricsRecord) {
        self.records.push(record);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
                r.turn,
                r.phase,
                r.epoch_in_phase,
                r.global_epoch,
                r.train_loss,
                r.test_accuracy,
                r.mia_score,
                r.forget_accuracy
            );
        }
        out
    }

    /// Parses the CSV written by [`MetricsLog::to_csv`]. Fields absent from
    /// the CSV (`test_loss`, `wall_time`) come back as NaN and 0.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            Some(h) => return Err(Error::Format(format!("unexpected metrics header {h:?}"))),
            None => return Err(Error::Format("empty metrics file".into())),
        }
        let mut records = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::Format(format!("metrics row {}: {line:?}", n + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad());
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad());
            let real = |s: &str| s.parse::<f64>().map_err(|_| bad());
            records.push(MetricsRecord {
                turn: int(f[0])?,
                phase: f[1].parse().map_err(|_| bad())?,
                epoch_in_phase: int(f[2])?,
                global_epoch: int(f[3])?,
                train_loss: real(f[4])?,
                test_accuracy: real(f[5])?,
                test_loss: f64::NAN,
                mia_score: real(f[6])?,
                forget_accuracy: real(f[7])?,
                wall_time: 0.0,
            });
        }
        Ok(Self { records })
    }

    /// Records of one turn in one phase.
    pub fn phase_records(&self, turn: usize, phase: Phase) -> impl Iterator<Item = &MetricsRecord> {
        self.records
            .iter()
            .filter(move |r| r.turn == turn && r.phase == phase)
    }

    pub fn turns(&self) -> usize {
        self.records.iter().map(|r| r.turn).max().unwrap_or(0)
    }
}
