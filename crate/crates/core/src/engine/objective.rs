use std::fmt::Write as _;
use std::path::PathBuf;

use crate::engine::metrics::{MetricsRecord, Phase};

/// Ranking score of a checkpoint: mean test loss plus twice the distance of
/// the attack score from chance. Lower is better; 0 is ideal.
pub fn objective(test_loss_mean: f64, mia_score: f64) -> f64 {
    test_loss_mean + 2.0 * (mia_score - 0.5).abs()
}

/// Acceptance window for an optimal point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalCriterion {
    pub target_accuracy: f64,
    pub mia_tolerance: f64,
}

impl Default for OptimalCriterion {
    fn default() -> Self {
        Self {
            target_accuracy: 0.95,
            mia_tolerance: 0.10,
        }
    }
}

// Absorbs representation error so that the window is closed at both ends
// (|0.6 - 0.5| evaluates to 0.09999999999999998).
const BOUNDARY_SLACK: f64 = 1e-12;

impl OptimalCriterion {
    pub fn accepts(&self, test_accuracy: f64, mia_score: f64) -> bool {
        test_accuracy >= self.target_accuracy - BOUNDARY_SLACK
            && (mia_score - 0.5).abs() <= self.mia_tolerance + BOUNDARY_SLACK
    }
}

/// Whether `record` meets the joint accuracy/attack criterion (inclusive).
pub fn check_optimal(record: &MetricsRecord, target_acc: f64, mia_tol: f64) -> bool {
    OptimalCriterion {
        target_accuracy: target_acc,
        mia_tolerance: mia_tol,
    }
    .accepts(record.test_accuracy, record.mia_score)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalPoint {
    pub turn: usize,
    pub phase: Phase,
    pub global_epoch: usize,
    pub test_accuracy: f64,
    pub mia_score: f64,
    pub objective: f64,
    pub checkpoint: Option<PathBuf>,
}

pub const OPTIMAL_CSV_HEADER: &str =
    "global_epoch,turn,phase,test_accuracy,mia_score,objective,checkpoint";

pub fn optimal_points_csv(points: &[OptimalPoint]) -> String {
    let mut out = String::from(OPTIMAL_CSV_HEADER);
    out.push('\n');
    for p in points {
        let ckpt = p
            .checkpoint
            .as_ref()
            .and_then(|c| c.file_name())
            .map(|c| c.to_string_lossy().into_owned())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{}",
            p.global_epoch, p.turn, p.phase, p.test_accuracy, p.mia_score, p.objective, ckpt
        );
    }
    out
}
