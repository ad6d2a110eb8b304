//! Loss-threshold membership inference.
//!
//! The attacker sees per-sample losses of *members* (the forget set) and
//! *non-members* (the test set) and learns a single threshold, in either
//! direction, that best separates them. The score is the attacker's balanced
//! accuracy on held-out halves, averaged over several random splits: 0.5
//! means the two populations are indistinguishable, 1.0 means perfectly
//! separable.

use std::fmt::Write as _;

use crate::dataset::ImageSet;
use crate::error::{Error, Result};
use crate::forgetting::ForgetClock;
use crate::nn::{evaluate, Network, EVAL_BATCH};
use crate::rng::Rng;
use crate::tensor::Scalar;

const STREAM_EQUALIZE: u64 = 0x45;
const STREAM_SPLIT: u64 = 0x53;

#[derive(Debug, Clone, PartialEq)]
pub struct MiaConfig {
    pub n_splits: usize,
    /// Fraction of each side used to fit the threshold.
    pub split_fraction: f64,
    pub seed: u64,
    /// Refuse to score with fewer samples than this on either side.
    pub min_samples: usize,
}

impl Default for MiaConfig {
    fn default() -> Self {
        Self {
            n_splits: 5,
            split_fraction: 0.5,
            seed: 0,
            min_samples: 10,
        }
    }
}

impl MiaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_splits == 0 {
            return Err(Error::Argument("n_splits must be at least 1".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Argument(format!(
                "split_fraction must lie in (0, 1), got {}",
                self.split_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiaScore {
    pub score: f64,
    pub per_split: Vec<f64>,
    /// Samples per side after equalization.
    pub samples_per_side: usize,
    pub n_forget: usize,
    pub n_test: usize,
}

/// A fitted threshold attack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdAttack {
    pub threshold: f64,
    /// `true`: predict "member" when the loss is below the threshold.
    pub members_below: bool,
    /// Balanced accuracy on the data it was fitted to.
    pub fit_accuracy: f64,
}

impl ThresholdAttack {
    pub fn predicts_member(&self, loss: f64) -> bool {
        if self.members_below {
            loss < self.threshold
        } else {
            loss > self.threshold
        }
    }

    /// Mean of the true-positive and true-negative rates.
    pub fn balanced_accuracy(&self, members: &[f64], nonmembers: &[f64]) -> f64 {
        let tpr = members.iter().filter(|&&l| self.predicts_member(l)).count() as f64
            / members.len() as f64;
        let tnr = nonmembers.iter().filter(|&&l| !self.predicts_member(l)).count() as f64
            / nonmembers.len() as f64;
        0.5 * (tpr + tnr)
    }

    /// Whether the fit found any separating signal at all.
    pub fn is_informative(&self) -> bool {
        self.fit_accuracy > 0.5
    }
}

/// Sweeps every midpoint between consecutive distinct losses, in both
/// directions, and keeps the best balanced accuracy (lowest threshold on ties).
pub fn fit_threshold(members: &[f64], nonmembers: &[f64]) -> ThresholdAttack {
    let mut all: Vec<(f64, bool)> = members
        .iter()
        .map(|&l| (l, true))
        .chain(nonmembers.iter().map(|&l| (l, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Balanced accuracy is kept as an exact fraction over 2mn so that ties
    // and the swapped problem compare identically.
    let (m, n) = (members.len() as u128, nonmembers.len() as u128);
    let total = 2 * m * n;
    let mut best_num = m * n;
    let mut best = ThresholdAttack {
        threshold: f64::NEG_INFINITY,
        members_below: true,
        fit_accuracy: 0.5,
    };
    let (mut members_below, mut nonmembers_below) = (0u128, 0u128);
    for i in 0..all.len() {
        if all[i].1 {
            members_below += 1;
        } else {
            nonmembers_below += 1;
        }
        let Some(&(next, _)) = all.get(i + 1) else {
            break;
        };
        if next == all[i].0 {
            continue;
        }
        let low = members_below * n + (n - nonmembers_below) * m;
        let (num, below) = if 2 * low >= total {
            (low, true)
        } else {
            (total - low, false)
        };
        if num > best_num {
            best_num = num;
            best = ThresholdAttack {
                threshold: 0.5 * (all[i].0 + next),
                members_below: below,
                fit_accuracy: num as f64 / total as f64,
            };
        }
    }
    best
}

/// Fits on one half and scores on the other; an uninformative fit scores 0.5.
pub fn attack_split(
    fit_members: &[f64],
    fit_nonmembers: &[f64],
    eval_members: &[f64],
    eval_nonmembers: &[f64],
) -> f64 {
    let attack = fit_threshold(fit_members, fit_nonmembers);
    if attack.is_informative() {
        attack.balanced_accuracy(eval_members, eval_nonmembers)
    } else {
        0.5
    }
}

/// Cross-entropy of every sample of `set` under `net` at the clock's `t`.
pub fn per_sample_losses<T: Scalar>(
    net: &Network<T>,
    set: &ImageSet,
    clock: &ForgetClock,
) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(Error::Argument(format!("{} is empty", set.name)));
    }
    let images = set.images.cast::<T>();
    Ok(evaluate(net, &images, &set.labels, clock, EVAL_BATCH)?.losses)
}

/// A seeded shuffle of `values` truncated to `keep` entries.
///
/// The permutation depends only on `seed` and `values.len()`.
pub fn equalize(values: &[f64], keep: usize, seed: u64) -> Vec<f64> {
    let perm = Rng::derive(seed, &[STREAM_EQUALIZE, values.len() as u64]).permutation(values.len());
    perm.into_iter().take(keep).map(|i| values[i]).collect()
}

/// Fit and evaluation indices of split `split` over `n` samples per side.
/// Both sides of the attack use the same index partition.
pub fn split_halves(cfg: &MiaConfig, n: usize, split: usize) -> (Vec<usize>, Vec<usize>) {
    let fit = ((n as f64 * cfg.split_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut perm = Rng::derive(cfg.seed, &[STREAM_SPLIT, split as u64, n as u64]).permutation(n);
    let eval = perm.split_off(fit);
    (perm, eval)
}

/// Membership-inference score of forget-set losses against test-set losses.
///
/// Random choices depend only on the seed and the array lengths, never on
/// which side is which, so swapping the two arrays leaves the score unchanged.
pub fn mia_score(forget_losses: &[f64], test_losses: &[f64], cfg: &MiaConfig) -> Result<MiaScore> {
    cfg.validate()?;
    let smaller = forget_losses.len().min(test_losses.len());
    if smaller < cfg.min_samples.max(2) {
        return Err(Error::InsufficientSamples(format!(
            "{} forget and {} test losses; at least {} per side required",
            forget_losses.len(),
            test_losses.len(),
            cfg.min_samples.max(2)
        )));
    }
    if forget_losses.iter().chain(test_losses).any(|l| !l.is_finite()) {
        return Err(Error::Argument("losses must be finite".into()));
    }
    let members = equalize(forget_losses, smaller, cfg.seed);
    let nonmembers = equalize(test_losses, smaller, cfg.seed);

    let per_split: Vec<f64> = (0..cfg.n_splits)
        .map(|s| {
            let (fit_idx, eval_idx) = split_halves(cfg, smaller, s);
            let pick = |v: &[f64], idx: &[usize]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
            attack_split(
                &pick(&members, &fit_idx),
                &pick(&nonmembers, &fit_idx),
                &pick(&members, &eval_idx),
                &pick(&nonmembers, &eval_idx),
            )
        })
        .collect();
    let score = per_split.iter().sum::<f64>() / per_split.len() as f64;
    Ok(MiaScore {
        score,
        per_split,
        samples_per_side: smaller,
        n_forget: forget_losses.len(),
        n_test: test_losses.len(),
    })
}

/// `sample_index,loss,member` rows; member is 1 for forget-set samples.
pub fn losses_csv(forget_losses: &[f64], test_losses: &[f64]) -> String {
    let mut out = String::from("sample_index,loss,member\n");
    for (i, l) in forget_losses.iter().enumerate() {
        let _ = writeln!(out, "{i},{l:.6},1");
    }
    for (i, l) in test_losses.iter().enumerate() {
        let _ = writeln!(out, "{i},{l:.6},0");
    }
    out
}
