use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

pub const CLASSES: usize = 10;

/// Disjoint retain/forget partition of the training indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub retain: Vec<usize>,
    pub forget: Vec<usize>,
    pub seed: u64,
}

/// Stratified forget set: for every class, the first `per_class` indices of a
/// seeded shuffle of that class's indices. Both index lists are ascending.
pub fn make_split(labels: &[u8], per_class: usize, seed: u64) -> Result<Split> {
    let mut by_class = vec![Vec::new(); CLASSES];
    for (i, &y) in labels.iter().enumerate() {
        by_class
            .get_mut(y as usize)
            .ok_or_else(|| Error::Data(format!("label {y} at index {i} is outside 0-9")))?
            .push(i);
    }
    let mut in_forget = vec![false; labels.len()];
    for (class, mut idx) in by_class.into_iter().enumerate() {
        if idx.len() < per_class {
            return Err(Error::Argument(format!(
                "class {class} has {} samples, fewer than the {per_class} requested",
                idx.len()
            )));
        }
        Rng::derive(seed, &[class as u64]).shuffle(&mut idx);
        for &i in &idx[..per_class] {
            in_forget[i] = true;
        }
    }
    let (forget, retain): (Vec<usize>, Vec<usize>) =
        (0..labels.len()).partition(|&i| in_forget[i]);
    Ok(Split {
        retain,
        forget,
        seed,
    })
}

impl Split {
    pub fn len(&self) -> usize {
        self.retain.len() + self.forget.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether retain and forget partition `0..n` exactly.
    pub fn is_partition_of(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for &i in self.retain.iter().chain(&self.forget) {
            match seen.get_mut(i) {
                Some(s) if !*s => *s = true,
                _ => return false,
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// `index,member` manifest over all training indices.
    pub fn to_csv(&self) -> String {
        let mut member = vec![""; self.len()];
        for &i in &self.retain {
            member[i] = "retain";
        }
        for &i in &self.forget {
            member[i] = "forget";
        }
        let mut out = String::from("index,member\n");
        for (i, m) in member.iter().enumerate() {
            let _ = writeln!(out, "{i},{m}");
        }
        out
    }
}
