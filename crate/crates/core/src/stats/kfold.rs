//! Repeated stratified k-fold split generation.

use std::collections::BTreeMap;
use std::fmt::Display;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Split {
    pub repeat: usize,
    pub fold: usize,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// `repeats x k` train/validation splits of `labels`' indices.
///
/// In each repeat the members of every class are shuffled and dealt to the
/// folds round-robin. The deal continues where the previous class stopped,
/// so fold sizes also differ by at most one overall. Repeat `r` uses an
/// independent generator seeded from `seed` and `r`.
pub fn repeated_stratified_kfold<L: Ord + Clone + Display>(
    labels: &[L],
    k: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<Split>> {
    if k < 2 {
        return Err(Error::Config(format!("k-fold needs k >= 2, got {k}")));
    }
    if repeats == 0 {
        return Err(Error::Config("k-fold needs at least one repeat".into()));
    }
    let mut classes: BTreeMap<&L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        classes.entry(l).or_default().push(i);
    }
    if classes.is_empty() {
        return Err(Error::Empty("labels"));
    }
    for (label, members) in &classes {
        if members.len() < k {
            return Err(Error::ClassTooSmall { label: label.to_string(), count: members.len(), folds: k });
        }
    }

    let mut splits = Vec::with_capacity(k * repeats);
    for r in 0..repeats {
        let mut rng = SimRng::new(seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut fold_of = vec![0usize; labels.len()];
        let mut next = 0;
        for members in classes.values() {
            let mut members = members.clone();
            rng.shuffle(&mut members);
            for i in members {
                fold_of[i] = next;
                next = (next + 1) % k;
            }
        }
        for fold in 0..k {
            let (validation, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| fold_of[i] == fold);
            splits.push(Split { repeat: r, fold, train, validation });
        }
    }
    Ok(splits)
}
