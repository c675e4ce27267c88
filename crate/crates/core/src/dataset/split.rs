//! Random holdout splits over review records and cold-start segments.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Dataset;
use crate::seed::{rng_for, Purpose};

/// Users and items with fewer training ratings than this are cold.
pub const COLD_START_THRESHOLD: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub repeats: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.8, seed: 0, repeats: 5 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("need at least two reviews to split, have {0}")]
    TooFewReviews(usize),
    #[error("repeat index {index} out of range for {repeats} repeats")]
    RepeatOutOfRange { index: usize, repeats: usize },
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
}

/// Review indices (into [`Dataset::reviews`]) of one holdout split, each
/// side sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partition the reviews into train and test for one repeat.
///
/// The training side holds `round(train_fraction * N)` reviews, kept within
/// `1..=N-1` so neither side is empty.
pub fn split_train_test(d: &Dataset, spec: &SplitSpec, repeat_index: usize) -> Result<Split, SplitError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(SplitError::BadFraction(spec.train_fraction));
    }
    if repeat_index >= spec.repeats {
        return Err(SplitError::RepeatOutOfRange { index: repeat_index, repeats: spec.repeats });
    }
    let n = d.n_reviews();
    if n < 2 {
        return Err(SplitError::TooFewReviews(n));
    }
    let n_train = ((spec.train_fraction * n as f64).round() as usize).clamp(1, n - 1);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(spec.seed, Purpose::Split, repeat_index as u64));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Cold users and items of a split, by training rating count.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ColdSegments {
    pub users: BTreeSet<usize>,
    pub items: BTreeSet<usize>,
}

pub fn segment_cold_start(d: &Dataset, split: &Split) -> ColdSegments {
    let mut user_counts = vec![0usize; d.n_users()];
    let mut item_counts = vec![0usize; d.n_items()];
    for &r in &split.train {
        let review = &d.reviews()[r];
        user_counts[review.user] += 1;
        item_counts[review.item] += 1;
    }
    let cold = |counts: Vec<usize>| {
        counts.into_iter().enumerate().filter(|&(_, c)| c < COLD_START_THRESHOLD).map(|(i, _)| i).collect()
    };
    ColdSegments { users: cold(user_counts), items: cold(item_counts) }
}
