//! Explicit-feedback scores (helpfulness, review-network centrality), the
//! implicit view channel, and the affine map between raw and model ranges.

mod channel;
mod scale;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use channel::{
    build_channels, build_view_channel, ChannelEntry, ChannelKind, FeatureParams, FeedbackChannel, FeedbackChannels,
    ViewMode,
};
pub use scale::{scale_value, unscale_value, Interval};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("helpful votes {yes} exceed total {total}")]
    HelpfulExceedsTotal { yes: u32, total: u32 },
    #[error("purchase position {position} outside 1..={reviewers}")]
    BadPosition { position: usize, reviewers: usize },
    #[error("rank must be at least 1")]
    ZeroRank,
    #[error("value {value} outside [{lo}, {hi}]")]
    OutOfInterval { value: f64, lo: f64, hi: f64 },
    #[error("interval [{lo}, {hi}] is empty or not finite")]
    BadInterval { lo: f64, hi: f64 },
    #[error("entry ({user}, {item}) outside the channel dimensions")]
    EntryOutOfBounds { user: usize, item: usize },
    #[error("duplicate entry ({user}, {item})")]
    DuplicateEntry { user: usize, item: usize },
    #[error("centrality weight {0} outside [0, 1]")]
    BadAlpha(f64),
}

/// Ratings at or above `positive_threshold` come from positive reviewers,
/// the rest from critical reviewers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignRule {
    pub positive_threshold: u8,
}

impl Default for SignRule {
    fn default() -> Self {
        Self { positive_threshold: 3 }
    }
}

impl SignRule {
    pub fn is_positive(&self, rating: u8) -> bool {
        rating >= self.positive_threshold
    }

    /// `(-1)^θ` with θ = 2 for positive reviewers and θ = 1 otherwise.
    pub fn sign(&self, rating: u8) -> f64 {
        if self.is_positive(rating) {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralityParams {
    /// Weight of the top-ranking score against the most-recent score.
    pub alpha: f64,
}

impl Default for CentralityParams {
    fn default() -> Self {
        Self { alpha: 0.5 }
    }
}

impl CentralityParams {
    pub fn new(alpha: f64) -> Result<Self, FeatureError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(FeatureError::BadAlpha(alpha));
        }
        Ok(Self { alpha })
    }
}

/// Signed quadratic vote ratio `±x²/y`.
///
/// Returns `None` when the review got no votes (`y = 0`); such entries are
/// unobserved rather than zero.
pub fn helpfulness_score(yes: u32, total: u32, rating: u8, rule: &SignRule) -> Result<Option<f64>, FeatureError> {
    if yes > total {
        return Err(FeatureError::HelpfulExceedsTotal { yes, total });
    }
    if total == 0 {
        return Ok(None);
    }
    let x = f64::from(yes);
    // `+ 0.0` folds -0 into 0 for critical reviews without yes votes.
    Ok(Some(rule.sign(rating) * x * x / f64::from(total) + 0.0))
}

/// Most-recent-review centrality of the reviewer at `position` among
/// `reviewers`: every later buyer reads it, the r-th later one with weight
/// 1/r, giving the harmonic number `H_{n-i}`.
pub fn most_recent_centrality(position: usize, reviewers: usize) -> Result<f64, FeatureError> {
    check_position(position, reviewers)?;
    Ok(harmonic_number(reviewers - position))
}

/// Top-ranking-review centrality: `(1/k)² (n - i)`.
pub fn top_rank_centrality(rank: usize, position: usize, reviewers: usize) -> Result<f64, FeatureError> {
    if rank == 0 {
        return Err(FeatureError::ZeroRank);
    }
    check_position(position, reviewers)?;
    let inv = 1.0 / rank as f64;
    Ok(inv * inv * (reviewers - position) as f64)
}

/// Signed blend `±(α·top + (1-α)·most)`.
pub fn total_centrality(top: f64, most: f64, rating: u8, params: &CentralityParams, rule: &SignRule) -> f64 {
    rule.sign(rating) * (params.alpha * top + (1.0 - params.alpha) * most) + 0.0
}

fn check_position(position: usize, reviewers: usize) -> Result<(), FeatureError> {
    if position == 0 || position > reviewers {
        return Err(FeatureError::BadPosition { position, reviewers });
    }
    Ok(())
}

/// `H_n = Σ_{r=1}^{n} 1/r`, correctly rounded while the exact fraction fits
/// in f64 mantissas (n ≤ ~40) and compensated-summed beyond.
pub fn harmonic_number(n: usize) -> f64 {
    *HarmonicTable::new(n).values().last().expect("table holds H_0")
}

/// `H_0 ..= H_max`, built incrementally.
pub(crate) struct HarmonicTable(Vec<f64>);

impl HarmonicTable {
    pub(crate) fn new(max: usize) -> Self {
        const EXACT: u128 = 1 << 53;
        let mut values = Vec::with_capacity(max + 1);
        values.push(0.0);
        let (mut num, mut den) = (0u128, 1u128);
        let mut exact = true;
        // Neumaier running sum once the fraction outgrows f64.
        let (mut sum, mut carry) = (0.0f64, 0.0f64);
        for r in 1..=max {
            if exact {
                let r = r as u128;
                let (n2, d2) = (num * r + den, den * r);
                let g = gcd(n2, d2);
                let (n2, d2) = (n2 / g, d2 / g);
                if n2 < EXACT && d2 < EXACT {
                    num = n2;
                    den = d2;
                    values.push(num as f64 / den as f64);
                    continue;
                }
                exact = false;
                sum = num as f64 / den as f64;
            }
            let term = 1.0 / r as f64;
            let t = sum + term;
            carry += if sum.abs() >= term { (sum - t) + term } else { (term - t) + sum };
            sum = t;
            values.push(sum + carry);
        }
        Self(values)
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn get(&self, n: usize) -> f64 {
        self.0[n]
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// A review competing for a top-ranking slot on its item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankCandidate {
    pub helpfulness: Option<f64>,
    pub rating: u8,
    pub timestamp: i64,
    pub user: usize,
}

/// Rank the reviews of one item by helpfulness magnitude, positive and
/// critical reviewers separately. Rank 1 is the most helpful. Ties go to the
/// earlier review, then the lower user index. Reviews without votes get no
/// rank.
pub fn rank_reviews(candidates: &[RankCandidate], rule: &SignRule) -> Vec<Option<usize>> {
    let mut ranks = vec![None; candidates.len()];
    for positive in [true, false] {
        let mut group: Vec<usize> = (0..candidates.len())
            .filter(|&c| candidates[c].helpfulness.is_some() && rule.is_positive(candidates[c].rating) == positive)
            .collect();
        group.sort_by(|&a, &b| rank_order(&candidates[a], &candidates[b]));
        for (k, c) in group.into_iter().enumerate() {
            ranks[c] = Some(k + 1);
        }
    }
    ranks
}

fn rank_order(a: &RankCandidate, b: &RankCandidate) -> Ordering {
    let (ha, hb) = (a.helpfulness.unwrap_or(0.0).abs(), b.helpfulness.unwrap_or(0.0).abs());
    hb.total_cmp(&ha).then(a.timestamp.cmp(&b.timestamp)).then(a.user.cmp(&b.user))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const RULE: SignRule = SignRule { positive_threshold: 3 };

    #[test]
    fn helpfulness_examples() {
        assert_eq!(helpfulness_score(0, 5, 5, &RULE), Ok(Some(0.0)));
        assert_eq!(helpfulness_score(10, 10, 4, &RULE), Ok(Some(10.0)));
        assert_eq!(helpfulness_score(3, 4, 2, &RULE), Ok(Some(-2.25)));
        assert_eq!(helpfulness_score(0, 0, 4, &RULE), Ok(None));
        assert_eq!(helpfulness_score(5, 4, 4, &RULE), Err(FeatureError::HelpfulExceedsTotal { yes: 5, total: 4 }));
    }

    #[test]
    fn most_recent_examples() {
        assert_eq!(most_recent_centrality(1, 5), Ok(25.0 / 12.0));
        assert_eq!(most_recent_centrality(5, 5), Ok(0.0));
        assert_eq!(most_recent_centrality(4, 5), Ok(1.0));
        assert!(most_recent_centrality(6, 5).is_err());
        assert!(most_recent_centrality(0, 5).is_err());
    }

    #[test]
    fn harmonic_numbers_match_exact_fractions() {
        // H_n = p/q computed with integer arithmetic; the division of two
        // exactly representable integers is correctly rounded.
        let mut p: u128 = 0;
        let mut q: u128 = 1;
        for n in 1..=30u128 {
            p = p * n + q;
            q *= n;
            let g = gcd(p, q);
            p /= g;
            q /= g;
            assert_eq!(harmonic_number(n as usize), p as f64 / q as f64, "H_{n}");
        }
        let h = harmonic_number(100_000);
        let approx = (100_000f64).ln() + 0.577_215_664_901_532_9 + 1.0 / 200_000.0 - 1.0 / (12.0 * 1e10);
        assert!((h - approx).abs() < 1e-12);
    }

    #[test]
    fn top_rank_examples() {
        assert_eq!(top_rank_centrality(1, 1, 5), Ok(4.0));
        assert_eq!(top_rank_centrality(2, 2, 5), Ok(0.75));
        assert_eq!(top_rank_centrality(7, 5, 5), Ok(0.0));
        assert_eq!(top_rank_centrality(0, 1, 5), Err(FeatureError::ZeroRank));
    }

    #[test]
    fn total_centrality_examples() {
        let p = CentralityParams::default();
        assert_eq!(total_centrality(4.0, 25.0 / 12.0, 5, &p, &RULE), 0.5 * 4.0 + 0.5 * (25.0 / 12.0));
        assert!((total_centrality(4.0, 25.0 / 12.0, 5, &p, &RULE) - 73.0 / 24.0).abs() < 1e-15);
        assert_eq!(total_centrality(0.0, 0.0, 5, &p, &RULE), 0.0);
        assert_eq!(total_centrality(4.0, 2.0, 1, &p, &RULE), -3.0);
        assert!(CentralityParams::new(1.5).is_err());
    }

    fn cand(h: Option<f64>, rating: u8, ts: i64, user: usize) -> RankCandidate {
        RankCandidate { helpfulness: h, rating, timestamp: ts, user }
    }

    #[test]
    fn ranking_examples() {
        let c = [cand(Some(5.0), 5, 0, 0), cand(Some(9.0), 4, 1, 1), cand(Some(1.0), 3, 2, 2)];
        assert_eq!(rank_reviews(&c, &RULE), vec![Some(2), Some(1), Some(3)]);

        let c = [cand(Some(2.0), 5, 0, 0), cand(Some(-7.0), 1, 1, 1)];
        assert_eq!(rank_reviews(&c, &RULE), vec![Some(1), Some(1)]);

        let c = [cand(Some(4.0), 5, 10, 0), cand(Some(4.0), 5, 3, 1), cand(None, 5, 0, 2)];
        assert_eq!(rank_reviews(&c, &RULE), vec![Some(2), Some(1), None]);
    }

    proptest! {
        #[test]
        fn ranks_match_stable_sort_oracle(
            raw in prop::collection::vec((0u32..4, 1u8..=5, 0i64..3, any::<bool>()), 1..12)
        ) {
            let c: Vec<RankCandidate> = raw.iter().enumerate()
                .map(|(u, &(h, rating, ts, voted))| cand(voted.then(|| f64::from(h) * RULE.sign(rating)), rating, ts, u))
                .collect();
            let ranks = rank_reviews(&c, &RULE);
            // Oracle: for each ranked review, count group members strictly
            // ahead of it in (|H| desc, ts asc, user asc).
            for (i, a) in c.iter().enumerate() {
                let expected = a.helpfulness.map(|ha| {
                    1 + c.iter().filter(|b| {
                        b.helpfulness.is_some()
                            && RULE.is_positive(b.rating) == RULE.is_positive(a.rating)
                            && (b.helpfulness.unwrap().abs(), -b.timestamp, -(b.user as i64))
                                > (ha.abs(), -a.timestamp, -(a.user as i64))
                    }).count()
                });
                prop_assert_eq!(ranks[i], expected);
            }
        }

        #[test]
        fn helpfulness_magnitude_bounded_by_yes(yes in 0u32..500, extra in 0u32..500, rating in 1u8..=5) {
            let h = helpfulness_score(yes, yes + extra, rating, &RULE).unwrap();
            if let Some(h) = h {
                prop_assert!(h.abs() <= f64::from(yes));
                prop_assert_eq!(h >= 0.0, rating >= 3 || h == 0.0);
            }
        }

        #[test]
        fn most_recent_strictly_decreasing(n in 2usize..200) {
            for i in 1..n {
                prop_assert!(most_recent_centrality(i, n).unwrap() > most_recent_centrality(i + 1, n).unwrap());
            }
        }

        #[test]
        fn top_rank_monotone_and_linear(k in 1usize..20, n in 1usize..100, i_seed in 0usize..100) {
            let i = 1 + i_seed % n;
            let a = top_rank_centrality(k, i, n).unwrap();
            prop_assert!(top_rank_centrality(k + 1, i, n).unwrap() <= a);
            prop_assert!((a - top_rank_centrality(k, n, n).unwrap() - (n - i) as f64 / (k * k) as f64).abs() < 1e-12);
        }
    }
}
