//! Sparse user×item feedback channels.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    helpfulness_score, rank_reviews, scale_value, top_rank_centrality, total_centrality, CentralityParams,
    FeatureError, HarmonicTable, Interval, RankCandidate, SignRule,
};
use crate::dataset::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelKind {
    #[serde(rename = "R")]
    Rating,
    #[serde(rename = "H")]
    Helpfulness,
    #[serde(rename = "D")]
    Centrality,
    #[serde(rename = "V")]
    View,
}

impl ChannelKind {
    pub fn symbol(self) -> &'static str {
        match self {
            ChannelKind::Rating => "R",
            ChannelKind::Helpfulness => "H",
            ChannelKind::Centrality => "D",
            ChannelKind::View => "V",
        }
    }
}

/// How unviewed pairs enter the view channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewMode {
    /// Only viewed pairs are observed (value 1).
    #[default]
    ObservedOnly,
    /// Every user×item pair is observed; unviewed pairs carry value 0.
    /// Dense: n·m entries.
    ZeroFilled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelEntry {
    pub user: usize,
    pub item: usize,
    pub raw: f64,
    /// `raw` mapped from the channel interval onto `[-1, 1]`.
    pub scaled: f64,
}

/// Observed entries of one channel. The indicator set is exactly the set of
/// `(user, item)` keys present.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackChannel {
    kind: ChannelKind,
    n_users: usize,
    n_items: usize,
    interval: Interval,
    /// Sorted by (user, item).
    entries: Vec<ChannelEntry>,
    user_offsets: Vec<usize>,
    /// Entry indices sorted by (item, user).
    by_item: Vec<usize>,
    item_offsets: Vec<usize>,
}

impl FeedbackChannel {
    /// Scale raw `(user, item, value)` triples from `interval` onto the model
    /// range. Keys must be unique and in bounds.
    pub fn new(
        kind: ChannelKind,
        n_users: usize,
        n_items: usize,
        raw: Vec<(usize, usize, f64)>,
        interval: Interval,
    ) -> Result<Self, FeatureError> {
        let mut entries = raw
            .into_iter()
            .map(|(user, item, value)| {
                if user >= n_users || item >= n_items {
                    return Err(FeatureError::EntryOutOfBounds { user, item });
                }
                Ok(ChannelEntry { user, item, raw: value, scaled: scale_value(value, interval, Interval::MODEL)? })
            })
            .collect::<Result<Vec<_>, _>>()?;
        entries.sort_by_key(|e| (e.user, e.item));
        if let Some(w) = entries.windows(2).find(|w| (w[0].user, w[0].item) == (w[1].user, w[1].item)) {
            return Err(FeatureError::DuplicateEntry { user: w[0].user, item: w[0].item });
        }

        let user_offsets = offsets(entries.iter().map(|e| e.user), n_users);
        let mut by_item: Vec<usize> = (0..entries.len()).collect();
        by_item.sort_by_key(|&e| (entries[e].item, entries[e].user));
        let item_offsets = offsets(by_item.iter().map(|&e| entries[e].item), n_items);
        Ok(Self { kind, n_users, n_items, interval, entries, user_offsets, by_item, item_offsets })
    }

    pub fn empty(kind: ChannelKind, n_users: usize, n_items: usize, interval: Interval) -> Self {
        Self::new(kind, n_users, n_items, Vec::new(), interval).expect("empty channel is valid")
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// Raw-value interval mapped onto `[-1, 1]`.
    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn entries(&self) -> &[ChannelEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Index range into [`entries`](Self::entries) for one user.
    pub fn user_range(&self, user: usize) -> std::ops::Range<usize> {
        self.user_offsets[user]..self.user_offsets[user + 1]
    }

    /// Entry indices of one item, in user order.
    pub fn item_entries(&self, item: usize) -> &[usize] {
        &self.by_item[self.item_offsets[item]..self.item_offsets[item + 1]]
    }

    pub fn get(&self, user: usize, item: usize) -> Option<&ChannelEntry> {
        let row = &self.entries[self.user_range(user)];
        row.binary_search_by_key(&item, |e| e.item).ok().map(|i| &row[i])
    }

    pub fn indicator(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.iter().map(|e| (e.user, e.item))
    }

    /// Observations per user (`n_w`, `n_e`, ... before flooring).
    pub fn user_counts(&self) -> Vec<usize> {
        self.user_offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn item_counts(&self) -> Vec<usize> {
        self.item_offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `user \t item \t raw \t scaled` lines, ids taken from `dataset`.
    pub fn write_triplets<W: Write>(&self, dataset: &Dataset, mut out: W) -> io::Result<()> {
        for e in &self.entries {
            writeln!(out, "{}\t{}\t{}\t{}", dataset.user_id(e.user), dataset.item_id(e.item), e.raw, e.scaled)?;
        }
        Ok(())
    }
}

fn offsets(keys: impl Iterator<Item = usize>, n: usize) -> Vec<usize> {
    let mut offsets = vec![0usize; n + 1];
    for k in keys {
        offsets[k + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    offsets
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureParams {
    pub sign: SignRule,
    pub centrality: CentralityParams,
    pub view_mode: ViewMode,
}

/// The four channels over one user/item index space.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackChannels {
    pub rating: FeedbackChannel,
    pub helpfulness: FeedbackChannel,
    pub centrality: FeedbackChannel,
    pub view: FeedbackChannel,
}

impl FeedbackChannels {
    pub fn n_users(&self) -> usize {
        self.rating.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.rating.n_items()
    }

    pub fn iter(&self) -> impl Iterator<Item = &FeedbackChannel> {
        [&self.rating, &self.helpfulness, &self.centrality, &self.view].into_iter()
    }
}

/// Per-review explicit scores of one item.
struct ItemScores {
    user: usize,
    item: usize,
    helpfulness: Option<f64>,
    centrality: f64,
}

/// Build R, H, D from the reviews in `subset` and V from every view.
///
/// Purchase positions, ranks and scaling intervals are computed over the
/// subset only, so a training split never sees its test reviews.
pub fn build_channels(d: &Dataset, subset: &[usize], params: &FeatureParams) -> Result<FeedbackChannels, FeatureError> {
    let (n, m) = (d.n_users(), d.n_items());
    let reviews = d.reviews();

    let rating_raw = subset.iter().map(|&r| (reviews[r].user, reviews[r].item, f64::from(reviews[r].rating))).collect();
    let rating = FeedbackChannel::new(ChannelKind::Rating, n, m, rating_raw, Interval::RATING)?;

    let orders = d.item_order_for(subset);
    let per_item: Vec<Vec<ItemScores>> = orders
        .par_iter()
        .enumerate()
        .map(|(item, order)| {
            let reviewers = order.len();
            let harmonic = HarmonicTable::new(reviewers);
            let helpfulness = order
                .iter()
                .map(|e| {
                    let r = &reviews[e.review];
                    helpfulness_score(r.helpful_yes, r.helpful_total, r.rating, &params.sign)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let candidates: Vec<RankCandidate> = order
                .iter()
                .zip(&helpfulness)
                .map(|(e, &h)| {
                    let r = &reviews[e.review];
                    RankCandidate { helpfulness: h, rating: r.rating, timestamp: r.timestamp, user: e.user }
                })
                .collect();
            let ranks = rank_reviews(&candidates, &params.sign);
            order
                .iter()
                .zip(helpfulness)
                .zip(ranks)
                .map(|((e, h), rank)| {
                    let most = harmonic.get(reviewers - e.position);
                    let top = match rank {
                        Some(k) => top_rank_centrality(k, e.position, reviewers)?,
                        None => 0.0,
                    };
                    let rating = reviews[e.review].rating;
                    Ok(ItemScores {
                        user: e.user,
                        item,
                        helpfulness: h,
                        centrality: total_centrality(top, most, rating, &params.centrality, &params.sign),
                    })
                })
                .collect()
        })
        .collect::<Result<_, FeatureError>>()?;

    let scores: Vec<ItemScores> = per_item.into_iter().flatten().collect();
    let h_raw: Vec<_> = scores.iter().filter_map(|s| s.helpfulness.map(|h| (s.user, s.item, h))).collect();
    let d_raw: Vec<_> = scores.iter().map(|s| (s.user, s.item, s.centrality)).collect();
    let h_interval = Interval::symmetric(max_abs(&h_raw))?;
    let d_interval = Interval::symmetric(max_abs(&d_raw))?;

    Ok(FeedbackChannels {
        rating,
        helpfulness: FeedbackChannel::new(ChannelKind::Helpfulness, n, m, h_raw, h_interval)?,
        centrality: FeedbackChannel::new(ChannelKind::Centrality, n, m, d_raw, d_interval)?,
        view: build_view_channel(d, params.view_mode),
    })
}

fn max_abs(raw: &[(usize, usize, f64)]) -> f64 {
    raw.iter().fold(0.0, |acc: f64, &(_, _, v)| acc.max(v.abs()))
}

/// Binary view channel over the dataset's (deduplicated) view edges.
pub fn build_view_channel(d: &Dataset, mode: ViewMode) -> FeedbackChannel {
    let (n, m) = (d.n_users(), d.n_items());
    let raw = match mode {
        ViewMode::ObservedOnly => d.views().iter().map(|v| (v.user, v.item, 1.0)).collect(),
        ViewMode::ZeroFilled => {
            let mut grid = vec![0.0; n * m];
            for v in d.views() {
                grid[v.user * m + v.item] = 1.0;
            }
            grid.into_iter().enumerate().map(|(k, value)| (k / m, k % m, value)).collect()
        }
    };
    FeedbackChannel::new(ChannelKind::View, n, m, raw, Interval::VIEW).expect("view edges are unique and in range")
}
