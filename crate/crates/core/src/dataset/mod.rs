//! Review and view logs indexed into a dense user×item interaction table.

mod ingest;
mod split;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use ingest::{
    parse_reviews_jsonl, parse_views_tsv, read_reviews, read_views, write_reviews_jsonl, write_views_tsv, IngestError,
};
pub use split::{segment_cold_start, split_train_test, ColdSegments, Split, SplitError, SplitSpec, COLD_START_THRESHOLD};

pub const RATING_MIN: u8 = 1;
pub const RATING_MAX: u8 = 5;

const DATASET_FORMAT: &str = "fusedpmf.dataset";
const DATASET_VERSION: u32 = 1;

/// One review as it appears in the input log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub user_id: String,
    pub item_id: String,
    pub rating: u8,
    /// Votes marking the review helpful.
    pub helpful_yes: u32,
    /// All helpfulness votes, yes and no.
    pub helpful_total: u32,
    pub timestamp: i64,
}

/// One "user viewed item" event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub user_id: String,
    pub item_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<i64>,
}

/// A review with dense user and item indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Review {
    pub user: usize,
    pub item: usize,
    pub rating: u8,
    pub helpful_yes: u32,
    pub helpful_total: u32,
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct View {
    pub user: usize,
    pub item: usize,
    pub timestamp: Option<i64>,
}

/// A reviewer's place in an item's purchase sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderEntry {
    /// Index into [`Dataset::reviews`].
    pub review: usize,
    pub user: usize,
    /// 1-based purchase position; 1 is the earliest reviewer.
    pub position: usize,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no review records")]
    Empty,
    #[error("review record {index} has an empty user or item id")]
    EmptyId { index: usize },
    #[error("view record {index} has an empty user or item id")]
    EmptyViewId { index: usize },
    #[error("rating {rating} for ({user}, {item}) is outside 1..=5")]
    InvalidRating { user: String, item: String, rating: u8 },
    #[error("helpful votes {yes} exceed total {total} for ({user}, {item})")]
    HelpfulExceedsTotal { user: String, item: String, yes: u32, total: u32 },
    #[error("duplicate review for ({user}, {item})")]
    DuplicateReview { user: String, item: String },
    #[error("dataset file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Indexed interaction table. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    users: Vec<String>,
    items: Vec<String>,
    user_index: HashMap<String, usize>,
    item_index: HashMap<String, usize>,
    reviews: Vec<Review>,
    views: Vec<View>,
    item_order: Vec<Vec<OrderEntry>>,
}

impl Dataset {
    /// Index review and view logs.
    ///
    /// Users and items are numbered in order of first appearance, reviews
    /// before views. Repeated view events for one pair keep only the first.
    pub fn build(reviews: &[ReviewRecord], views: &[ViewRecord]) -> Result<Self, DatasetError> {
        if reviews.is_empty() {
            return Err(DatasetError::Empty);
        }
        let mut users = Vec::new();
        let mut items = Vec::new();
        let mut user_index = HashMap::new();
        let mut item_index = HashMap::new();
        let mut seen = HashMap::new();
        let mut indexed = Vec::with_capacity(reviews.len());

        for (index, r) in reviews.iter().enumerate() {
            if r.user_id.is_empty() || r.item_id.is_empty() {
                return Err(DatasetError::EmptyId { index });
            }
            if !(RATING_MIN..=RATING_MAX).contains(&r.rating) {
                return Err(DatasetError::InvalidRating {
                    user: r.user_id.clone(),
                    item: r.item_id.clone(),
                    rating: r.rating,
                });
            }
            if r.helpful_yes > r.helpful_total {
                return Err(DatasetError::HelpfulExceedsTotal {
                    user: r.user_id.clone(),
                    item: r.item_id.clone(),
                    yes: r.helpful_yes,
                    total: r.helpful_total,
                });
            }
            let user = intern(&r.user_id, &mut users, &mut user_index);
            let item = intern(&r.item_id, &mut items, &mut item_index);
            if seen.insert((user, item), index).is_some() {
                return Err(DatasetError::DuplicateReview {
                    user: r.user_id.clone(),
                    item: r.item_id.clone(),
                });
            }
            indexed.push(Review {
                user,
                item,
                rating: r.rating,
                helpful_yes: r.helpful_yes,
                helpful_total: r.helpful_total,
                timestamp: r.timestamp,
            });
        }

        let mut viewed = std::collections::HashSet::new();
        let mut indexed_views = Vec::new();
        for (index, v) in views.iter().enumerate() {
            if v.user_id.is_empty() || v.item_id.is_empty() {
                return Err(DatasetError::EmptyViewId { index });
            }
            let user = intern(&v.user_id, &mut users, &mut user_index);
            let item = intern(&v.item_id, &mut items, &mut item_index);
            if viewed.insert((user, item)) {
                indexed_views.push(View { user, item, timestamp: v.timestamp });
            }
        }

        let all: Vec<usize> = (0..indexed.len()).collect();
        let item_order = purchase_order(&indexed, &all, items.len());
        Ok(Self {
            users,
            items,
            user_index,
            item_index,
            reviews: indexed,
            views: indexed_views,
            item_order,
        })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_reviews(&self) -> usize {
        self.reviews.len()
    }

    /// Fraction of the user×item grid without a review.
    pub fn sparsity(&self) -> f64 {
        1.0 - self.n_reviews() as f64 / (self.n_users() as f64 * self.n_items() as f64)
    }

    pub fn reviews(&self) -> &[Review] {
        &self.reviews
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    pub fn user_ids(&self) -> &[String] {
        &self.users
    }

    pub fn item_ids(&self) -> &[String] {
        &self.items
    }

    pub fn user_id(&self, user: usize) -> &str {
        &self.users[user]
    }

    pub fn item_id(&self, item: usize) -> &str {
        &self.items[item]
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_index.get(id).copied()
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_index.get(id).copied()
    }

    /// Reviewers of `item` in purchase order.
    pub fn item_order(&self, item: usize) -> &[OrderEntry] {
        &self.item_order[item]
    }

    /// Purchase sequences restricted to a subset of reviews (e.g. a training
    /// split). Positions are renumbered 1..n_j within the subset.
    pub fn item_order_for(&self, subset: &[usize]) -> Vec<Vec<OrderEntry>> {
        purchase_order(&self.reviews, subset, self.items.len())
    }

    /// Rebuilds the string-keyed records, in ingest order.
    pub fn review_records(&self) -> Vec<ReviewRecord> {
        self.reviews
            .iter()
            .map(|r| ReviewRecord {
                user_id: self.users[r.user].clone(),
                item_id: self.items[r.item].clone(),
                rating: r.rating,
                helpful_yes: r.helpful_yes,
                helpful_total: r.helpful_total,
                timestamp: r.timestamp,
            })
            .collect()
    }

    pub fn view_records(&self) -> Vec<ViewRecord> {
        self.views
            .iter()
            .map(|v| ViewRecord {
                user_id: self.users[v.user].clone(),
                item_id: self.items[v.item].clone(),
                timestamp: v.timestamp,
            })
            .collect()
    }

    /// Mean star rating over a subset of reviews.
    pub fn mean_rating(&self, subset: &[usize]) -> f64 {
        if subset.is_empty() {
            return f64::from(RATING_MIN + RATING_MAX) / 2.0;
        }
        subset.iter().map(|&r| f64::from(self.reviews[r].rating)).sum::<f64>() / subset.len() as f64
    }

    /// SHA-256 of the serialized form, hex encoded.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(&self.to_file()).expect("dataset serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn to_file(&self) -> DatasetFile {
        DatasetFile {
            format: DATASET_FORMAT.to_owned(),
            version: DATASET_VERSION,
            users: self.users.clone(),
            items: self.items.clone(),
            reviews: self.review_records(),
            views: self.view_records(),
        }
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut writer = BufWriter::new(writer);
        serde_json::to_writer_pretty(&mut writer, &self.to_file())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self, DatasetError> {
        let file: DatasetFile = serde_json::from_reader(BufReader::new(reader))?;
        if file.format != DATASET_FORMAT {
            return Err(DatasetError::Format(format!("unexpected format tag {:?}", file.format)));
        }
        if file.version != DATASET_VERSION {
            return Err(DatasetError::Format(format!("unsupported version {}", file.version)));
        }
        let dataset = Self::build(&file.reviews, &file.views)?;
        if dataset.users != file.users || dataset.items != file.items {
            return Err(DatasetError::Format("index maps disagree with the records".into()));
        }
        Ok(dataset)
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        self.write_json(File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        Self::read_json(File::open(path)?)
    }
}

/// On-disk container. `users`/`items` list ids by dense index; records keep
/// string ids so the file stays readable and re-ingestible.
#[derive(Serialize, Deserialize)]
struct DatasetFile {
    format: String,
    version: u32,
    users: Vec<String>,
    items: Vec<String>,
    reviews: Vec<ReviewRecord>,
    views: Vec<ViewRecord>,
}

fn intern(id: &str, ids: &mut Vec<String>, index: &mut HashMap<String, usize>) -> usize {
    if let Some(&i) = index.get(id) {
        return i;
    }
    let i = ids.len();
    ids.push(id.to_owned());
    index.insert(id.to_owned(), i);
    i
}

/// Sorts each item's reviewers by timestamp; ties keep ingest order.
fn purchase_order(reviews: &[Review], subset: &[usize], n_items: usize) -> Vec<Vec<OrderEntry>> {
    let mut per_item: Vec<Vec<usize>> = vec![Vec::new(); n_items];
    for &r in subset {
        per_item[reviews[r].item].push(r);
    }
    per_item
        .into_iter()
        .map(|mut list| {
            list.sort_by_key(|&r| (reviews[r].timestamp, r));
            list.into_iter()
                .enumerate()
                .map(|(pos, r)| OrderEntry { review: r, user: reviews[r].user, position: pos + 1 })
                .collect()
        })
        .collect()
}
