//! A trained model bound to its id maps, with prediction and checkpoints.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::factorization::{predict_rating, Hyperparameters, LatentFactors, ModelError};
use crate::features::{FeedbackChannels, Interval};

const CHECKPOINT_FORMAT: &str = "fusedpmf.checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (format {0:?})")]
    Format(String),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("inconsistent checkpoint: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Scaling interval of every channel at training time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelIntervals {
    pub rating: Interval,
    pub helpfulness: Interval,
    pub centrality: Interval,
    pub view: Interval,
}

impl ChannelIntervals {
    pub fn of(channels: &FeedbackChannels) -> Self {
        Self {
            rating: channels.rating.interval(),
            helpfulness: channels.helpfulness.interval(),
            centrality: channels.centrality.interval(),
            view: channels.view.interval(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    /// On the 1–5 scale.
    pub rating: f64,
    /// The global training mean was returned instead of a factor product.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub factors: LatentFactors,
    pub hyperparameters: Hyperparameters,
    pub intervals: ChannelIntervals,
    pub global_mean: f64,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    user_rated: Vec<bool>,
    item_rated: Vec<bool>,
    #[serde(skip)]
    user_index: HashMap<String, usize>,
    #[serde(skip)]
    item_index: HashMap<String, usize>,
}

impl TrainedModel {
    /// `channels` must be the ones the factors were trained on and
    /// `train` the review indices behind their rating channel.
    pub fn new(
        dataset: &Dataset,
        channels: &FeedbackChannels,
        train: &[usize],
        factors: LatentFactors,
        hyperparameters: Hyperparameters,
    ) -> Result<Self, ModelError> {
        if factors.n_users() != dataset.n_users() || factors.n_items() != dataset.n_items() {
            return Err(ModelError::DimensionMismatch {
                what: "factors vs dataset",
                expected: dataset.n_users() * dataset.n_items(),
                found: factors.n_users() * factors.n_items(),
            });
        }
        factors.check_shapes()?;
        let mut model = Self {
            factors,
            hyperparameters,
            intervals: ChannelIntervals::of(channels),
            global_mean: dataset.mean_rating(train),
            user_ids: dataset.user_ids().to_vec(),
            item_ids: dataset.item_ids().to_vec(),
            user_rated: channels.rating.user_counts().into_iter().map(|c| c > 0).collect(),
            item_rated: channels.rating.item_counts().into_iter().map(|c| c > 0).collect(),
            user_index: HashMap::new(),
            item_index: HashMap::new(),
        };
        model.index_ids();
        Ok(model)
    }

    fn index_ids(&mut self) {
        self.user_index = self.user_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        self.item_index = self.item_ids.iter().enumerate().map(|(j, id)| (id.clone(), j)).collect();
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    /// Prediction by dataset index. A pair where neither side has a training
    /// rating gets the global mean.
    pub fn predict_index(&self, user: usize, item: usize) -> Prediction {
        if !self.user_rated[user] && !self.item_rated[item] {
            return self.fallback();
        }
        let w = self.factors.w.row(user);
        let z = self.factors.z.row(item);
        let rating = predict_rating(w.as_slice().unwrap(), z.as_slice().unwrap(), self.intervals.rating);
        Prediction { rating, fallback: false }
    }

    /// Prediction by external id; unknown ids get the global mean.
    pub fn predict(&self, user_id: &str, item_id: &str) -> Prediction {
        match (self.user_index.get(user_id), self.item_index.get(item_id)) {
            (Some(&i), Some(&j)) => self.predict_index(i, j),
            _ => self.fallback(),
        }
    }

    fn fallback(&self) -> Prediction {
        Prediction { rating: self.global_mean, fallback: true }
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<(), CheckpointError> {
        let file = CheckpointRef { format: CHECKPOINT_FORMAT, version: CHECKPOINT_VERSION, k: self.factors.k(), model: self };
        serde_json::to_writer(writer, &file)?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self, CheckpointError> {
        let file: Checkpoint = serde_json::from_reader(reader)?;
        if file.format != CHECKPOINT_FORMAT {
            return Err(CheckpointError::Format(file.format));
        }
        if file.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(file.version));
        }
        let mut model = file.model;
        model.factors.check_shapes()?;
        let consistent = model.factors.k() == file.k
            && model.factors.n_users() == model.user_ids.len()
            && model.factors.n_items() == model.item_ids.len()
            && model.user_rated.len() == model.user_ids.len()
            && model.item_rated.len() == model.item_ids.len()
            && model.hyperparameters.k == file.k;
        if !consistent {
            return Err(CheckpointError::Inconsistent("dimensions disagree".into()));
        }
        model.index_ids();
        if model.user_index.len() != model.user_ids.len() || model.item_index.len() != model.item_ids.len() {
            return Err(CheckpointError::Inconsistent("duplicate ids".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_json(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::read_json(BufReader::new(File::open(path)?))
    }
}

#[derive(Serialize)]
struct CheckpointRef<'a> {
    format: &'static str,
    version: u32,
    k: usize,
    model: &'a TrainedModel,
}

#[derive(Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    k: usize,
    model: TrainedModel,
}
