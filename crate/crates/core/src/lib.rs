//! Rating prediction with probabilistic matrix factorization fused over
//! several feedback channels.
//!
//! Besides the star rating itself, three auxiliary user×item channels are
//! derived from review logs:
//!
//! * helpfulness (`H`): signed quadratic vote ratio of each review,
//! * centrality (`D`): signed exposure of a review inside its item's
//!   timestamped reviewer sequence,
//! * views (`V`): the binary "user viewed item" implicit signal.
//!
//! Each channel is factorized with its own user/item factors and the rating
//! user factors are pulled toward the auxiliary user factors. Zeroing groups
//! of channel weights recovers the plain model (`MF`) and the explicit-only
//! (`RHC-PMF`) and view-only (`RV-PMF`) variants of the full fused model
//! (`RHCV-PMF`).

pub mod dataset;
pub mod evaluation;
pub mod factorization;
pub mod features;
pub mod model;
pub mod seed;
pub mod trainer;

pub use dataset::{Dataset, ReviewRecord, SplitSpec, ViewRecord};
pub use evaluation::{EvalReport, ExperimentConfig};
pub use factorization::{Hyperparameters, LatentFactors, Variant};
pub use features::{FeatureParams, FeedbackChannels};
pub use model::TrainedModel;
pub use trainer::{TrainConfig, TrainTrace};
