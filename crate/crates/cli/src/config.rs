//! Flat TOML run configuration.
//!
//! Every key is optional; command-line flags override the file. Keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `seed` | root seed for splits, initialization and synthesis |
//! | `variant` | `mf`, `rhc`, `rv` or `rhcv` |
//! | `k` | latent dimension, or a list of them for sweeps |
//! | `out` | output directory |
//! | `learning_rate`, `max_epochs`, `conv_tol` | descent settings |
//! | `init_std` | std of the Gaussian initialization |
//! | `lambda_h` … `lambda_u` | the fourteen model weights |
//! | `train_fraction`, `repeats` | holdout protocol |
//! | `alpha` | top-rank share of the centrality score |
//! | `positive_threshold` | lowest rating of a positive reviewer |
//! | `view_mode` | `observed_only` or `zero_filled` |
//! | `parallel` | spread gradient work over threads |
//! | `log_every` | progress log period in epochs |
//! | `n_users`, `n_items`, `rank`, `noise_std`, `rho`, `density`, `signal_std`, `votes`, `unvoted_rate` | synthetic corpus |

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use fusedpmf::evaluation::{ExperimentConfig, SyntheticSpec};
use fusedpmf::factorization::{Hyperparameters, Variant};
use fusedpmf::features::{CentralityParams, FeatureParams, SignRule, ViewMode};
use fusedpmf::trainer::TrainConfig;
use fusedpmf::SplitSpec;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum KList {
    One(usize),
    Many(Vec<usize>),
}

impl KList {
    pub fn into_vec(self) -> Vec<usize> {
        match self {
            KList::One(k) => vec![k],
            KList::Many(ks) => ks,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub variant: Option<Variant>,
    pub k: Option<KList>,
    pub out: Option<PathBuf>,
    pub learning_rate: Option<f64>,
    pub max_epochs: Option<usize>,
    pub conv_tol: Option<f64>,
    pub init_std: Option<f64>,
    pub lambda_h: Option<f64>,
    pub lambda_d: Option<f64>,
    pub lambda_v: Option<f64>,
    pub lambda_we: Option<f64>,
    pub lambda_wc: Option<f64>,
    pub lambda_ws: Option<f64>,
    pub lambda_w: Option<f64>,
    pub lambda_z: Option<f64>,
    pub lambda_e: Option<f64>,
    pub lambda_f: Option<f64>,
    pub lambda_c: Option<f64>,
    pub lambda_o: Option<f64>,
    pub lambda_s: Option<f64>,
    pub lambda_u: Option<f64>,
    pub train_fraction: Option<f64>,
    pub repeats: Option<usize>,
    pub alpha: Option<f64>,
    pub positive_threshold: Option<u8>,
    pub view_mode: Option<ViewMode>,
    pub parallel: Option<bool>,
    pub log_every: Option<usize>,
    pub n_users: Option<usize>,
    pub n_items: Option<usize>,
    pub rank: Option<usize>,
    pub noise_std: Option<f64>,
    pub rho: Option<f64>,
    pub density: Option<f64>,
    pub signal_std: Option<f64>,
    pub votes: Option<u32>,
    pub unvoted_rate: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Flags shared by every command; `None` leaves the file (or default) value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub variant: Option<Variant>,
    pub k: Option<Vec<usize>>,
    pub out: Option<PathBuf>,
}

/// Everything a command needs, after merging defaults, file and flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub out: PathBuf,
    pub ks: Vec<usize>,
    pub experiment: ExperimentConfig,
    pub synthetic: SyntheticSpec,
}

impl RunConfig {
    pub fn resolve(file: FileConfig, flags: Overrides) -> Result<Self> {
        let seed = flags.seed.or(file.seed).unwrap_or(0);
        let ks = flags.k.or(file.k.map(KList::into_vec)).unwrap_or_else(|| vec![Hyperparameters::default().k]);
        if ks.is_empty() || ks.contains(&0) {
            bail!("k values must be positive");
        }

        let mut hp = Hyperparameters { k: ks[0], ..Hyperparameters::default() };
        set(&mut hp.variant, flags.variant.or(file.variant));
        set(&mut hp.learning_rate, file.learning_rate);
        set(&mut hp.max_epochs, file.max_epochs);
        set(&mut hp.conv_tol, file.conv_tol);
        set(&mut hp.lambda_h, file.lambda_h);
        set(&mut hp.lambda_d, file.lambda_d);
        set(&mut hp.lambda_v, file.lambda_v);
        set(&mut hp.lambda_we, file.lambda_we);
        set(&mut hp.lambda_wc, file.lambda_wc);
        set(&mut hp.lambda_ws, file.lambda_ws);
        set(&mut hp.lambda_w, file.lambda_w);
        set(&mut hp.lambda_z, file.lambda_z);
        set(&mut hp.lambda_e, file.lambda_e);
        set(&mut hp.lambda_f, file.lambda_f);
        set(&mut hp.lambda_c, file.lambda_c);
        set(&mut hp.lambda_o, file.lambda_o);
        set(&mut hp.lambda_s, file.lambda_s);
        set(&mut hp.lambda_u, file.lambda_u);
        hp.validate()?;

        let mut train = TrainConfig { seed, hp, ..TrainConfig::default() };
        set(&mut train.init_std, file.init_std);
        set(&mut train.parallel, file.parallel);
        set(&mut train.log_every, file.log_every);
        train.validate()?;

        let mut split = SplitSpec { seed, ..SplitSpec::default() };
        set(&mut split.train_fraction, file.train_fraction);
        set(&mut split.repeats, file.repeats);
        if !(split.train_fraction > 0.0 && split.train_fraction < 1.0) {
            bail!("train_fraction {} must lie strictly between 0 and 1", split.train_fraction);
        }
        if split.repeats == 0 {
            bail!("repeats must be positive");
        }

        let mut features = FeatureParams::default();
        if let Some(alpha) = file.alpha {
            features.centrality = CentralityParams::new(alpha)?;
        }
        if let Some(t) = file.positive_threshold {
            features.sign = SignRule { positive_threshold: t };
        }
        set(&mut features.view_mode, file.view_mode);

        let mut synthetic = SyntheticSpec { seed, ..SyntheticSpec::default() };
        set(&mut synthetic.n_users, file.n_users);
        set(&mut synthetic.n_items, file.n_items);
        set(&mut synthetic.rank, file.rank);
        set(&mut synthetic.noise_std, file.noise_std);
        set(&mut synthetic.rho, file.rho);
        set(&mut synthetic.density, file.density);
        set(&mut synthetic.signal_std, file.signal_std);
        set(&mut synthetic.votes, file.votes);
        set(&mut synthetic.unvoted_rate, file.unvoted_rate);

        Ok(Self {
            out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from(".")),
            ks,
            experiment: ExperimentConfig { split, train, features },
            synthetic,
        })
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// `5` or `5,10,15`.
pub fn parse_k_list(s: &str) -> Result<KList, String> {
    s.split(',')
        .map(|part| match part.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(k),
            _ => Err(format!("invalid K value {part:?}")),
        })
        .collect::<Result<_, _>>()
        .map(KList::Many)
}
