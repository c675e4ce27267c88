//! Repeated random holdout, K sweeps and cold-start scoring.

mod synthetic;

use std::fmt::Write as _;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{segment_cold_start, split_train_test, Dataset, SplitError, SplitSpec};
use crate::factorization::{ModelError, Variant};
use crate::features::{build_channels, FeatureError, FeatureParams};
use crate::model::TrainedModel;
use crate::trainer::{fit, Termination, TrainConfig, TrainError, TrainTrace};

pub use synthetic::{generate_synthetic, PlantedFactors, SyntheticCorpus, SyntheticSpec};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("mse needs equal, non-empty inputs (got {predictions} predictions, {truths} truths)")]
    BadInput { predictions: usize, truths: usize },
    #[error("repeat {repeat}: {source}")]
    Train { repeat: usize, source: TrainError },
    #[error("no K values given")]
    NoK,
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Mean squared difference, both sides on the 1–5 scale.
pub fn mse(predictions: &[f64], truths: &[f64]) -> Result<f64, EvalError> {
    if predictions.is_empty() || predictions.len() != truths.len() {
        return Err(EvalError::BadInput { predictions: predictions.len(), truths: truths.len() });
    }
    let sum: f64 = predictions.iter().zip(truths).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / predictions.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub split: SplitSpec,
    pub train: TrainConfig,
    pub features: FeatureParams,
}

/// One scored test pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPrediction {
    pub user: usize,
    pub item: usize,
    pub truth: f64,
    pub prediction: f64,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub mse: f64,
    pub n_cold_users: usize,
    pub n_cold_items: usize,
    /// Test pairs whose user is cold.
    pub cold_user_pairs: usize,
    pub cold_item_pairs: usize,
    pub cold_user_mse: Option<f64>,
    pub cold_item_mse: Option<f64>,
    pub fallbacks: usize,
    pub epochs: usize,
    pub final_objective: f64,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: Variant,
    pub k: usize,
    pub lambdas: Vec<(String, f64)>,
    pub learning_rate: f64,
    pub seed: u64,
    pub train_fraction: f64,
    pub dataset_fingerprint: String,
    pub repeats: Vec<RepeatResult>,
    pub mean_mse: f64,
    /// Sample standard deviation over repeats (0 for a single repeat).
    pub std_mse: f64,
    /// Mean over the repeats that had a non-empty segment.
    pub cold_user_mse: Option<f64>,
    pub cold_item_mse: Option<f64>,
    #[serde(skip)]
    pub predictions: Vec<Vec<PairPrediction>>,
    /// Wall times make these non-reproducible, so they stay out of the JSON.
    #[serde(skip)]
    pub traces: Vec<TrainTrace>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned text table: one row per repeat, then mean and std.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let fp = &self.dataset_fingerprint[..self.dataset_fingerprint.len().min(12)];
        writeln!(out, "{} K={} dataset {fp} seed {}", self.variant.name(), self.k, self.seed).unwrap();
        writeln!(out, "{:<8} {:>7} {:>6} {:>10} {:>10} {:>10}", "repeat", "train", "test", "MSE", "cold-user", "cold-item")
            .unwrap();
        for r in &self.repeats {
            writeln!(
                out,
                "{:<8} {:>7} {:>6} {:>10.4} {:>10} {:>10}",
                r.repeat + 1,
                r.n_train,
                r.n_test,
                r.mse,
                cell(r.cold_user_mse),
                cell(r.cold_item_mse)
            )
            .unwrap();
        }
        let blank = "";
        writeln!(
            out,
            "{:<8} {blank:>7} {blank:>6} {:>10.4} {:>10} {:>10}",
            "mean",
            self.mean_mse,
            cell(self.cold_user_mse),
            cell(self.cold_item_mse)
        )
        .unwrap();
        writeln!(out, "{:<8} {blank:>7} {blank:>6} {:>10.4}", "std", self.std_mse).unwrap();
        out
    }

    /// `user \t item \t truth \t prediction` for one repeat.
    pub fn write_predictions<W: Write>(&self, dataset: &Dataset, repeat: usize, mut out: W) -> io::Result<()> {
        for p in &self.predictions[repeat] {
            writeln!(out, "{}\t{}\t{}\t{}", dataset.user_id(p.user), dataset.item_id(p.item), p.truth, p.prediction)?;
        }
        Ok(())
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.4}"))
}

/// Several reports side by side: one row per report, MSE columns.
pub fn comparison_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    writeln!(out, "{:<10} {:>4} {:>10} {:>8} {:>10} {:>10}", "model", "K", "MSE", "std", "cold-user", "cold-item").unwrap();
    for r in reports {
        writeln!(
            out,
            "{:<10} {:>4} {:>10.4} {:>8.4} {:>10} {:>10}",
            r.variant.name(),
            r.k,
            r.mean_mse,
            r.std_mse,
            cell(r.cold_user_mse),
            cell(r.cold_item_mse)
        )
        .unwrap();
    }
    out
}

struct RepeatOutcome {
    result: RepeatResult,
    predictions: Vec<PairPrediction>,
    trace: TrainTrace,
}

fn run_repeat(d: &Dataset, config: &ExperimentConfig, repeat: usize) -> Result<RepeatOutcome, EvalError> {
    let split = split_train_test(d, &config.split, repeat)?;
    let channels = build_channels(d, &split.train, &config.features)?;
    let (factors, trace) = fit(&channels, &config.train).map_err(|source| EvalError::Train { repeat, source })?;
    let model = TrainedModel::new(d, &channels, &split.train, factors, config.train.hp)?;
    let cold = segment_cold_start(d, &split);

    let predictions: Vec<PairPrediction> = split
        .test
        .iter()
        .map(|&r| {
            let review = &d.reviews()[r];
            let p = model.predict_index(review.user, review.item);
            PairPrediction {
                user: review.user,
                item: review.item,
                truth: f64::from(review.rating),
                prediction: p.rating,
                fallback: p.fallback,
            }
        })
        .collect();

    let segment_mse = |keep: &dyn Fn(&PairPrediction) -> bool| -> (usize, Option<f64>) {
        let (p, t): (Vec<f64>, Vec<f64>) =
            predictions.iter().filter(|p| keep(p)).map(|p| (p.prediction, p.truth)).unzip();
        (p.len(), mse(&p, &t).ok())
    };
    let (all_p, all_t): (Vec<f64>, Vec<f64>) = predictions.iter().map(|p| (p.prediction, p.truth)).unzip();
    let (cold_user_pairs, cold_user_mse) = segment_mse(&|p| cold.users.contains(&p.user));
    let (cold_item_pairs, cold_item_mse) = segment_mse(&|p| cold.items.contains(&p.item));

    let result = RepeatResult {
        repeat,
        n_train: split.train.len(),
        n_test: split.test.len(),
        mse: mse(&all_p, &all_t)?,
        n_cold_users: cold.users.len(),
        n_cold_items: cold.items.len(),
        cold_user_pairs,
        cold_item_pairs,
        cold_user_mse,
        cold_item_mse,
        fallbacks: predictions.iter().filter(|p| p.fallback).count(),
        epochs: trace.n_updates(),
        final_objective: trace.final_objective(),
        termination: trace.termination,
    };
    Ok(RepeatOutcome { result, predictions, trace })
}

/// Split, rebuild training channels, fit and score, once per repeat.
///
/// Repeats run concurrently; each owns its own split and trainer, and the
/// report is assembled in repeat order.
pub fn run_experiment(d: &Dataset, config: &ExperimentConfig) -> Result<EvalReport, EvalError> {
    config.train.validate().map_err(|source| EvalError::Train { repeat: 0, source })?;
    let outcomes: Vec<RepeatOutcome> =
        (0..config.split.repeats).into_par_iter().map(|r| run_repeat(d, config, r)).collect::<Result<_, _>>()?;

    let mses: Vec<f64> = outcomes.iter().map(|o| o.result.mse).collect();
    let mean_mse = mean(&mses);
    let std_mse = if mses.len() > 1 {
        (mses.iter().map(|m| (m - mean_mse) * (m - mean_mse)).sum::<f64>() / (mses.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let present_mean = |v: Vec<f64>| if v.is_empty() { None } else { Some(mean(&v)) };
    let cold_user_mse = present_mean(outcomes.iter().filter_map(|o| o.result.cold_user_mse).collect());
    let cold_item_mse = present_mean(outcomes.iter().filter_map(|o| o.result.cold_item_mse).collect());

    let hp = config.train.hp;
    let mut report = EvalReport {
        variant: hp.variant,
        k: hp.k,
        lambdas: hp.effective().lambdas().iter().map(|&(name, v)| (name.to_owned(), v)).collect(),
        learning_rate: hp.learning_rate,
        seed: config.split.seed,
        train_fraction: config.split.train_fraction,
        dataset_fingerprint: d.fingerprint(),
        repeats: Vec::with_capacity(outcomes.len()),
        mean_mse,
        std_mse,
        cold_user_mse,
        cold_item_mse,
        predictions: Vec::with_capacity(outcomes.len()),
        traces: Vec::with_capacity(outcomes.len()),
    };
    for o in outcomes {
        report.repeats.push(o.result);
        report.predictions.push(o.predictions);
        report.traces.push(o.trace);
    }
    Ok(report)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// One report per K, in the given order, all on the same splits and seeds.
pub fn sweep_k(d: &Dataset, config: &ExperimentConfig, ks: &[usize]) -> Result<Vec<EvalReport>, EvalError> {
    if ks.is_empty() {
        return Err(EvalError::NoK);
    }
    ks.iter()
        .map(|&k| {
            let mut c = *config;
            c.train.hp.k = k;
            run_experiment(d, &c)
        })
        .collect()
}
