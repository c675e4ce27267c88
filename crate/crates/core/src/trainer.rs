//! Full-batch gradient descent on the fused objective.

use std::io::{self, Write};
use std::time::Instant;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factorization::{CountWeights, Hyperparameters, LatentFactors, ModelError, Objective};
use crate::features::FeedbackChannels;
use crate::seed::{rng_for, Purpose};

/// Φ growing for this many consecutive epochs aborts training.
pub const DIVERGENCE_PATIENCE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    /// Standard deviation of the Gaussian factor initialization.
    pub init_std: f64,
    pub hp: Hyperparameters,
    /// Log progress every this many epochs.
    pub log_every: usize,
    /// Spread objective/gradient work over threads. Results are
    /// bit-identical either way.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { seed: 0, init_std: 0.1, hp: Hyperparameters::default(), log_every: 50, parallel: false }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.init_std.is_finite() && self.init_std >= 0.0) {
            return Err(TrainError::InvalidConfig(format!("init_std = {} must be non-negative", self.init_std)));
        }
        if self.log_every == 0 {
            return Err(TrainError::InvalidConfig("log_every must be positive".into()));
        }
        self.hp.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxEpochs,
    Diverged,
}

/// Objective and gradient norm at the factors reached after `epoch` updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Epoch 0 holds the initial factors.
    pub epochs: Vec<EpochRecord>,
    pub termination: Termination,
}

impl TrainTrace {
    pub fn initial_objective(&self) -> f64 {
        self.epochs[0].objective
    }

    pub fn final_objective(&self) -> f64 {
        self.epochs.last().expect("trace holds epoch 0").objective
    }

    /// Number of update steps taken.
    pub fn n_updates(&self) -> usize {
        self.epochs.len() - 1
    }

    /// Same trajectory, ignoring wall time.
    pub fn same_path(&self, other: &TrainTrace) -> bool {
        self.termination == other.termination
            && self.epochs.len() == other.epochs.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.objective.to_bits() == b.objective.to_bits()
                    && a.grad_norm.to_bits() == b.grad_norm.to_bits()
            })
    }

    /// `epoch,objective,grad_norm,seconds` CSV.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "epoch,objective,grad_norm,seconds")?;
        for r in &self.epochs {
            writeln!(out, "{},{},{},{:.6}", r.epoch, r.objective, r.grad_norm, r.seconds)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: &'static str, trace: Box<TrainTrace> },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// i.i.d. `N(0, init_std²)` entries, matrices filled in W, Z, E, F, C, O,
/// S, U order from the seed's init stream.
pub fn init_factors(n_users: usize, n_items: usize, k: usize, seed: u64, init_std: f64) -> LatentFactors {
    let mut x = LatentFactors::zeros(n_users, n_items, k);
    if init_std == 0.0 {
        return x;
    }
    let normal = Normal::new(0.0, init_std).expect("init_std is finite and positive");
    let mut rng = rng_for(seed, Purpose::Init, 0);
    for a in x.matrices_mut() {
        a.mapv_inplace(|_| normal.sample(&mut rng));
    }
    x
}

/// Train from a seeded Gaussian initialization.
///
/// Each epoch steps all eight matrices from one gradient snapshot,
/// `X ← X − ε ∂Φ/∂X`, and stops once the relative change of Φ drops below
/// `conv_tol` or `max_epochs` is reached.
pub fn fit(channels: &FeedbackChannels, config: &TrainConfig) -> Result<(LatentFactors, TrainTrace), TrainError> {
    config.validate()?;
    let init = init_factors(channels.n_users(), channels.n_items(), config.hp.k, config.seed, config.init_std);
    fit_from(channels, config, init)
}

/// Train from given initial factors.
pub fn fit_from(
    channels: &FeedbackChannels,
    config: &TrainConfig,
    mut x: LatentFactors,
) -> Result<(LatentFactors, TrainTrace), TrainError> {
    config.validate()?;
    let weights = CountWeights::from_channels(channels);
    let objective = Objective::new(channels, &weights, &config.hp, config.parallel)?;
    let hp = objective.hyperparameters();
    let start = Instant::now();

    let mut phi = objective.value(&x)?;
    let mut grad = objective.gradient(&x)?;
    let mut epochs = vec![EpochRecord { epoch: 0, objective: phi, grad_norm: grad.norm(), seconds: 0.0 }];
    if !phi.is_finite() {
        let trace = TrainTrace { epochs, termination: Termination::Diverged };
        return Err(TrainError::Diverged { epoch: 0, reason: "initial objective is not finite", trace: Box::new(trace) });
    }

    let mut growing = 0;
    for epoch in 1..=hp.max_epochs {
        x.scaled_add(-hp.learning_rate, &grad);
        let next = objective.value(&x)?;
        if !next.is_finite() || !x.is_finite() {
            epochs.push(EpochRecord { epoch, objective: next, grad_norm: f64::NAN, seconds: start.elapsed().as_secs_f64() });
            let trace = TrainTrace { epochs, termination: Termination::Diverged };
            return Err(TrainError::Diverged { epoch, reason: "objective is not finite", trace: Box::new(trace) });
        }
        grad = objective.gradient(&x)?;
        epochs.push(EpochRecord { epoch, objective: next, grad_norm: grad.norm(), seconds: start.elapsed().as_secs_f64() });
        if epoch % config.log_every == 0 {
            log::debug!("epoch {epoch}: objective {next:.6e}, |grad| {:.3e}", grad.norm());
        }

        growing = if next > phi { growing + 1 } else { 0 };
        if growing >= DIVERGENCE_PATIENCE {
            let trace = TrainTrace { epochs, termination: Termination::Diverged };
            return Err(TrainError::Diverged { epoch, reason: "objective kept growing", trace: Box::new(trace) });
        }
        let change = (next - phi).abs() / phi.max(1e-12);
        phi = next;
        if change < hp.conv_tol {
            return Ok((x, TrainTrace { epochs, termination: Termination::Converged }));
        }
    }
    Ok((x, TrainTrace { epochs, termination: Termination::MaxEpochs }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::Variant;
    use crate::features::{ChannelKind, FeedbackChannel, Interval};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn channels(n: usize, m: usize, seed: u64) -> FeedbackChannels {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut make = |kind, density: f64| {
            let mut raw = Vec::new();
            for k in 0..n * m {
                if rng.random::<f64>() < density {
                    raw.push((k / m, k % m, rng.random_range(-1.0..=1.0)));
                }
            }
            FeedbackChannel::new(kind, n, m, raw, Interval::MODEL).unwrap()
        };
        FeedbackChannels {
            rating: make(ChannelKind::Rating, 0.5),
            helpfulness: make(ChannelKind::Helpfulness, 0.4),
            centrality: make(ChannelKind::Centrality, 0.5),
            view: make(ChannelKind::View, 0.3),
        }
    }

    fn config(k: usize, variant: Variant) -> TrainConfig {
        TrainConfig {
            seed: 5,
            init_std: 0.3,
            hp: Hyperparameters { k, variant, ..Hyperparameters::default() },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn init_is_seeded() {
        assert_eq!(init_factors(5, 4, 3, 9, 0.1), init_factors(5, 4, 3, 9, 0.1));
        assert_ne!(init_factors(5, 4, 3, 9, 0.1), init_factors(5, 4, 3, 10, 0.1));
        assert_eq!(init_factors(5, 4, 3, 9, 0.0), LatentFactors::zeros(5, 4, 3));
    }

    #[test]
    fn init_sample_mean_is_near_zero() {
        let (n, k, std) = (2500, 4, 0.1);
        let x = init_factors(n, 1, k, 1, std);
        let mean = x.w.mean().unwrap();
        assert!(mean.abs() < 3.0 * std / ((n * k) as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn zero_init_converges_immediately() {
        let ch = channels(8, 6, 0);
        let cfg = TrainConfig { init_std: 0.0, ..config(3, Variant::RhcvPmf) };
        let (x, trace) = fit(&ch, &cfg).unwrap();
        assert_eq!(trace.termination, Termination::Converged);
        assert_eq!(trace.n_updates(), 1);
        assert_eq!(x, LatentFactors::zeros(8, 6, 3));
    }

    #[test]
    fn objective_strictly_decreases_early() {
        let ch = channels(8, 6, 1);
        let cfg = TrainConfig {
            hp: Hyperparameters { max_epochs: 50, conv_tol: 1e-300, ..config(3, Variant::RhcvPmf).hp },
            ..config(3, Variant::RhcvPmf)
        };
        let (_, trace) = fit(&ch, &cfg).unwrap();
        assert_eq!(trace.n_updates(), 50);
        for w in trace.epochs.windows(2) {
            assert!(w[1].objective < w[0].objective, "epoch {}", w[1].epoch);
        }
    }

    #[test]
    fn mf_equals_fused_with_zero_channel_weights() {
        let ch = channels(8, 6, 2);
        let mf = config(3, Variant::Mf);
        let mut fused = config(3, Variant::RhcvPmf);
        fused.hp.lambda_h = 0.0;
        fused.hp.lambda_d = 0.0;
        fused.hp.lambda_v = 0.0;
        fused.hp.lambda_we = 0.0;
        fused.hp.lambda_wc = 0.0;
        fused.hp.lambda_ws = 0.0;
        let (xa, ta) = fit(&ch, &mf).unwrap();
        let (xb, tb) = fit(&ch, &fused).unwrap();
        assert!(ta.same_path(&tb));
        assert_eq!(xa, xb);
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let ch = channels(8, 6, 3);
        let mut cfg = config(3, Variant::RhcvPmf);
        cfg.hp.learning_rate = 10.0;
        match fit(&ch, &cfg) {
            Err(TrainError::Diverged { epoch, trace, .. }) => {
                assert!(epoch >= 1);
                assert_eq!(trace.termination, Termination::Diverged);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn trace_csv_layout() {
        let ch = channels(4, 3, 4);
        let (_, trace) = fit(&ch, &config(2, Variant::Mf)).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("epoch,objective,grad_norm,seconds"));
        assert_eq!(lines.count(), trace.epochs.len());
        if trace.termination == Termination::Converged {
            assert!(trace.final_objective() <= trace.initial_objective());
        }
    }
}
