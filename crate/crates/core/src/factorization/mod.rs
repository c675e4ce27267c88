//! The fused factorization objective, its analytic gradient, and the link
//! function.
//!
//! Every channel `X ∈ {R, H, D, V}` is approximated by `tanh(A_iᵀB_j)` with
//! its own user factors `A` and item factors `B`:
//!
//! | channel | weight | user | item |
//! |---------|--------|------|------|
//! | R       | 1      | W    | Z    |
//! | H       | λ_H    | E    | F    |
//! | D       | λ_D    | C    | O    |
//! | V       | λ_V    | S    | U    |
//!
//! The rating user factors `W` are tied to `E`, `C`, `S` by quadratic
//! coupling penalties, and each factor row carries a zero-mean prior whose
//! strength scales with the row's observation count.

mod hyper;

use ndarray::{Array2, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{ChannelEntry, FeedbackChannel, FeedbackChannels, Interval};

pub use hyper::{Hyperparameters, Variant};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
}

pub const FACTOR_NAMES: [&str; 8] = ["W", "Z", "E", "F", "C", "O", "S", "U"];

/// User factors `W, E, C, S` (n×K) and item factors `Z, F, O, U` (m×K), one
/// pair per channel. Rows are latent vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentFactors {
    pub w: Array2<f64>,
    pub z: Array2<f64>,
    pub e: Array2<f64>,
    pub f: Array2<f64>,
    pub c: Array2<f64>,
    pub o: Array2<f64>,
    pub s: Array2<f64>,
    pub u: Array2<f64>,
}

impl LatentFactors {
    pub fn zeros(n_users: usize, n_items: usize, k: usize) -> Self {
        let user = || Array2::zeros((n_users, k));
        let item = || Array2::zeros((n_items, k));
        Self { w: user(), z: item(), e: user(), f: item(), c: user(), o: item(), s: user(), u: item() }
    }

    pub fn n_users(&self) -> usize {
        self.w.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.z.nrows()
    }

    pub fn k(&self) -> usize {
        self.w.ncols()
    }

    /// In `FACTOR_NAMES` order.
    pub fn matrices(&self) -> [&Array2<f64>; 8] {
        [&self.w, &self.z, &self.e, &self.f, &self.c, &self.o, &self.s, &self.u]
    }

    pub fn matrices_mut(&mut self) -> [&mut Array2<f64>; 8] {
        [&mut self.w, &mut self.z, &mut self.e, &mut self.f, &mut self.c, &mut self.o, &mut self.s, &mut self.u]
    }

    /// Shared K, n rows for user factors, m rows for item factors.
    pub fn check_shapes(&self) -> Result<(), ModelError> {
        let (n, m, k) = (self.n_users(), self.n_items(), self.k());
        for (idx, a) in self.matrices().into_iter().enumerate() {
            let rows = if idx % 2 == 0 { n } else { m };
            if a.nrows() != rows {
                return Err(ModelError::DimensionMismatch { what: "factor rows", expected: rows, found: a.nrows() });
            }
            if a.ncols() != k {
                return Err(ModelError::DimensionMismatch { what: "latent dimension", expected: k, found: a.ncols() });
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.matrices().iter().all(|a| a.iter().all(|v| v.is_finite()))
    }

    /// Frobenius norm over all eight matrices.
    pub fn norm(&self) -> f64 {
        self.matrices().iter().map(|a| a.iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt()
    }

    /// `self += alpha * other`, matrix by matrix.
    pub fn scaled_add(&mut self, alpha: f64, other: &LatentFactors) {
        for (a, b) in self.matrices_mut().into_iter().zip(other.matrices()) {
            a.scaled_add(alpha, b);
        }
    }
}

/// Per-row observation counts of every channel, before flooring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountWeights {
    pub n_w: Vec<usize>,
    pub n_z: Vec<usize>,
    pub n_e: Vec<usize>,
    pub n_f: Vec<usize>,
    pub n_c: Vec<usize>,
    pub n_o: Vec<usize>,
    pub n_s: Vec<usize>,
    pub n_u: Vec<usize>,
}

impl CountWeights {
    pub fn from_channels(ch: &FeedbackChannels) -> Self {
        Self {
            n_w: ch.rating.user_counts(),
            n_z: ch.rating.item_counts(),
            n_e: ch.helpfulness.user_counts(),
            n_f: ch.helpfulness.item_counts(),
            n_c: ch.centrality.user_counts(),
            n_o: ch.centrality.item_counts(),
            n_s: ch.view.user_counts(),
            n_u: ch.view.item_counts(),
        }
    }

    /// Prior weight of a row. A row without observations still gets weight
    /// 1 so that it stays regularized.
    pub fn floored(count: usize) -> f64 {
        count.max(1) as f64
    }

    /// In `FACTOR_NAMES` order.
    fn counts(&self) -> [&[usize]; 8] {
        [&self.n_w, &self.n_z, &self.n_e, &self.n_f, &self.n_c, &self.n_o, &self.n_s, &self.n_u]
    }
}

pub fn link(t: f64) -> f64 {
    t.tanh()
}

pub fn link_derivative(t: f64) -> f64 {
    let g = t.tanh();
    1.0 - g * g
}

/// `unscale(tanh(w·z))` on the rating scale.
pub fn predict_rating(user: &[f64], item: &[f64], rating_interval: Interval) -> f64 {
    let g = link(dot(user, item));
    rating_interval.lo + (g - Interval::MODEL.lo) * (rating_interval.hi - rating_interval.lo) / 2.0
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rows(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("factor matrices are in standard layout")
}

fn row(a: &[f64], k: usize, i: usize) -> &[f64] {
    &a[i * k..(i + 1) * k]
}

/// The objective bound to one set of channels, counts and (effective)
/// hyperparameters.
///
/// Every reduction runs in a fixed order: per-entry terms are computed
/// independently, then summed entry by entry, and every gradient row
/// accumulates its entries in index order. The `parallel` switch only
/// distributes the independent work, so results are bit-identical with it
/// on or off.
pub struct Objective<'a> {
    channels: &'a FeedbackChannels,
    weights: &'a CountWeights,
    hp: Hyperparameters,
    parallel: bool,
}

struct Term<'a> {
    channel: &'a FeedbackChannel,
    weight: f64,
    user: usize,
    item: usize,
}

impl<'a> Objective<'a> {
    pub fn new(
        channels: &'a FeedbackChannels,
        weights: &'a CountWeights,
        hp: &Hyperparameters,
        parallel: bool,
    ) -> Result<Self, ModelError> {
        hp.validate()?;
        let (n, m) = (channels.n_users(), channels.n_items());
        for ch in channels.iter() {
            expect_dim("channel users", n, ch.n_users())?;
            expect_dim("channel items", m, ch.n_items())?;
        }
        for (idx, counts) in weights.counts().into_iter().enumerate() {
            expect_dim("count weights", if idx % 2 == 0 { n } else { m }, counts.len())?;
        }
        Ok(Self { channels, weights, hp: hp.effective(), parallel })
    }

    /// The hyperparameters after variant masking.
    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hp
    }

    fn terms(&self) -> [Term<'a>; 4] {
        let ch = self.channels;
        [
            Term { channel: &ch.rating, weight: 1.0, user: 0, item: 1 },
            Term { channel: &ch.helpfulness, weight: self.hp.lambda_h, user: 2, item: 3 },
            Term { channel: &ch.centrality, weight: self.hp.lambda_d, user: 4, item: 5 },
            Term { channel: &ch.view, weight: self.hp.lambda_v, user: 6, item: 7 },
        ]
    }

    /// (λ, index of the auxiliary user factor) for the W couplings.
    fn couplings(&self) -> [(f64, usize); 3] {
        [(self.hp.lambda_we, 2), (self.hp.lambda_wc, 4), (self.hp.lambda_ws, 6)]
    }

    /// Prior λ per factor, in `FACTOR_NAMES` order.
    fn priors(&self) -> [f64; 8] {
        let h = &self.hp;
        [h.lambda_w, h.lambda_z, h.lambda_e, h.lambda_f, h.lambda_c, h.lambda_o, h.lambda_s, h.lambda_u]
    }

    fn check(&self, x: &LatentFactors) -> Result<(), ModelError> {
        x.check_shapes()?;
        expect_dim("factor users", self.channels.n_users(), x.n_users())?;
        expect_dim("factor items", self.channels.n_items(), x.n_items())?;
        expect_dim("latent dimension", self.hp.k, x.k())
    }

    fn per_entry<F>(&self, entries: &[ChannelEntry], f: F) -> Vec<f64>
    where
        F: Fn(&ChannelEntry) -> f64 + Sync + Send,
    {
        if self.parallel {
            entries.par_iter().map(f).collect()
        } else {
            entries.iter().map(f).collect()
        }
    }

    /// Φ: weighted half squared errors of the four channels, the three
    /// halved coupling penalties, and the eight count-weighted priors.
    pub fn value(&self, x: &LatentFactors) -> Result<f64, ModelError> {
        self.check(x)?;
        let k = x.k();
        let mats = x.matrices();
        let mut total = 0.0;

        for term in self.terms() {
            if term.weight == 0.0 || term.channel.is_empty() {
                continue;
            }
            let (a, b) = (rows(mats[term.user]), rows(mats[term.item]));
            let sq = self.per_entry(term.channel.entries(), |e| {
                let r = e.scaled - link(dot(row(a, k, e.user), row(b, k, e.item)));
                r * r
            });
            total += 0.5 * term.weight * sq.iter().sum::<f64>();
        }

        for (lambda, aux) in self.couplings() {
            if lambda == 0.0 {
                continue;
            }
            let diff: f64 = rows(&x.w).iter().zip(rows(mats[aux])).map(|(w, a)| (w - a) * (w - a)).sum();
            total += 0.5 * lambda * diff;
        }

        for ((lambda, counts), a) in self.priors().into_iter().zip(self.weights.counts()).zip(mats) {
            if lambda == 0.0 {
                continue;
            }
            let a = rows(a);
            let weighted: f64 = counts
                .iter()
                .enumerate()
                .map(|(i, &n)| CountWeights::floored(n) * row(a, k, i).iter().map(|v| v * v).sum::<f64>())
                .sum();
            total += 0.5 * lambda * weighted;
        }
        Ok(total)
    }

    /// ∂Φ with respect to all eight factor matrices.
    ///
    /// For a user row of W:
    /// `Σ_j I_ij g'(W_iᵀZ_j)(g(W_iᵀZ_j) − R_ij) Z_j + λ_WE(W_i − E_i) +
    /// λ_WC(W_i − C_i) + λ_WS(W_i − S_i) + λ_W n_w W_i`;
    /// the couplings enter E, C, S with the opposite sign.
    pub fn gradient(&self, x: &LatentFactors) -> Result<LatentFactors, ModelError> {
        self.check(x)?;
        let k = x.k();
        let mut grad = LatentFactors::zeros(x.n_users(), x.n_items(), k);

        for term in self.terms() {
            if term.weight == 0.0 || term.channel.is_empty() {
                continue;
            }
            let mats = x.matrices();
            let (a, b) = (rows(mats[term.user]), rows(mats[term.item]));
            let entries = term.channel.entries();
            let coef = self.per_entry(entries, |e| {
                let g = link(dot(row(a, k, e.user), row(b, k, e.item)));
                term.weight * ((1.0 - g * g) * (g - e.scaled))
            });

            let gm = grad.matrices_mut();
            let ch = term.channel;
            for_each_row(gm[term.user].as_slice_mut().expect("standard layout"), k, self.parallel, |i, out| {
                for idx in ch.user_range(i) {
                    axpy(out, coef[idx], row(b, k, entries[idx].item));
                }
            });
            for_each_row(gm[term.item].as_slice_mut().expect("standard layout"), k, self.parallel, |j, out| {
                for &idx in ch.item_entries(j) {
                    axpy(out, coef[idx], row(a, k, entries[idx].user));
                }
            });
        }

        for (lambda, aux) in self.couplings() {
            if lambda == 0.0 {
                continue;
            }
            let aux_factor = x.matrices()[aux];
            Zip::from(&mut grad.w).and(&x.w).and(aux_factor).for_each(|g, &w, &a| *g += lambda * (w - a));
            let gm = grad.matrices_mut();
            Zip::from(&mut *gm[aux]).and(&x.w).and(aux_factor).for_each(|g, &w, &a| *g -= lambda * (w - a));
        }

        let priors = self.priors();
        let counts = self.weights.counts();
        for (idx, (g, a)) in grad.matrices_mut().into_iter().zip(x.matrices()).enumerate() {
            let lambda = priors[idx];
            if lambda == 0.0 {
                continue;
            }
            let a = rows(a);
            for_each_row(g.as_slice_mut().expect("standard layout"), k, self.parallel, |i, out| {
                let scale = lambda * CountWeights::floored(counts[idx][i]);
                axpy(out, scale, row(a, k, i));
            });
        }
        Ok(grad)
    }
}

fn expect_dim(what: &'static str, expected: usize, found: usize) -> Result<(), ModelError> {
    if expected != found {
        return Err(ModelError::DimensionMismatch { what, expected, found });
    }
    Ok(())
}

#[inline]
fn axpy(out: &mut [f64], alpha: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

fn for_each_row<F>(data: &mut [f64], k: usize, parallel: bool, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    if parallel {
        data.par_chunks_mut(k).enumerate().for_each(|(i, r)| f(i, r));
    } else {
        data.chunks_mut(k).enumerate().for_each(|(i, r)| f(i, r));
    }
}

/// Φ for one set of factors. See [`Objective::value`].
pub fn objective(
    x: &LatentFactors,
    channels: &FeedbackChannels,
    weights: &CountWeights,
    hp: &Hyperparameters,
) -> Result<f64, ModelError> {
    Objective::new(channels, weights, hp, false)?.value(x)
}

/// ∂Φ for one set of factors. See [`Objective::gradient`].
pub fn gradient(
    x: &LatentFactors,
    channels: &FeedbackChannels,
    weights: &CountWeights,
    hp: &Hyperparameters,
) -> Result<LatentFactors, ModelError> {
    Objective::new(channels, weights, hp, false)?.gradient(x)
}

#[cfg(test)]
mod tests;
