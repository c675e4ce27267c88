//! Synthetic review corpora with planted low-rank structure.
//!
//! Ratings come from planted user/item factors pushed through the same link
//! and rating map the model uses. The auxiliary channels are driven by a
//! second pair of factors that share a fraction `rho` of the planted ones:
//! helpful-vote counts, purchase order and view edges all follow the
//! auxiliary affinity `a = ũ_i·ã_j`.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{ReviewRecord, ViewRecord};
use crate::seed::{rng_for, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_items: usize,
    /// Rank of the planted factors.
    pub rank: usize,
    /// Std of the Gaussian noise added on the 1–5 scale before rounding.
    pub noise_std: f64,
    /// Correlation between the planted and the auxiliary factors.
    pub rho: f64,
    /// Probability that a user reviewed a given item.
    pub density: f64,
    /// Std of the planted affinity `w·z`.
    pub signal_std: f64,
    /// Helpful votes cast on a review that got any.
    pub votes: u32,
    /// Probability that a review got no votes at all.
    pub unvoted_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_items: 100,
            rank: 5,
            noise_std: 0.5,
            rho: 0.9,
            density: 0.05,
            signal_std: 1.0,
            votes: 20,
            unvoted_rate: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), String> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.n_users == 0 || self.n_items == 0 || self.rank == 0 {
            return Err("n_users, n_items and rank must be at least 1".into());
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(format!("density {} outside (0, 1]", self.density));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(format!("rho {} outside [0, 1]", self.rho));
        }
        if !(0.0..=1.0).contains(&self.unvoted_rate) {
            return Err(format!("unvoted_rate {} outside [0, 1]", self.unvoted_rate));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) || !positive(self.signal_std) {
            return Err("noise_std must be non-negative and signal_std positive".into());
        }
        if self.votes == 0 {
            return Err("votes must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedFactors {
    pub user: Array2<f64>,
    pub item: Array2<f64>,
    pub aux_user: Array2<f64>,
    pub aux_item: Array2<f64>,
}

impl PlantedFactors {
    /// Noiseless expected rating `3 + 2 tanh(w·z)`.
    pub fn rating_mean(&self, user: usize, item: usize) -> f64 {
        3.0 + 2.0 * self.user.row(user).dot(&self.item.row(item)).tanh()
    }

    fn aux_affinity(&self, user: usize, item: usize) -> f64 {
        self.aux_user.row(user).dot(&self.aux_item.row(item))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub reviews: Vec<ReviewRecord>,
    pub views: Vec<ViewRecord>,
    pub planted: PlantedFactors,
}

pub fn user_id(i: usize) -> String {
    format!("u{i:05}")
}

pub fn item_id(j: usize) -> String {
    format!("p{j:05}")
}

/// Generate a corpus. Same spec, same corpus.
///
/// With `rho = 0` the auxiliary factors are independent of the planted
/// ones, so vote magnitudes, purchase order and views carry nothing about
/// the ratings. Vote signs still follow the rating, as they do for any
/// review.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus, String> {
    spec.validate()?;
    let (n, m, k) = (spec.n_users, spec.n_items, spec.rank);
    let mut rng = rng_for(spec.seed, Purpose::Synthetic, 0);

    // Entries of std s give w·z a std of s²·√k.
    let s = (spec.signal_std / (k as f64).sqrt()).sqrt();
    let mut gaussian = |rows: usize| Array2::from_shape_simple_fn((rows, k), || s * rng.sample::<f64, _>(StandardNormal));
    let user = gaussian(n);
    let item = gaussian(m);
    let mix = |planted: &Array2<f64>, noise: Array2<f64>| planted * spec.rho + noise * (1.0 - spec.rho * spec.rho).sqrt();
    let aux_user = mix(&user, gaussian(n));
    let aux_item = mix(&item, gaussian(m));
    let planted = PlantedFactors { user, item, aux_user, aux_item };

    let noise = Normal::new(0.0, spec.noise_std).expect("validated noise std");
    let mut pairs: Vec<(usize, usize, u8, f64)> = Vec::new();
    for i in 0..n {
        for j in 0..m {
            if rng.random::<f64>() >= spec.density {
                continue;
            }
            let raw = planted.rating_mean(i, j) + noise.sample(&mut rng);
            let rating = raw.round().clamp(1.0, 5.0) as u8;
            pairs.push((i, j, rating, planted.aux_affinity(i, j)));
        }
    }

    // |H| tracks |tanh(a)| and extreme affinity buys an early purchase.
    let mut by_item: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    let mut reviews = Vec::with_capacity(pairs.len());
    for &(i, j, rating, a) in &pairs {
        let (yes, total) = if rng.random::<f64>() < spec.unvoted_rate {
            (0, 0)
        } else {
            let yes = (f64::from(spec.votes) * a.tanh().abs().sqrt()).round() as u32;
            (yes, spec.votes)
        };
        by_item[j].push((reviews.len(), a.abs()));
        reviews.push(ReviewRecord {
            user_id: user_id(i),
            item_id: item_id(j),
            rating,
            helpful_yes: yes,
            helpful_total: total,
            timestamp: 0,
        });
    }
    for list in &mut by_item {
        list.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        for (position, &(r, _)) in list.iter().enumerate() {
            reviews[r].timestamp = 1_400_000_000 + 86_400 * position as i64;
        }
    }

    // A view happens with probability (1 + tanh(a)) / 2, so the zero-filled
    // view matrix on [-1, 1] has mean tanh(a).
    let mut views = Vec::new();
    for i in 0..n {
        for j in 0..m {
            let p = 0.5 * (1.0 + planted.aux_affinity(i, j).tanh());
            if rng.random::<f64>() < p {
                views.push(ViewRecord { user_id: user_id(i), item_id: item_id(j), timestamp: None });
            }
        }
    }

    Ok(SyntheticCorpus { reviews, views, planted })
}
