use serde::{Deserialize, Serialize};

use super::FeatureError;

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// The range of the tanh link, shared by every scaled channel.
    pub const MODEL: Interval = Interval { lo: -1.0, hi: 1.0 };
    pub const RATING: Interval = Interval { lo: 1.0, hi: 5.0 };
    pub const VIEW: Interval = Interval { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self, FeatureError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FeatureError::BadInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// `[-m, m]`, or `[-1, 1]` when `m` is zero.
    pub fn symmetric(m: f64) -> Result<Self, FeatureError> {
        let m = m.abs();
        if m == 0.0 {
            return Ok(Self::MODEL);
        }
        Self::new(-m, m)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn check(&self, x: f64) -> Result<(), FeatureError> {
        if !self.contains(x) {
            return Err(FeatureError::OutOfInterval { value: x, lo: self.lo, hi: self.hi });
        }
        Ok(())
    }
}

/// Affine map of `x ∈ from` onto `to`: `c + (x - a)(d - c)/(b - a)`.
pub fn scale_value(x: f64, from: Interval, to: Interval) -> Result<f64, FeatureError> {
    from.check(x)?;
    Ok(to.lo + (x - from.lo) * (to.hi - to.lo) / (from.hi - from.lo))
}

/// Inverse of [`scale_value`]: maps `y ∈ to` back onto `from`.
pub fn unscale_value(y: f64, from: Interval, to: Interval) -> Result<f64, FeatureError> {
    scale_value(y, to, from)
}
