use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Which channels take part. Every variant is the fused model with some
/// weight groups forced to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Ratings only.
    Mf,
    /// Ratings, helpfulness and centrality.
    #[serde(rename = "rhc")]
    RhcPmf,
    /// Ratings and views.
    #[serde(rename = "rv")]
    RvPmf,
    /// All four channels.
    #[serde(rename = "rhcv")]
    RhcvPmf,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Mf, Variant::RhcPmf, Variant::RvPmf, Variant::RhcvPmf];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Mf => "MF",
            Variant::RhcPmf => "RHC-PMF",
            Variant::RvPmf => "RV-PMF",
            Variant::RhcvPmf => "RHCV-PMF",
        }
    }

    pub fn flag(self) -> &'static str {
        match self {
            Variant::Mf => "mf",
            Variant::RhcPmf => "rhc",
            Variant::RvPmf => "rv",
            Variant::RhcvPmf => "rhcv",
        }
    }

    fn uses_explicit(self) -> bool {
        matches!(self, Variant::RhcPmf | Variant::RhcvPmf)
    }

    fn uses_views(self) -> bool {
        matches!(self, Variant::RvPmf | Variant::RhcvPmf)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Variant::ALL
            .into_iter()
            .find(|v| v.flag() == lower || v.name().to_ascii_lowercase() == lower)
            .ok_or_else(|| ModelError::InvalidHyperparameter(format!("unknown variant {s:?}")))
    }
}

/// Model weights (ratios of the rating noise variance to each other
/// variance), latent dimension, and descent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub k: usize,
    pub variant: Variant,
    pub lambda_h: f64,
    pub lambda_d: f64,
    pub lambda_v: f64,
    pub lambda_we: f64,
    pub lambda_wc: f64,
    pub lambda_ws: f64,
    pub lambda_w: f64,
    pub lambda_z: f64,
    pub lambda_e: f64,
    pub lambda_f: f64,
    pub lambda_c: f64,
    pub lambda_o: f64,
    pub lambda_s: f64,
    pub lambda_u: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub conv_tol: f64,
}

impl Default for Hyperparameters {
    /// Channel weights 0.2, couplings 0.2, priors 0.1, K = 5.
    fn default() -> Self {
        Self {
            k: 5,
            variant: Variant::RhcvPmf,
            lambda_h: 0.2,
            lambda_d: 0.2,
            lambda_v: 0.2,
            lambda_we: 0.2,
            lambda_wc: 0.2,
            lambda_ws: 0.2,
            lambda_w: 0.1,
            lambda_z: 0.1,
            lambda_e: 0.1,
            lambda_f: 0.1,
            lambda_c: 0.1,
            lambda_o: 0.1,
            lambda_s: 0.1,
            lambda_u: 0.1,
            learning_rate: 0.01,
            max_epochs: 500,
            conv_tol: 1e-5,
        }
    }
}

impl Hyperparameters {
    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    /// Copy with the channel and coupling weights the variant excludes set
    /// to zero. Prior weights are untouched.
    pub fn effective(&self) -> Self {
        let mut hp = *self;
        if !self.variant.uses_explicit() {
            hp.lambda_h = 0.0;
            hp.lambda_d = 0.0;
            hp.lambda_we = 0.0;
            hp.lambda_wc = 0.0;
        }
        if !self.variant.uses_views() {
            hp.lambda_v = 0.0;
            hp.lambda_ws = 0.0;
        }
        hp
    }

    /// Every λ with its config key.
    pub fn lambdas(&self) -> [(&'static str, f64); 14] {
        [
            ("lambda_h", self.lambda_h),
            ("lambda_d", self.lambda_d),
            ("lambda_v", self.lambda_v),
            ("lambda_we", self.lambda_we),
            ("lambda_wc", self.lambda_wc),
            ("lambda_ws", self.lambda_ws),
            ("lambda_w", self.lambda_w),
            ("lambda_z", self.lambda_z),
            ("lambda_e", self.lambda_e),
            ("lambda_f", self.lambda_f),
            ("lambda_c", self.lambda_c),
            ("lambda_o", self.lambda_o),
            ("lambda_s", self.lambda_s),
            ("lambda_u", self.lambda_u),
        ]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidHyperparameter(msg));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        for (name, value) in self.lambdas() {
            if !(value.is_finite() && value >= 0.0) {
                return bad(format!("{name} = {value} must be finite and non-negative"));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate = {} must be positive", self.learning_rate));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive".into());
        }
        if !(self.conv_tol.is_finite() && self.conv_tol > 0.0) {
            return bad(format!("conv_tol = {} must be positive", self.conv_tol));
        }
        Ok(())
    }
}
