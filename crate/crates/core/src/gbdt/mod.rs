//! Histogram gradient-boosted decision trees for binary pixel classification.
//!
//! Features are standardized with an embedded [`Scaler`](crate::features::Scaler),
//! pre-binned into equal-frequency quantile bins, and trees are grown depth
//! first on a logistic objective with second-order split gains.

mod binning;
mod model;
mod predict;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use binning::{assign_bins, quantile_cuts, QUANTILE_SAMPLE_CAP};
pub use model::{load_model, read_model, save_model, write_model, GbdtModel, Node, SCHEMA_VERSION};
pub use predict::{predict_mask, predict_scores, sigmoid, CompiledModel, MARGIN_CLAMP};
pub use train::{fit, fit_with_log, logistic_loss, FitLog, BASE_SCORE_CLAMP, MIN_SPLIT_GAIN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub max_bin: usize,
    /// Minimum hessian sum required in each child of a split.
    pub min_child_weight: f64,
    pub learning_rate: f64,
    /// Leaf-value regularizer.
    pub l2_reg: f64,
    /// Weight multiplier for positive rows.
    pub scale_pos_weight: f64,
    /// Bound on |leaf step| before shrinkage; 0 disables the bound.
    ///
    /// With a strongly imbalanced prior the per-row hessians are tiny and
    /// unbounded Newton steps overshoot, raising the training loss.
    pub max_delta_step: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_estimators: 35,
            max_depth: 10,
            max_bin: 10_000,
            min_child_weight: 1.0,
            learning_rate: 0.3,
            l2_reg: 1.0,
            scale_pos_weight: 1.0,
            max_delta_step: 3.0,
        }
    }
}

impl GbdtParams {
    pub fn with_rounds(mut self, n_estimators: usize) -> Self {
        self.n_estimators = n_estimators;
        self
    }

    pub fn with_depth(mut self, max_depth: usize) -> Self {
        self.max_depth = max_depth;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1".into());
        }
        // bin indices are stored as u16
        if !(2..=1 << 16).contains(&self.max_bin) {
            return bad(format!(
                "max_bin must lie in [2, 65536], got {}",
                self.max_bin
            ));
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return bad(format!(
                "min_child_weight must be >= 0, got {}",
                self.min_child_weight
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            ));
        }
        if !(self.l2_reg >= 0.0 && self.l2_reg.is_finite()) {
            return bad(format!("l2_reg must be >= 0, got {}", self.l2_reg));
        }
        if !(self.scale_pos_weight > 0.0 && self.scale_pos_weight.is_finite()) {
            return bad(format!(
                "scale_pos_weight must be > 0, got {}",
                self.scale_pos_weight
            ));
        }
        if !(self.max_delta_step >= 0.0 && self.max_delta_step.is_finite()) {
            return bad(format!(
                "max_delta_step must be >= 0, got {}",
                self.max_delta_step
            ));
        }
        Ok(())
    }
}
