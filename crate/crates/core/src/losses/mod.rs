//! Pairwise surrogates, inner-estimator banks and the dynamic mini-batch
//! losses built on them.
//!
//! Every dynamic loss follows the same three steps: compute a fresh
//! mini-batch estimate of each anchor's inner function, fold it into the
//! anchor's moving average, then form coefficients `p = f'(u)` that are held
//! constant while differentiating. The returned `grad_w` is the gradient of
//! the loss with `p` frozen.

mod ap;
mod aucm;
mod baseline;
mod estimator;
mod gcl;
mod ndcg;
mod pauc;
mod surrogate;

use ndarray::Array2;

use crate::data::IndexedDataset;
use crate::error::{Result, XriskError};
use crate::model::{ParamVector, ScoringModel};

pub use ap::ap_dynamic_loss;
pub use aucm::{aucm_loss_and_grads, AucmOutput, MinMaxState};
pub use baseline::{ce_loss, focal_loss, StaticLossOutput};
pub use estimator::{EstimatorOrder, InnerEstimatorBank};
pub use gcl::gcl_dynamic_loss;
pub use ndcg::{listwise_ce_dynamic_loss, listwise_weights, ndcg_dynamic_loss};
pub use pauc::pauc_dynamic_loss;
pub use surrogate::{Surrogate, SurrogateKind};

/// Lower bound applied to every estimate used as a divisor or log argument.
pub const U_FLOOR: f64 = 1e-8;
/// Exponent arguments are clipped to `[-EXP_CLIP, EXP_CLIP]`.
pub const EXP_CLIP: f64 = 30.0;

/// How often the numeric guards fired.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NumericCounters {
    pub floor_clamps: u64,
    pub exp_clips: u64,
}

impl NumericCounters {
    pub fn add(&mut self, other: NumericCounters) {
        self.floor_clamps += other.floor_clamps;
        self.exp_clips += other.exp_clips;
    }

    pub(crate) fn floor(&mut self, u: f64) -> f64 {
        if u < U_FLOOR {
            self.floor_clamps += 1;
            U_FLOOR
        } else {
            u
        }
    }

    pub(crate) fn exp(&mut self, x: f64) -> f64 {
        if x > EXP_CLIP {
            self.exp_clips += 1;
            EXP_CLIP.exp()
        } else if x < -EXP_CLIP {
            self.exp_clips += 1;
            (-EXP_CLIP).exp()
        } else {
            x.exp()
        }
    }
}

/// Result of one dynamic mini-batch loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicLossOutput {
    /// Value of the differentiated expression (coefficients frozen).
    pub loss: f64,
    /// Mini-batch estimate of the objective from the current estimates.
    pub objective: f64,
    /// Detached coefficients; layout documented per loss.
    pub p: Array2<f64>,
    pub grad_w: ParamVector,
    pub counters: NumericCounters,
}

/// Features and scores of a list of dataset rows.
pub(crate) struct ScoredRows {
    pub x: Array2<f64>,
    pub s: Vec<f64>,
}

pub(crate) fn score_rows(model: &ScoringModel, w: &[f64], ds: &IndexedDataset, rows: &[usize]) -> Result<ScoredRows> {
    if let Some(&bad) = rows.iter().find(|&&i| i >= ds.len()) {
        return Err(XriskError::IndexOutOfRange {
            index: bad,
            len: ds.len(),
        });
    }
    let x = ds.rows(rows);
    let s = model.scores(w, x.view())?;
    Ok(ScoredRows { x, s })
}

pub(crate) fn require_classes(batch: &crate::sampler::MiniBatch, what: &str) -> Result<()> {
    if batch.positives.is_empty() || batch.negatives.is_empty() {
        return Err(XriskError::BatchComposition(format!(
            "{what} needs at least one positive and one negative in the batch (got {} / {})",
            batch.positives.len(),
            batch.negatives.len()
        )));
    }
    Ok(())
}
