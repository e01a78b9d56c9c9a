use ndarray::Array2;

use super::{
    require_classes, score_rows, DynamicLossOutput, EstimatorOrder, InnerEstimatorBank, NumericCounters,
    Surrogate,
};
use crate::data::IndexedDataset;
use crate::error::{Result, XriskError};
use crate::model::ScoringModel;
use crate::sampler::MiniBatch;

/// One-way pAUC through the KL-smoothed top-negative objective
/// `mean_i lambda * ln mean_j exp(l(h_j - h_i) / lambda)`.
///
/// For each batch positive `i` the fresh inner value is
/// `mean_{j in B-} exp(l_ij / lambda)`. Coefficients `p[i][j] = e_ij / u_i`
/// (rows follow `batch.positives`, columns `batch.negatives`) and
/// `loss = mean_ij p_ij * l_ij`.
pub fn pauc_dynamic_loss(
    model: &ScoringModel,
    w: &[f64],
    ds: &IndexedDataset,
    batch: &MiniBatch,
    surrogate: &Surrogate,
    lambda: f64,
    bank: &mut InnerEstimatorBank,
    order: EstimatorOrder,
) -> Result<DynamicLossOutput> {
    require_classes(batch, "pAUC loss")?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(XriskError::config_key("lambda", format!("lambda must be > 0, got {lambda}")));
    }
    let rows = batch.all_indices();
    let sr = score_rows(model, w, ds, &rows)?;
    let np = batch.positives.len();
    let nn = batch.negatives.len();
    let mut counters = NumericCounters::default();

    let mut sur = Array2::zeros((np, nn));
    let mut dsur = Array2::zeros((np, nn));
    let mut e = Array2::zeros((np, nn));
    let mut fresh = vec![0.0; np];
    for i in 0..np {
        for j in 0..nn {
            let (l, dl) = surrogate.eval(sr.s[np + j] - sr.s[i]);
            sur[[i, j]] = l;
            dsur[[i, j]] = dl;
            e[[i, j]] = counters.exp(l / lambda);
            fresh[i] += e[[i, j]];
        }
        fresh[i] /= nn as f64;
    }
    let (u, _) = bank.advance(&batch.positives, &fresh, None, order)?;

    let scale = 1.0 / (np * nn) as f64;
    let mut p = Array2::zeros((np, nn));
    let mut upstream = vec![0.0; np + nn];
    let mut loss = 0.0;
    let mut objective = 0.0;
    for i in 0..np {
        let ui = counters.floor(u[i]);
        objective += lambda * ui.ln();
        for j in 0..nn {
            let pij = e[[i, j]] / ui;
            p[[i, j]] = pij;
            loss += pij * sur[[i, j]];
            let g = scale * pij * dsur[[i, j]];
            upstream[np + j] += g;
            upstream[i] -= g;
        }
    }
    let grad_w = model.score_vjp(w, sr.x.view(), &upstream)?;
    Ok(DynamicLossOutput {
        loss: loss * scale,
        objective: objective / np as f64,
        p,
        grad_w,
        counters,
    })
}
