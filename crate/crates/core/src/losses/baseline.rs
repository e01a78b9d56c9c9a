use super::score_rows;
use crate::data::IndexedDataset;
use crate::error::{Result, XriskError};
use crate::model::{ParamVector, ScoringModel};
use crate::sampler::MiniBatch;

/// Loss without per-anchor state.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticLossOutput {
    pub loss: f64,
    pub grad_w: ParamVector,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^{-m})`, computed without overflow.
fn softplus_neg(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

fn signed_targets(ds: &IndexedDataset, rows: &[usize]) -> Vec<f64> {
    rows.iter()
        .map(|&i| if ds.is_positive(i) { 1.0 } else { -1.0 })
        .collect()
}

/// Binary cross-entropy on logits, `mean ln(1 + exp(-y h))` with `y = +-1`.
pub fn ce_loss(model: &ScoringModel, w: &[f64], ds: &IndexedDataset, batch: &MiniBatch) -> Result<StaticLossOutput> {
    let rows = batch.all_indices();
    if rows.is_empty() {
        return Err(XriskError::BatchComposition("empty batch".into()));
    }
    let sr = score_rows(model, w, ds, &rows)?;
    let y = signed_targets(ds, &rows);
    let n = rows.len() as f64;
    let mut loss = 0.0;
    let upstream: Vec<f64> = sr
        .s
        .iter()
        .zip(&y)
        .map(|(&h, &yi)| {
            let m = yi * h;
            loss += softplus_neg(m);
            -yi * sigmoid(-m) / n
        })
        .collect();
    Ok(StaticLossOutput {
        loss: loss / n,
        grad_w: model.score_vjp(w, sr.x.view(), &upstream)?,
    })
}

/// Focal loss `mean -alpha_hat (1 - p_t)^gamma_hat ln p_t`, `p_t = sigmoid(y h)`.
pub fn focal_loss(
    model: &ScoringModel,
    w: &[f64],
    ds: &IndexedDataset,
    batch: &MiniBatch,
    alpha_hat: f64,
    gamma_hat: f64,
) -> Result<StaticLossOutput> {
    let rows = batch.all_indices();
    if rows.is_empty() {
        return Err(XriskError::BatchComposition("empty batch".into()));
    }
    let sr = score_rows(model, w, ds, &rows)?;
    let y = signed_targets(ds, &rows);
    let n = rows.len() as f64;
    let mut loss = 0.0;
    let upstream: Vec<f64> = sr
        .s
        .iter()
        .zip(&y)
        .map(|(&h, &yi)| {
            let m = yi * h;
            let pt = sigmoid(m);
            let q = sigmoid(-m);
            let log_pt = -softplus_neg(m);
            loss += -alpha_hat * q.powf(gamma_hat) * log_pt;
            alpha_hat * yi * (gamma_hat * pt * q.powf(gamma_hat) * log_pt - q.powf(gamma_hat + 1.0)) / n
        })
        .collect();
    Ok(StaticLossOutput {
        loss: loss / n,
        grad_w: model.score_vjp(w, sr.x.view(), &upstream)?,
    })
}
