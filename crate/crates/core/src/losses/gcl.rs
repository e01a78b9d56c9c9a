use ndarray::{Array2, Axis};

use super::{DynamicLossOutput, EstimatorOrder, InnerEstimatorBank, NumericCounters};
use crate::data::IndexedDataset;
use crate::error::{Result, XriskError};
use crate::model::ScoringModel;
use crate::sampler::MiniBatch;

/// Global contrastive loss over cosine similarities of two views.
///
/// The batch's `B` anchors give `2B` embeddings: view a of every anchor, then
/// view b. Row `r` has one positive (the other view of the same anchor) and
/// `2(B-1)` negatives (every other embedding except itself). The bank keeps
/// the view-a tracker in `u` and the view-b tracker in `u_aux`.
///
/// ```text
/// fresh_r = sum_{k neg} exp(s_rk / tau) / (2(B-1))
/// p_rk    = exp(s_rk / tau) / u_r                  (negatives only)
/// loss    = mean_r -(s_rr+ - sum_k p_rk s_rk / (2(B-1)))
/// ```
///
/// `p` is `2B x 2B` with zeros on the diagonal and at the positive pair.
pub fn gcl_dynamic_loss(
    model: &ScoringModel,
    w: &[f64],
    ds: &IndexedDataset,
    batch: &MiniBatch,
    tau: f64,
    bank: &mut InnerEstimatorBank,
    order: EstimatorOrder,
) -> Result<DynamicLossOutput> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(XriskError::config_key("tau", format!("tau must be > 0, got {tau}")));
    }
    let anchors = batch.all_indices();
    let b = anchors.len();
    if b < 2 {
        return Err(XriskError::BatchComposition(format!(
            "contrastive loss needs at least 2 anchors, got {b}"
        )));
    }
    let (va, vb) = ds
        .views()
        .ok_or_else(|| XriskError::BatchComposition("dataset has no contrastive views".into()))?;
    if let Some(&bad) = anchors.iter().find(|&&i| i >= ds.len()) {
        return Err(XriskError::IndexOutOfRange { index: bad, len: ds.len() });
    }
    let xa = va.select(Axis(0), &anchors);
    let xb = vb.select(Axis(0), &anchors);
    let x = ndarray::concatenate(Axis(0), &[xa.view(), xb.view()])
        .map_err(|e| XriskError::Shape(e.to_string()))?;
    let emb = model.forward(w, x.view())?;
    let m = 2 * b;
    let norms: Vec<f64> = emb.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    if norms.iter().any(|&n| n < 1e-12) {
        return Err(XriskError::NumericDomain("zero-length embedding".into()));
    }
    let mut z = emb.clone();
    for (mut row, &n) in z.rows_mut().into_iter().zip(&norms) {
        row /= n;
    }
    let sim = z.dot(&z.t());
    let partner = |r: usize| if r < b { r + b } else { r - b };
    let n_neg = (2 * (b - 1)) as f64;

    let mut counters = NumericCounters::default();
    let mut e = Array2::zeros((m, m));
    let mut fresh = vec![0.0; m];
    for r in 0..m {
        for k in 0..m {
            if k == r || k == partner(r) {
                continue;
            }
            e[[r, k]] = counters.exp(sim[[r, k]] / tau);
            fresh[r] += e[[r, k]];
        }
        fresh[r] /= n_neg;
    }
    let (ua, ub) = bank.advance(&anchors, &fresh[..b], Some(&fresh[b..]), order)?;
    let ub = ub.expect("paired advance returns the paired tracker");
    let u: Vec<f64> = ua.into_iter().chain(ub).collect();

    // dL/dS
    let mut p = Array2::zeros((m, m));
    let mut gs = Array2::<f64>::zeros((m, m));
    let inv_m = 1.0 / m as f64;
    let mut loss = 0.0;
    let mut objective = 0.0;
    for r in 0..m {
        let ur = counters.floor(u[r]);
        let pos = partner(r);
        let mut weighted = 0.0;
        for k in 0..m {
            if k == r || k == pos {
                continue;
            }
            let prk = e[[r, k]] / ur;
            p[[r, k]] = prk;
            weighted += prk * sim[[r, k]];
            gs[[r, k]] = inv_m * prk / n_neg;
        }
        gs[[r, pos]] = -inv_m;
        loss += -(sim[[r, pos]] - weighted / n_neg);
        objective += tau * ur.ln() - sim[[r, pos]];
    }
    // S = Z Z^T  =>  dL/dZ = (G + G^T) Z
    let gz = (&gs + &gs.t()).dot(&z);
    let mut upstream = Array2::zeros(emb.raw_dim());
    for r in 0..m {
        let zr = z.row(r);
        let g = gz.row(r);
        let proj = g.dot(&zr);
        let mut out = upstream.row_mut(r);
        out.assign(&((&g - &(&zr * proj)) / norms[r]));
    }
    let grad_w = model.vjp(w, x.view(), upstream.view())?;
    Ok(DynamicLossOutput {
        loss: loss * inv_m,
        objective: objective * inv_m,
        p,
        grad_w,
        counters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn views(n: usize) -> IndexedDataset {
        let a = Array2::from_shape_fn((n, 3), |(i, j)| ((i * 3 + j) as f64 * 0.7).sin());
        let va = a.mapv(|v| v + 0.05);
        let vb = a.mapv(|v| v - 0.03);
        IndexedDataset::contrastive(a, va, vb).unwrap()
    }

    fn batch(n: usize) -> MiniBatch {
        MiniBatch {
            positives: vec![],
            negatives: (0..n).collect(),
            queries: vec![],
        }
    }

    #[test]
    fn mask_has_two_b_minus_one_entries() {
        let ds = views(4);
        let m = ScoringModel::linear(3, 2).unwrap();
        let w = m.init_params(3);
        let mut bank = InnerEstimatorBank::paired(4, 0.9, true).unwrap();
        let out = gcl_dynamic_loss(&m, &w, &ds, &batch(4), 0.5, &mut bank, EstimatorOrder::Updated).unwrap();
        for row in out.p.rows() {
            assert_eq!(row.iter().filter(|&&v| v != 0.0).count(), 6);
        }
    }

    #[test]
    fn identical_embeddings_cancel() {
        let ds = views(3);
        let m = ScoringModel::linear(3, 2).unwrap();
        // zero weights, constant bias: every embedding equals the bias
        let w = vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.6, -0.8];
        let mut bank = InnerEstimatorBank::paired(3, 1.0, true).unwrap();
        let out = gcl_dynamic_loss(&m, &w, &ds, &batch(3), 0.2, &mut bank, EstimatorOrder::Updated).unwrap();
        assert!(out.loss.abs() < 1e-12);
        assert!(out.grad_w.norm() <= 1e-10);
        let first = out.p[[0, 1]];
        assert!(out.p.iter().all(|&v| v == 0.0 || (v - first).abs() < 1e-12));
    }

    #[test]
    fn tiny_batch_rejected() {
        let ds = views(3);
        let m = ScoringModel::linear(3, 2).unwrap();
        let mut bank = InnerEstimatorBank::paired(3, 1.0, true).unwrap();
        let err = gcl_dynamic_loss(&m, &m.init_params(0), &ds, &batch(1), 0.2, &mut bank, EstimatorOrder::Updated).unwrap_err();
        assert!(matches!(err, XriskError::BatchComposition(_)));
    }
}
