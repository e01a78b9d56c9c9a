use ndarray::Array2;

use super::{score_rows, DynamicLossOutput, EstimatorOrder, InnerEstimatorBank, NumericCounters, Surrogate};
use crate::data::IndexedDataset;
use crate::error::{Result, XriskError};
use crate::model::ScoringModel;
use crate::sampler::MiniBatch;

/// Average-precision surrogate `-(1/n+) sum_i g1_i / g2_i`, where for a
/// positive anchor `i`, `g1_i` sums `l(h_j - h_i)` over positives and `g2_i`
/// over all items (the anchor itself included in both).
///
/// The trackers follow `g1/n` and `g2/n`. Batch means are reweighted by the
/// dataset class priors, since controlled batches do not keep the dataset's
/// class proportions:
///
/// ```text
/// fresh1 = (n+/n) mean_{B+} l
/// fresh2 = (n+/n) mean_{B+} l + (n-/n) mean_{B-} l
/// ```
///
/// `p` has one row per batch positive with columns `[-1/u2, u1/u2^2]`, the
/// partial derivatives of `-u1/u2`. The loss is the first-order expansion
/// `mean_i -u1/u2 + p1 (fresh1 - u1) + p2 (fresh2 - u2)`.
pub fn ap_dynamic_loss(
    model: &ScoringModel,
    w: &[f64],
    ds: &IndexedDataset,
    batch: &MiniBatch,
    surrogate: &Surrogate,
    bank: &mut InnerEstimatorBank,
    order: EstimatorOrder,
) -> Result<DynamicLossOutput> {
    let np = batch.positives.len();
    let nn = batch.negatives.len();
    if np == 0 {
        return Err(XriskError::BatchComposition("AP loss needs at least one positive in the batch".into()));
    }
    if nn == 0 && ds.n_neg() > 0 {
        return Err(XriskError::BatchComposition(
            "AP loss needs negatives in the batch when the dataset has any".into(),
        ));
    }
    let n = ds.len() as f64;
    let pi_pos = ds.n_pos() as f64 / n;
    let pi_neg = ds.n_neg() as f64 / n;

    let rows = batch.all_indices();
    let sr = score_rows(model, w, ds, &rows)?;
    let mut counters = NumericCounters::default();

    let total = np + nn;
    let mut sur = Array2::zeros((np, total));
    let mut dsur = Array2::zeros((np, total));
    let mut fresh1 = vec![0.0; np];
    let mut fresh2 = vec![0.0; np];
    for i in 0..np {
        let mut mp = 0.0;
        let mut mn = 0.0;
        for j in 0..total {
            let (l, dl) = surrogate.eval(sr.s[j] - sr.s[i]);
            sur[[i, j]] = l;
            dsur[[i, j]] = dl;
            if j < np {
                mp += l;
            } else {
                mn += l;
            }
        }
        mp /= np as f64;
        if nn > 0 {
            mn /= nn as f64;
        }
        fresh1[i] = pi_pos * mp;
        fresh2[i] = pi_pos * mp + pi_neg * mn;
    }
    let (u1, u2) = bank.advance(&batch.positives, &fresh1, Some(&fresh2), order)?;
    let u2 = u2.expect("paired advance returns the paired tracker");

    let mut p = Array2::zeros((np, 2));
    let mut upstream = vec![0.0; total];
    let mut loss = 0.0;
    let mut objective = 0.0;
    let inv_np = 1.0 / np as f64;
    for i in 0..np {
        let v2 = counters.floor(u2[i]);
        let f = -u1[i] / v2;
        let c1 = -1.0 / v2;
        let c2 = u1[i] / (v2 * v2);
        p[[i, 0]] = c1;
        p[[i, 1]] = c2;
        objective += f;
        loss += f + c1 * (fresh1[i] - u1[i]) + c2 * (fresh2[i] - u2[i]);
        for j in 0..total {
            let weight = if j < np {
                (c1 + c2) * pi_pos / np as f64
            } else {
                c2 * pi_neg / nn as f64
            };
            let g = inv_np * weight * dsur[[i, j]];
            upstream[j] += g;
            upstream[i] -= g;
        }
    }
    let grad_w = model.score_vjp(w, sr.x.view(), &upstream)?;
    Ok(DynamicLossOutput {
        loss: loss * inv_np,
        objective: objective * inv_np,
        p,
        grad_w,
        counters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positives_only_dataset_pins_ratio() {
        let x = ndarray::array![[0.5, 1.0]];
        let ds = IndexedDataset::binary(x, vec![1.0]).unwrap();
        let m = ScoringModel::linear(2, 1).unwrap();
        let mut bank = InnerEstimatorBank::paired(1, 1.0, true).unwrap();
        let b = MiniBatch {
            positives: vec![0],
            negatives: vec![],
            queries: vec![],
        };
        let out = ap_dynamic_loss(&m, &[0.2, -0.7, 0.1], &ds, &b, &Surrogate::squared_hinge(1.0), &mut bank, EstimatorOrder::Updated).unwrap();
        assert!((out.loss + 1.0).abs() < 1e-15);
        assert!((out.objective + 1.0).abs() < 1e-15);
        assert!(out.grad_w.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn coefficient_signs() {
        let x = ndarray::array![[1.0], [0.2], [0.5], [-0.3]];
        let ds = IndexedDataset::binary(x, vec![1.0, 1.0, -1.0, -1.0]).unwrap();
        let m = ScoringModel::linear(1, 1).unwrap();
        let mut bank = InnerEstimatorBank::paired(4, 0.5, true).unwrap();
        let b = MiniBatch {
            positives: vec![0, 1],
            negatives: vec![2, 3],
            queries: vec![],
        };
        let out = ap_dynamic_loss(&m, &[0.8, 0.0], &ds, &b, &Surrogate::squared_hinge(1.0), &mut bank, EstimatorOrder::Updated).unwrap();
        for row in out.p.rows() {
            assert!(row[0] < 0.0);
            assert!(row[1] > 0.0);
        }
    }

    #[test]
    fn missing_negatives_is_an_error() {
        let x = ndarray::array![[1.0], [0.0]];
        let ds = IndexedDataset::binary(x, vec![1.0, -1.0]).unwrap();
        let m = ScoringModel::linear(1, 1).unwrap();
        let mut bank = InnerEstimatorBank::paired(2, 0.5, true).unwrap();
        let b = MiniBatch {
            positives: vec![0],
            negatives: vec![],
            queries: vec![],
        };
        assert!(ap_dynamic_loss(&m, &[1.0, 0.0], &ds, &b, &Surrogate::squared_hinge(1.0), &mut bank, EstimatorOrder::Updated).is_err());
    }
}
