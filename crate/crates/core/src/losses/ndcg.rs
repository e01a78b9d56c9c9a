use std::f64::consts::LN_2;

use ndarray::Array2;

use super::{score_rows, DynamicLossOutput, EstimatorOrder, InnerEstimatorBank, NumericCounters, Surrogate};
use crate::data::{IndexedDataset, QueryGroup};
use crate::error::{Result, XriskError};
use crate::metrics::ideal_dcg;
use crate::model::ScoringModel;
use crate::sampler::MiniBatch;

/// Row layout of a query-form batch: each query's sampled positives, then its
/// sampled negatives, queries in batch order.
struct QueryLayout<'a> {
    group: &'a QueryGroup,
    /// Offset of the query's first row in the stacked batch.
    start: usize,
    n_pos: usize,
    len: usize,
}

fn layout<'a>(ds: &'a IndexedDataset, batch: &MiniBatch) -> Result<(Vec<QueryLayout<'a>>, Vec<usize>)> {
    if batch.queries.is_empty() {
        return Err(XriskError::BatchComposition(
            "ranking losses need a query-form batch".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut out = Vec::with_capacity(batch.queries.len());
    for qb in &batch.queries {
        let group = ds.group_of(qb.query).ok_or_else(|| {
            XriskError::BatchComposition(format!("query {} is not in the dataset", qb.query))
        })?;
        if qb.positives.is_empty() {
            return Err(XriskError::BatchComposition(format!(
                "query {} contributed no relevant item",
                qb.query
            )));
        }
        out.push(QueryLayout {
            group,
            start: rows.len(),
            n_pos: qb.positives.len(),
            len: qb.positives.len() + qb.negatives.len(),
        });
        rows.extend_from_slice(&qb.positives);
        rows.extend_from_slice(&qb.negatives);
    }
    Ok((out, rows))
}

/// Surrogate NDCG, `-(1/|Q|) sum_q (1/Z_q) sum_{i relevant} (2^y_i - 1) / log2(g_i + 1)`
/// with the rank surrogate `g_i = sum_{j in S_q} l(h_j - h_i)` (self included).
///
/// The fresh rank estimate is `N_q * mean_{j in B_q} l(h_j - h_i)` over every
/// item sampled for the query. Each query's sum over relevant items is
/// estimated by rescaling the sampled positives by `N+_q / |B+_q|`.
/// `p` is a column with one entry `f'(u_i)` per sampled positive, in batch
/// row order.
pub fn ndcg_dynamic_loss(
    model: &ScoringModel,
    w: &[f64],
    ds: &IndexedDataset,
    batch: &MiniBatch,
    surrogate: &Surrogate,
    bank: &mut InnerEstimatorBank,
    order: EstimatorOrder,
) -> Result<DynamicLossOutput> {
    let (queries, rows) = layout(ds, batch)?;
    let sr = score_rows(model, w, ds, &rows)?;
    let y = ds.targets();
    let mut counters = NumericCounters::default();

    let mut anchors = Vec::new();
    let mut fresh = Vec::new();
    let mut dl: Vec<Vec<f64>> = Vec::new();
    for q in &queries {
        let nq = q.group.rows.len() as f64;
        for a in 0..q.n_pos {
            let ia = q.start + a;
            let mut sum = 0.0;
            let mut d = Vec::with_capacity(q.len);
            for j in q.start..q.start + q.len {
                let (l, dv) = surrogate.eval(sr.s[j] - sr.s[ia]);
                sum += l;
                d.push(dv);
            }
            anchors.push(rows[ia]);
            fresh.push(nq * sum / q.len as f64);
            dl.push(d);
        }
    }
    let (u, _) = bank.advance(&anchors, &fresh, None, order)?;

    let mut p = Array2::zeros((anchors.len(), 1));
    let mut upstream = vec![0.0; rows.len()];
    let mut loss = 0.0;
    let mut objective = 0.0;
    let inv_q = 1.0 / queries.len() as f64;
    let mut k = 0;
    for q in &queries {
        let rel: Vec<f64> = q.group.rows.iter().map(|&i| y[i]).collect();
        let z = ideal_dcg(&rel, rel.len());
        if z <= 0.0 {
            return Err(XriskError::DegenerateLabels(format!(
                "query {} has zero ideal DCG",
                q.group.id
            )));
        }
        let nq = q.group.rows.len() as f64;
        let weight = inv_q * q.group.positives.len() as f64 / q.n_pos as f64;
        for a in 0..q.n_pos {
            let ia = q.start + a;
            let gain = 2f64.powf(y[rows[ia]]) - 1.0;
            let ui = counters.floor(u[k]);
            let log = (ui + 1.0).log2();
            let f = -gain / (z * log);
            let c = gain / (z * (ui + 1.0) * LN_2 * log * log);
            p[[k, 0]] = c;
            objective += weight * f;
            loss += weight * (f + c * (fresh[k] - u[k]));
            let scale = weight * c * nq / q.len as f64;
            for (jj, &dv) in dl[k].iter().enumerate() {
                let g = scale * dv;
                upstream[q.start + jj] += g;
                upstream[ia] -= g;
            }
            k += 1;
        }
    }
    let grad_w = model.score_vjp(w, sr.x.view(), &upstream)?;
    Ok(DynamicLossOutput {
        loss,
        objective,
        p,
        grad_w,
        counters,
    })
}

/// Top-one probabilities `P(y_i) = y_i / sum_{j in S_q} y_j` over a query.
pub fn listwise_weights(relevances: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = relevances.iter().sum();
    if !(total > 0.0) {
        return Err(XriskError::DegenerateLabels(
            "listwise weights need a positive relevance total".into(),
        ));
    }
    Ok(relevances.iter().map(|y| y / total).collect())
}

/// Listwise cross-entropy `(1/|Q|) sum_q sum_i P(y_i) ln mean_{j in S_q} exp(h_j - h_i)`.
///
/// Items with zero relevance carry zero weight, so only sampled positives act
/// as anchors; their per-query sum is rescaled by `N+_q / |B+_q|`. Score gaps
/// are clipped before exponentiation. `p` holds `P(y_i) / u_i` per sampled
/// positive.
pub fn listwise_ce_dynamic_loss(
    model: &ScoringModel,
    w: &[f64],
    ds: &IndexedDataset,
    batch: &MiniBatch,
    bank: &mut InnerEstimatorBank,
    order: EstimatorOrder,
) -> Result<DynamicLossOutput> {
    let (queries, rows) = layout(ds, batch)?;
    let sr = score_rows(model, w, ds, &rows)?;
    let y = ds.targets();
    let mut counters = NumericCounters::default();

    let mut anchors = Vec::new();
    let mut fresh = Vec::new();
    let mut ex: Vec<Vec<f64>> = Vec::new();
    for q in &queries {
        for a in 0..q.n_pos {
            let ia = q.start + a;
            let e: Vec<f64> = (q.start..q.start + q.len)
                .map(|j| counters.exp(sr.s[j] - sr.s[ia]))
                .collect();
            anchors.push(rows[ia]);
            fresh.push(e.iter().sum::<f64>() / q.len as f64);
            ex.push(e);
        }
    }
    let (u, _) = bank.advance(&anchors, &fresh, None, order)?;

    let mut p = Array2::zeros((anchors.len(), 1));
    let mut upstream = vec![0.0; rows.len()];
    let mut loss = 0.0;
    let mut objective = 0.0;
    let inv_q = 1.0 / queries.len() as f64;
    let mut k = 0;
    for q in &queries {
        let total: f64 = q.group.rows.iter().map(|&i| y[i]).sum();
        if !(total > 0.0) {
            return Err(XriskError::DegenerateLabels(format!(
                "query {} has no relevance mass",
                q.group.id
            )));
        }
        let weight = inv_q * q.group.positives.len() as f64 / q.n_pos as f64;
        for a in 0..q.n_pos {
            let ia = q.start + a;
            let prob = y[rows[ia]] / total;
            let ui = counters.floor(u[k]);
            let c = prob / ui;
            p[[k, 0]] = c;
            objective += weight * prob * ui.ln();
            loss += weight * (prob * ui.ln() + c * (fresh[k] - u[k]));
            let scale = weight * c / q.len as f64;
            for (jj, &e) in ex[k].iter().enumerate() {
                let g = scale * e;
                upstream[q.start + jj] += g;
                upstream[ia] -= g;
            }
            k += 1;
        }
    }
    let grad_w = model.score_vjp(w, sr.x.view(), &upstream)?;
    Ok(DynamicLossOutput {
        loss,
        objective,
        p,
        grad_w,
        counters,
    })
}
