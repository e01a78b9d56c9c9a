//! Brute-force references for tests: exact inner functions, exact objectives
//! by full double loops, and central finite differences.
//!
//! Everything here is quadratic in the dataset size, so inputs are capped at
//! [`MAX_ROWS`] rows and [`MAX_INPUT_DIM`] features. Nothing in this module
//! shares arithmetic with the loss implementations beyond the model forward
//! pass.

use ndarray::Array2;
use rayon::prelude::*;

use crate::data::IndexedDataset;
use crate::error::{Result, XriskError};
use crate::losses::{MinMaxState, Surrogate, SurrogateKind};
use crate::model::{ParamVector, ScoringModel};

pub const MAX_ROWS: usize = 200;
pub const MAX_INPUT_DIM: usize = 64;
pub const DEFAULT_STEP: f64 = 1e-5;

/// Which full objective to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveSpec {
    /// `mean_{i in S+} lambda ln mean_{j in S-} exp(l(h_j - h_i) / lambda)`
    Pauc { surrogate: Surrogate, lambda: f64 },
    /// `-mean_{i in S+} g1_i / g2_i`, sums over `S+` and `S`
    Ap { surrogate: Surrogate },
    /// min-max AUC objective at fixed `(a, b, alpha)`
    Aucm { state: MinMaxState },
    /// `-mean_q (1/Z_q) sum_{i in S+_q} (2^y - 1) / log2(g_i + 1)`, `g_i = sum_{S_q} l`
    Ndcg { surrogate: Surrogate },
    /// `mean_q sum_i P(y_i) ln mean_{S_q} exp(h_j - h_i)`
    ListwiseCe,
    /// mean over all `2n` embeddings of `tau ln mean_neg exp(s / tau) - s_pos`
    Gcl { tau: f64 },
}

/// Exact inner values per anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerValues {
    pub anchors: Vec<usize>,
    pub g: Vec<f64>,
    /// Second inner function (AP: sum over all items) or view-b values (GCL).
    pub g_aux: Option<Vec<f64>>,
}

fn ell(s: &Surrogate, d: f64) -> f64 {
    let m = s.margin;
    match s.kind {
        SurrogateKind::SquaredHinge => {
            if m + d > 0.0 {
                (m + d) * (m + d)
            } else {
                0.0
            }
        }
        SurrogateKind::Hinge => {
            if m + d > 0.0 {
                m + d
            } else {
                0.0
            }
        }
        SurrogateKind::Logistic => (1.0 + d.exp()).ln(),
    }
}

pub fn check_size(model: &ScoringModel, ds: &IndexedDataset) -> Result<()> {
    if ds.len() > MAX_ROWS {
        return Err(XriskError::SizeGuard(format!("{} rows > {MAX_ROWS}", ds.len())));
    }
    if model.input_dim() > MAX_INPUT_DIM {
        return Err(XriskError::SizeGuard(format!(
            "input dim {} > {MAX_INPUT_DIM}",
            model.input_dim()
        )));
    }
    Ok(())
}

fn all_scores(model: &ScoringModel, w: &[f64], ds: &IndexedDataset) -> Result<Vec<f64>> {
    model.scores(w, ds.features().view())
}

fn positives(ds: &IndexedDataset) -> Vec<usize> {
    (0..ds.len()).filter(|&i| ds.targets()[i] > 0.0).collect()
}

fn cosine_matrix(model: &ScoringModel, w: &[f64], ds: &IndexedDataset) -> Result<(usize, Array2<f64>)> {
    let (va, vb) = ds
        .views()
        .ok_or_else(|| XriskError::BatchComposition("dataset has no contrastive views".into()))?;
    let ea = model.forward(w, va.view())?;
    let eb = model.forward(w, vb.view())?;
    let n = ds.len();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(2 * n);
    for e in [&ea, &eb] {
        for r in e.rows() {
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            rows.push(r.iter().map(|v| v / norm).collect());
        }
    }
    let m = 2 * n;
    let mut s = Array2::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            s[[i, j]] = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
        }
    }
    Ok((n, s))
}

fn gcl_inner(s: &Array2<f64>, n: usize, tau: f64, r: usize) -> f64 {
    let pos = (r + n) % (2 * n);
    let mut acc = 0.0;
    for k in 0..2 * n {
        if k != r && k != pos {
            acc += (s[[r, k]] / tau).exp();
        }
    }
    acc / (2 * (n - 1)) as f64
}

/// Exact inner function values `g_i(w)` for every anchor of the objective.
pub fn exact_inner_values(spec: &ObjectiveSpec, model: &ScoringModel, ds: &IndexedDataset, w: &[f64]) -> Result<InnerValues> {
    check_size(model, ds)?;
    let y = ds.targets();
    match *spec {
        ObjectiveSpec::Pauc { surrogate, lambda } => {
            let h = all_scores(model, w, ds)?;
            let pos = positives(ds);
            let neg: Vec<usize> = (0..ds.len()).filter(|&j| y[j] <= 0.0).collect();
            if pos.is_empty() || neg.is_empty() {
                return Err(XriskError::DegenerateLabels("pAUC needs both classes".into()));
            }
            let g = pos
                .iter()
                .map(|&i| {
                    neg.iter().map(|&j| (ell(&surrogate, h[j] - h[i]) / lambda).exp()).sum::<f64>() / neg.len() as f64
                })
                .collect();
            Ok(InnerValues { anchors: pos, g, g_aux: None })
        }
        ObjectiveSpec::Ap { surrogate } => {
            let h = all_scores(model, w, ds)?;
            let pos = positives(ds);
            let mut g1 = Vec::new();
            let mut g2 = Vec::new();
            for &i in &pos {
                let mut a = 0.0;
                let mut b = 0.0;
                for j in 0..ds.len() {
                    let l = ell(&surrogate, h[j] - h[i]);
                    b += l;
                    if y[j] > 0.0 {
                        a += l;
                    }
                }
                g1.push(a);
                g2.push(b);
            }
            Ok(InnerValues { anchors: pos, g: g1, g_aux: Some(g2) })
        }
        ObjectiveSpec::Ndcg { surrogate } => {
            let h = all_scores(model, w, ds)?;
            let mut anchors = Vec::new();
            let mut g = Vec::new();
            for q in ds.groups() {
                for &i in &q.positives {
                    anchors.push(i);
                    g.push(q.rows.iter().map(|&j| ell(&surrogate, h[j] - h[i])).sum());
                }
            }
            Ok(InnerValues { anchors, g, g_aux: None })
        }
        ObjectiveSpec::ListwiseCe => {
            let h = all_scores(model, w, ds)?;
            let mut anchors = Vec::new();
            let mut g = Vec::new();
            for q in ds.groups() {
                for &i in &q.positives {
                    anchors.push(i);
                    g.push(q.rows.iter().map(|&j| (h[j] - h[i]).exp()).sum::<f64>() / q.rows.len() as f64);
                }
            }
            Ok(InnerValues { anchors, g, g_aux: None })
        }
        ObjectiveSpec::Gcl { tau } => {
            let (n, s) = cosine_matrix(model, w, ds)?;
            let g = (0..n).map(|r| gcl_inner(&s, n, tau, r)).collect();
            let gb = (n..2 * n).map(|r| gcl_inner(&s, n, tau, r)).collect();
            Ok(InnerValues {
                anchors: (0..n).collect(),
                g,
                g_aux: Some(gb),
            })
        }
        ObjectiveSpec::Aucm { .. } => Err(XriskError::config("the min-max objective has no inner function")),
    }
}

fn dcg_ideal(rel: &[f64]) -> f64 {
    let mut r = rel.to_vec();
    r.sort_by(|a, b| b.partial_cmp(a).unwrap());
    r.iter()
        .enumerate()
        .map(|(k, y)| (2f64.powf(*y) - 1.0) / ((k + 2) as f64).log2())
        .sum()
}

/// Exact objective `F(w)`.
pub fn full_objective_value(spec: &ObjectiveSpec, model: &ScoringModel, ds: &IndexedDataset, w: &[f64]) -> Result<f64> {
    check_size(model, ds)?;
    match *spec {
        ObjectiveSpec::Pauc { lambda, .. } => {
            let iv = exact_inner_values(spec, model, ds, w)?;
            Ok(iv.g.iter().map(|g| lambda * g.ln()).sum::<f64>() / iv.g.len() as f64)
        }
        ObjectiveSpec::Ap { .. } => {
            let iv = exact_inner_values(spec, model, ds, w)?;
            let g2 = iv.g_aux.expect("AP has a second inner function");
            Ok(-iv.g.iter().zip(&g2).map(|(a, b)| a / b).sum::<f64>() / iv.g.len() as f64)
        }
        ObjectiveSpec::Aucm { state } => {
            let h = all_scores(model, w, ds)?;
            let y = ds.targets();
            let (mut sp, mut sn) = (Vec::new(), Vec::new());
            for (k, &v) in h.iter().enumerate() {
                if y[k] > 0.0 {
                    sp.push(v)
                } else {
                    sn.push(v)
                }
            }
            if sp.is_empty() || sn.is_empty() {
                return Err(XriskError::DegenerateLabels("AUCM needs both classes".into()));
            }
            let np = sp.len() as f64;
            let nn = sn.len() as f64;
            let vp: f64 = sp.iter().map(|v| (v - state.a) * (v - state.a)).sum::<f64>() / np;
            let vn: f64 = sn.iter().map(|v| (v - state.b) * (v - state.b)).sum::<f64>() / nn;
            let mp: f64 = sp.iter().sum::<f64>() / np;
            let mn: f64 = sn.iter().sum::<f64>() / nn;
            Ok(vp + vn + state.alpha * (mn - mp + state.margin) - state.alpha * state.alpha / 2.0)
        }
        ObjectiveSpec::Ndcg { surrogate } => {
            let h = all_scores(model, w, ds)?;
            let y = ds.targets();
            let mut total = 0.0;
            for q in ds.groups() {
                let rel: Vec<f64> = q.rows.iter().map(|&i| y[i]).collect();
                let z = dcg_ideal(&rel);
                for &i in &q.positives {
                    let g: f64 = q.rows.iter().map(|&j| ell(&surrogate, h[j] - h[i])).sum();
                    total -= (2f64.powf(y[i]) - 1.0) / (z * (g + 1.0).log2());
                }
            }
            Ok(total / ds.groups().len() as f64)
        }
        ObjectiveSpec::ListwiseCe => {
            let h = all_scores(model, w, ds)?;
            let y = ds.targets();
            let mut total = 0.0;
            for q in ds.groups() {
                let mass: f64 = q.rows.iter().map(|&i| y[i]).sum();
                for &i in &q.rows {
                    if y[i] == 0.0 {
                        continue;
                    }
                    let g = q.rows.iter().map(|&j| (h[j] - h[i]).exp()).sum::<f64>() / q.rows.len() as f64;
                    total += y[i] / mass * g.ln();
                }
            }
            Ok(total / ds.groups().len() as f64)
        }
        ObjectiveSpec::Gcl { tau } => {
            let (n, s) = cosine_matrix(model, w, ds)?;
            let mut total = 0.0;
            for r in 0..2 * n {
                let pos = (r + n) % (2 * n);
                total += tau * gcl_inner(&s, n, tau, r).ln() - s[[r, pos]];
            }
            Ok(total / (2 * n) as f64)
        }
    }
}

/// Central difference `(f(x + h e_k) - f(x - h e_k)) / 2h` for every `k`.
pub fn central_difference<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    (0..x.len())
        .into_par_iter()
        .map(|k| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            Ok((f(&xp)? - f(&xm)?) / (2.0 * h))
        })
        .collect()
}

/// Finite-difference gradient of [`full_objective_value`] in `w`.
pub fn finite_diff_grad(spec: &ObjectiveSpec, model: &ScoringModel, ds: &IndexedDataset, w: &[f64], h: f64) -> Result<ParamVector> {
    if !(1e-7..=1e-3).contains(&h.abs()) {
        return Err(XriskError::config_key("h", format!("step {h} outside [1e-7, 1e-3]")));
    }
    check_size(model, ds)?;
    let g = central_difference(|v| full_objective_value(spec, model, ds, v), w, h)?;
    Ok(ParamVector(g))
}

/// pAUC loss `mean_ij p_ij l_ij(w)` with the coefficients `p` held fixed
/// (rows follow the positives, columns the negatives, in index order).
pub fn pauc_frozen_loss(
    surrogate: &Surrogate,
    p: &Array2<f64>,
    model: &ScoringModel,
    ds: &IndexedDataset,
    w: &[f64],
) -> Result<f64> {
    check_size(model, ds)?;
    let h = all_scores(model, w, ds)?;
    let pos = positives(ds);
    let neg: Vec<usize> = (0..ds.len()).filter(|&j| ds.targets()[j] <= 0.0).collect();
    if p.dim() != (pos.len(), neg.len()) {
        return Err(XriskError::Shape(format!("p is {:?}, expected ({}, {})", p.dim(), pos.len(), neg.len())));
    }
    let mut acc = 0.0;
    for (a, &i) in pos.iter().enumerate() {
        for (b, &j) in neg.iter().enumerate() {
            acc += p[[a, b]] * ell(surrogate, h[j] - h[i]);
        }
    }
    Ok(acc / (pos.len() * neg.len()) as f64)
}

/// The same pAUC loss with the coefficients recomputed from `w`
/// (`p_ij = e_ij(w) / mean_j e_ij(w)`), i.e. without detaching them.
pub fn pauc_unfrozen_loss(surrogate: &Surrogate, lambda: f64, model: &ScoringModel, ds: &IndexedDataset, w: &[f64]) -> Result<f64> {
    check_size(model, ds)?;
    let h = all_scores(model, w, ds)?;
    let pos = positives(ds);
    let neg: Vec<usize> = (0..ds.len()).filter(|&j| ds.targets()[j] <= 0.0).collect();
    let mut acc = 0.0;
    for &i in &pos {
        let l: Vec<f64> = neg.iter().map(|&j| ell(surrogate, h[j] - h[i])).collect();
        let e: Vec<f64> = l.iter().map(|v| (v / lambda).exp()).collect();
        let u = e.iter().sum::<f64>() / e.len() as f64;
        acc += l.iter().zip(&e).map(|(lv, ev)| ev / u * lv).sum::<f64>();
    }
    Ok(acc / (pos.len() * neg.len()) as f64)
}
