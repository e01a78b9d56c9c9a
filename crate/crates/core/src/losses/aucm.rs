use super::{require_classes, score_rows};
use crate::data::IndexedDataset;
use crate::error::{Result, XriskError};
use crate::model::{ParamVector, ScoringModel};
use crate::sampler::MiniBatch;
use crate::state::StateMap;

/// Auxiliary variables of the min-max AUC margin objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMaxState {
    pub a: f64,
    pub b: f64,
    /// Dual variable, kept in `[0, inf)`.
    pub alpha: f64,
    /// Margin `c > 0`.
    pub margin: f64,
}

impl MinMaxState {
    pub fn new(margin: f64) -> Result<Self> {
        if !(margin.is_finite() && margin > 0.0) {
            return Err(XriskError::config_key("margin", format!("margin must be > 0, got {margin}")));
        }
        Ok(Self {
            a: 0.0,
            b: 0.0,
            alpha: 0.0,
            margin,
        })
    }

    pub fn save(&self) -> StateMap {
        let mut s = StateMap::new();
        s.put_f64("a", self.a);
        s.put_f64("b", self.b);
        s.put_f64("alpha", self.alpha);
        s.put_f64("margin", self.margin);
        s
    }

    pub fn load(s: &StateMap) -> Result<Self> {
        Ok(Self {
            a: s.get("a")?,
            b: s.get("b")?,
            alpha: s.get("alpha")?,
            margin: s.get("margin")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AucmOutput {
    pub loss: f64,
    pub grad_w: ParamVector,
    pub grad_a: f64,
    pub grad_b: f64,
    /// Partial derivative in `alpha` (the ascent direction).
    pub grad_alpha: f64,
}

/// Batch estimate of
/// `mean_P (h - a)^2 + mean_N (h - b)^2 + alpha (mean_N h - mean_P h + c) - alpha^2 / 2`
/// and its partial derivatives.
pub fn aucm_loss_and_grads(
    model: &ScoringModel,
    w: &[f64],
    ds: &IndexedDataset,
    batch: &MiniBatch,
    mm: &MinMaxState,
) -> Result<AucmOutput> {
    require_classes(batch, "AUCM loss")?;
    let rows = batch.all_indices();
    let sr = score_rows(model, w, ds, &rows)?;
    let np = batch.positives.len();
    let nn = batch.negatives.len();
    let (sp, sn) = sr.s.split_at(np);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mean_p = mean(sp);
    let mean_n = mean(sn);
    let var_p = sp.iter().map(|h| (h - mm.a).powi(2)).sum::<f64>() / np as f64;
    let var_n = sn.iter().map(|h| (h - mm.b).powi(2)).sum::<f64>() / nn as f64;
    let gap = mean_n - mean_p + mm.margin;
    let loss = var_p + var_n + mm.alpha * gap - 0.5 * mm.alpha * mm.alpha;

    let mut upstream = Vec::with_capacity(np + nn);
    upstream.extend(sp.iter().map(|h| (2.0 * (h - mm.a) - mm.alpha) / np as f64));
    upstream.extend(sn.iter().map(|h| (2.0 * (h - mm.b) + mm.alpha) / nn as f64));
    let grad_w = model.score_vjp(w, sr.x.view(), &upstream)?;
    Ok(AucmOutput {
        loss,
        grad_w,
        grad_a: -2.0 * (mean_p - mm.a),
        grad_b: -2.0 * (mean_n - mm.b),
        grad_alpha: gap - mm.alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (ScoringModel, IndexedDataset, MiniBatch) {
        let x = ndarray::array![[1.0], [2.0], [-1.0], [0.0], [-2.0]];
        let ds = IndexedDataset::binary(x, vec![1.0, 1.0, -1.0, -1.0, -1.0]).unwrap();
        let b = MiniBatch {
            positives: vec![0, 1],
            negatives: vec![2, 3, 4],
            queries: vec![],
        };
        (ScoringModel::linear(1, 1).unwrap(), ds, b)
    }

    #[test]
    fn stationary_a_b() {
        let (m, ds, b) = toy();
        let mm = MinMaxState {
            a: 1.5,
            b: -1.0,
            alpha: 0.3,
            margin: 1.0,
        };
        let out = aucm_loss_and_grads(&m, &[1.0, 0.0], &ds, &b, &mm).unwrap();
        assert_eq!(out.grad_a, 0.0);
        assert_eq!(out.grad_b, 0.0);
    }

    #[test]
    fn alpha_gradient_closed_form() {
        let (m, ds, b) = toy();
        let mm = MinMaxState::new(0.5).unwrap();
        // mean_N = -1, mean_P = 1.5 with w = [1, 0]
        let out = aucm_loss_and_grads(&m, &[1.0, 0.0], &ds, &b, &mm).unwrap();
        assert!((out.grad_alpha - (-1.0 - 1.5 + 0.5)).abs() < 1e-15);
        // inverted scores: gap > c pushes alpha up
        let out = aucm_loss_and_grads(&m, &[-1.0, 0.0], &ds, &b, &mm).unwrap();
        assert!(out.grad_alpha > 0.0);
    }

    #[test]
    fn single_class_rejected() {
        let (m, ds, mut b) = toy();
        b.negatives.clear();
        let err = aucm_loss_and_grads(&m, &[1.0, 0.0], &ds, &b, &MinMaxState::new(1.0).unwrap()).unwrap_err();
        assert!(matches!(err, XriskError::BatchComposition(_)));
    }

    #[test]
    fn state_round_trip() {
        let mm = MinMaxState {
            a: 0.1,
            b: -1.0 / 3.0,
            alpha: 2.5,
            margin: 1.0,
        };
        let s = StateMap::parse(&mm.save().to_text()).unwrap();
        assert_eq!(MinMaxState::load(&s).unwrap(), mm);
    }
}
