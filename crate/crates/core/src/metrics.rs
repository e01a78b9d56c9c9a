//! Exact ranking metrics: AUROC, average precision, one-way partial AUC and NDCG@k.
//!
//! Tie conventions:
//! - AUROC / pAUC count a tied positive-negative pair as one half.
//! - AP uses `>=` when counting items ranked at or above a positive, so a tie
//!   counts against the positive.
//! - NDCG and the pAUC negative selection break score ties by ascending index.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Result, XriskError};

/// Model scores paired with targets.
///
/// For the binary metrics every label must be `+1` or `-1`. For NDCG the
/// labels are relevance grades (finite, `>= 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScores {
    scores: Vec<f64>,
    labels: Vec<f64>,
}

impl LabeledScores {
    pub fn new(scores: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(XriskError::Shape(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.iter().chain(labels.iter()).any(|v| !v.is_finite()) {
            return Err(XriskError::NumericDomain(
                "scores and labels must be finite".into(),
            ));
        }
        Ok(Self { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Splits the scores by class, checking every label is `+1` or `-1`.
    fn split_binary(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (&s, &y) in self.scores.iter().zip(&self.labels) {
            if y == 1.0 {
                pos.push(s);
            } else if y == -1.0 {
                neg.push(s);
            } else {
                return Err(XriskError::DegenerateLabels(format!(
                    "binary label must be +1 or -1, got {y}"
                )));
            }
        }
        Ok((pos, neg))
    }
}

/// Counts correctly ordered (positive, negative) pairs in units of one half:
/// a strictly ordered pair adds 2, a tie adds 1.
fn ordered_pair_half_units(pos: &[f64], neg: &[f64]) -> u64 {
    let mut neg_sorted = neg.to_vec();
    neg_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    pos.iter()
        .map(|&s| {
            let below = neg_sorted.partition_point(|&v| v < s);
            let below_or_equal = neg_sorted.partition_point(|&v| v <= s);
            2 * below as u64 + (below_or_equal - below) as u64
        })
        .sum()
}

/// Area under the ROC curve with ties counted as one half.
pub fn auroc(ls: &LabeledScores) -> Result<f64> {
    let (pos, neg) = ls.split_binary()?;
    if pos.is_empty() || neg.is_empty() {
        return Err(XriskError::DegenerateLabels(
            "auroc needs at least one positive and one negative".into(),
        ));
    }
    let half_units = ordered_pair_half_units(&pos, &neg);
    Ok(half_units as f64 / (2.0 * pos.len() as f64 * neg.len() as f64))
}

/// Average precision: mean over positives of
/// `#{positives scored >= s_i} / #{items scored >= s_i}`.
pub fn average_precision(ls: &LabeledScores) -> Result<f64> {
    ls.split_binary()?;
    let n = ls.len();
    let n_pos = ls.labels.iter().filter(|&&y| y == 1.0).count();
    if n_pos == 0 {
        return Err(XriskError::DegenerateLabels(
            "average precision needs at least one positive".into(),
        ));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        ls.scores[b]
            .partial_cmp(&ls.scores[a])
            .unwrap_or(Ordering::Equal)
    });

    // Each tie group sees the whole group as ranked at or above itself.
    let mut ratio = vec![0.0; n];
    let mut pos_ge = 0usize;
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end < n && ls.scores[order[end]] == ls.scores[order[start]] {
            end += 1;
        }
        pos_ge += order[start..end]
            .iter()
            .filter(|&&i| ls.labels[i] == 1.0)
            .count();
        for &i in &order[start..end] {
            ratio[i] = pos_ge as f64 / end as f64;
        }
        start = end;
    }

    let total: f64 = (0..n)
        .filter(|&i| ls.labels[i] == 1.0)
        .map(|i| ratio[i])
        .sum();
    Ok(total / n_pos as f64)
}

/// Number of negatives kept by a one-way pAUC with FPR restricted to `beta`.
///
/// A relative slack of 1e-9 absorbs representation error in `n_neg * beta`
/// (e.g. `0.29 * 100`).
pub fn pauc_negative_count(n_neg: usize, beta: f64) -> Result<usize> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(XriskError::config_key(
            "beta",
            format!("beta must lie in (0, 1], got {beta}"),
        ));
    }
    let raw = n_neg as f64 * beta;
    let k = (raw + raw.abs() * 1e-9).floor() as usize;
    if k == 0 {
        return Err(XriskError::BetaTooSmall { n_neg, beta });
    }
    Ok(k.min(n_neg))
}

/// One-way partial AUC with FPR restricted to `beta`: the normalized pair count
/// against the `floor(n_neg * beta)` highest-scoring negatives.
pub fn partial_auc(ls: &LabeledScores, beta: f64) -> Result<f64> {
    let (pos, _) = ls.split_binary()?;
    let mut neg_idx: Vec<usize> = (0..ls.len()).filter(|&i| ls.labels[i] == -1.0).collect();
    if pos.is_empty() || neg_idx.is_empty() {
        return Err(XriskError::DegenerateLabels(
            "partial auc needs at least one positive and one negative".into(),
        ));
    }
    let k = pauc_negative_count(neg_idx.len(), beta)?;
    // stable sort keeps ascending index order among equal scores
    neg_idx.sort_by(|&a, &b| {
        ls.scores[b]
            .partial_cmp(&ls.scores[a])
            .unwrap_or(Ordering::Equal)
    });
    let top: Vec<f64> = neg_idx[..k].iter().map(|&i| ls.scores[i]).collect();
    let half_units = ordered_pair_half_units(&pos, &top);
    Ok(half_units as f64 / (2.0 * pos.len() as f64 * k as f64))
}

fn gain(grade: f64) -> f64 {
    grade.exp2() - 1.0
}

fn discount(rank: usize) -> f64 {
    ((rank + 1) as f64).log2()
}

/// DCG of a perfect ordering over the `k` largest grades.
pub fn ideal_dcg(relevances: &[f64], k: usize) -> f64 {
    let mut sorted = relevances.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    sorted
        .iter()
        .take(k)
        .enumerate()
        .map(|(r, &y)| gain(y) / discount(r + 1))
        .sum()
}

/// NDCG@k with gain `2^y - 1` and discount `log2(rank + 1)`.
pub fn ndcg_at_k(relevances: &[f64], scores: &[f64], k: usize) -> Result<f64> {
    if relevances.len() != scores.len() {
        return Err(XriskError::Shape(format!(
            "{} relevances but {} scores",
            relevances.len(),
            scores.len()
        )));
    }
    if k == 0 {
        return Err(XriskError::config_key("k", "ndcg cutoff must be >= 1"));
    }
    if relevances.iter().any(|&y| !y.is_finite() || y < 0.0) {
        return Err(XriskError::DegenerateLabels(
            "relevance grades must be finite and >= 0".into(),
        ));
    }
    if relevances.iter().all(|&y| y == 0.0) {
        return Err(XriskError::DegenerateLabels(
            "ndcg needs at least one nonzero relevance".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    let dcg: f64 = order
        .iter()
        .take(k)
        .enumerate()
        .map(|(r, &i)| gain(relevances[i]) / discount(r + 1))
        .sum();
    Ok(dcg / ideal_dcg(relevances, k))
}

/// Mean NDCG@k over queries; queries without any relevant item are skipped.
pub fn mean_ndcg_at_k(
    query_of: &[usize],
    relevances: &[f64],
    scores: &[f64],
    k: usize,
) -> Result<f64> {
    if query_of.len() != scores.len() || relevances.len() != scores.len() {
        return Err(XriskError::Shape(
            "query ids, relevances and scores must have equal lengths".into(),
        ));
    }
    let mut groups: std::collections::BTreeMap<usize, (Vec<f64>, Vec<f64>)> = Default::default();
    for ((&q, &y), &s) in query_of.iter().zip(relevances).zip(scores) {
        let e = groups.entry(q).or_default();
        e.0.push(y);
        e.1.push(s);
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    for (rel, sc) in groups.values() {
        if rel.iter().all(|&y| y == 0.0) {
            continue;
        }
        total += ndcg_at_k(rel, sc, k)?;
        counted += 1;
    }
    if counted == 0 {
        return Err(XriskError::DegenerateLabels(
            "no query has a relevant item".into(),
        ));
    }
    Ok(total / counted as f64)
}

/// A metric request understood by [`evaluate_all`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricSpec {
    Auroc,
    Ap,
    Pauc(f64),
    Ndcg(usize),
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricSpec::Auroc => write!(f, "auroc"),
            MetricSpec::Ap => write!(f, "ap"),
            MetricSpec::Pauc(beta) => write!(f, "pauc:{beta}"),
            MetricSpec::Ndcg(k) => write!(f, "ndcg:{k}"),
        }
    }
}

impl FromStr for MetricSpec {
    type Err = XriskError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let bad = || XriskError::config_key("metrics", format!("unknown metric `{s}`"));
        match (name, arg) {
            ("auroc" | "auc", None) => Ok(MetricSpec::Auroc),
            ("ap", None) => Ok(MetricSpec::Ap),
            ("pauc", None) => Ok(MetricSpec::Pauc(0.3)),
            ("pauc", Some(a)) => {
                let beta: f64 = a.parse().map_err(|_| bad())?;
                if !(beta > 0.0 && beta <= 1.0) {
                    return Err(XriskError::config_key(
                        "metrics",
                        format!("pauc beta must lie in (0, 1], got {beta}"),
                    ));
                }
                Ok(MetricSpec::Pauc(beta))
            }
            ("ndcg", Some(a)) => {
                let k: usize = a.parse().map_err(|_| bad())?;
                if k == 0 {
                    return Err(XriskError::config_key("metrics", "ndcg cutoff must be >= 1"));
                }
                Ok(MetricSpec::Ndcg(k))
            }
            _ => Err(bad()),
        }
    }
}

/// Parses a comma-separated metric list such as `auroc,ap,pauc:0.3,ndcg:5`.
pub fn parse_metric_list(s: &str) -> Result<Vec<MetricSpec>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Evaluates each requested metric, preserving request order.
///
/// NDCG treats the labels as relevance grades, with negative labels mapped to
/// grade 0 so binary `+1/-1` data can be ranked as a single list.
pub fn evaluate_all(ls: &LabeledScores, which: &[MetricSpec]) -> Result<Vec<(String, f64)>> {
    which
        .iter()
        .map(|m| {
            let v = match *m {
                MetricSpec::Auroc => auroc(ls)?,
                MetricSpec::Ap => average_precision(ls)?,
                MetricSpec::Pauc(beta) => partial_auc(ls, beta)?,
                MetricSpec::Ndcg(k) => {
                    let grades: Vec<f64> = ls.labels.iter().map(|&y| y.max(0.0)).collect();
                    ndcg_at_k(&grades, &ls.scores, k)?
                }
            };
            Ok((m.to_string(), v))
        })
        .collect()
}

/// Name-based entry point: unknown names surface as configuration errors.
pub fn evaluate_named(ls: &LabeledScores, names: &[&str]) -> Result<Vec<(String, f64)>> {
    let specs = names
        .iter()
        .map(|n| n.parse())
        .collect::<Result<Vec<MetricSpec>>>()?;
    evaluate_all(ls, &specs)
}
