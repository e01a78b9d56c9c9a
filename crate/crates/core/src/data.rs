//! Indexed datasets, synthetic generators and CSV ingestion.
//!
//! Every row keeps its position as a stable index for the lifetime of the
//! dataset; estimator banks key on it.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, XriskError};
use crate::model::format_f64;

/// Items of one query, split by relevance.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub id: usize,
    pub rows: Vec<usize>,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedDataset {
    features: Array2<f64>,
    targets: Vec<f64>,
    query_of: Option<Vec<usize>>,
    views: Option<(Array2<f64>, Array2<f64>)>,
    groups: Vec<QueryGroup>,
    n_pos: usize,
    n_neg: usize,
}

impl IndexedDataset {
    /// Binary data: every target must be `+1` or `-1`.
    pub fn binary(features: Array2<f64>, targets: Vec<f64>) -> Result<Self> {
        if let Some(bad) = targets.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(XriskError::DegenerateLabels(format!(
                "binary target must be +1 or -1, got {bad}"
            )));
        }
        Self::build(features, targets, None, None)
    }

    /// Learning-to-rank data: targets are relevance grades, grouped by query id.
    pub fn ltr(features: Array2<f64>, relevance: Vec<f64>, query_of: Vec<usize>) -> Result<Self> {
        if relevance.iter().any(|&y| !y.is_finite() || y < 0.0) {
            return Err(XriskError::DegenerateLabels(
                "relevance grades must be finite and >= 0".into(),
            ));
        }
        if query_of.len() != relevance.len() {
            return Err(XriskError::Shape(format!(
                "{} query ids for {} rows",
                query_of.len(),
                relevance.len()
            )));
        }
        Self::build(features, relevance, Some(query_of), None)
    }

    /// Contrastive data: anchors plus two augmented views per anchor.
    pub fn contrastive(anchors: Array2<f64>, view_a: Array2<f64>, view_b: Array2<f64>) -> Result<Self> {
        if view_a.dim() != anchors.dim() || view_b.dim() != anchors.dim() {
            return Err(XriskError::Shape("views must match the anchor matrix".into()));
        }
        let n = anchors.nrows();
        Self::build(anchors, vec![0.0; n], None, Some((view_a, view_b)))
    }

    fn build(
        features: Array2<f64>,
        targets: Vec<f64>,
        query_of: Option<Vec<usize>>,
        views: Option<(Array2<f64>, Array2<f64>)>,
    ) -> Result<Self> {
        if features.nrows() != targets.len() {
            return Err(XriskError::Shape(format!(
                "{} feature rows for {} targets",
                features.nrows(),
                targets.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(XriskError::NumericDomain("features must be finite".into()));
        }
        let n_pos = targets.iter().filter(|&&y| y > 0.0).count();
        let n_neg = targets.len() - n_pos;
        let mut groups = Vec::new();
        if let Some(q) = &query_of {
            let mut map: std::collections::BTreeMap<usize, QueryGroup> = Default::default();
            for (row, &id) in q.iter().enumerate() {
                let g = map.entry(id).or_insert_with(|| QueryGroup {
                    id,
                    rows: vec![],
                    positives: vec![],
                    negatives: vec![],
                });
                g.rows.push(row);
                if targets[row] > 0.0 {
                    g.positives.push(row);
                } else {
                    g.negatives.push(row);
                }
            }
            groups = map.into_values().collect();
        }
        Ok(Self {
            features,
            targets,
            query_of,
            views,
            groups,
            n_pos,
            n_neg,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn query_of(&self) -> Option<&[usize]> {
        self.query_of.as_deref()
    }

    pub fn views(&self) -> Option<(&Array2<f64>, &Array2<f64>)> {
        self.views.as_ref().map(|(a, b)| (a, b))
    }

    /// Query groups in ascending id order (empty for non-ranking data).
    pub fn groups(&self) -> &[QueryGroup] {
        &self.groups
    }

    pub fn group_of(&self, id: usize) -> Option<&QueryGroup> {
        self.groups
            .binary_search_by_key(&id, |g| g.id)
            .ok()
            .map(|i| &self.groups[i])
    }

    /// Count of rows with a positive target (relevant items for ranking data).
    pub fn n_pos(&self) -> usize {
        self.n_pos
    }

    pub fn n_neg(&self) -> usize {
        self.n_neg
    }

    pub fn is_positive(&self, index: usize) -> bool {
        self.targets[index] > 0.0
    }

    pub fn positive_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_positive(i)).collect()
    }

    pub fn negative_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_positive(i)).collect()
    }

    /// `(features, target, index)` for one stored row.
    pub fn get_item(&self, index: usize) -> Result<(ArrayView1<'_, f64>, f64, usize)> {
        if index >= self.len() {
            return Err(XriskError::IndexOutOfRange {
                index,
                len: self.len(),
            });
        }
        Ok((self.features.row(index), self.targets[index], index))
    }

    pub fn rows(&self, indices: &[usize]) -> Array2<f64> {
        self.features.select(Axis(0), indices)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    GaussianBinary,
    Ltr,
    Contrastive,
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::GaussianBinary => "gaussian_binary",
            SynthKind::Ltr => "ltr",
            SynthKind::Contrastive => "contrastive",
        })
    }
}

impl FromStr for SynthKind {
    type Err = XriskError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_binary" | "gaussian" => Ok(SynthKind::GaussianBinary),
            "ltr" => Ok(SynthKind::Ltr),
            "contrastive" => Ok(SynthKind::Contrastive),
            other => Err(XriskError::config_key(
                "dataset",
                format!("unknown dataset kind `{other}`"),
            )),
        }
    }
}

/// Parameters of a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    /// Row count (binary) or anchor count (contrastive).
    pub n: usize,
    pub dim: usize,
    pub imratio: f64,
    /// Distance between the two class means (binary).
    pub separation: f64,
    pub queries: usize,
    pub items_per_query: usize,
    /// Latent-score noise (ltr) or view noise scale (contrastive).
    pub noise: f64,
    /// Resample a query that ends up with no relevant item instead of failing.
    pub regenerate_irrelevant: bool,
    pub seed: u64,
    /// Seed of the latent relevance direction (ltr); defaults to `seed`.
    /// Splits of one task share it while drawing different items.
    pub latent_seed: Option<u64>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            kind: SynthKind::GaussianBinary,
            n: 1000,
            dim: 10,
            imratio: 0.1,
            separation: 1.5,
            queries: 20,
            items_per_query: 20,
            noise: 0.5,
            regenerate_irrelevant: true,
            seed: 0,
            latent_seed: None,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(XriskError::config_key("dim", "dim must be positive"));
        }
        match self.kind {
            SynthKind::GaussianBinary => {
                if !(self.imratio > 0.0 && self.imratio < 1.0) {
                    return Err(XriskError::config_key("imratio", "imratio must lie in (0, 1)"));
                }
                if self.imratio * self.n as f64 + 1e-9 < 1.0 {
                    return Err(XriskError::config_key(
                        "imratio",
                        format!("imratio * n = {} < 1", self.imratio * self.n as f64),
                    ));
                }
                if !self.separation.is_finite() || self.separation < 0.0 {
                    return Err(XriskError::config_key("separation", "separation must be finite and >= 0"));
                }
            }
            SynthKind::Ltr => {
                if self.queries == 0 || self.items_per_query == 0 {
                    return Err(XriskError::config_key(
                        "queries",
                        "queries and items_per_query must be positive",
                    ));
                }
                if !self.noise.is_finite() || self.noise < 0.0 {
                    return Err(XriskError::config_key("noise", "noise must be finite and >= 0"));
                }
            }
            SynthKind::Contrastive => {
                if self.n < 2 {
                    return Err(XriskError::config_key("n", "contrastive data needs n >= 2"));
                }
                if !self.noise.is_finite() || self.noise < 0.0 {
                    return Err(XriskError::config_key("noise", "noise must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<IndexedDataset> {
        match self.kind {
            SynthKind::GaussianBinary => gen_gaussian_binary(self),
            SynthKind::Ltr => gen_synthetic_ltr(self),
            SynthKind::Contrastive => gen_contrastive(self),
        }
    }
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

/// Number of positives for a binary spec: `imratio * n` rounded half up.
pub fn positive_count(spec: &SynthSpec) -> usize {
    (spec.imratio * spec.n as f64 + 0.5).floor() as usize
}

/// Two isotropic unit-variance Gaussians whose means sit at `+-separation/2`
/// along the all-ones direction; labels are shuffled into row order.
pub fn gen_gaussian_binary(spec: &SynthSpec) -> Result<IndexedDataset> {
    spec.validate()?;
    let n_pos = positive_count(spec);
    if n_pos == 0 || n_pos >= spec.n {
        return Err(XriskError::config_key(
            "imratio",
            format!("{n_pos} positives out of {} leaves a class empty", spec.n),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut labels: Vec<f64> = (0..spec.n)
        .map(|i| if i < n_pos { 1.0 } else { -1.0 })
        .collect();
    labels.shuffle(&mut rng);
    let mut x = normal_matrix(&mut rng, spec.n, spec.dim);
    let shift = 0.5 * spec.separation / (spec.dim as f64).sqrt();
    for (mut row, &y) in x.axis_iter_mut(Axis(0)).zip(&labels) {
        row.mapv_inplace(|v| v + y * shift);
    }
    IndexedDataset::binary(x, labels)
}

/// Unit direction of the latent relevance scorer used by [`gen_synthetic_ltr`].
pub fn ltr_latent_direction(spec: &SynthSpec) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.latent_seed.unwrap_or(spec.seed));
    rng.set_stream(1);
    let v: Vec<f64> = (0..spec.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|a| a / norm).collect()
}

/// Relevance grade from the noisy latent score: thresholds 0.5 / 1.0 / 1.5.
fn grade(latent: f64) -> f64 {
    if latent > 1.5 {
        3.0
    } else if latent > 1.0 {
        2.0
    } else if latent > 0.5 {
        1.0
    } else {
        0.0
    }
}

/// Items `x ~ N(0, I)`, graded from `u . x + noise * eps` with `u` a fixed
/// random unit vector.
pub fn gen_synthetic_ltr(spec: &SynthSpec) -> Result<IndexedDataset> {
    spec.validate()?;
    let dir = ltr_latent_direction(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let m = spec.items_per_query;
    let mut x = Array2::zeros((spec.queries * m, spec.dim));
    let mut rel = Vec::with_capacity(spec.queries * m);
    let mut qid = Vec::with_capacity(spec.queries * m);
    for q in 0..spec.queries {
        let mut attempts = 0;
        loop {
            let block = normal_matrix(&mut rng, m, spec.dim);
            let grades: Vec<f64> = block
                .axis_iter(Axis(0))
                .map(|row| {
                    let latent: f64 = row.iter().zip(&dir).map(|(a, b)| a * b).sum();
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    grade(latent + spec.noise * eps)
                })
                .collect();
            if grades.iter().any(|&g| g > 0.0) {
                x.slice_mut(ndarray::s![q * m..(q + 1) * m, ..]).assign(&block);
                rel.extend(grades);
                qid.extend(std::iter::repeat_n(q, m));
                break;
            }
            attempts += 1;
            if !spec.regenerate_irrelevant || attempts >= 1000 {
                return Err(XriskError::DegenerateLabels(format!(
                    "query {q} has no relevant item"
                )));
            }
        }
    }
    IndexedDataset::ltr(x, rel, qid)
}

/// Anchors `x ~ N(0, I)` with two additive-noise views. The first half of the
/// coordinates gets noise `0.1 * noise`, the second half `noise`, so a good
/// encoder learns to discount the second half.
pub fn gen_contrastive(spec: &SynthSpec) -> Result<IndexedDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let anchors = normal_matrix(&mut rng, spec.n, spec.dim);
    let half = spec.dim / 2;
    let scale: Vec<f64> = (0..spec.dim)
        .map(|k| if k < half { 0.1 * spec.noise } else { spec.noise })
        .collect();
    let view = |rng: &mut ChaCha8Rng| {
        let mut v = anchors.clone();
        for mut row in v.axis_iter_mut(Axis(0)) {
            for (a, s) in row.iter_mut().zip(&scale) {
                let e: f64 = StandardNormal.sample(rng);
                *a += s * e;
            }
        }
        v
    };
    let va = view(&mut rng);
    let vb = view(&mut rng);
    IndexedDataset::contrastive(anchors, va, vb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvFormat {
    /// Header `label,f0,...,f{d-1}`; label in {1, -1}.
    Binary,
    /// Header `query_id,relevance,f0,...,f{d-1}`.
    Ltr,
}

impl FromStr for CsvFormat {
    type Err = XriskError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(CsvFormat::Binary),
            "ltr" => Ok(CsvFormat::Ltr),
            other => Err(XriskError::config_key(
                "csv_format",
                format!("unknown csv format `{other}`"),
            )),
        }
    }
}

pub fn load_csv_dataset(path: &Path, format: CsvFormat) -> Result<IndexedDataset> {
    let file = std::fs::File::open(path)?;
    read_csv_dataset(file, format)
}

/// Parses a dataset; error rows are 1-based file line numbers (header = 1).
pub fn read_csv_dataset<R: Read>(reader: R, format: CsvFormat) -> Result<IndexedDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| XriskError::Parse {
            row: 1,
            msg: e.to_string(),
        })?,
        None => {
            return Err(XriskError::Parse {
                row: 1,
                msg: "empty file".into(),
            })
        }
    };
    let lead: &[&str] = match format {
        CsvFormat::Binary => &["label"],
        CsvFormat::Ltr => &["query_id", "relevance"],
    };
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() <= lead.len() || cols[..lead.len()] != *lead {
        return Err(XriskError::Parse {
            row: 1,
            msg: format!("header must start with `{}` followed by features", lead.join(",")),
        });
    }
    let dim = cols.len() - lead.len();
    for (k, name) in cols[lead.len()..].iter().enumerate() {
        if *name != format!("f{k}") {
            return Err(XriskError::Parse {
                row: 1,
                msg: format!("expected feature column `f{k}`, found `{name}`"),
            });
        }
    }

    let mut feats = Vec::new();
    let mut targets = Vec::new();
    let mut qids = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| XriskError::Parse {
            row,
            msg: e.to_string(),
        })?;
        if rec.len() != cols.len() {
            return Err(XriskError::Parse {
                row,
                msg: format!("expected {} fields, found {}", cols.len(), rec.len()),
            });
        }
        let num = |s: &str| {
            s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| XriskError::Parse {
                row,
                msg: format!("bad number `{s}`"),
            })
        };
        match format {
            CsvFormat::Binary => {
                let y = match &rec[0] {
                    "1" | "+1" | "1.0" => 1.0,
                    "-1" | "-1.0" => -1.0,
                    other => {
                        return Err(XriskError::Parse {
                            row,
                            msg: format!("unknown label `{other}` (expected 1 or -1)"),
                        })
                    }
                };
                targets.push(y);
            }
            CsvFormat::Ltr => {
                let q = rec[0].parse::<usize>().map_err(|_| XriskError::Parse {
                    row,
                    msg: format!("bad query id `{}`", &rec[0]),
                })?;
                let y = num(&rec[1])?;
                if y < 0.0 {
                    return Err(XriskError::Parse {
                        row,
                        msg: format!("negative relevance `{y}`"),
                    });
                }
                qids.push(q);
                targets.push(y);
            }
        }
        for field in rec.iter().skip(lead.len()) {
            feats.push(num(field)?);
        }
    }
    let n = targets.len();
    let x = Array2::from_shape_vec((n, dim), feats).map_err(|e| XriskError::Shape(e.to_string()))?;
    match format {
        CsvFormat::Binary => IndexedDataset::binary(x, targets),
        CsvFormat::Ltr => IndexedDataset::ltr(x, targets, qids),
    }
}

/// Writes a dataset in the given CSV format with round-trip-exact decimals.
pub fn write_csv_dataset<W: Write>(ds: &IndexedDataset, format: CsvFormat, mut out: W) -> Result<()> {
    let feat_cols: Vec<String> = (0..ds.dim()).map(|k| format!("f{k}")).collect();
    match format {
        CsvFormat::Binary => writeln!(out, "label,{}", feat_cols.join(","))?,
        CsvFormat::Ltr => writeln!(out, "query_id,relevance,{}", feat_cols.join(","))?,
    }
    for i in 0..ds.len() {
        let feats: Vec<String> = ds.features.row(i).iter().map(|v| format_f64(*v)).collect();
        match format {
            CsvFormat::Binary => {
                let y = if ds.targets[i] > 0.0 { "1" } else { "-1" };
                writeln!(out, "{y},{}", feats.join(","))?;
            }
            CsvFormat::Ltr => {
                let q = ds.query_of.as_ref().ok_or_else(|| {
                    XriskError::config("ltr csv output needs query ids")
                })?[i];
                writeln!(out, "{q},{},{}", format_f64(ds.targets[i]), feats.join(","))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{auroc, ndcg_at_k, LabeledScores};

    fn binary_spec(n: usize, imratio: f64, separation: f64, seed: u64) -> SynthSpec {
        SynthSpec {
            kind: SynthKind::GaussianBinary,
            n,
            dim: 5,
            imratio,
            separation,
            seed,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn gaussian_positive_count_is_exact() {
        let ds = gen_gaussian_binary(&binary_spec(1000, 0.01, 1.0, 3)).unwrap();
        assert_eq!(ds.n_pos(), 10);
        assert_eq!(ds.n_neg(), 990);
        assert_eq!(ds.targets().iter().filter(|&&y| y == 1.0).count(), 10);
    }

    #[test]
    fn gaussian_is_deterministic() {
        let a = gen_gaussian_binary(&binary_spec(200, 0.1, 1.0, 9)).unwrap();
        let b = gen_gaussian_binary(&binary_spec(200, 0.1, 1.0, 9)).unwrap();
        assert_eq!(a, b);
        let c = gen_gaussian_binary(&binary_spec(200, 0.1, 1.0, 10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_separation_has_chance_auroc() {
        let ds = gen_gaussian_binary(&binary_spec(2000, 0.5, 0.0, 4)).unwrap();
        let scores: Vec<f64> = ds.features().axis_iter(Axis(0)).map(|r| r.sum()).collect();
        let a = auroc(&LabeledScores::new(scores, ds.targets().to_vec()).unwrap()).unwrap();
        assert!((0.4..=0.6).contains(&a), "auroc {a}");
    }

    #[test]
    fn too_few_positives_is_config_error() {
        let err = gen_gaussian_binary(&binary_spec(50, 0.01, 1.0, 0)).unwrap_err();
        assert!(matches!(err, XriskError::Config { .. }));
    }

    #[test]
    fn ltr_shape_and_query_ids() {
        let spec = SynthSpec {
            kind: SynthKind::Ltr,
            queries: 5,
            items_per_query: 20,
            dim: 4,
            seed: 2,
            ..SynthSpec::default()
        };
        let ds = gen_synthetic_ltr(&spec).unwrap();
        assert_eq!(ds.len(), 100);
        let ids: Vec<usize> = ds.groups().iter().map(|g| g.id).collect();
        assert_eq!(ids, vec![0, 1, 2, 3, 4]);
        assert!(ds.groups().iter().all(|g| !g.positives.is_empty()));
        assert_eq!(ds, gen_synthetic_ltr(&spec).unwrap());
    }

    #[test]
    fn ltr_noiseless_latent_scorer_is_ideal() {
        let spec = SynthSpec {
            kind: SynthKind::Ltr,
            queries: 6,
            items_per_query: 15,
            dim: 3,
            noise: 0.0,
            seed: 8,
            ..SynthSpec::default()
        };
        let ds = gen_synthetic_ltr(&spec).unwrap();
        let dir = ltr_latent_direction(&spec);
        for g in ds.groups() {
            let rel: Vec<f64> = g.rows.iter().map(|&i| ds.targets()[i]).collect();
            let sc: Vec<f64> = g
                .rows
                .iter()
                .map(|&i| ds.features().row(i).iter().zip(&dir).map(|(a, b)| a * b).sum())
                .collect();
            for k in [1, 5, 15] {
                assert!((ndcg_at_k(&rel, &sc, k).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ltr_without_regeneration_can_fail() {
        let spec = SynthSpec {
            kind: SynthKind::Ltr,
            queries: 50,
            items_per_query: 1,
            dim: 2,
            regenerate_irrelevant: false,
            seed: 1,
            ..SynthSpec::default()
        };
        assert!(matches!(
            gen_synthetic_ltr(&spec).unwrap_err(),
            XriskError::DegenerateLabels(_)
        ));
    }

    #[test]
    fn csv_binary_parses_and_counts() {
        let text = "label,f0,f1\n1,0.5,1.0\n-1,0.1,0.2\n-1,3.0,-4.0\n";
        let ds = read_csv_dataset(text.as_bytes(), CsvFormat::Binary).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!((ds.n_pos(), ds.n_neg()), (1, 2));
        assert_eq!(ds.targets(), &[1.0, -1.0, -1.0]);
    }

    #[test]
    fn csv_unknown_label_names_row() {
        let text = "label,f0\n1,0.5\n2,0.1\n";
        match read_csv_dataset(text.as_bytes(), CsvFormat::Binary).unwrap_err() {
            XriskError::Parse { row, msg } => {
                assert_eq!(row, 3);
                assert!(msg.contains("`2`"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn csv_malformed_rows() {
        let short = "label,f0,f1\n1,0.5\n";
        assert!(matches!(
            read_csv_dataset(short.as_bytes(), CsvFormat::Binary).unwrap_err(),
            XriskError::Parse { row: 2, .. }
        ));
        let header = "y,f0\n1,0.5\n";
        assert!(matches!(
            read_csv_dataset(header.as_bytes(), CsvFormat::Binary).unwrap_err(),
            XriskError::Parse { row: 1, .. }
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = gen_gaussian_binary(&binary_spec(40, 0.25, 2.0, 5)).unwrap();
        let mut buf = Vec::new();
        write_csv_dataset(&ds, CsvFormat::Binary, &mut buf).unwrap();
        let back = read_csv_dataset(buf.as_slice(), CsvFormat::Binary).unwrap();
        assert_eq!(ds, back);

        let spec = SynthSpec {
            kind: SynthKind::Ltr,
            queries: 3,
            items_per_query: 4,
            dim: 2,
            seed: 5,
            ..SynthSpec::default()
        };
        let ltr = gen_synthetic_ltr(&spec).unwrap();
        let mut buf = Vec::new();
        write_csv_dataset(&ltr, CsvFormat::Ltr, &mut buf).unwrap();
        assert_eq!(ltr, read_csv_dataset(buf.as_slice(), CsvFormat::Ltr).unwrap());
    }

    #[test]
    fn get_item_echoes_index() {
        let text = "label,f0\n1,0.5\n-1,0.25\n";
        let ds = read_csv_dataset(text.as_bytes(), CsvFormat::Binary).unwrap();
        let (row, y, idx) = ds.get_item(0).unwrap();
        assert_eq!((row.to_vec(), y, idx), (vec![0.5], 1.0, 0));
        assert_eq!(ds.get_item(1).unwrap().1, -1.0);
        assert!(matches!(
            ds.get_item(2).unwrap_err(),
            XriskError::IndexOutOfRange { index: 2, len: 2 }
        ));
    }

    #[test]
    fn contrastive_views_differ_from_anchors() {
        let spec = SynthSpec {
            kind: SynthKind::Contrastive,
            n: 10,
            dim: 4,
            noise: 0.5,
            seed: 1,
            ..SynthSpec::default()
        };
        let ds = gen_contrastive(&spec).unwrap();
        let (a, b) = ds.views().unwrap();
        assert_ne!(a, b);
        assert_eq!(a.dim(), (10, 4));
    }
}
