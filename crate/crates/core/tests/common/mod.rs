#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use xrisk::data::IndexedDataset;
use xrisk::sampler::{MiniBatch, QueryBatch};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// Binary dataset with the first `n_pos` rows positive.
pub fn random_binary(seed: u64, n_pos: usize, n_neg: usize, dim: usize) -> IndexedDataset {
    let mut r = rng(seed);
    let x = normal_matrix(&mut r, n_pos + n_neg, dim);
    let y = (0..n_pos + n_neg).map(|i| if i < n_pos { 1.0 } else { -1.0 }).collect();
    IndexedDataset::binary(x, y).unwrap()
}

/// Ranking dataset with graded relevance; every query gets at least one
/// relevant and one irrelevant item.
pub fn random_ltr(seed: u64, queries: usize, items: usize, dim: usize) -> IndexedDataset {
    let mut r = rng(seed);
    let x = normal_matrix(&mut r, queries * items, dim);
    let mut rel = Vec::new();
    let mut qid = Vec::new();
    for q in 0..queries {
        for k in 0..items {
            let g = match k {
                0 => 1 + r.random_range(0..3),
                1 => 0,
                _ => r.random_range(0..4),
            };
            rel.push(g as f64);
            qid.push(q);
        }
    }
    IndexedDataset::ltr(x, rel, qid).unwrap()
}

pub fn random_views(seed: u64, n: usize, dim: usize) -> IndexedDataset {
    let mut r = rng(seed);
    let a = normal_matrix(&mut r, n, dim);
    let va = &a + &(normal_matrix(&mut r, n, dim) * 0.3);
    let vb = &a + &(normal_matrix(&mut r, n, dim) * 0.3);
    IndexedDataset::contrastive(a, va, vb).unwrap()
}

/// The whole dataset as one batch (class split, or per query for ranking data).
pub fn full_batch(ds: &IndexedDataset) -> MiniBatch {
    let queries = ds
        .groups()
        .iter()
        .map(|g| QueryBatch {
            query: g.id,
            positives: g.positives.clone(),
            negatives: g.negatives.clone(),
        })
        .collect();
    MiniBatch {
        positives: ds.positive_indices(),
        negatives: ds.negative_indices(),
        queries,
    }
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(a.iter().map(|x| x * x).sum::<f64>().sqrt());
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
