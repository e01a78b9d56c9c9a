//! Controlled mini-batch samplers.
//!
//! All samplers are index based: each keeps permuted index lists plus cursors
//! and never copies data. Shuffles use ChaCha8 seeded with
//! `seed_from_u64(seed)`, one stream per list:
//!
//! | list                      | stream       |
//! |---------------------------|--------------|
//! | positives (dual)          | 0            |
//! | negatives (dual)          | 1            |
//! | query order (tri)         | 2            |
//! | all rows (random)         | 3            |
//! | query `q` positives (tri) | `16 + 2*q'`  |
//! | query `q` negatives (tri) | `17 + 2*q'`  |
//!
//! where `q'` is the position of the query in ascending id order.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::IndexedDataset;
use crate::error::{Result, XriskError};
use crate::state::StateMap;

/// Items sampled for one query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryBatch {
    pub query: usize,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

/// Dataset indices forming one training batch.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MiniBatch {
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    /// Per-query breakdown; empty unless produced by [`TriSampler`].
    pub queries: Vec<QueryBatch>,
}

impl MiniBatch {
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Positives followed by negatives.
    pub fn all_indices(&self) -> Vec<usize> {
        self.positives.iter().chain(&self.negatives).copied().collect()
    }

    pub fn query_ids(&self) -> Vec<usize> {
        self.queries.iter().map(|q| q.query).collect()
    }
}

/// A permuted index list with a read cursor and its own shuffle stream.
#[derive(Debug, Clone)]
pub struct ShuffledList {
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
    reshuffles: u64,
}

impl ShuffledList {
    pub fn new(mut items: Vec<usize>, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        items.shuffle(&mut rng);
        Self {
            order: items,
            cursor: 0,
            rng,
            reshuffles: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn remaining(&self) -> usize {
        self.order.len() - self.cursor
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Number of reshuffles since construction (the initial shuffle excluded).
    pub fn reshuffles(&self) -> u64 {
        self.reshuffles
    }

    pub fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.cursor = 0;
        self.reshuffles += 1;
    }

    /// Takes up to `n` items from the cursor.
    pub fn take(&mut self, n: usize) -> &[usize] {
        let end = (self.cursor + n).min(self.order.len());
        let out = &self.order[self.cursor..end];
        self.cursor = end;
        out
    }

    /// Takes exactly `n` items. When fewer remain, leftovers are discarded and
    /// the list reshuffled; if the list itself is shorter than `n` it is cycled
    /// through successive reshuffles.
    pub fn take_exact(&mut self, n: usize) -> Vec<usize> {
        if self.order.is_empty() {
            return Vec::new();
        }
        if self.order.len() >= n {
            if self.remaining() < n {
                self.reshuffle();
            }
            return self.take(n).to_vec();
        }
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            if self.remaining() == 0 {
                self.reshuffle();
            }
            let want = n - out.len();
            out.extend_from_slice(self.take(want));
        }
        out
    }

    fn save(&self) -> StateMap {
        let mut s = StateMap::new();
        s.put_list("order", &self.order);
        s.put("cursor", self.cursor);
        let key: String = self.rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
        s.put("key", key);
        s.put("stream", self.rng.get_stream());
        s.put("word_pos", self.rng.get_word_pos());
        s.put("reshuffles", self.reshuffles);
        s
    }

    fn load(&mut self, s: &StateMap) -> Result<()> {
        let order: Vec<usize> = s.get_list("order")?;
        let mut sorted_new = order.clone();
        let mut sorted_old = self.order.clone();
        sorted_new.sort_unstable();
        sorted_old.sort_unstable();
        if sorted_new != sorted_old {
            return Err(XriskError::Parse {
                row: 0,
                msg: "saved order is not a permutation of this list".into(),
            });
        }
        let cursor: usize = s.get("cursor")?;
        if cursor > order.len() {
            return Err(XriskError::Parse {
                row: 0,
                msg: "saved cursor beyond list end".into(),
            });
        }
        let hex: String = s.get("key")?;
        let bad_key = || XriskError::Parse {
            row: 0,
            msg: format!("bad shuffle key `{hex}`"),
        };
        if hex.len() != 64 {
            return Err(bad_key());
        }
        let mut key = [0u8; 32];
        for (k, byte) in key.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&hex[2 * k..2 * k + 2], 16).map_err(|_| bad_key())?;
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(s.get("stream")?);
        rng.set_word_pos(s.get::<u128>("word_pos")?);
        self.order = order;
        self.cursor = cursor;
        self.rng = rng;
        self.reshuffles = s.get("reshuffles")?;
        Ok(())
    }
}

/// Positives per batch: `batch_size * rate` rounded half up, raised to 1 if it
/// rounds to zero; a count that leaves no room for negatives is an error.
pub fn positives_per_batch(batch_size: usize, rate: f64) -> Result<usize> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(XriskError::config_key(
            "sampling_rate",
            format!("sampling rate must lie in (0, 1), got {rate}"),
        ));
    }
    if batch_size < 2 {
        return Err(XriskError::config_key(
            "batch_size",
            "a controlled batch needs at least 2 items",
        ));
    }
    let p = ((batch_size as f64 * rate) + 0.5).floor() as usize;
    if p >= batch_size {
        return Err(XriskError::config_key(
            "sampling_rate",
            format!("{p} positives leave no negatives in a batch of {batch_size}"),
        ));
    }
    Ok(p.max(1))
}

/// Common interface the training loop drives.
pub trait BatchSampler {
    /// Next batch; starts a new epoch first when the current one is exhausted.
    fn next_batch(&mut self) -> MiniBatch;
    /// True when the next call to `next_batch` would begin a new epoch.
    fn epoch_exhausted(&self) -> bool;
    /// Completed epoch rollovers since construction.
    fn epoch(&self) -> u64;
    fn save_state(&self) -> StateMap;
    fn load_state(&mut self, s: &StateMap) -> Result<()>;
}

/// Binary sampler with a fixed positive count per batch.
///
/// Positives are drawn from a shuffled positive list; when it runs short only
/// that list is reshuffled. The epoch ends when the negative list cannot fill
/// another batch, at which point both lists are reshuffled.
#[derive(Debug, Clone)]
pub struct DualSampler {
    pos: ShuffledList,
    neg: ShuffledList,
    batch_size: usize,
    n_pos_batch: usize,
    drop_remainder: bool,
    epoch: u64,
}

impl DualSampler {
    pub fn new(
        ds: &IndexedDataset,
        batch_size: usize,
        sampling_rate: f64,
        drop_remainder: bool,
        seed: u64,
    ) -> Result<Self> {
        let pos = ds.positive_indices();
        let neg = ds.negative_indices();
        Self::from_indices(pos, neg, batch_size, sampling_rate, drop_remainder, seed)
    }

    pub fn from_indices(
        pos: Vec<usize>,
        neg: Vec<usize>,
        batch_size: usize,
        sampling_rate: f64,
        drop_remainder: bool,
        seed: u64,
    ) -> Result<Self> {
        if pos.is_empty() || neg.is_empty() {
            return Err(XriskError::DegenerateLabels(
                "dual sampling needs at least one positive and one negative".into(),
            ));
        }
        let n_pos_batch = positives_per_batch(batch_size, sampling_rate)?;
        if drop_remainder && neg.len() < batch_size - n_pos_batch {
            return Err(XriskError::config_key(
                "batch_size",
                format!(
                    "{} negatives cannot fill {} negative slots with drop_remainder",
                    neg.len(),
                    batch_size - n_pos_batch
                ),
            ));
        }
        Ok(Self {
            pos: ShuffledList::new(pos, seed, 0),
            neg: ShuffledList::new(neg, seed, 1),
            batch_size,
            n_pos_batch,
            drop_remainder,
            epoch: 0,
        })
    }

    pub fn positives_per_batch(&self) -> usize {
        self.n_pos_batch
    }

    pub fn negatives_per_batch(&self) -> usize {
        self.batch_size - self.n_pos_batch
    }

    pub fn positive_list(&self) -> &ShuffledList {
        &self.pos
    }

    pub fn negative_list(&self) -> &ShuffledList {
        &self.neg
    }

    fn start_epoch(&mut self) {
        self.pos.reshuffle();
        self.neg.reshuffle();
        self.epoch += 1;
    }
}

impl BatchSampler for DualSampler {
    fn next_batch(&mut self) -> MiniBatch {
        if self.epoch_exhausted() {
            self.start_epoch();
        }
        let positives = self.pos.take_exact(self.n_pos_batch);
        let negatives = self.neg.take(self.negatives_per_batch()).to_vec();
        MiniBatch {
            positives,
            negatives,
            queries: Vec::new(),
        }
    }

    fn epoch_exhausted(&self) -> bool {
        let left = self.neg.remaining();
        if self.drop_remainder {
            left < self.negatives_per_batch()
        } else {
            left == 0
        }
    }

    fn epoch(&self) -> u64 {
        self.epoch
    }

    fn save_state(&self) -> StateMap {
        let mut s = StateMap::new();
        s.put_section("pos", self.pos.save());
        s.put_section("neg", self.neg.save());
        s.put("epoch", self.epoch);
        s
    }

    fn load_state(&mut self, s: &StateMap) -> Result<()> {
        self.pos.load(&s.section("pos"))?;
        self.neg.load(&s.section("neg"))?;
        self.epoch = s.get("epoch")?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct QueryLists {
    id: usize,
    pos: ShuffledList,
    neg: ShuffledList,
}

/// Ranking sampler: picks `sampled_tasks` distinct queries per batch, then
/// applies the dual rule inside each query.
///
/// Queries are drawn without replacement from a shuffled query list; an epoch
/// ends when fewer than `sampled_tasks` queries remain. Queries without any
/// relevant item are never sampled.
#[derive(Debug, Clone)]
pub struct TriSampler {
    query_list: ShuffledList,
    lists: Vec<QueryLists>,
    sampled_tasks: usize,
    pos_per_task: usize,
    neg_per_task: usize,
    epoch: u64,
}

impl TriSampler {
    pub fn new(
        ds: &IndexedDataset,
        sampled_tasks: usize,
        batch_size_per_task: usize,
        sampling_rate_per_task: f64,
        seed: u64,
    ) -> Result<Self> {
        if ds.groups().is_empty() {
            return Err(XriskError::config_key(
                "sampler",
                "tri sampling needs a dataset with query ids",
            ));
        }
        let pos_per_task = positives_per_batch(batch_size_per_task, sampling_rate_per_task)?;
        let mut lists = Vec::new();
        for (slot, g) in ds.groups().iter().enumerate() {
            if g.positives.is_empty() {
                continue;
            }
            if g.negatives.is_empty() {
                return Err(XriskError::DegenerateLabels(format!(
                    "query {} has no irrelevant item to sample",
                    g.id
                )));
            }
            let slot = slot as u64;
            lists.push(QueryLists {
                id: g.id,
                pos: ShuffledList::new(g.positives.clone(), seed, 16 + 2 * slot),
                neg: ShuffledList::new(g.negatives.clone(), seed, 17 + 2 * slot),
            });
        }
        if sampled_tasks == 0 || sampled_tasks > lists.len() {
            return Err(XriskError::config_key(
                "sampled_tasks",
                format!(
                    "sampled_tasks = {sampled_tasks} but {} queries have relevant items",
                    lists.len()
                ),
            ));
        }
        Ok(Self {
            query_list: ShuffledList::new((0..lists.len()).collect(), seed, 2),
            lists,
            sampled_tasks,
            pos_per_task,
            neg_per_task: batch_size_per_task - pos_per_task,
            epoch: 0,
        })
    }

    pub fn positives_per_task(&self) -> usize {
        self.pos_per_task
    }

    pub fn negatives_per_task(&self) -> usize {
        self.neg_per_task
    }

    pub fn n_queries(&self) -> usize {
        self.lists.len()
    }
}

impl BatchSampler for TriSampler {
    fn next_batch(&mut self) -> MiniBatch {
        if self.epoch_exhausted() {
            self.query_list.reshuffle();
            self.epoch += 1;
        }
        let slots = self.query_list.take(self.sampled_tasks).to_vec();
        let mut batch = MiniBatch::default();
        for slot in slots {
            let ql = &mut self.lists[slot];
            let qb = QueryBatch {
                query: ql.id,
                positives: ql.pos.take_exact(self.pos_per_task),
                negatives: ql.neg.take_exact(self.neg_per_task),
            };
            batch.positives.extend_from_slice(&qb.positives);
            batch.negatives.extend_from_slice(&qb.negatives);
            batch.queries.push(qb);
        }
        batch
    }

    fn epoch_exhausted(&self) -> bool {
        self.query_list.remaining() < self.sampled_tasks
    }

    fn epoch(&self) -> u64 {
        self.epoch
    }

    fn save_state(&self) -> StateMap {
        let mut s = StateMap::new();
        s.put_section("queries", self.query_list.save());
        for (slot, ql) in self.lists.iter().enumerate() {
            s.put_section(&format!("q{slot}.pos"), ql.pos.save());
            s.put_section(&format!("q{slot}.neg"), ql.neg.save());
        }
        s.put("epoch", self.epoch);
        s
    }

    fn load_state(&mut self, s: &StateMap) -> Result<()> {
        self.query_list.load(&s.section("queries"))?;
        for (slot, ql) in self.lists.iter_mut().enumerate() {
            ql.pos.load(&s.section(&format!("q{slot}.pos")))?;
            ql.neg.load(&s.section(&format!("q{slot}.neg")))?;
        }
        self.epoch = s.get("epoch")?;
        Ok(())
    }
}

/// Uncontrolled sampler: a shuffled pass over all rows per epoch.
///
/// Batch members are split into `positives` / `negatives` by target sign.
#[derive(Debug, Clone)]
pub struct RandomSampler {
    list: ShuffledList,
    is_pos: Vec<bool>,
    batch_size: usize,
    drop_remainder: bool,
    epoch: u64,
}

impl RandomSampler {
    pub fn new(ds: &IndexedDataset, batch_size: usize, drop_remainder: bool, seed: u64) -> Result<Self> {
        if ds.is_empty() {
            return Err(XriskError::DegenerateLabels("dataset is empty".into()));
        }
        if batch_size == 0 || (drop_remainder && batch_size > ds.len()) {
            return Err(XriskError::config_key(
                "batch_size",
                format!("batch size {batch_size} does not fit {} rows", ds.len()),
            ));
        }
        Ok(Self {
            list: ShuffledList::new((0..ds.len()).collect(), seed, 3),
            is_pos: (0..ds.len()).map(|i| ds.is_positive(i)).collect(),
            batch_size,
            drop_remainder,
            epoch: 0,
        })
    }
}

impl BatchSampler for RandomSampler {
    fn next_batch(&mut self) -> MiniBatch {
        if self.epoch_exhausted() {
            self.list.reshuffle();
            self.epoch += 1;
        }
        let mut batch = MiniBatch::default();
        for &i in self.list.take(self.batch_size) {
            if self.is_pos[i] {
                batch.positives.push(i);
            } else {
                batch.negatives.push(i);
            }
        }
        batch
    }

    fn epoch_exhausted(&self) -> bool {
        if self.drop_remainder {
            self.list.remaining() < self.batch_size
        } else {
            self.list.remaining() == 0
        }
    }

    fn epoch(&self) -> u64 {
        self.epoch
    }

    fn save_state(&self) -> StateMap {
        let mut s = StateMap::new();
        s.put_section("rows", self.list.save());
        s.put("epoch", self.epoch);
        s
    }

    fn load_state(&mut self, s: &StateMap) -> Result<()> {
        self.list.load(&s.section("rows"))?;
        self.epoch = s.get("epoch")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn binary(n_pos: usize, n_neg: usize) -> IndexedDataset {
        let n = n_pos + n_neg;
        let y = (0..n).map(|i| if i < n_pos { 1.0 } else { -1.0 }).collect();
        IndexedDataset::binary(Array2::zeros((n, 1)), y).unwrap()
    }

    #[test]
    fn rounding_and_range() {
        assert_eq!(positives_per_batch(8, 0.5).unwrap(), 4);
        assert_eq!(positives_per_batch(6, 1.0 / 3.0).unwrap(), 2);
        assert_eq!(positives_per_batch(10, 0.25).unwrap(), 3); // 2.5 rounds up
        assert_eq!(positives_per_batch(8, 0.01).unwrap(), 1);
        assert!(positives_per_batch(8, 0.99).is_err());
        assert!(positives_per_batch(8, 1.0).is_err());
    }

    #[test]
    fn four_positives_nine_negatives_walkthrough() {
        // 4 positives (0..4), 9 negatives (4..13), batch 8 at rate 0.5
        let ds = binary(4, 9);
        let mut s = DualSampler::new(&ds, 8, 0.5, true, 42).unwrap();
        let neg0 = s.negative_list().order().to_vec();

        let b1 = s.next_batch();
        assert_eq!(b1.positives.len(), 4);
        assert_eq!(b1.negatives, neg0[0..4]);
        assert_eq!(s.positive_list().reshuffles(), 0);

        let b2 = s.next_batch();
        assert_eq!(b2.negatives, neg0[4..8]);
        let mut p2 = b2.positives.clone();
        p2.sort();
        assert_eq!(p2, vec![0, 1, 2, 3]);
        // only the positive list was reshuffled mid-epoch
        assert_eq!(s.positive_list().reshuffles(), 1);
        assert_eq!(s.negative_list().reshuffles(), 0);
        assert_eq!(s.negative_list().order(), neg0.as_slice());

        // one negative left over: dropped, epoch ends, both lists reshuffle
        assert!(s.epoch_exhausted());
        let b3 = s.next_batch();
        assert_eq!(s.epoch(), 1);
        assert_eq!(s.negative_list().reshuffles(), 1);
        assert_eq!(s.positive_list().reshuffles(), 2);
        assert_eq!(b3.negatives, s.negative_list().order()[0..4]);
    }

    #[test]
    fn keep_remainder_emits_short_batch() {
        let ds = binary(4, 9);
        let mut s = DualSampler::new(&ds, 8, 0.5, false, 1).unwrap();
        let sizes: Vec<usize> = (0..3).map(|_| s.next_batch().negatives.len()).collect();
        assert_eq!(sizes, vec![4, 4, 1]);
        assert!(s.epoch_exhausted());
    }

    #[test]
    fn all_positive_rate_is_rejected() {
        let ds = binary(4, 9);
        assert!(matches!(
            DualSampler::new(&ds, 8, 0.99, true, 0).unwrap_err(),
            XriskError::Config { .. }
        ));
        assert!(matches!(
            DualSampler::new(&binary(0, 5), 4, 0.5, true, 0).unwrap_err(),
            XriskError::DegenerateLabels(_)
        ));
    }

    #[test]
    fn dual_is_seed_deterministic() {
        let ds = binary(7, 30);
        let mut a = DualSampler::new(&ds, 6, 0.5, true, 5).unwrap();
        let mut b = DualSampler::new(&ds, 6, 0.5, true, 5).unwrap();
        for _ in 0..50 {
            assert_eq!(a.next_batch(), b.next_batch());
        }
    }

    #[test]
    fn small_positive_class_cycles() {
        let ds = binary(2, 20);
        let mut s = DualSampler::new(&ds, 10, 0.5, true, 3).unwrap();
        let b = s.next_batch();
        assert_eq!(b.positives.len(), 5);
        assert!(b.positives.iter().all(|&i| i < 2));
    }

    #[test]
    fn dual_state_round_trip_continues_identically() {
        let ds = binary(5, 23);
        let mut a = DualSampler::new(&ds, 6, 0.5, true, 9).unwrap();
        for _ in 0..7 {
            a.next_batch();
        }
        let saved = StateMap::parse(&a.save_state().to_text()).unwrap();
        let mut b = DualSampler::new(&ds, 6, 0.5, true, 9).unwrap();
        b.load_state(&saved).unwrap();
        for _ in 0..20 {
            assert_eq!(a.next_batch(), b.next_batch());
        }
    }

    fn ltr(queries: usize, items: usize) -> IndexedDataset {
        let n = queries * items;
        let rel = (0..n).map(|i| if i % items < 3 { 1.0 } else { 0.0 }).collect();
        let q = (0..n).map(|i| i / items).collect();
        IndexedDataset::ltr(Array2::zeros((n, 1)), rel, q).unwrap()
    }

    #[test]
    fn tri_counts_and_composition() {
        let ds = ltr(10, 12);
        let mut s = TriSampler::new(&ds, 3, 6, 1.0 / 3.0, 4).unwrap();
        for _ in 0..20 {
            let b = s.next_batch();
            let mut ids = b.query_ids();
            assert_eq!(ids.len(), 3);
            ids.sort();
            ids.dedup();
            assert_eq!(ids.len(), 3);
            for qb in &b.queries {
                assert_eq!(qb.positives.len(), 2);
                assert_eq!(qb.negatives.len(), 4);
                assert!(qb.positives.iter().all(|&i| i / 12 == qb.query && ds.is_positive(i)));
                assert!(qb.negatives.iter().all(|&i| i / 12 == qb.query && !ds.is_positive(i)));
            }
        }
    }

    #[test]
    fn tri_too_many_tasks() {
        let ds = ltr(2, 5);
        assert!(matches!(
            TriSampler::new(&ds, 3, 4, 0.5, 0).unwrap_err(),
            XriskError::Config { .. }
        ));
    }

    #[test]
    fn tri_is_seed_deterministic() {
        let ds = ltr(8, 10);
        let mut a = TriSampler::new(&ds, 3, 5, 0.4, 11).unwrap();
        let mut b = TriSampler::new(&ds, 3, 5, 0.4, 11).unwrap();
        for _ in 0..30 {
            assert_eq!(a.next_batch(), b.next_batch());
        }
    }

    #[test]
    fn random_partition_arithmetic() {
        let ds = binary(3, 7);
        let mut keep = RandomSampler::new(&ds, 4, false, 2).unwrap();
        let mut seen = Vec::new();
        let mut sizes = Vec::new();
        loop {
            let b = keep.next_batch();
            sizes.push(b.len());
            seen.extend(b.all_indices());
            if keep.epoch_exhausted() {
                break;
            }
        }
        assert_eq!(sizes, vec![4, 4, 2]);
        seen.sort();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());

        let mut drop = RandomSampler::new(&ds, 4, true, 2).unwrap();
        let sizes: Vec<usize> = (0..2).map(|_| drop.next_batch().len()).collect();
        assert_eq!(sizes, vec![4, 4]);
        assert!(drop.epoch_exhausted());

        let mut again = RandomSampler::new(&ds, 4, true, 2).unwrap();
        let mut first = RandomSampler::new(&ds, 4, true, 2).unwrap();
        for _ in 0..10 {
            assert_eq!(again.next_batch(), first.next_batch());
        }
    }
}
