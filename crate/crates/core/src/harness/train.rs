//! The training loop: sampler, model, loss, optimizer, evaluation and
//! checkpoints.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::data::{load_csv_dataset, IndexedDataset, SynthKind};
use crate::error::{Result, XriskError};
use crate::losses::{
    ap_dynamic_loss, aucm_loss_and_grads, ce_loss, focal_loss, gcl_dynamic_loss, listwise_ce_dynamic_loss,
    ndcg_dynamic_loss, pauc_dynamic_loss, InnerEstimatorBank, MinMaxState, NumericCounters, Surrogate,
};
use crate::metrics::{evaluate_all, mean_ndcg_at_k, ndcg_at_k, LabeledScores, MetricSpec};
use crate::model::{OutputActivation, ParamVector, ScoringModel};
use crate::optim::{pesg_step, LrSchedule, OptimizerConfig, OptimizerState};
use crate::sampler::{BatchSampler, DualSampler, MiniBatch, RandomSampler, TriSampler};
use crate::state::StateMap;

use super::config::{DatasetSource, LossKind, RunConfig, SamplerKind, Task};
use super::record::{emit_curves, EvalRow, RunRecord, Split};

const TAG_TEST_SPLIT: u64 = 1;
const TAG_INIT: u64 = 2;
const TAG_SAMPLER: u64 = 3;
const TAG_REINIT: u64 = 4;
const TAG_WARM_SAMPLER: u64 = 5;

/// Mixes a run seed with a purpose tag (splitmix64 finalizer) so each random
/// consumer of a run gets its own seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = (seed ^ tag.wrapping_mul(0xD1B5_4A32_D192_ED03)).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: IndexedDataset,
    pub test: Option<IndexedDataset>,
}

/// Builds the train and test splits. Synthetic splits use the run seed for
/// training data and a derived seed for test data; ranking splits share the
/// latent relevance direction.
pub fn load_splits(cfg: &RunConfig) -> Result<Splits> {
    match &cfg.dataset {
        DatasetSource::Synthetic(spec) => {
            let mut train_spec = spec.clone();
            train_spec.seed = cfg.seed;
            train_spec.latent_seed = Some(cfg.seed);
            let mut test_spec = train_spec.clone();
            test_spec.seed = derive_seed(cfg.seed, TAG_TEST_SPLIT);
            match spec.kind {
                SynthKind::Ltr => test_spec.queries = cfg.n_test,
                _ => test_spec.n = cfg.n_test,
            }
            let train = train_spec.generate()?;
            let test = if cfg.n_test == 0 { None } else { Some(test_spec.generate()?) };
            Ok(Splits { train, test })
        }
        DatasetSource::Csv { train, test, format } => Ok(Splits {
            train: load_csv_dataset(train, *format)?,
            test: test.as_deref().map(|p| load_csv_dataset(p, *format)).transpose()?,
        }),
    }
}

pub fn build_model(cfg: &RunConfig, input_dim: usize) -> Result<ScoringModel> {
    let out = if cfg.task() == Task::Contrastive { cfg.embed_dim } else { 1 };
    Ok(ScoringModel::new(cfg.model, input_dim, cfg.hidden_dim, out)?.with_output(cfg.score_activation))
}

fn make_sampler(cfg: &RunConfig, kind: SamplerKind, ds: &IndexedDataset, seed: u64) -> Result<Box<dyn BatchSampler>> {
    Ok(match kind {
        SamplerKind::Dual => Box::new(DualSampler::new(
            ds,
            cfg.batch_size,
            cfg.sampling_rate,
            cfg.drop_remainder,
            seed,
        )?),
        SamplerKind::Tri => Box::new(TriSampler::new(
            ds,
            cfg.sampled_tasks,
            cfg.batch_size_per_task,
            cfg.sampling_rate_per_task,
            seed,
        )?),
        SamplerKind::Random => Box::new(RandomSampler::new(ds, cfg.batch_size, cfg.drop_remainder, seed)?),
    })
}

/// Per-run loss state.
#[derive(Debug, Clone)]
pub enum LossState {
    MinMax(MinMaxState),
    Dynamic(InnerEstimatorBank),
    Stateless,
}

fn fresh_loss_state(cfg: &RunConfig, loss: LossKind, n: usize) -> Result<LossState> {
    Ok(match loss {
        LossKind::Aucm => LossState::MinMax(MinMaxState::new(cfg.margin)?),
        LossKind::Pauc | LossKind::Ndcg | LossKind::ListwiseCe => {
            LossState::Dynamic(InnerEstimatorBank::new(n, cfg.gamma, true)?)
        }
        LossKind::Ap | LossKind::Gcl => LossState::Dynamic(InnerEstimatorBank::paired(n, cfg.gamma, true)?),
        LossKind::Ce | LossKind::Focal => LossState::Stateless,
    })
}

/// Metric values of one split, in configured order. Scores are taken before
/// any output squashing so saturation cannot create ties.
pub fn evaluate_split(
    task: Task,
    metrics: &[MetricSpec],
    model: &ScoringModel,
    w: &[f64],
    ds: &IndexedDataset,
) -> Result<Vec<(String, f64)>> {
    let model = &model.with_output(OutputActivation::Identity);
    match task {
        Task::Binary => {
            let scores = model.scores(w, ds.features().view())?;
            let ls = LabeledScores::new(scores, ds.targets().to_vec())?;
            evaluate_all(&ls, metrics)
        }
        Task::Ranking => {
            let scores = model.scores(w, ds.features().view())?;
            let query_of = ds
                .query_of()
                .ok_or_else(|| XriskError::config_key("dataset", "ranking evaluation needs query ids"))?;
            metrics
                .iter()
                .map(|m| match *m {
                    MetricSpec::Ndcg(k) => Ok((m.to_string(), mean_ndcg_at_k(query_of, ds.targets(), &scores, k)?)),
                    _ => Err(XriskError::config_key("metrics", format!("{m} does not apply to ranking"))),
                })
                .collect()
        }
        Task::Contrastive => metrics
            .iter()
            .map(|m| match *m {
                MetricSpec::Ndcg(k) => Ok((m.to_string(), retrieval_ndcg(model, w, ds, k)?)),
                _ => Err(XriskError::config_key("metrics", format!("{m} does not apply to contrastive runs"))),
            })
            .collect(),
    }
}

fn normalized_embeddings(model: &ScoringModel, w: &[f64], x: &ndarray::Array2<f64>) -> Result<ndarray::Array2<f64>> {
    let mut z = model.forward(w, x.view())?;
    for mut row in z.rows_mut() {
        let norm = row.dot(&row).sqrt().max(f64::MIN_POSITIVE);
        row /= norm;
    }
    Ok(z)
}

/// Cross-view retrieval: each first-view embedding queries all second-view
/// embeddings by cosine similarity; its own partner is the one relevant item.
pub fn retrieval_ndcg(model: &ScoringModel, w: &[f64], ds: &IndexedDataset, k: usize) -> Result<f64> {
    let (va, vb) = ds
        .views()
        .ok_or_else(|| XriskError::config_key("dataset", "retrieval evaluation needs two views"))?;
    let za = normalized_embeddings(model, w, va)?;
    let zb = normalized_embeddings(model, w, vb)?;
    let sim = za.dot(&zb.t());
    let n = sim.nrows();
    let mut rel = vec![0.0; n];
    let mut total = 0.0;
    for i in 0..n {
        rel[i] = 1.0;
        total += ndcg_at_k(&rel, sim.row(i).as_slice().expect("standard layout"), k)?;
        rel[i] = 0.0;
    }
    Ok(total / n as f64)
}

/// A run in progress. Construction performs the warm start (if any) and the
/// epoch-0 evaluation; [`run`](Self::run) trains to the configured epoch count.
pub struct Trainer {
    cfg: RunConfig,
    splits: Splits,
    model: ScoringModel,
    w: ParamVector,
    opt: OptimizerState,
    state: LossState,
    surrogate: Surrogate,
    sampler: Box<dyn BatchSampler>,
    record: RunRecord,
    epochs_done: usize,
    started: Instant,
}

impl Trainer {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let splits = load_splits(&cfg)?;
        let mut t = Self::assemble(cfg, splits)?;
        if let Some(ws) = t.cfg.warm_start.clone() {
            t.warm_start(ws.epochs, ws.loss, OptimizerConfig { mode: ws.mode, lr: ws.lr, ..t.cfg.optim })
                .map_err(|e| e.in_context("warm start"))?;
            if ws.reinit_last_layer {
                t.model.reinit_last_layer(&mut t.w, derive_seed(t.cfg.seed, TAG_REINIT))?;
            }
        }
        t.evaluate(0)?;
        Ok(t)
    }

    fn assemble(cfg: RunConfig, splits: Splits) -> Result<Self> {
        let model = build_model(&cfg, splits.train.dim())?;
        let w = model.init_params(derive_seed(cfg.seed, TAG_INIT));
        let opt = OptimizerState::new(cfg.optim, model.n_params())?;
        let state = fresh_loss_state(&cfg, cfg.loss, splits.train.len())?;
        let sampler = make_sampler(&cfg, cfg.sampler, &splits.train, derive_seed(cfg.seed, TAG_SAMPLER))?;
        let surrogate = Surrogate::new(cfg.surrogate, cfg.margin)?;
        let record = RunRecord::new(cfg.metrics.iter().map(|m| m.to_string()).collect());
        Ok(Self {
            cfg,
            splits,
            model,
            w,
            opt,
            state,
            surrogate,
            sampler,
            record,
            epochs_done: 0,
            started: Instant::now(),
        })
    }

    /// Trains `epochs` epochs with `loss` under its own sampler and optimizer;
    /// the main-phase optimizer, sampler and loss state are left untouched.
    fn warm_start(&mut self, epochs: usize, loss: LossKind, optim: OptimizerConfig) -> Result<()> {
        let kind = match self.cfg.task() {
            Task::Ranking => SamplerKind::Tri,
            _ => SamplerKind::Random,
        };
        let mut sampler = make_sampler(&self.cfg, kind, &self.splits.train, derive_seed(self.cfg.seed, TAG_WARM_SAMPLER))?;
        let mut opt = OptimizerState::new(optim, self.model.n_params())?;
        let mut state = fresh_loss_state(&self.cfg, loss, self.splits.train.len())?;
        let mut counters = NumericCounters::default();
        let main_model = self.model;
        if matches!(loss, LossKind::Ce | LossKind::Focal) {
            self.model = main_model.with_output(OutputActivation::Identity);
        }
        let result = (|| -> Result<()> {
            for _ in 0..epochs {
                loop {
                    let batch = sampler.next_batch();
                    self.apply_loss(loss, &batch, &mut opt, &mut state, &mut counters, 1.0)?;
                    if sampler.epoch_exhausted() {
                        break;
                    }
                }
            }
            Ok(())
        })();
        self.model = main_model;
        result
    }

    /// Resumes from a directory written by [`save_checkpoint`](Self::save_checkpoint).
    pub fn resume(cfg: RunConfig, dir: &Path) -> Result<Self> {
        cfg.validate()?;
        let ctx = |e: XriskError| e.in_context(format!("resuming from {}", dir.display()));
        let read = |name: &str| std::fs::read_to_string(dir.join(name)).map_err(XriskError::from);
        let meta = StateMap::parse(&read("meta.txt").map_err(ctx)?).map_err(ctx)?;
        let loss: String = meta.get("loss").map_err(ctx)?;
        let seed: u64 = meta.get("seed").map_err(ctx)?;
        if loss != cfg.loss.to_string() || seed != cfg.seed {
            return Err(ctx(XriskError::config(format!(
                "checkpoint is for loss {loss} seed {seed}, config has loss {} seed {}",
                cfg.loss, cfg.seed
            ))));
        }
        let splits = load_splits(&cfg)?;
        let mut t = Self::assemble(cfg, splits)?;
        let (model, w) = ScoringModel::params_from_csv(&read("params.csv").map_err(ctx)?).map_err(ctx)?;
        if model != t.model {
            return Err(ctx(XriskError::Shape("checkpoint model does not match the config".into())));
        }
        t.w = w;
        t.opt.load(&StateMap::parse(&read("optimizer.txt")?)?).map_err(ctx)?;
        t.sampler.load_state(&StateMap::parse(&read("sampler.txt")?)?).map_err(ctx)?;
        match &mut t.state {
            LossState::MinMax(mm) => *mm = MinMaxState::load(&StateMap::parse(&read("minmax.txt")?)?).map_err(ctx)?,
            LossState::Dynamic(bank) => bank.load_csv(&read("bank.csv")?).map_err(ctx)?,
            LossState::Stateless => {}
        }
        t.record = RunRecord::from_state(&StateMap::parse(&read("record.txt")?)?).map_err(ctx)?;
        t.epochs_done = meta.get("epochs_done").map_err(ctx)?;
        Ok(t)
    }

    pub fn save_checkpoint(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut meta = StateMap::new();
        meta.put("epochs_done", self.epochs_done);
        meta.put("loss", self.cfg.loss);
        meta.put("seed", self.cfg.seed);
        std::fs::write(dir.join("meta.txt"), meta.to_text())?;
        std::fs::write(dir.join("params.csv"), self.model.params_to_csv(&self.w)?)?;
        std::fs::write(dir.join("optimizer.txt"), self.opt.save().to_text())?;
        std::fs::write(dir.join("sampler.txt"), self.sampler.save_state().to_text())?;
        match &self.state {
            LossState::MinMax(mm) => std::fs::write(dir.join("minmax.txt"), mm.save().to_text())?,
            LossState::Dynamic(bank) => std::fs::write(dir.join("bank.csv"), bank.to_csv())?,
            LossState::Stateless => {}
        }
        std::fs::write(dir.join("record.txt"), self.record.to_state().to_text())?;
        Ok(())
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn model(&self) -> &ScoringModel {
        &self.model
    }

    pub fn params(&self) -> &ParamVector {
        &self.w
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.opt
    }

    pub fn loss_state(&self) -> &LossState {
        &self.state
    }

    pub fn record(&self) -> &RunRecord {
        &self.record
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    /// One loss evaluation and parameter update; `None` when the batch was
    /// skipped for lacking a class.
    fn apply_loss(
        &mut self,
        loss: LossKind,
        batch: &MiniBatch,
        opt: &mut OptimizerState,
        state: &mut LossState,
        counters: &mut NumericCounters,
        lr_mult: f64,
    ) -> Result<Option<f64>> {
        let cfg = &self.cfg;
        let ds = &self.splits.train;
        let (m, w) = (&self.model, &mut self.w);
        if matches!(loss, LossKind::Aucm | LossKind::Ap | LossKind::Pauc)
            && (batch.positives.is_empty() || batch.negatives.is_empty())
        {
            return Ok(None);
        }
        let order = cfg.estimator_order;
        let (value, grad) = match (loss, &mut *state) {
            (LossKind::Aucm, LossState::MinMax(mm)) => {
                let out = aucm_loss_and_grads(m, w, ds, batch, mm)?;
                check_finite(out.loss, &out.grad_w)?;
                pesg_step(opt, w, mm, &out, lr_mult)?;
                return Ok(Some(out.loss));
            }
            (LossKind::Pauc, LossState::Dynamic(bank)) => {
                let o = pauc_dynamic_loss(m, w, ds, batch, &self.surrogate, cfg.lambda, bank, order)?;
                counters.add(o.counters);
                (o.loss, o.grad_w)
            }
            (LossKind::Ap, LossState::Dynamic(bank)) => {
                let o = ap_dynamic_loss(m, w, ds, batch, &self.surrogate, bank, order)?;
                counters.add(o.counters);
                (o.loss, o.grad_w)
            }
            (LossKind::Ndcg, LossState::Dynamic(bank)) => {
                let o = ndcg_dynamic_loss(m, w, ds, batch, &self.surrogate, bank, order)?;
                counters.add(o.counters);
                (o.loss, o.grad_w)
            }
            (LossKind::ListwiseCe, LossState::Dynamic(bank)) => {
                let o = listwise_ce_dynamic_loss(m, w, ds, batch, bank, order)?;
                counters.add(o.counters);
                (o.loss, o.grad_w)
            }
            (LossKind::Gcl, LossState::Dynamic(bank)) => {
                let o = gcl_dynamic_loss(m, w, ds, batch, cfg.tau, bank, order)?;
                counters.add(o.counters);
                (o.loss, o.grad_w)
            }
            (LossKind::Ce, LossState::Stateless) => {
                let o = ce_loss(m, w, ds, batch)?;
                (o.loss, o.grad_w)
            }
            (LossKind::Focal, LossState::Stateless) => {
                let o = focal_loss(m, w, ds, batch, cfg.focal_alpha, cfg.focal_gamma)?;
                (o.loss, o.grad_w)
            }
            (l, _) => unreachable!("loss state built for a different loss than {l}"),
        };
        check_finite(value, &grad)?;
        opt.step(w, &grad, lr_mult)?;
        Ok(Some(value))
    }

    /// Trains one epoch of the main phase.
    pub fn run_epoch(&mut self) -> Result<()> {
        let epoch = self.epochs_done;
        let mult = match self.cfg.lr_schedule {
            LrSchedule::Constant => 1.0,
            s => s.multiplier(epoch),
        };
        let placeholder = OptimizerState::new(self.cfg.optim, 0)?;
        let mut opt = std::mem::replace(&mut self.opt, placeholder);
        let mut state = std::mem::replace(&mut self.state, LossState::Stateless);
        let mut counters = NumericCounters::default();
        let mut total = 0.0;
        let mut used = 0usize;
        let result = (|| -> Result<()> {
            loop {
                let batch = self.sampler.next_batch();
                let step = self.record.counters.steps + 1;
                match self
                    .apply_loss(self.cfg.loss, &batch, &mut opt, &mut state, &mut counters, mult)
                    .map_err(|e| e.in_context(format!("epoch {}, step {step}", epoch + 1)))?
                {
                    Some(l) => {
                        total += l;
                        used += 1;
                        self.record.counters.steps += 1;
                    }
                    None => self.record.counters.skipped_batches += 1,
                }
                if self.sampler.epoch_exhausted() {
                    return Ok(());
                }
            }
        })();
        self.opt = opt;
        self.state = state;
        result?;
        self.record.counters.floor_clamps += counters.floor_clamps;
        self.record.counters.exp_clips += counters.exp_clips;
        self.record.epoch_losses.push(if used > 0 { total / used as f64 } else { f64::NAN });
        self.epochs_done += 1;
        Ok(())
    }

    fn evaluate(&mut self, epoch: usize) -> Result<()> {
        let wall = self.cfg.record_wall_clock.then(|| self.started.elapsed().as_secs_f64());
        let task = self.cfg.task();
        let mut rows = Vec::new();
        for (split, ds) in [(Split::Train, Some(&self.splits.train)), (Split::Test, self.splits.test.as_ref())] {
            let Some(ds) = ds else { continue };
            let values = evaluate_split(task, &self.cfg.metrics, &self.model, &self.w, ds)
                .map_err(|e| e.in_context(format!("evaluating {split} at epoch {epoch}")))?;
            for (metric, value) in values {
                rows.push(EvalRow {
                    epoch,
                    split,
                    metric,
                    value,
                    wall_seconds: wall,
                });
            }
        }
        self.record.rows.extend(rows);
        Ok(())
    }

    fn checkpoint_dir(&self, epoch: usize) -> Option<PathBuf> {
        let out = self.cfg.out_dir.as_ref()?;
        (self.cfg.checkpoint_every > 0 && epoch.is_multiple_of(self.cfg.checkpoint_every))
            .then(|| out.join("checkpoints").join(format!("epoch_{epoch:04}")))
    }

    /// Trains until `until` epochs are done (capped at the configured count).
    pub fn run_until(&mut self, until: usize) -> Result<()> {
        let until = until.min(self.cfg.epochs);
        while self.epochs_done < until {
            self.run_epoch()?;
            let e = self.epochs_done;
            if e.is_multiple_of(self.cfg.eval_every) || e == self.cfg.epochs {
                self.evaluate(e)?;
            }
            if let Some(dir) = self.checkpoint_dir(e) {
                self.save_checkpoint(&dir)?;
            }
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<RunRecord> {
        self.run_until(self.cfg.epochs)?;
        Ok(self.record)
    }
}

fn check_finite(loss: f64, grad: &ParamVector) -> Result<()> {
    if loss.is_finite() && grad.is_finite() {
        Ok(())
    } else {
        Err(XriskError::NumericDomain("loss or gradient is not finite".into()))
    }
}

/// Trains per `cfg` and, when an output directory is set, writes the curves.
pub fn run_training(cfg: &RunConfig) -> Result<RunRecord> {
    let record = Trainer::new(cfg.clone())?.run()?;
    if let Some(dir) = &cfg.out_dir {
        emit_curves(&record, dir)?;
    }
    Ok(record)
}

/// Continues a checkpointed run to completion and writes the curves.
pub fn resume_training(cfg: &RunConfig, checkpoint: &Path) -> Result<RunRecord> {
    let record = Trainer::resume(cfg.clone(), checkpoint)?.run()?;
    if let Some(dir) = &cfg.out_dir {
        emit_curves(&record, dir)?;
    }
    Ok(record)
}
