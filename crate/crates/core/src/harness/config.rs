//! Run configuration: a line-oriented `key = value` file.
//!
//! `#` starts a comment. Keys may appear once. Unknown keys and out-of-range
//! values are errors that name the key and its line; absent keys take the
//! defaults listed in [`KEYS`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{CsvFormat, SynthKind, SynthSpec};
use crate::error::{Result, XriskError};
use crate::losses::{EstimatorOrder, SurrogateKind};
use crate::metrics::MetricSpec;
use crate::model::{ModelKind, OutputActivation};
use crate::optim::{LrSchedule, OptimizerConfig, OptimizerMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Aucm,
    Ap,
    Pauc,
    Ndcg,
    ListwiseCe,
    Gcl,
    Ce,
    Focal,
}

impl LossKind {
    pub fn task(self) -> Task {
        match self {
            LossKind::Aucm | LossKind::Ap | LossKind::Pauc | LossKind::Ce | LossKind::Focal => Task::Binary,
            LossKind::Ndcg | LossKind::ListwiseCe => Task::Ranking,
            LossKind::Gcl => Task::Contrastive,
        }
    }

    /// Optimizer wrapper paired with the loss, and the default sampler.
    pub fn pairing(self) -> (OptimizerKind, SamplerKind) {
        match self {
            LossKind::Aucm => (OptimizerKind::Pesg, SamplerKind::Dual),
            LossKind::Ap => (OptimizerKind::Soap, SamplerKind::Dual),
            LossKind::Pauc => (OptimizerKind::Sopas, SamplerKind::Dual),
            LossKind::Ndcg | LossKind::ListwiseCe => (OptimizerKind::Song, SamplerKind::Tri),
            LossKind::Gcl => (OptimizerKind::Sogclr, SamplerKind::Random),
            LossKind::Ce | LossKind::Focal => (OptimizerKind::Sgd, SamplerKind::Random),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Aucm => "aucm",
            LossKind::Ap => "ap",
            LossKind::Pauc => "pauc",
            LossKind::Ndcg => "ndcg",
            LossKind::ListwiseCe => "listwise_ce",
            LossKind::Gcl => "gcl",
            LossKind::Ce => "ce",
            LossKind::Focal => "focal",
        })
    }
}

impl FromStr for LossKind {
    type Err = XriskError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "aucm" => LossKind::Aucm,
            "ap" => LossKind::Ap,
            "pauc" => LossKind::Pauc,
            "ndcg" => LossKind::Ndcg,
            "listwise_ce" | "listwise" => LossKind::ListwiseCe,
            "gcl" => LossKind::Gcl,
            "ce" => LossKind::Ce,
            "focal" => LossKind::Focal,
            other => return Err(XriskError::config_key("loss", format!("unknown loss `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Binary,
    Ranking,
    Contrastive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Dual,
    Tri,
    Random,
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerKind::Dual => "dual",
            SamplerKind::Tri => "tri",
            SamplerKind::Random => "random",
        })
    }
}

impl FromStr for SamplerKind {
    type Err = XriskError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "dual" => SamplerKind::Dual,
            "tri" => SamplerKind::Tri,
            "random" => SamplerKind::Random,
            other => return Err(XriskError::config_key("sampler", format!("unknown sampler `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Pesg,
    Soap,
    Sopas,
    Song,
    Sogclr,
    Sgd,
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Pesg => "pesg",
            OptimizerKind::Soap => "soap",
            OptimizerKind::Sopas => "sopas",
            OptimizerKind::Song => "song",
            OptimizerKind::Sogclr => "sogclr",
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = XriskError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pesg" => OptimizerKind::Pesg,
            "soap" => OptimizerKind::Soap,
            "sopas" => OptimizerKind::Sopas,
            "song" => OptimizerKind::Song,
            "sogclr" => OptimizerKind::Sogclr,
            "sgd" => OptimizerKind::Sgd,
            "adam" => OptimizerKind::Adam,
            other => return Err(XriskError::config_key("optimizer", format!("unknown optimizer `{other}`"))),
        })
    }
}

/// Whether a loss / sampler / optimizer triple is runnable.
///
/// Each X-risk loss runs with its own wrapper. Binary X-risk losses accept
/// the dual sampler or the uncontrolled random sampler; the baselines accept
/// either binary sampler with plain SGD or Adam.
pub fn is_compatible(loss: LossKind, sampler: SamplerKind, optimizer: OptimizerKind) -> bool {
    use LossKind as L;
    use OptimizerKind as O;
    use SamplerKind as S;
    match loss {
        L::Aucm => optimizer == O::Pesg && matches!(sampler, S::Dual | S::Random),
        L::Ap => optimizer == O::Soap && matches!(sampler, S::Dual | S::Random),
        L::Pauc => optimizer == O::Sopas && matches!(sampler, S::Dual | S::Random),
        L::Ndcg | L::ListwiseCe => optimizer == O::Song && sampler == S::Tri,
        L::Gcl => optimizer == O::Sogclr && sampler == S::Random,
        L::Ce | L::Focal => matches!(optimizer, O::Sgd | O::Adam) && matches!(sampler, S::Dual | S::Random),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic(SynthSpec),
    Csv {
        train: PathBuf,
        test: Option<PathBuf>,
        format: CsvFormat,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub epochs: usize,
    pub loss: LossKind,
    pub mode: OptimizerMode,
    pub lr: f64,
    pub reinit_last_layer: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    /// Rows (binary, contrastive) or queries (ranking) of the synthetic test split.
    pub n_test: usize,
    pub model: ModelKind,
    pub hidden_dim: usize,
    /// Embedding width for the contrastive loss.
    pub embed_dim: usize,
    /// Squashing applied to scores during training; evaluation ranks raw scores.
    pub score_activation: OutputActivation,

    pub loss: LossKind,
    pub surrogate: SurrogateKind,
    pub margin: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub tau: f64,
    pub focal_alpha: f64,
    pub focal_gamma: f64,
    pub estimator_order: EstimatorOrder,

    pub sampler: SamplerKind,
    pub batch_size: usize,
    pub sampling_rate: f64,
    pub sampled_tasks: usize,
    pub batch_size_per_task: usize,
    pub sampling_rate_per_task: f64,
    pub drop_remainder: bool,

    pub optimizer: OptimizerKind,
    pub optim: OptimizerConfig,
    pub lr_schedule: LrSchedule,

    pub epochs: usize,
    pub eval_every: usize,
    pub metrics: Vec<MetricSpec>,
    pub seed: u64,
    pub warm_start: Option<WarmStart>,
    pub checkpoint_every: usize,
    pub out_dir: Option<PathBuf>,
    pub record_wall_clock: bool,
}

/// Every accepted key with its default, in file order.
pub const KEYS: &[(&str, &str)] = &[
    ("dataset", "gaussian"),
    ("train_csv", ""),
    ("test_csv", ""),
    ("csv_format", "binary"),
    ("n", "1000"),
    ("n_test", "same as n (queries for ltr)"),
    ("dim", "10"),
    ("imratio", "0.1"),
    ("separation", "1.5"),
    ("queries", "20"),
    ("items_per_query", "20"),
    ("noise", "0.5"),
    ("regenerate_irrelevant", "true"),
    ("model", "linear"),
    ("hidden_dim", "16"),
    ("embed_dim", "8"),
    ("score_activation", "sigmoid for aucm, ap, pauc; identity otherwise"),
    ("loss", "aucm"),
    ("surrogate", "squared_hinge"),
    ("margin", "1.0"),
    ("gamma", "0.9"),
    ("lambda", "1.0"),
    ("tau", "0.1"),
    ("focal_alpha", "1.0"),
    ("focal_gamma", "0.5"),
    ("estimator_order", "updated"),
    ("sampler", "paired with loss"),
    ("batch_size", "64"),
    ("sampling_rate", "0.5"),
    ("sampled_tasks", "4"),
    ("batch_size_per_task", "10"),
    ("sampling_rate_per_task", "0.5"),
    ("drop_remainder", "true"),
    ("optimizer", "paired with loss"),
    ("mode", "sgd"),
    ("lr", "0.1"),
    ("momentum", "0.9"),
    ("beta1", "0.9"),
    ("beta2", "0.999"),
    ("eps", "1e-8"),
    ("weight_decay", "0"),
    ("lr_schedule", "step"),
    ("epochs", "10"),
    ("eval_every", "1"),
    ("metrics", "auroc,ap,pauc:0.3 (ndcg:5 for ranking and contrastive)"),
    ("seed", "0"),
    ("warm_start_epochs", "0"),
    ("warm_start_loss", "ce (listwise_ce for ranking)"),
    ("warm_start_mode", "adam"),
    ("warm_start_lr", "0.001"),
    ("warm_start_reinit", "true"),
    ("checkpoint_every", "0"),
    ("out_dir", ""),
    ("record_wall_clock", "false"),
];

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_str("").expect("defaults are valid")
    }
}

struct Raw {
    values: BTreeMap<String, (String, usize)>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| XriskError::Config {
                key: None,
                line: Some(lineno),
                msg: format!("expected `key = value`, got `{body}`"),
            })?;
            let k = k.trim().to_string();
            if !KEYS.iter().any(|(name, _)| *name == k) {
                return Err(XriskError::Config {
                    key: Some(k.clone()),
                    line: Some(lineno),
                    msg: "unknown key".into(),
                });
            }
            if values.contains_key(&k) {
                return Err(XriskError::Config {
                    key: Some(k),
                    line: Some(lineno),
                    msg: "duplicate key".into(),
                });
            }
            values.insert(k, (v.trim().to_string(), lineno));
        }
        Ok(Self { values })
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.values.get(key).map(|(_, l)| *l)
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(v, _)| v.as_str())
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.values.get(key) {
            None => Ok(default),
            Some((v, line)) => v.parse().map_err(|_| XriskError::Config {
                key: Some(key.into()),
                line: Some(*line),
                msg: format!("cannot parse `{v}`"),
            }),
        }
    }

    fn parsed<T: FromStr<Err = XriskError>>(&self, key: &str, default: T) -> Result<T> {
        match self.values.get(key) {
            None => Ok(default),
            Some((v, _)) => v.parse().map_err(|e| self.locate(key, e)),
        }
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.str(key) {
            None => Ok(default),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(other) => Err(XriskError::Config {
                key: Some(key.into()),
                line: self.line(key),
                msg: format!("expected true or false, got `{other}`"),
            }),
        }
    }

    /// Attach the line of `fallback_key` (or of the key the error names).
    fn locate(&self, fallback_key: &str, e: XriskError) -> XriskError {
        match e {
            XriskError::Config { key, line: None, msg } => {
                let k = key.unwrap_or_else(|| fallback_key.to_string());
                let line = self.line(&k);
                XriskError::Config { key: Some(k), line, msg }
            }
            other => other,
        }
    }
}

impl FromStr for RunConfig {
    type Err = XriskError;

    fn from_str(text: &str) -> Result<Self> {
        let raw = Raw::parse(text)?;
        build(&raw).map_err(|e| raw.locate("dataset", e))
    }
}

fn build(raw: &Raw) -> Result<RunConfig> {
    let loss: LossKind = raw.parsed("loss", LossKind::Aucm)?;
    let (paired_opt, paired_sampler) = loss.pairing();
    let seed: u64 = raw.get("seed", 0)?;

    let dataset_name = raw.str("dataset").unwrap_or("gaussian");
    let mut synth = SynthSpec {
        n: raw.get("n", 1000)?,
        dim: raw.get("dim", 10)?,
        imratio: raw.get("imratio", 0.1)?,
        separation: raw.get("separation", 1.5)?,
        queries: raw.get("queries", 20)?,
        items_per_query: raw.get("items_per_query", 20)?,
        noise: raw.get("noise", 0.5)?,
        regenerate_irrelevant: raw.flag("regenerate_irrelevant", true)?,
        seed,
        ..SynthSpec::default()
    };
    let dataset = if dataset_name == "csv" {
        let train = raw
            .str("train_csv")
            .filter(|s| !s.is_empty())
            .ok_or_else(|| XriskError::config_key("train_csv", "dataset = csv needs train_csv"))?;
        DatasetSource::Csv {
            train: PathBuf::from(train),
            test: raw.str("test_csv").filter(|s| !s.is_empty()).map(PathBuf::from),
            format: raw.parsed("csv_format", CsvFormat::Binary)?,
        }
    } else {
        synth.kind = dataset_name.parse::<SynthKind>().map_err(|e| raw.locate("dataset", e))?;
        synth.validate()?;
        DatasetSource::Synthetic(synth.clone())
    };
    let n_test_default = match synth.kind {
        SynthKind::Ltr => synth.queries,
        _ => synth.n,
    };

    let task = loss.task();
    let default_metrics = match task {
        Task::Binary => "auroc,ap,pauc:0.3",
        Task::Ranking | Task::Contrastive => "ndcg:5",
    };
    let metrics = crate::metrics::parse_metric_list(raw.str("metrics").unwrap_or(default_metrics))
        .map_err(|e| raw.locate("metrics", e))?;

    let mode: OptimizerMode = raw.parsed("mode", OptimizerMode::SgdMomentum)?;
    let optimizer: OptimizerKind = raw.parsed("optimizer", paired_opt)?;
    let optim = OptimizerConfig {
        mode: match optimizer {
            OptimizerKind::Sgd => OptimizerMode::SgdMomentum,
            OptimizerKind::Adam => OptimizerMode::Adam,
            _ => mode,
        },
        lr: raw.get("lr", 0.1)?,
        momentum: raw.get("momentum", 0.9)?,
        beta1: raw.get("beta1", 0.9)?,
        beta2: raw.get("beta2", 0.999)?,
        eps: raw.get("eps", 1e-8)?,
        weight_decay: raw.get("weight_decay", 0.0)?,
    };
    let epochs: usize = raw.get("epochs", 10)?;
    let lr_schedule = match raw.str("lr_schedule").unwrap_or("step") {
        "step" => LrSchedule::Step { total_epochs: epochs },
        "constant" => LrSchedule::Constant,
        other => {
            return Err(XriskError::config_key("lr_schedule", format!("expected step or constant, got `{other}`")))
        }
    };

    let warm_epochs: usize = raw.get("warm_start_epochs", 0)?;
    let warm_start = if warm_epochs > 0 {
        let default_loss = match task {
            Task::Ranking => LossKind::ListwiseCe,
            _ => LossKind::Ce,
        };
        Some(WarmStart {
            epochs: warm_epochs,
            loss: raw.parsed("warm_start_loss", default_loss)?,
            mode: raw.parsed("warm_start_mode", OptimizerMode::Adam)?,
            lr: raw.get("warm_start_lr", 0.001)?,
            reinit_last_layer: raw.flag("warm_start_reinit", true)?,
        })
    } else {
        None
    };

    let cfg = RunConfig {
        dataset,
        n_test: raw.get("n_test", n_test_default)?,
        model: raw.parsed("model", ModelKind::Linear)?,
        hidden_dim: raw.get("hidden_dim", 16)?,
        embed_dim: raw.get("embed_dim", 8)?,
        score_activation: raw.parsed(
            "score_activation",
            match loss {
                LossKind::Aucm | LossKind::Ap | LossKind::Pauc => OutputActivation::Sigmoid,
                _ => OutputActivation::Identity,
            },
        )?,
        loss,
        surrogate: raw.parsed("surrogate", SurrogateKind::SquaredHinge)?,
        margin: raw.get("margin", 1.0)?,
        gamma: raw.get("gamma", 0.9)?,
        lambda: raw.get("lambda", 1.0)?,
        tau: raw.get("tau", 0.1)?,
        focal_alpha: raw.get("focal_alpha", 1.0)?,
        focal_gamma: raw.get("focal_gamma", 0.5)?,
        estimator_order: raw.parsed("estimator_order", EstimatorOrder::Updated)?,
        sampler: raw.parsed("sampler", paired_sampler)?,
        batch_size: raw.get("batch_size", 64)?,
        sampling_rate: raw.get("sampling_rate", 0.5)?,
        sampled_tasks: raw.get("sampled_tasks", 4)?,
        batch_size_per_task: raw.get("batch_size_per_task", 10)?,
        sampling_rate_per_task: raw.get("sampling_rate_per_task", 0.5)?,
        drop_remainder: raw.flag("drop_remainder", true)?,
        optimizer,
        optim,
        lr_schedule,
        epochs,
        eval_every: raw.get("eval_every", 1)?,
        metrics,
        seed,
        warm_start,
        checkpoint_every: raw.get("checkpoint_every", 0)?,
        out_dir: raw.str("out_dir").filter(|s| !s.is_empty()).map(PathBuf::from),
        record_wall_clock: raw.flag("record_wall_clock", false)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn task(&self) -> Task {
        self.loss.task()
    }

    /// Range and compatibility checks; run after any programmatic edit.
    pub fn validate(&self) -> Result<()> {
        let range = |key: &str, ok: bool, msg: String| {
            if ok {
                Ok(())
            } else {
                Err(XriskError::config_key(key, msg))
            }
        };
        if !is_compatible(self.loss, self.sampler, self.optimizer) {
            return Err(XriskError::config_key(
                "sampler",
                format!(
                    "loss {} cannot run with sampler {} and optimizer {}",
                    self.loss, self.sampler, self.optimizer
                ),
            ));
        }
        range("gamma", self.gamma > 0.0 && self.gamma <= 1.0, format!("gamma must lie in (0, 1], got {}", self.gamma))?;
        range("margin", self.margin.is_finite() && self.margin > 0.0, format!("margin must be > 0, got {}", self.margin))?;
        range("lambda", self.lambda.is_finite() && self.lambda > 0.0, format!("lambda must be > 0, got {}", self.lambda))?;
        range("tau", self.tau.is_finite() && self.tau > 0.0, format!("tau must be > 0, got {}", self.tau))?;
        range("focal_alpha", self.focal_alpha > 0.0, format!("focal_alpha must be > 0, got {}", self.focal_alpha))?;
        range("focal_gamma", self.focal_gamma >= 0.0, format!("focal_gamma must be >= 0, got {}", self.focal_gamma))?;
        range("batch_size", self.batch_size >= 1, "batch_size must be positive".into())?;
        if self.sampler == SamplerKind::Dual {
            crate::sampler::positives_per_batch(self.batch_size, self.sampling_rate)?;
        }
        if self.sampler == SamplerKind::Tri {
            crate::sampler::positives_per_batch(self.batch_size_per_task, self.sampling_rate_per_task)
                .map_err(|e| match e {
                    XriskError::Config { msg, .. } => XriskError::config_key("sampling_rate_per_task", msg),
                    other => other,
                })?;
            range("sampled_tasks", self.sampled_tasks >= 1, "sampled_tasks must be positive".into())?;
        }
        range(
            "score_activation",
            self.score_activation == OutputActivation::Identity
                || !matches!(self.loss, LossKind::Ce | LossKind::Focal | LossKind::Gcl),
            format!("loss {} needs identity scores", self.loss),
        )?;
        range("eval_every", self.eval_every >= 1, "eval_every must be positive".into())?;
        range("hidden_dim", self.hidden_dim >= 1, "hidden_dim must be positive".into())?;
        range("embed_dim", self.embed_dim >= 1, "embed_dim must be positive".into())?;
        self.optim.validate()?;
        for m in &self.metrics {
            let ok = match self.task() {
                Task::Binary => !matches!(m, MetricSpec::Ndcg(_)),
                Task::Ranking | Task::Contrastive => matches!(m, MetricSpec::Ndcg(_)),
            };
            range("metrics", ok, format!("metric {m} does not apply to loss {}", self.loss))?;
        }
        range("metrics", !self.metrics.is_empty(), "at least one metric is required".into())?;
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            let want = match self.task() {
                Task::Binary => SynthKind::GaussianBinary,
                Task::Ranking => SynthKind::Ltr,
                Task::Contrastive => SynthKind::Contrastive,
            };
            range(
                "dataset",
                spec.kind == want,
                format!("loss {} needs a {want} dataset, got {}", self.loss, spec.kind),
            )?;
        }
        if let DatasetSource::Csv { format, .. } = &self.dataset {
            let ok = match self.task() {
                Task::Binary => *format == CsvFormat::Binary,
                Task::Ranking => *format == CsvFormat::Ltr,
                Task::Contrastive => false,
            };
            range("csv_format", ok, format!("loss {} cannot train on this CSV format", self.loss))?;
        }
        if let Some(ws) = &self.warm_start {
            let ok = match self.task() {
                Task::Binary => matches!(ws.loss, LossKind::Ce | LossKind::Focal),
                Task::Ranking => ws.loss == LossKind::ListwiseCe,
                Task::Contrastive => false,
            };
            range(
                "warm_start_loss",
                ok,
                format!("warm start with {} is not available for loss {}", ws.loss, self.loss),
            )?;
            range("warm_start_lr", ws.lr.is_finite() && ws.lr > 0.0, "warm_start_lr must be > 0".into())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_fills_defaults() {
        let cfg: RunConfig = "loss = aucm\ndataset = gaussian\nepochs = 5\n".parse().unwrap();
        assert_eq!(cfg.epochs, 5);
        assert_eq!(cfg.sampler, SamplerKind::Dual);
        assert_eq!(cfg.optimizer, OptimizerKind::Pesg);
        assert_eq!(cfg.batch_size, 64);
        assert_eq!(cfg.metrics.len(), 3);
        assert_eq!(cfg.lr_schedule, LrSchedule::Step { total_epochs: 5 });
        assert_eq!(cfg.score_activation, OutputActivation::Sigmoid);
        let ce: RunConfig = "loss = ce\n".parse().unwrap();
        assert_eq!(ce.score_activation, OutputActivation::Identity);
        assert!("loss = ce\nscore_activation = sigmoid\n".parse::<RunConfig>().is_err());
    }

    #[test]
    fn incompatible_sampler_is_rejected() {
        let err = "loss = aucm\nsampler = tri\n".parse::<RunConfig>().unwrap_err();
        match err {
            XriskError::Config { key, line, .. } => {
                assert_eq!(key.as_deref(), Some("sampler"));
                assert_eq!(line, Some(2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gamma_out_of_range_names_key_and_line() {
        let err = "# comment\n\ngamma = 1.5\n".parse::<RunConfig>().unwrap_err();
        let text = err.to_string();
        assert!(text.contains("gamma") && text.contains("line 3"), "{text}");
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let err = "loss = ap\nbogus = 1\n".parse::<RunConfig>().unwrap_err();
        assert!(err.to_string().contains("bogus") && err.to_string().contains("line 2"));
        assert!("epochs = 1\nepochs = 2\n".parse::<RunConfig>().is_err());
        assert!("epochs 1\n".parse::<RunConfig>().is_err());
        assert!("epochs = many\n".parse::<RunConfig>().is_err());
    }

    #[test]
    fn ranking_defaults() {
        let cfg: RunConfig = "loss = ndcg\ndataset = ltr\n".parse().unwrap();
        assert_eq!(cfg.sampler, SamplerKind::Tri);
        assert_eq!(cfg.metrics, vec![MetricSpec::Ndcg(5)]);
        assert!("loss = ndcg\ndataset = gaussian\n".parse::<RunConfig>().is_err());
        assert!("loss = ndcg\ndataset = ltr\nmetrics = auroc\n".parse::<RunConfig>().is_err());
    }

    #[test]
    fn compatibility_table() {
        use LossKind as L;
        use OptimizerKind as O;
        use SamplerKind as S;
        assert!(is_compatible(L::Ap, S::Dual, O::Soap));
        assert!(is_compatible(L::Pauc, S::Random, O::Sopas));
        assert!(!is_compatible(L::Pauc, S::Dual, O::Pesg));
        assert!(is_compatible(L::ListwiseCe, S::Tri, O::Song));
        assert!(!is_compatible(L::Gcl, S::Dual, O::Sogclr));
        assert!(is_compatible(L::Ce, S::Dual, O::Adam));
        assert!(!is_compatible(L::Ce, S::Tri, O::Sgd));
    }

    #[test]
    fn warm_start_defaults_by_task() {
        let cfg: RunConfig = "loss = pauc\nwarm_start_epochs = 2\n".parse().unwrap();
        let ws = cfg.warm_start.unwrap();
        assert_eq!(ws.loss, LossKind::Ce);
        assert_eq!(ws.mode, OptimizerMode::Adam);
        assert!(ws.reinit_last_layer);
        let cfg: RunConfig = "loss = ndcg\ndataset = ltr\nwarm_start_epochs = 1\n".parse().unwrap();
        assert_eq!(cfg.warm_start.unwrap().loss, LossKind::ListwiseCe);
        assert!("loss = gcl\ndataset = contrastive\nwarm_start_epochs = 1\n".parse::<RunConfig>().is_err());
    }
}
