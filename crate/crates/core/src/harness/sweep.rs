//! Ablation sweeps over gamma, sampling rate and batch size.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Result, XriskError};
use crate::model::format_f64;

use super::config::{RunConfig, SamplerKind, Task};
use super::record::{emit_curves, RunRecord, Split};
use super::train::Trainer;

/// Gamma grid tried for the tuned variant of a batch-size sweep.
pub const TUNING_GAMMAS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Gamma,
    SamplingRate,
    BatchSize,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Gamma => "gamma",
            SweepAxis::SamplingRate => "sampling_rate",
            SweepAxis::BatchSize => "batch_size",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = XriskError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(SweepAxis::Gamma),
            "sampling_rate" => Ok(SweepAxis::SamplingRate),
            "batch_size" => Ok(SweepAxis::BatchSize),
            other => Err(XriskError::config_key(
                "axis",
                format!("unknown sweep axis `{other}` (gamma, sampling_rate, batch_size)"),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub value: String,
    /// `base` for single-variant axes; `tuned` or `gamma_1` for batch size.
    pub variant: String,
    pub gamma: f64,
    pub record: RunRecord,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub split: Split,
    pub metric: String,
    /// Every run, including the discarded tuning runs.
    pub runs: Vec<SweepRun>,
    /// One entry per (value, variant), in value order.
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub variant: String,
    pub gamma: f64,
    pub final_value: f64,
    /// Highest final value within the row's variant.
    pub best: bool,
}

fn apply_value(base: &RunConfig, axis: SweepAxis, value: &str) -> Result<RunConfig> {
    let mut cfg = base.clone();
    let bad = |msg: String| XriskError::config_key("values", msg);
    match axis {
        SweepAxis::Gamma => {
            cfg.gamma = value.parse().map_err(|_| bad(format!("`{value}` is not a gamma")))?;
        }
        SweepAxis::SamplingRate => {
            if value == "original" {
                cfg.sampler = SamplerKind::Random;
            } else {
                let rate: f64 = value.parse().map_err(|_| bad(format!("`{value}` is not a sampling rate")))?;
                if cfg.task() == Task::Ranking {
                    cfg.sampling_rate_per_task = rate;
                } else {
                    cfg.sampling_rate = rate;
                }
            }
        }
        SweepAxis::BatchSize => {
            cfg.batch_size = value.parse().map_err(|_| bad(format!("`{value}` is not a batch size")))?;
        }
    }
    cfg.out_dir = None;
    cfg.checkpoint_every = 0;
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one training per sweep value (in parallel, each with the base seed)
/// and ranks them by the final value of the first configured metric on the
/// test split, or the train split when there is no test split.
///
/// The batch-size axis runs two variants per size: `tuned` keeps the best of
/// the [`TUNING_GAMMAS`] runs and `gamma_1` uses `gamma = 1`.
pub fn run_sweep(base: &RunConfig, axis: SweepAxis, values: &[String]) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(XriskError::config_key("values", "a sweep needs at least one value"));
    }
    let mut jobs: Vec<(String, String, RunConfig)> = Vec::new();
    for v in values {
        let cfg = apply_value(base, axis, v)?;
        if axis == SweepAxis::BatchSize {
            for g in TUNING_GAMMAS {
                let mut c = cfg.clone();
                c.gamma = g;
                jobs.push((v.clone(), "tuned".into(), c));
            }
            let mut c = cfg;
            c.gamma = 1.0;
            jobs.push((v.clone(), "gamma_1".into(), c));
        } else {
            jobs.push((v.clone(), "base".into(), cfg));
        }
    }
    let runs: Vec<SweepRun> = jobs
        .into_par_iter()
        .map(|(value, variant, cfg)| {
            let gamma = cfg.gamma;
            let record = Trainer::new(cfg)
                .and_then(Trainer::run)
                .map_err(|e| e.in_context(format!("sweep {axis}={value} gamma={gamma}")))?;
            Ok(SweepRun {
                value,
                variant,
                gamma,
                record,
            })
        })
        .collect::<Result<_>>()?;

    let metric = base.metrics[0].to_string();
    let split = if runs[0].record.splits().contains(&Split::Test) { Split::Test } else { Split::Train };
    let score = |r: &SweepRun| r.record.final_value(split, &metric).unwrap_or(f64::NEG_INFINITY);

    let mut rows: Vec<SweepRow> = Vec::new();
    for run in &runs {
        let v = score(run);
        match rows.iter_mut().find(|r| r.value == run.value && r.variant == run.variant) {
            Some(row) if v > row.final_value => {
                row.final_value = v;
                row.gamma = run.gamma;
            }
            Some(_) => {}
            None => rows.push(SweepRow {
                value: run.value.clone(),
                variant: run.variant.clone(),
                gamma: run.gamma,
                final_value: v,
                best: false,
            }),
        }
    }
    let variants: Vec<String> = rows.iter().map(|r| r.variant.clone()).collect();
    for variant in variants {
        let best = rows
            .iter()
            .filter(|r| r.variant == variant)
            .map(|r| r.final_value)
            .fold(f64::NEG_INFINITY, f64::max);
        if let Some(r) = rows.iter_mut().find(|r| r.variant == variant && r.final_value == best) {
            r.best = true;
        }
    }
    Ok(SweepResult {
        axis,
        split,
        metric,
        runs,
        rows,
    })
}

impl SweepResult {
    pub fn row(&self, value: &str, variant: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.value == value && r.variant == variant)
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("axis,value,variant,gamma,split,metric,final,best\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                self.axis,
                r.value,
                r.variant,
                format_f64(r.gamma),
                self.split,
                self.metric,
                format_f64(r.final_value),
                if r.best { "*" } else { "" }
            ));
        }
        out
    }

    /// Writes `sweep_summary.csv` and one curve directory per run.
    pub fn emit(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("sweep_summary.csv"), self.summary_csv())?;
        for run in &self.runs {
            let name = format!("{}_{}_{}_gamma_{}", self.axis, run.value, run.variant, format_f64(run.gamma));
            emit_curves(&run.record, &dir.join(name))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunConfig {
        "loss = pauc\nn = 150\nn_test = 80\nimratio = 0.2\ndim = 3\nbatch_size = 16\nepochs = 2\nseed = 1\n"
            .parse()
            .unwrap()
    }

    #[test]
    fn gamma_sweep_has_one_row_per_value() {
        let values: Vec<String> = ["0.1", "0.5", "1.0"].iter().map(|s| s.to_string()).collect();
        let res = run_sweep(&base(), SweepAxis::Gamma, &values).unwrap();
        assert_eq!(res.rows.len(), 3);
        assert_eq!(res.rows.iter().filter(|r| r.best).count(), 1);
        let csv = res.summary_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("axis,value,variant"));
    }

    #[test]
    fn sampling_rate_accepts_original() {
        let values: Vec<String> = ["original", "0.5"].iter().map(|s| s.to_string()).collect();
        let res = run_sweep(&base(), SweepAxis::SamplingRate, &values).unwrap();
        assert_eq!(res.rows[0].value, "original");
        assert!(run_sweep(&base(), SweepAxis::SamplingRate, &["1.5".to_string()]).is_err());
    }

    #[test]
    fn batch_size_runs_both_variants() {
        let res = run_sweep(&base(), SweepAxis::BatchSize, &["8".to_string()]).unwrap();
        assert_eq!(res.runs.len(), TUNING_GAMMAS.len() + 1);
        assert!(res.row("8", "tuned").is_some());
        assert_eq!(res.row("8", "gamma_1").unwrap().gamma, 1.0);
    }

    #[test]
    fn gamma_out_of_domain_is_rejected() {
        assert!(run_sweep(&base(), SweepAxis::Gamma, &["0".to_string()]).is_err());
        assert!("depth".parse::<SweepAxis>().is_err());
    }
}
