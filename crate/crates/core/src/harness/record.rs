//! Evaluation records and their CSV emission.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Result, XriskError};
use crate::model::format_f64;
use crate::state::StateMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = XriskError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(XriskError::Parse {
                row: 0,
                msg: format!("unknown split `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalRow {
    pub epoch: usize,
    pub split: Split,
    pub metric: String,
    pub value: f64,
    /// Seconds since the run started; only kept when wall-clock recording is on.
    pub wall_seconds: Option<f64>,
}

/// Totals over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunCounters {
    pub floor_clamps: u64,
    pub exp_clips: u64,
    /// Random-sampler batches dropped for lacking a class the loss needs.
    pub skipped_batches: u64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub split: Split,
    pub metric: String,
    pub final_value: f64,
    pub best_value: f64,
    pub best_epoch: usize,
}

/// Everything a run reports. Equality ignores wall-clock times and compares
/// floats bitwise.
#[derive(Debug, Clone, Default)]
pub struct RunRecord {
    pub metrics: Vec<String>,
    pub rows: Vec<EvalRow>,
    /// Mean mini-batch loss of each training epoch, warm start excluded.
    pub epoch_losses: Vec<f64>,
    pub counters: RunCounters,
}

impl PartialEq for RunRecord {
    fn eq(&self, other: &Self) -> bool {
        self.metrics == other.metrics
            && self.counters == other.counters
            && self.epoch_losses.len() == other.epoch_losses.len()
            && self
                .epoch_losses
                .iter()
                .zip(&other.epoch_losses)
                .all(|(a, b)| a.to_bits() == b.to_bits())
            && self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                a.epoch == b.epoch && a.split == b.split && a.metric == b.metric && a.value.to_bits() == b.value.to_bits()
            })
    }
}

impl RunRecord {
    pub fn new(metrics: Vec<String>) -> Self {
        Self {
            metrics,
            ..Self::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn splits(&self) -> Vec<Split> {
        let mut s: Vec<Split> = self.rows.iter().map(|r| r.split).collect();
        s.sort();
        s.dedup();
        s
    }

    /// Distinct evaluation epochs, ascending.
    pub fn eval_epochs(&self) -> Vec<usize> {
        let mut e: Vec<usize> = self.rows.iter().map(|r| r.epoch).collect();
        e.dedup();
        e
    }

    pub fn value(&self, epoch: usize, split: Split, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.epoch == epoch && r.split == split && r.metric == metric)
            .map(|r| r.value)
    }

    /// Value at the last evaluation.
    pub fn final_value(&self, split: Split, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .rev()
            .find(|r| r.split == split && r.metric == metric)
            .map(|r| r.value)
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out = Vec::new();
        for split in self.splits() {
            for m in &self.metrics {
                let series: Vec<&EvalRow> = self.rows.iter().filter(|r| r.split == split && &r.metric == m).collect();
                let Some(last) = series.last() else { continue };
                let mut best = series[0];
                for r in &series {
                    if r.value > best.value {
                        best = r;
                    }
                }
                out.push(SummaryRow {
                    split,
                    metric: m.clone(),
                    final_value: last.value,
                    best_value: best.value,
                    best_epoch: best.epoch,
                });
            }
        }
        out
    }

    pub fn to_state(&self) -> StateMap {
        let mut s = StateMap::new();
        s.put_list("metrics", &self.metrics);
        s.put_list("row_epoch", &self.rows.iter().map(|r| r.epoch).collect::<Vec<_>>());
        s.put_list("row_split", &self.rows.iter().map(|r| r.split).collect::<Vec<_>>());
        s.put_list("row_metric", &self.rows.iter().map(|r| r.metric.clone()).collect::<Vec<_>>());
        s.put_f64s("row_value", &self.rows.iter().map(|r| r.value).collect::<Vec<_>>());
        s.put_list(
            "row_wall",
            &self
                .rows
                .iter()
                .map(|r| r.wall_seconds.map(format_f64).unwrap_or_else(|| "-".into()))
                .collect::<Vec<_>>(),
        );
        s.put_f64s("epoch_losses", &self.epoch_losses);
        s.put("floor_clamps", self.counters.floor_clamps);
        s.put("exp_clips", self.counters.exp_clips);
        s.put("skipped_batches", self.counters.skipped_batches);
        s.put("steps", self.counters.steps);
        s
    }

    pub fn from_state(s: &StateMap) -> Result<Self> {
        let epochs: Vec<usize> = s.get_list("row_epoch")?;
        let splits: Vec<Split> = s.get_list("row_split")?;
        let metrics: Vec<String> = s.get_list("row_metric")?;
        let values: Vec<f64> = s.get_list("row_value")?;
        let walls: Vec<String> = s.get_list("row_wall")?;
        let n = epochs.len();
        if [splits.len(), metrics.len(), values.len(), walls.len()].iter().any(|&l| l != n) {
            return Err(XriskError::Parse {
                row: 0,
                msg: "record columns have different lengths".into(),
            });
        }
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let wall_seconds = match walls[i].as_str() {
                "-" => None,
                w => Some(w.parse().map_err(|_| XriskError::Parse {
                    row: 0,
                    msg: format!("bad wall-clock value `{w}`"),
                })?),
            };
            rows.push(EvalRow {
                epoch: epochs[i],
                split: splits[i],
                metric: metrics[i].clone(),
                value: values[i],
                wall_seconds,
            });
        }
        Ok(Self {
            metrics: s.get_list("metrics")?,
            rows,
            epoch_losses: s.get_list("epoch_losses")?,
            counters: RunCounters {
                floor_clamps: s.get("floor_clamps")?,
                exp_clips: s.get("exp_clips")?,
                skipped_batches: s.get("skipped_batches")?,
                steps: s.get("steps")?,
            },
        })
    }

    /// Curve CSV for one split: `epoch` then one column per metric in
    /// configured order, plus `wall_seconds` when recorded.
    pub fn curve_csv(&self, split: Split) -> String {
        let with_wall = self.rows.iter().any(|r| r.wall_seconds.is_some());
        let mut out = String::from("epoch");
        for m in &self.metrics {
            out.push(',');
            out.push_str(m);
        }
        if with_wall {
            out.push_str(",wall_seconds");
        }
        out.push('\n');
        for epoch in self.eval_epochs() {
            let rows: Vec<&EvalRow> = self.rows.iter().filter(|r| r.epoch == epoch && r.split == split).collect();
            if rows.is_empty() {
                continue;
            }
            out.push_str(&epoch.to_string());
            for m in &self.metrics {
                out.push(',');
                if let Some(r) = rows.iter().find(|r| &r.metric == m) {
                    out.push_str(&format_f64(r.value));
                }
            }
            if with_wall {
                out.push(',');
                if let Some(w) = rows[0].wall_seconds {
                    out.push_str(&format_f64(w));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("split,metric,final,best,best_epoch\n");
        for r in self.summary() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.split,
                r.metric,
                format_f64(r.final_value),
                format_f64(r.best_value),
                r.best_epoch
            ));
        }
        out
    }
}

/// Writes `curves_<split>.csv` per evaluated split, `summary.csv` and
/// `losses.csv` into `dir`, creating it if needed.
///
/// Floats use Rust's shortest round-trip formatting (`{:?}` on `f64`), so
/// parsing a value back yields the identical bits and re-emission is
/// byte-identical.
pub fn emit_curves(record: &RunRecord, dir: &Path) -> Result<()> {
    if record.is_empty() {
        return Err(XriskError::config("cannot emit curves for an empty record"));
    }
    std::fs::create_dir_all(dir)?;
    for split in record.splits() {
        std::fs::write(dir.join(format!("curves_{split}.csv")), record.curve_csv(split))?;
    }
    std::fs::write(dir.join("summary.csv"), record.summary_csv())?;
    let mut losses = String::from("epoch,loss\n");
    for (i, l) in record.epoch_losses.iter().enumerate() {
        losses.push_str(&format!("{},{}\n", i + 1, format_f64(*l)));
    }
    std::fs::write(dir.join("losses.csv"), losses)?;
    Ok(())
}
