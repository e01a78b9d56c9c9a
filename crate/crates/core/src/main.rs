use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use xrisk::data::{write_csv_dataset, CsvFormat, SynthKind};
use xrisk::harness::config::DatasetSource;
use xrisk::harness::{parse_config, resume_training, run_sweep, run_training, RunRecord, SweepAxis};
use xrisk::metrics::{mean_ndcg_at_k, parse_metric_list, evaluate_all, LabeledScores, MetricSpec};
use xrisk::model::format_f64;
use xrisk::{Result, XriskError};

#[derive(Parser)]
#[command(name = "xrisk", version, about = "Train and evaluate compositional ranking and contrastive objectives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for curves and checkpoints (overrides `out_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue from a checkpoint directory.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run one training per value of an ablation axis.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// gamma, sampling_rate or batch_size.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; sampling_rate also accepts `original`.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate metrics on a `score,label[,query_id]` CSV.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value = "auroc,ap,pauc:0.3")]
        metrics: String,
    },
    /// Write the training split of a synthetic dataset as CSV.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_summary(record: &RunRecord) {
    print!("{}", record.summary_csv());
}

fn eval_scores(path: &PathBuf, metrics: &str) -> Result<()> {
    let specs = parse_metric_list(metrics)?;
    let mut reader = csv::Reader::from_path(path).map_err(|e| XriskError::Parse {
        row: 0,
        msg: e.to_string(),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| XriskError::Parse { row: 0, msg: e.to_string() })?
        .clone();
    let with_query = headers.len() >= 3;
    let (mut scores, mut labels, mut queries) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| XriskError::Parse { row, msg: e.to_string() })?;
        let field = |k: usize| -> Result<&str> {
            rec.get(k).ok_or_else(|| XriskError::Parse {
                row,
                msg: format!("missing column {}", k + 1),
            })
        };
        let num = |s: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| XriskError::Parse {
                row,
                msg: format!("`{s}` is not a number"),
            })
        };
        scores.push(num(field(0)?)?);
        labels.push(num(field(1)?)?);
        if with_query {
            let q = field(2)?;
            queries.push(q.trim().parse::<usize>().map_err(|_| XriskError::Parse {
                row,
                msg: format!("`{q}` is not a query id"),
            })?);
        }
    }
    println!("metric,value");
    if with_query {
        for m in &specs {
            let MetricSpec::Ndcg(k) = *m else {
                return Err(XriskError::config_key("metrics", format!("{m} needs scores without query ids")));
            };
            println!("{m},{}", format_f64(mean_ndcg_at_k(&queries, &labels, &scores, k)?));
        }
    } else {
        let ls = LabeledScores::new(scores, labels)?;
        for (name, v) in evaluate_all(&ls, &specs)? {
            println!("{name},{}", format_f64(v));
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            resume,
        } => {
            let mut cfg = parse_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if out.is_some() {
                cfg.out_dir = out;
            }
            let record = match resume {
                Some(dir) => resume_training(&cfg, &dir)?,
                None => run_training(&cfg)?,
            };
            print_summary(&record);
        }
        Command::Sweep {
            config,
            axis,
            values,
            out,
        } => {
            let cfg = parse_config(&config)?;
            let axis: SweepAxis = axis.parse()?;
            let result = run_sweep(&cfg, axis, &values)?;
            if let Some(dir) = out.or(cfg.out_dir) {
                result.emit(&dir)?;
            }
            print!("{}", result.summary_csv());
        }
        Command::Eval { scores, metrics } => eval_scores(&scores, &metrics)?,
        Command::Gen { spec, out } => {
            let cfg = parse_config(&spec)?;
            let DatasetSource::Synthetic(mut s) = cfg.dataset else {
                return Err(XriskError::config_key("dataset", "gen needs a synthetic dataset"));
            };
            let format = match s.kind {
                SynthKind::GaussianBinary => CsvFormat::Binary,
                SynthKind::Ltr => CsvFormat::Ltr,
                SynthKind::Contrastive => {
                    return Err(XriskError::config_key("dataset", "contrastive data has no CSV format"))
                }
            };
            s.seed = cfg.seed;
            let ds = s.generate()?;
            let file = std::fs::File::create(&out)?;
            write_csv_dataset(&ds, format, std::io::BufWriter::new(file))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: kind={} msg={msg}", e.kind());
            ExitCode::from(2)
        }
    }
}
