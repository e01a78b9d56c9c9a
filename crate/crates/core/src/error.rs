use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum XriskError {
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("beta too small: floor({n_neg} * {beta}) = 0 negatives selected")]
    BetaTooSmall { n_neg: usize, beta: f64 },

    #[error("configuration error{}: {msg}", fmt_key(key, line))]
    Config {
        key: Option<String>,
        line: Option<usize>,
        msg: String,
    },

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("batch composition error: {0}")]
    BatchComposition(String),

    #[error("{context}: {source}")]
    Run {
        context: String,
        #[source]
        source: Box<XriskError>,
    },

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("index {index} out of range for dataset of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("oracle size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn fmt_key(key: &Option<String>, line: &Option<usize>) -> String {
    match (key, line) {
        (Some(k), Some(l)) => format!(" (key `{k}`, line {l})"),
        (Some(k), None) => format!(" (key `{k}`)"),
        (None, Some(l)) => format!(" (line {l})"),
        (None, None) => String::new(),
    }
}

impl XriskError {
    pub fn config(msg: impl Into<String>) -> Self {
        XriskError::Config {
            key: None,
            line: None,
            msg: msg.into(),
        }
    }

    pub fn config_key(key: impl Into<String>, msg: impl Into<String>) -> Self {
        XriskError::Config {
            key: Some(key.into()),
            line: None,
            msg: msg.into(),
        }
    }

    /// Wraps the error with a note about where in a run it happened.
    pub fn in_context(self, context: impl Into<String>) -> Self {
        XriskError::Run {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            XriskError::DegenerateLabels(_) => "degenerate_labels",
            XriskError::Shape(_) => "shape",
            XriskError::BetaTooSmall { .. } => "beta_too_small",
            XriskError::Config { .. } => "config",
            XriskError::NumericDomain(_) => "numeric_domain",
            XriskError::BatchComposition(_) => "batch_composition",
            XriskError::Parse { .. } => "parse",
            XriskError::IndexOutOfRange { .. } => "index_out_of_range",
            XriskError::SizeGuard(_) => "size_guard",
            XriskError::Io(_) => "io",
            XriskError::Run { source, .. } => source.kind(),
        }
    }
}

pub type Result<T> = std::result::Result<T, XriskError>;
