//! Compositional X-risk optimization at desk scale.
//!
//! The crate is laid out along the training pipeline: [`data`] supplies an
//! indexed dataset, [`sampler`] builds controlled mini-batches, [`model`]
//! scores them, [`losses`] turns scores into dynamic mini-batch gradients and
//! [`optim`] applies them. [`harness`] wires these into runs and sweeps, and
//! [`oracle`] holds the brute-force references the tests compare against.

pub mod data;
pub mod error;
pub mod harness;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod oracle;
pub mod sampler;
pub mod state;

pub use error::{Result, XriskError};
