//! Error-bounded lossy compression inside collective communication.
//!
//! The crate simulates a multi-rank job in one process: [`simnet`] moves
//! byte messages between ranks and keeps a logical clock per rank driven by
//! the [`costmodel`]; [`collectives`] implements ring, recursive-doubling and
//! binomial-tree schedules that compress with the [`codec`]; [`metrics`]
//! turns a run into an accuracy and timing report.

pub mod cli;
pub mod codec;
pub mod collectives;
pub mod costmodel;
pub mod data;
pub mod metrics;
pub mod simnet;
pub mod stacking;

pub use codec::{compress, decompress, Compressor, ErrorBound};
pub use collectives::{run_collective, Algorithm, AlgorithmId, CodecKind, ReduceOp, RunSpec};
pub use costmodel::CostParams;
pub use metrics::CollectiveReport;
pub use simnet::Network;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Codec(#[from] codec::CodecError),
    #[error(transparent)]
    Cost(#[from] costmodel::CostConfigError),
    #[error(transparent)]
    Net(#[from] simnet::NetError),
    #[error(transparent)]
    Collective(#[from] collectives::CollectiveError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
