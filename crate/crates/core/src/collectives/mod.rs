//! Compression-enabled collectives over [`simnet`](crate::simnet).
//!
//! Every collective takes the network, a [`CodecKind`] and per-rank inputs,
//! drives all ranks step by step from one thread, and returns per-rank
//! outputs. Passing [`CodecKind::None`] runs the identical schedule with raw
//! payloads, which is how the lossless twins are built.

mod plan;
pub mod predict;
mod rd;
mod ring;
mod run;
mod scatter;

pub use plan::{ChunkLayout, RdRole, RecursiveDoublingPlan};
pub use rd::rd_allreduce;
pub use ring::{cprp2p_allgather, ring_allgather, ring_allreduce, ring_reduce_scatter};
pub use run::{direct_oracle, run_collective, RunOutput, RunSpec};
pub use scatter::binomial_scatter;

use crate::codec::{self, CodecError, Compressor, ErrorBound, FixedRateBlob};
use crate::costmodel::KernelKind;
use crate::simnet::{NetError, Network, Phase, RankId};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CollectiveError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
}

pub type Result<T> = std::result::Result<T, CollectiveError>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReduceOp {
    #[default]
    Sum,
    Max,
}

impl ReduceOp {
    /// `acc[j] = acc[j] op other[j]`.
    pub fn apply(self, acc: &mut [f32], other: &[f32]) {
        debug_assert_eq!(acc.len(), other.len());
        match self {
            ReduceOp::Sum => acc.iter_mut().zip(other).for_each(|(a, b)| *a += *b),
            ReduceOp::Max => acc.iter_mut().zip(other).for_each(|(a, b)| *a = a.max(*b)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    RingAllgather,
    RingReduceScatter,
    RingAllreduce,
    RdAllreduce,
    BinomialScatter,
    Cprp2pAllgather,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::RingAllgather,
        Algorithm::RingReduceScatter,
        Algorithm::RingAllreduce,
        Algorithm::RdAllreduce,
        Algorithm::BinomialScatter,
        Algorithm::Cprp2pAllgather,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Algorithm::RingAllgather => "ring-allgather",
            Algorithm::RingReduceScatter => "ring-reduce-scatter",
            Algorithm::RingAllreduce => "ring-allreduce",
            Algorithm::RdAllreduce => "rd-allreduce",
            Algorithm::BinomialScatter => "binomial-scatter",
            Algorithm::Cprp2pAllgather => "cprp2p-allgather",
        }
    }

    pub fn has_lossless_twin(self) -> bool {
        self != Algorithm::Cprp2pAllgather
    }

    pub fn is_reduction(self) -> bool {
        matches!(
            self,
            Algorithm::RingReduceScatter | Algorithm::RingAllreduce | Algorithm::RdAllreduce
        )
    }

    /// Worst-case per-element error against the exact result for a sum
    /// reduction with `size` ranks, in exact arithmetic.
    pub fn error_budget(self, size: usize, eb: f64) -> f64 {
        let n = size as f64;
        if size <= 1 {
            return 0.0;
        }
        match self {
            Algorithm::RingAllgather | Algorithm::BinomialScatter => eb,
            Algorithm::RingReduceScatter | Algorithm::Cprp2pAllgather => (n - 1.0) * eb,
            Algorithm::RingAllreduce => n * eb,
            Algorithm::RdAllreduce => {
                if size.is_power_of_two() {
                    (n - 1.0) * eb
                } else {
                    2.0 * n * eb
                }
            }
        }
    }
}

/// An algorithm with the lossless flag, as named on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AlgorithmId {
    pub algorithm: Algorithm,
    pub lossless: bool,
}

impl AlgorithmId {
    pub fn all() -> Vec<AlgorithmId> {
        let mut v: Vec<_> = Algorithm::ALL
            .iter()
            .map(|&a| AlgorithmId {
                algorithm: a,
                lossless: false,
            })
            .collect();
        v.extend(
            Algorithm::ALL
                .iter()
                .filter(|a| a.has_lossless_twin())
                .map(|&a| AlgorithmId {
                    algorithm: a,
                    lossless: true,
                }),
        );
        v
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lossless {
            write!(f, "lossless-{}", self.algorithm.id())
        } else {
            f.write_str(self.algorithm.id())
        }
    }
}

impl FromStr for AlgorithmId {
    type Err = CollectiveError;
    fn from_str(s: &str) -> Result<Self> {
        let (lossless, base) = match s.strip_prefix("lossless-") {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        Algorithm::ALL
            .iter()
            .find(|a| a.id() == base && (!lossless || a.has_lossless_twin()))
            .map(|&algorithm| AlgorithmId { algorithm, lossless })
            .ok_or_else(|| CollectiveError::UnknownAlgorithm(s.to_string()))
    }
}

/// What travels on the wire.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CodecKind {
    ErrorBounded(ErrorBound),
    /// Fixed-rate baseline at the given bits per value.
    FixedRate(u8),
    /// Raw little-endian binary32.
    None,
}

impl CodecKind {
    pub fn compresses(self) -> bool {
        !matches!(self, CodecKind::None)
    }

    pub fn error_bound(self) -> Option<f64> {
        match self {
            CodecKind::ErrorBounded(eb) => Some(eb.get()),
            _ => None,
        }
    }
}

/// Codec plus reusable scratch shared by all ranks of one run.
pub(crate) struct Lane {
    kind: CodecKind,
    compressor: Compressor,
}

impl Lane {
    pub(crate) fn new(kind: CodecKind) -> Self {
        Self {
            kind,
            compressor: Compressor::new(),
        }
    }

    fn encode(&mut self, data: &[f32], recon: Option<&mut Vec<f32>>) -> Result<Vec<u8>> {
        match self.kind {
            CodecKind::ErrorBounded(eb) => {
                let mut out = Vec::new();
                self.compressor.compress_into(data, eb, &mut out, recon)?;
                Ok(out)
            }
            CodecKind::FixedRate(bits) => {
                let blob = codec::fixed_rate_compress(data, bits)?;
                if let Some(r) = recon {
                    *r = codec::fixed_rate_decompress(&blob)?;
                }
                Ok(blob.to_bytes())
            }
            CodecKind::None => {
                if let Some(r) = recon {
                    r.clear();
                    r.extend_from_slice(data);
                }
                Ok(raw_bytes(data))
            }
        }
    }

    fn decode(&self, bytes: &[u8]) -> Result<Vec<f32>> {
        match self.kind {
            CodecKind::ErrorBounded(_) => Ok(codec::decompress(bytes)?),
            CodecKind::FixedRate(_) => Ok(codec::fixed_rate_decompress(&FixedRateBlob::from_bytes(bytes)?)?),
            CodecKind::None => from_raw_bytes(bytes),
        }
    }

    /// Encodes on `rank`, counting a compression when a codec is active.
    pub(crate) fn compress(
        &mut self,
        net: &mut Network,
        rank: RankId,
        data: &[f32],
        recon: Option<&mut Vec<f32>>,
    ) -> Result<Vec<u8>> {
        let bytes = self.encode(data, recon)?;
        if self.kind.compresses() {
            net.record_compress(rank, 4 * data.len(), bytes.len());
        }
        Ok(bytes)
    }

    pub(crate) fn decompress(&self, net: &mut Network, rank: RankId, bytes: &[u8]) -> Result<Vec<f32>> {
        let values = self.decode(bytes)?;
        if self.kind.compresses() {
            net.record_decompress(rank);
        }
        Ok(values)
    }

    /// Modeled kernel time for `elems` values, zero when nothing is compressed.
    pub(crate) fn kernel(&self, net: &Network, elems: usize, kind: KernelKind) -> f64 {
        if self.kind.compresses() {
            net.params().kernel_time(4 * elems, kind)
        } else {
            0.0
        }
    }
}

pub(crate) fn raw_bytes(data: &[f32]) -> Vec<u8> {
    data.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub(crate) fn from_raw_bytes(bytes: &[u8]) -> Result<Vec<f32>> {
    if !bytes.len().is_multiple_of(4) {
        return Err(CollectiveError::Shape(format!(
            "raw payload of {} bytes is not whole floats",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Compute one rank performs around a single exchange step.
///
/// Without overlap the compressor runs before the send and the decompressor
/// and reducer after the receive. With overlap the whole step's compute is
/// charged while the message is in flight, so a symmetric exchange costs
/// `max(comm, compute)`.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct StepCompute {
    pub compress: f64,
    pub decompress: f64,
    pub reduce: f64,
}

impl StepCompute {
    pub(crate) fn before_send(&self, net: &mut Network, rank: RankId) {
        if !net.params().overlap {
            net.charge(rank, Phase::Compress, self.compress);
        }
    }

    pub(crate) fn after_send(&self, net: &mut Network, rank: RankId) {
        if net.params().overlap {
            net.charge(rank, Phase::Compress, self.compress);
            net.charge(rank, Phase::Decompress, self.decompress);
            net.charge(rank, Phase::Reduce, self.reduce);
        }
    }

    pub(crate) fn after_recv(&self, net: &mut Network, rank: RankId) {
        if !net.params().overlap {
            net.charge(rank, Phase::Decompress, self.decompress);
            net.charge(rank, Phase::Reduce, self.reduce);
        }
    }
}

pub(crate) fn reduce_time(net: &Network, elems: usize) -> f64 {
    net.params().kernel_time(4 * elems, KernelKind::Reduce)
}

pub(crate) fn check_ranks<T>(net: &Network, inputs: &[T]) -> Result<()> {
    if inputs.len() != net.size() {
        return Err(CollectiveError::Shape(format!(
            "{} inputs for {} ranks",
            inputs.len(),
            net.size()
        )));
    }
    Ok(())
}

pub(crate) fn check_equal_lengths(inputs: &[Vec<f32>]) -> Result<usize> {
    let n = inputs.first().map_or(0, Vec::len);
    if let Some((r, v)) = inputs.iter().enumerate().find(|(_, v)| v.len() != n) {
        return Err(CollectiveError::Shape(format!(
            "rank {r} holds {} values, rank 0 holds {n}",
            v.len()
        )));
    }
    Ok(n)
}
