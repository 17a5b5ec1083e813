//! Deterministic in-process network of ranks with logical clocks.
//!
//! Every ordered rank pair has a FIFO channel of length-prefixed envelopes.
//! Sends never block: the sender pays only host staging and the envelope is
//! stamped with its arrival time. A receive advances the receiver's clock to
//! at least that arrival time. Collectives drive all ranks from a single
//! thread in a fixed order, so every run is reproducible bit for bit.

use crate::costmodel::CostParams;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::io::{self, Read, Write};
use thiserror::Error;

pub type RankId = usize;

pub const PREFIX_LEN: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("communicator size must be at least 1")]
    EmptyCommunicator,
    #[error("rank {rank} out of range for communicator of size {size}")]
    InvalidRank { rank: RankId, size: usize },
    #[error("rank {0} cannot send to itself")]
    SelfSend(RankId),
    #[error("deadlock: rank {at} waits on rank {from} but nothing was sent")]
    Deadlock { at: RankId, from: RankId },
    #[error("corrupt envelope from {from} to {to}: prefix {prefix}, body {body}")]
    Framing {
        from: RankId,
        to: RankId,
        prefix: u64,
        body: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunicatorSpec {
    pub size: usize,
    pub root: RankId,
}

impl CommunicatorSpec {
    pub fn new(size: usize, root: RankId) -> Result<Self, NetError> {
        if size == 0 {
            return Err(NetError::EmptyCommunicator);
        }
        if root >= size {
            return Err(NetError::InvalidRank { rank: root, size });
        }
        Ok(Self { size, root })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Compress,
    Decompress,
    Comm,
    Reduce,
    Staging,
    Other,
}

/// Per-rank operation counts and simulated time per phase.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OpCounters {
    pub n_compress: u64,
    pub n_decompress: u64,
    pub n_messages: u64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    /// Uncompressed bytes fed to the compressor.
    pub compress_in_bytes: u64,
    /// Compressed bytes it produced.
    pub compress_out_bytes: u64,
    pub compress_s: f64,
    pub decompress_s: f64,
    pub comm_s: f64,
    pub reduce_s: f64,
    pub staging_s: f64,
    pub other_s: f64,
}

impl OpCounters {
    pub fn total_s(&self) -> f64 {
        self.compress_s + self.decompress_s + self.comm_s + self.reduce_s + self.staging_s + self.other_s
    }

    fn phase_mut(&mut self, phase: Phase) -> &mut f64 {
        match phase {
            Phase::Compress => &mut self.compress_s,
            Phase::Decompress => &mut self.decompress_s,
            Phase::Comm => &mut self.comm_s,
            Phase::Reduce => &mut self.reduce_s,
            Phase::Staging => &mut self.staging_s,
            Phase::Other => &mut self.other_s,
        }
    }

    pub fn accumulate(&mut self, other: &OpCounters) {
        self.n_compress += other.n_compress;
        self.n_decompress += other.n_decompress;
        self.n_messages += other.n_messages;
        self.bytes_sent += other.bytes_sent;
        self.bytes_received += other.bytes_received;
        self.compress_in_bytes += other.compress_in_bytes;
        self.compress_out_bytes += other.compress_out_bytes;
        self.compress_s += other.compress_s;
        self.decompress_s += other.decompress_s;
        self.comm_s += other.comm_s;
        self.reduce_s += other.reduce_s;
        self.staging_s += other.staging_s;
        self.other_s += other.other_s;
    }
}

#[derive(Clone, Debug)]
struct Envelope {
    frame: Vec<u8>,
    arrival: f64,
}

/// One delivered-or-pending message as it went over the wire.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub from: RankId,
    pub to: RankId,
    /// Length prefix followed by the payload.
    pub frame: Vec<u8>,
}

impl TraceEntry {
    pub fn payload(&self) -> &[u8] {
        &self.frame[PREFIX_LEN..]
    }
}

/// Writes a trace as `from: u32 | to: u32 | frame` records.
pub fn dump_trace<W: Write>(trace: &[TraceEntry], mut w: W) -> io::Result<()> {
    for e in trace {
        w.write_all(&(e.from as u32).to_le_bytes())?;
        w.write_all(&(e.to as u32).to_le_bytes())?;
        w.write_all(&e.frame)?;
    }
    Ok(())
}

pub fn read_trace<R: Read>(mut r: R) -> io::Result<Vec<TraceEntry>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut out = Vec::new();
    let mut pos = 0;
    let bad = || io::Error::new(io::ErrorKind::InvalidData, "truncated trace record");
    while pos < bytes.len() {
        let head = bytes.get(pos..pos + 16).ok_or_else(bad)?;
        let from = u32::from_le_bytes(head[0..4].try_into().unwrap()) as usize;
        let to = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
        let len = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
        let end = pos + 8 + PREFIX_LEN + len;
        let frame = bytes.get(pos + 8..end).ok_or_else(bad)?.to_vec();
        out.push(TraceEntry { from, to, frame });
        pos = end;
    }
    Ok(out)
}

#[derive(Debug)]
pub struct Network {
    spec: CommunicatorSpec,
    params: CostParams,
    clocks: Vec<f64>,
    counters: Vec<OpCounters>,
    channels: Vec<VecDeque<Envelope>>,
    trace: Option<Vec<TraceEntry>>,
}

impl Network {
    pub fn new(spec: CommunicatorSpec, params: CostParams) -> Self {
        let n = spec.size;
        Self {
            spec,
            params,
            clocks: vec![0.0; n],
            counters: vec![OpCounters::default(); n],
            channels: vec![VecDeque::new(); n * n],
            trace: None,
        }
    }

    pub fn with_size(size: usize, params: CostParams) -> Result<Self, NetError> {
        Ok(Self::new(CommunicatorSpec::new(size, 0)?, params))
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> &[TraceEntry] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn size(&self) -> usize {
        self.spec.size
    }

    pub fn spec(&self) -> CommunicatorSpec {
        self.spec
    }

    pub fn params(&self) -> &CostParams {
        &self.params
    }

    /// Number of directed channels (`N * (N - 1)`).
    pub fn directed_channels(&self) -> usize {
        self.size() * (self.size() - 1)
    }

    pub fn clock(&self, rank: RankId) -> f64 {
        self.clocks[rank]
    }

    pub fn counters(&self, rank: RankId) -> &OpCounters {
        &self.counters[rank]
    }

    pub fn all_counters(&self) -> &[OpCounters] {
        &self.counters
    }

    pub fn makespan(&self) -> f64 {
        self.clocks.iter().copied().fold(0.0, f64::max)
    }

    /// Messages sent but not yet received.
    pub fn pending(&self) -> usize {
        self.channels.iter().map(VecDeque::len).sum()
    }

    fn check(&self, rank: RankId) -> Result<(), NetError> {
        if rank < self.size() {
            Ok(())
        } else {
            Err(NetError::InvalidRank {
                rank,
                size: self.size(),
            })
        }
    }

    fn channel(&self, from: RankId, to: RankId) -> usize {
        from * self.size() + to
    }

    /// Advances `rank`'s clock by `secs`, attributed to `phase`.
    pub fn charge(&mut self, rank: RankId, phase: Phase, secs: f64) {
        debug_assert!(secs >= 0.0);
        self.clocks[rank] += secs;
        *self.counters[rank].phase_mut(phase) += secs;
    }

    pub fn record_compress(&mut self, rank: RankId, in_bytes: usize, out_bytes: usize) {
        let c = &mut self.counters[rank];
        c.n_compress += 1;
        c.compress_in_bytes += in_bytes as u64;
        c.compress_out_bytes += out_bytes as u64;
    }

    pub fn record_decompress(&mut self, rank: RankId) {
        self.counters[rank].n_decompress += 1;
    }

    pub fn send(&mut self, from: RankId, to: RankId, payload: &[u8]) -> Result<(), NetError> {
        self.check(from)?;
        self.check(to)?;
        if from == to {
            return Err(NetError::SelfSend(from));
        }
        let len = payload.len();
        let staging = self.params.staging_time(len);
        let arrival = self.clocks[from] + staging + self.params.msg_time(len);
        self.charge(from, Phase::Staging, staging);
        let c = &mut self.counters[from];
        c.n_messages += 1;
        c.bytes_sent += len as u64;
        let mut frame = Vec::with_capacity(PREFIX_LEN + len);
        frame.extend_from_slice(&(len as u64).to_le_bytes());
        frame.extend_from_slice(payload);
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEntry {
                from,
                to,
                frame: frame.clone(),
            });
        }
        let ch = self.channel(from, to);
        self.channels[ch].push_back(Envelope { frame, arrival });
        Ok(())
    }

    /// Takes the oldest message from `from` to `at`.
    pub fn recv(&mut self, at: RankId, from: RankId) -> Result<Vec<u8>, NetError> {
        self.check(at)?;
        self.check(from)?;
        let ch = self.channel(from, at);
        let env = self.channels[ch].pop_front().ok_or(NetError::Deadlock { at, from })?;
        let prefix = u64::from_le_bytes(env.frame[..PREFIX_LEN].try_into().unwrap());
        let body = env.frame.len() - PREFIX_LEN;
        if prefix != body as u64 {
            return Err(NetError::Framing {
                from,
                to: at,
                prefix,
                body,
            });
        }
        let wait = (env.arrival - self.clocks[at]).max(0.0);
        self.charge(at, Phase::Comm, wait);
        self.counters[at].bytes_received += body as u64;
        let mut frame = env.frame;
        frame.drain(..PREFIX_LEN);
        Ok(frame)
    }
}
