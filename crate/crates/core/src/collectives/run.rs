use super::{
    binomial_scatter, cprp2p_allgather, rd_allreduce, ring_allgather, ring_allreduce, ring_reduce_scatter, Algorithm,
    AlgorithmId, ChunkLayout, CodecKind, CollectiveError, ReduceOp, Result,
};
use crate::metrics::{aggregate, AccuracyStats, Breakdown, CollectiveReport};
use crate::simnet::Network;

/// What to run: the algorithm, its codec and reduction, and the scatter root.
#[derive(Clone, Copy, Debug)]
pub struct RunSpec {
    pub algorithm: AlgorithmId,
    pub codec: CodecKind,
    pub op: ReduceOp,
    pub root: usize,
}

impl RunSpec {
    pub fn new(algorithm: AlgorithmId, codec: CodecKind) -> Self {
        Self {
            algorithm,
            codec,
            op: ReduceOp::Sum,
            root: 0,
        }
    }

    /// The codec actually used: lossless twins always send raw payloads.
    pub fn effective_codec(&self) -> CodecKind {
        if self.algorithm.lossless {
            CodecKind::None
        } else {
            self.codec
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub outputs: Vec<Vec<f32>>,
    pub report: CollectiveReport,
}

fn scatter_counts(spec: &RunSpec, inputs: &[Vec<f32>], counts: Option<&[usize]>) -> Result<Vec<usize>> {
    let root_len = inputs
        .get(spec.root)
        .ok_or_else(|| CollectiveError::Shape(format!("root {} has no input", spec.root)))?
        .len();
    Ok(match counts {
        Some(c) => c.to_vec(),
        None => ChunkLayout::new(root_len, inputs.len()).counts(),
    })
}

/// Result each rank should hold, computed directly in one process.
/// Sums accumulate in f64 and round once.
pub fn direct_oracle(spec: &RunSpec, inputs: &[Vec<f32>], counts: Option<&[usize]>) -> Result<Vec<Vec<f32>>> {
    let n = inputs.len();
    let reduce = || -> Vec<f32> {
        let len = inputs.first().map_or(0, Vec::len);
        (0..len)
            .map(|j| match spec.op {
                ReduceOp::Sum => inputs.iter().map(|v| v[j] as f64).sum::<f64>() as f32,
                ReduceOp::Max => inputs.iter().map(|v| v[j]).fold(f32::NEG_INFINITY, f32::max),
            })
            .collect()
    };
    Ok(match spec.algorithm.algorithm {
        Algorithm::RingAllgather | Algorithm::Cprp2pAllgather => vec![inputs.concat(); n],
        Algorithm::RingAllreduce | Algorithm::RdAllreduce => vec![reduce(); n],
        Algorithm::RingReduceScatter => {
            let full = reduce();
            let layout = ChunkLayout::new(full.len(), n);
            if n == 1 {
                return Ok(vec![full]);
            }
            (0..n).map(|i| full[layout.range((i + 1) % n)].to_vec()).collect()
        }
        Algorithm::BinomialScatter => {
            let counts = scatter_counts(spec, inputs, counts)?;
            let data = &inputs[spec.root];
            let mut start = 0;
            counts
                .iter()
                .map(|&c| {
                    let s = data.get(start..start + c).map(<[f32]>::to_vec);
                    start += c;
                    s.ok_or_else(|| CollectiveError::Shape("counts exceed root data".into()))
                })
                .collect::<Result<_>>()?
        }
    })
}

fn codec_name(codec: CodecKind) -> String {
    match codec {
        CodecKind::ErrorBounded(_) => "ebz".into(),
        CodecKind::FixedRate(b) => format!("fixed-rate:{b}"),
        CodecKind::None => "none".into(),
    }
}

/// Runs one collective and assembles its report. For scatter only the
/// root's input is used; `counts` defaults to an even split.
pub fn run_collective(
    net: &mut Network,
    spec: &RunSpec,
    inputs: &[Vec<f32>],
    counts: Option<&[usize]>,
) -> Result<RunOutput> {
    if inputs.len() != net.size() {
        return Err(CollectiveError::Shape(format!(
            "{} inputs for {} ranks",
            inputs.len(),
            net.size()
        )));
    }
    let codec = spec.effective_codec();
    let outputs = match spec.algorithm.algorithm {
        Algorithm::RingAllgather => ring_allgather(net, codec, inputs)?,
        Algorithm::RingReduceScatter => ring_reduce_scatter(net, codec, inputs, spec.op)?,
        Algorithm::RingAllreduce => ring_allreduce(net, codec, inputs, spec.op)?,
        Algorithm::RdAllreduce => rd_allreduce(net, codec, inputs, spec.op)?,
        Algorithm::Cprp2pAllgather => cprp2p_allgather(net, codec, inputs)?,
        Algorithm::BinomialScatter => {
            let counts = scatter_counts(spec, inputs, counts)?;
            binomial_scatter(net, codec, spec.root, &inputs[spec.root], &counts)?
        }
    };
    let expected = direct_oracle(spec, inputs, counts)?;
    let accuracy = AccuracyStats::compute(&expected.concat(), &outputs.concat())
        .map_err(|e| CollectiveError::Shape(e.to_string()))?;
    let per_rank = net.all_counters().to_vec();
    let counters = aggregate(&per_rank);
    let compression_ratio = if counters.compress_out_bytes > 0 {
        counters.compress_in_bytes as f64 / counters.compress_out_bytes as f64
    } else {
        1.0
    };
    let elements = match spec.algorithm.algorithm {
        Algorithm::BinomialScatter => inputs[spec.root].len(),
        _ => inputs[0].len(),
    };
    let report = CollectiveReport {
        algorithm: spec.algorithm.to_string(),
        codec: codec_name(codec),
        ranks: net.size(),
        elements,
        eb: codec.error_bound(),
        breakdown: Breakdown::from_counters(&counters),
        counters,
        per_rank,
        accuracy,
        compression_ratio,
        makespan_s: net.makespan(),
    };
    Ok(RunOutput { outputs, report })
}
