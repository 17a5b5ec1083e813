//! Ring schedules: reduce-scatter, allgather, allreduce and the
//! recompress-every-hop CPRP2P baseline.

#![allow(clippy::needless_range_loop)]

use super::{
    check_equal_lengths, check_ranks, reduce_time, ChunkLayout, CodecKind, CollectiveError, Lane, ReduceOp, Result,
    StepCompute,
};
use crate::costmodel::KernelKind;
use crate::simnet::{Network, Phase};

fn next(i: usize, n: usize) -> usize {
    (i + 1) % n
}

fn prev(i: usize, n: usize) -> usize {
    (i + n - 1) % n
}

/// At step `s`, rank `i` sends its accumulation of chunk `(i - s) mod N` to
/// its right neighbour and reduces chunk `(i - s - 1) mod N` from its left.
/// Returns the full accumulators; rank `i` ends owning chunk `(i + 1) mod N`.
fn reduce_scatter_stage(
    net: &mut Network,
    lane: &mut Lane,
    inputs: &[Vec<f32>],
    op: ReduceOp,
    layout: &ChunkLayout,
) -> Result<Vec<Vec<f32>>> {
    let n = net.size();
    let mut acc = inputs.to_vec();
    for s in 0..n - 1 {
        let send_chunk = |i: usize| (i + n - s) % n;
        let recv_chunk = |i: usize| (i + 2 * n - s - 1) % n;
        let step = |net: &Network, lane: &Lane, i: usize| StepCompute {
            compress: lane.kernel(net, layout.len(send_chunk(i)), KernelKind::Compress),
            decompress: lane.kernel(net, layout.len(recv_chunk(i)), KernelKind::Decompress),
            reduce: reduce_time(net, layout.len(recv_chunk(i))),
        };
        for i in 0..n {
            let sc = step(net, lane, i);
            let bytes = lane.compress(net, i, &acc[i][layout.range(send_chunk(i))], None)?;
            sc.before_send(net, i);
            net.send(i, next(i, n), &bytes)?;
            sc.after_send(net, i);
        }
        for i in 0..n {
            let sc = step(net, lane, i);
            let bytes = net.recv(i, prev(i, n))?;
            let values = lane.decompress(net, i, &bytes)?;
            let range = layout.range(recv_chunk(i));
            if values.len() != range.len() {
                return Err(CollectiveError::Shape(format!(
                    "rank {i} expected {} values, received {}",
                    range.len(),
                    values.len()
                )));
            }
            op.apply(&mut acc[i][range], &values);
            sc.after_recv(net, i);
        }
    }
    Ok(acc)
}

/// Each rank compresses the chunk it owns once; the compressed bytes then
/// travel the ring unchanged and every hop decompresses a local copy.
/// `owned[i]` is `(chunk index, values)` for rank `i`. Returns per-rank,
/// per-chunk values.
fn allgather_stage(net: &mut Network, lane: &mut Lane, owned: &[(usize, &[f32])]) -> Result<Vec<Vec<Vec<f32>>>> {
    let n = net.size();
    let mut lens = vec![0usize; n];
    for &(idx, values) in owned {
        lens[idx] = values.len();
    }
    let mut out = vec![vec![Vec::new(); n]; n];
    let mut fwd = Vec::with_capacity(n);
    let mut fwd_idx = Vec::with_capacity(n);
    for (i, &(idx, values)) in owned.iter().enumerate() {
        let mut recon = Vec::new();
        let bytes = lane.compress(net, i, values, Some(&mut recon))?;
        let t = lane.kernel(net, values.len(), KernelKind::Compress);
        net.charge(i, Phase::Compress, t);
        out[i][idx] = recon;
        fwd.push(bytes);
        fwd_idx.push(idx);
    }
    let batched = net.params().multi_stream;
    let mut deferred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for _ in 0..n - 1 {
        let step = |net: &Network, lane: &Lane, i: usize| StepCompute {
            decompress: if batched {
                0.0
            } else {
                lane.kernel(net, lens[fwd_idx[prev(i, n)]], KernelKind::Decompress)
            },
            ..Default::default()
        };
        for i in 0..n {
            let sc = step(net, lane, i);
            sc.before_send(net, i);
            net.send(i, next(i, n), &fwd[i])?;
            sc.after_send(net, i);
        }
        let mut new_fwd = Vec::with_capacity(n);
        let mut new_idx = Vec::with_capacity(n);
        for i in 0..n {
            let sc = step(net, lane, i);
            let idx = fwd_idx[prev(i, n)];
            let bytes = net.recv(i, prev(i, n))?;
            let values = lane.decompress(net, i, &bytes)?;
            if values.len() != lens[idx] {
                return Err(CollectiveError::Shape(format!(
                    "rank {i} expected {} values of chunk {idx}, received {}",
                    lens[idx],
                    values.len()
                )));
            }
            out[i][idx] = values;
            deferred[i].push(4 * lens[idx]);
            new_fwd.push(bytes);
            new_idx.push(idx);
            sc.after_recv(net, i);
        }
        fwd = new_fwd;
        fwd_idx = new_idx;
    }
    if batched && lane.kind.compresses() {
        for (i, sizes) in deferred.iter().enumerate() {
            let t = net.params().multi_launch_time(sizes, KernelKind::Decompress);
            net.charge(i, Phase::Decompress, t);
        }
    }
    Ok(out)
}

/// Every rank ends with the concatenation of all ranks' chunks. Chunks may
/// differ in length.
pub fn ring_allgather(net: &mut Network, codec: CodecKind, chunks: &[Vec<f32>]) -> Result<Vec<Vec<f32>>> {
    check_ranks(net, chunks)?;
    let n = net.size();
    if n == 1 {
        return Ok(chunks.to_vec());
    }
    let mut lane = Lane::new(codec);
    let owned: Vec<_> = chunks.iter().enumerate().map(|(i, c)| (i, c.as_slice())).collect();
    let parts = allgather_stage(net, &mut lane, &owned)?;
    Ok(parts.into_iter().map(|p| p.concat()).collect())
}

/// Rank `i` receives the fully reduced chunk `(i + 1) mod N` of the
/// [`ChunkLayout`] over the common buffer length.
pub fn ring_reduce_scatter(
    net: &mut Network,
    codec: CodecKind,
    inputs: &[Vec<f32>],
    op: ReduceOp,
) -> Result<Vec<Vec<f32>>> {
    check_ranks(net, inputs)?;
    let len = check_equal_lengths(inputs)?;
    let n = net.size();
    let layout = ChunkLayout::new(len, n);
    if n == 1 {
        return Ok(inputs.to_vec());
    }
    let mut lane = Lane::new(codec);
    let acc = reduce_scatter_stage(net, &mut lane, inputs, op, &layout)?;
    Ok(acc
        .into_iter()
        .enumerate()
        .map(|(i, a)| a[layout.range(next(i, n))].to_vec())
        .collect())
}

/// Reduce-scatter followed by allgather of the owned chunks.
pub fn ring_allreduce(net: &mut Network, codec: CodecKind, inputs: &[Vec<f32>], op: ReduceOp) -> Result<Vec<Vec<f32>>> {
    check_ranks(net, inputs)?;
    let len = check_equal_lengths(inputs)?;
    let n = net.size();
    if n == 1 {
        return Ok(inputs.to_vec());
    }
    let layout = ChunkLayout::new(len, n);
    let mut lane = Lane::new(codec);
    let acc = reduce_scatter_stage(net, &mut lane, inputs, op, &layout)?;
    let owned: Vec<_> = acc
        .iter()
        .enumerate()
        .map(|(i, a)| (next(i, n), &a[layout.range(next(i, n))]))
        .collect();
    let parts = allgather_stage(net, &mut lane, &owned)?;
    Ok(parts.into_iter().map(|p| p.concat()).collect())
}

/// Ring allgather that decompresses and recompresses at every hop, as a
/// compression wrapper around unmodified point-to-point calls would.
pub fn cprp2p_allgather(net: &mut Network, codec: CodecKind, chunks: &[Vec<f32>]) -> Result<Vec<Vec<f32>>> {
    check_ranks(net, chunks)?;
    let n = net.size();
    if n == 1 {
        return Ok(chunks.to_vec());
    }
    let mut lane = Lane::new(codec);
    let mut out = vec![vec![Vec::new(); n]; n];
    for (i, c) in chunks.iter().enumerate() {
        out[i][i] = c.clone();
    }
    let mut cur: Vec<Vec<f32>> = chunks.to_vec();
    let mut cur_idx: Vec<usize> = (0..n).collect();
    for _ in 0..n - 1 {
        let step = |net: &Network, lane: &Lane, cur_idx: &[usize], i: usize| StepCompute {
            compress: lane.kernel(net, chunks[cur_idx[i]].len(), KernelKind::Compress),
            decompress: lane.kernel(net, chunks[cur_idx[prev(i, n)]].len(), KernelKind::Decompress),
            reduce: 0.0,
        };
        for i in 0..n {
            let sc = step(net, &lane, &cur_idx, i);
            let bytes = lane.compress(net, i, &cur[i], None)?;
            sc.before_send(net, i);
            net.send(i, next(i, n), &bytes)?;
            sc.after_send(net, i);
        }
        let mut new_cur = Vec::with_capacity(n);
        let mut new_idx = Vec::with_capacity(n);
        for i in 0..n {
            let sc = step(net, &lane, &cur_idx, i);
            let idx = cur_idx[prev(i, n)];
            let bytes = net.recv(i, prev(i, n))?;
            let values = lane.decompress(net, i, &bytes)?;
            if values.len() != chunks[idx].len() {
                return Err(CollectiveError::Shape(format!(
                    "rank {i} received a malformed chunk {idx}"
                )));
            }
            out[i][idx] = values.clone();
            new_cur.push(values);
            new_idx.push(idx);
            sc.after_recv(net, i);
        }
        cur = new_cur;
        cur_idx = new_idx;
    }
    Ok(out.into_iter().map(|p| p.concat()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::ErrorBound;
    use crate::costmodel::CostParams;

    fn net(n: usize) -> Network {
        Network::with_size(n, CostParams::default()).unwrap()
    }

    fn ebz(e: f64) -> CodecKind {
        CodecKind::ErrorBounded(ErrorBound::new(e).unwrap())
    }

    fn counts(net: &Network) -> Vec<(u64, u64)> {
        net.all_counters()
            .iter()
            .map(|c| (c.n_compress, c.n_decompress))
            .collect()
    }

    #[test]
    fn allgather_counts_and_values() {
        let mut nw = net(8);
        let chunks: Vec<Vec<f32>> = (0..8).map(|r| vec![r as f32 * 0.25; 10]).collect();
        let out = ring_allgather(&mut nw, ebz(1e-4), &chunks).unwrap();
        assert!(counts(&nw).iter().all(|&c| c == (1, 7)));
        let expected = chunks.concat();
        for o in &out {
            assert_eq!(o, &out[0]);
            assert!(o.iter().zip(&expected).all(|(a, b)| (a - b).abs() as f64 <= 1e-4));
        }
        assert_eq!(nw.pending(), 0);
    }

    #[test]
    fn allgatherv_uneven_chunks() {
        let mut nw = net(3);
        let chunks = vec![vec![1.0; 5], vec![], vec![2.0; 70]];
        let out = ring_allgather(&mut nw, CodecKind::None, &chunks).unwrap();
        assert!(out.iter().all(|o| *o == chunks.concat()));
    }

    #[test]
    fn zeros_stay_zero() {
        let mut nw = net(5);
        let inputs = vec![vec![0f32; 103]; 5];
        for out in ring_allreduce(&mut nw, ebz(1e-3), &inputs, ReduceOp::Sum).unwrap() {
            assert!(out.iter().all(|&v| v == 0.0));
        }
        let mut nw = net(5);
        for out in cprp2p_allgather(&mut nw, ebz(1e-3), &inputs).unwrap() {
            assert!(out.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn reduce_scatter_constant_ranks() {
        let mut nw = net(4);
        let inputs: Vec<Vec<f32>> = (0..4).map(|r| vec![r as f32; 64]).collect();
        let out = ring_reduce_scatter(&mut nw, ebz(1e-3), &inputs, ReduceOp::Sum).unwrap();
        assert!(counts(&nw).iter().all(|&c| c == (3, 3)));
        for o in out {
            assert_eq!(o.len(), 16);
            assert!(o.iter().all(|&v| (v - 6.0).abs() <= 3e-3));
        }
    }

    #[test]
    fn allreduce_counts() {
        let mut nw = net(4);
        let inputs: Vec<Vec<f32>> = (0..4).map(|r| vec![r as f32; 64]).collect();
        let out = ring_allreduce(&mut nw, ebz(1e-3), &inputs, ReduceOp::Sum).unwrap();
        assert!(counts(&nw).iter().all(|&c| c == (4, 6)));
        assert!(out.iter().flatten().all(|&v| (v - 6.0).abs() <= 4e-3));
    }

    #[test]
    fn single_rank_is_identity() {
        let mut nw = net(1);
        let inputs = vec![vec![1.25f32, 2.5]];
        assert_eq!(
            ring_allreduce(&mut nw, ebz(1e-3), &inputs, ReduceOp::Sum).unwrap(),
            inputs
        );
        assert_eq!(nw.counters(0).n_messages, 0);
        assert_eq!(nw.counters(0).n_compress, 0);
    }

    #[test]
    fn cprp2p_counts() {
        let mut nw = net(8);
        let chunks: Vec<Vec<f32>> = (0..8).map(|r| vec![r as f32; 4]).collect();
        cprp2p_allgather(&mut nw, ebz(1e-4), &chunks).unwrap();
        assert!(counts(&nw).iter().all(|&c| c == (7, 7)));
    }

    #[test]
    fn max_reduction() {
        let mut nw = net(3);
        let inputs = vec![vec![1.0, 9.0, 3.0], vec![4.0, 2.0, 3.5], vec![0.0, 0.0, 8.0]];
        let out = ring_allreduce(&mut nw, CodecKind::None, &inputs, ReduceOp::Max).unwrap();
        assert!(out.iter().all(|o| *o == [4.0, 9.0, 8.0]));
    }

    #[test]
    fn shape_errors() {
        let mut nw = net(3);
        assert!(matches!(
            ring_allreduce(&mut nw, CodecKind::None, &[vec![1.0], vec![1.0]], ReduceOp::Sum),
            Err(CollectiveError::Shape(_))
        ));
        assert!(matches!(
            ring_reduce_scatter(&mut nw, CodecKind::None, &[vec![1.0], vec![1.0], vec![]], ReduceOp::Sum),
            Err(CollectiveError::Shape(_))
        ));
    }
}
