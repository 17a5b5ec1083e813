//! Binomial-tree scatter(v) of independently compressed blocks.
//!
//! The root compresses one block per rank, packs them contiguously in
//! root-relative rank order (block `j` belongs to rank `(root + j) mod N`),
//! and hands each subtree its contiguous byte range. Every message is
//!
//! ```text
//! table: BlockTable bytes | lo: u64 | hi: u64 | packed bytes of blocks lo..hi
//! ```
//!
//! Intermediate ranks forward byte ranges untouched; each non-root rank
//! decompresses only its own block.

use super::{check_ranks, CodecKind, CollectiveError, Lane, Result};
use crate::codec::BlockTable;
use crate::costmodel::KernelKind;
use crate::simnet::{Network, Phase};
use std::ops::Range;

struct Held {
    blocks: Range<usize>,
    base: usize,
    bytes: Vec<u8>,
    table: BlockTable,
}

impl Held {
    fn block_bytes(&self, blocks: Range<usize>) -> Result<&[u8]> {
        let span = self.table.span(blocks)?;
        if span.is_empty() {
            return Ok(&[]);
        }
        self.bytes
            .get(span.start - self.base..span.end - self.base)
            .ok_or_else(|| CollectiveError::Shape("scatter range outside held bytes".into()))
    }
}

fn encode_message(held: &Held, blocks: Range<usize>) -> Result<Vec<u8>> {
    let mut msg = held.table.to_bytes();
    msg.extend_from_slice(&(blocks.start as u64).to_le_bytes());
    msg.extend_from_slice(&(blocks.end as u64).to_le_bytes());
    msg.extend_from_slice(held.block_bytes(blocks)?);
    Ok(msg)
}

fn decode_message(msg: &[u8]) -> Result<Held> {
    let (table, used) = BlockTable::from_bytes(msg)?;
    let field = |at: usize| -> Result<usize> {
        msg.get(at..at + 8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()) as usize)
            .ok_or_else(|| CollectiveError::Shape("truncated scatter header".into()))
    };
    let lo = field(used)?;
    let hi = field(used + 8)?;
    if lo >= hi || hi > table.count() {
        return Err(CollectiveError::Shape(format!("bad scatter block range {lo}..{hi}")));
    }
    let span = table.span(lo..hi)?;
    let bytes = msg[used + 16..].to_vec();
    if bytes.len() != span.len() {
        return Err(CollectiveError::Shape(format!(
            "scatter blocks {lo}..{hi} need {} bytes, got {}",
            span.len(),
            bytes.len()
        )));
    }
    Ok(Held {
        blocks: lo..hi,
        base: span.start,
        bytes,
        table,
    })
}

/// Distributes `counts[r]` consecutive values of the root's `data` to rank `r`.
pub fn binomial_scatter(
    net: &mut Network,
    codec: CodecKind,
    root: usize,
    data: &[f32],
    counts: &[usize],
) -> Result<Vec<Vec<f32>>> {
    let n = net.size();
    if root >= n {
        return Err(CollectiveError::Shape(format!(
            "root {root} out of range for {n} ranks"
        )));
    }
    check_ranks(net, counts)?;
    let total: usize = counts.iter().sum();
    if total != data.len() {
        return Err(CollectiveError::Shape(format!(
            "counts sum to {total}, root holds {} values",
            data.len()
        )));
    }
    let starts: Vec<usize> = counts
        .iter()
        .scan(0, |acc, &c| {
            let s = *acc;
            *acc += c;
            Some(s)
        })
        .collect();
    let slice = |r: usize| &data[starts[r]..starts[r] + counts[r]];
    if n == 1 {
        return Ok(vec![data.to_vec()]);
    }
    let actual = |rel: usize| (rel + root) % n;

    let mut lane = Lane::new(codec);
    let mut payload = Vec::new();
    let mut sizes = Vec::with_capacity(n);
    for j in 0..n {
        let bytes = lane.compress(net, root, slice(actual(j)), None)?;
        sizes.push(bytes.len());
        payload.extend_from_slice(&bytes);
    }
    if codec.compresses() {
        let kernel_sizes: Vec<usize> = (0..n).map(|j| 4 * counts[actual(j)]).collect();
        let t = net.params().multi_launch_time(&kernel_sizes, KernelKind::Compress);
        net.charge(root, Phase::Compress, t);
    }

    let mut held: Vec<Option<Held>> = (0..n).map(|_| None).collect();
    held[root] = Some(Held {
        blocks: 0..n,
        base: 0,
        bytes: payload,
        table: BlockTable::from_sizes(sizes),
    });
    let mut mask = n.next_power_of_two() / 2;
    while mask > 0 {
        let senders: Vec<usize> = (0..n).step_by(2 * mask).filter(|rel| rel + mask < n).collect();
        for &rel in &senders {
            let blocks = rel + mask..(rel + 2 * mask).min(n);
            let from = held[actual(rel)]
                .as_ref()
                .ok_or_else(|| CollectiveError::Shape(format!("rank {} forwards before receiving", actual(rel))))?;
            let msg = encode_message(from, blocks)?;
            net.send(actual(rel), actual(rel + mask), &msg)?;
        }
        for &rel in &senders {
            let msg = net.recv(actual(rel + mask), actual(rel))?;
            held[actual(rel + mask)] = Some(decode_message(&msg)?);
        }
        mask /= 2;
    }

    let mut out = Vec::with_capacity(n);
    for (r, h) in held.iter().enumerate() {
        if r == root {
            out.push(slice(r).to_vec());
            continue;
        }
        let h = h
            .as_ref()
            .ok_or_else(|| CollectiveError::Shape(format!("rank {r} received nothing")))?;
        let rel = (r + n - root) % n;
        if h.blocks.start != rel {
            return Err(CollectiveError::Shape(format!("rank {r} holds blocks {:?}", h.blocks)));
        }
        let values = lane.decompress(net, r, h.block_bytes(rel..rel + 1)?)?;
        if values.len() != counts[r] {
            return Err(CollectiveError::Shape(format!(
                "rank {r} decoded {} values",
                values.len()
            )));
        }
        let t = lane.kernel(net, counts[r], KernelKind::Decompress);
        net.charge(r, Phase::Decompress, t);
        out.push(values);
    }
    Ok(out)
}
