//! Independent per-block compression with a packed payload.

use super::{check_finite, decompress, CodecError, Compressor, ErrorBound, Result};
use std::ops::Range;

/// Compressed sizes and packed offsets of independently decodable blocks.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BlockTable {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockTable {
    pub fn from_sizes(sizes: Vec<usize>) -> Self {
        let offsets = sizes
            .iter()
            .scan(0usize, |acc, &s| {
                let o = *acc;
                *acc += s;
                Some(o)
            })
            .collect();
        Self { sizes, offsets }
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn total_len(&self) -> usize {
        self.offsets.last().map_or(0, |o| o + self.sizes[self.sizes.len() - 1])
    }

    /// Byte range of block `index` inside the packed payload.
    pub fn range(&self, index: usize) -> Result<Range<usize>> {
        if index >= self.count() {
            return Err(CodecError::BlockIndex {
                index,
                count: self.count(),
            });
        }
        Ok(self.offsets[index]..self.offsets[index] + self.sizes[index])
    }

    /// Byte range spanning blocks `blocks.start..blocks.end`.
    pub fn span(&self, blocks: Range<usize>) -> Result<Range<usize>> {
        if blocks.start >= blocks.end {
            return Ok(0..0);
        }
        let first = self.range(blocks.start)?;
        let last = self.range(blocks.end - 1)?;
        Ok(first.start..last.end)
    }

    /// `count: u64 | sizes: count * u64`, little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * (self.count() + 1));
        out.extend_from_slice(&(self.count() as u64).to_le_bytes());
        for &s in &self.sizes {
            out.extend_from_slice(&(s as u64).to_le_bytes());
        }
        out
    }

    /// Parses a table from the front of `bytes`, returning it and the bytes consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize)> {
        let read = |at: usize| -> Result<u64> {
            bytes
                .get(at..at + 8)
                .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
                .ok_or(CodecError::Truncated {
                    needed: at + 8,
                    available: bytes.len(),
                })
        };
        let count = read(0)? as usize;
        let needed = count
            .checked_add(1)
            .and_then(|c| c.checked_mul(8))
            .ok_or(CodecError::InvalidHeader("block count overflows"))?;
        if bytes.len() < needed {
            return Err(CodecError::Truncated {
                needed,
                available: bytes.len(),
            });
        }
        let sizes = (0..count)
            .map(|i| read(8 + 8 * i).map(|s| s as usize))
            .collect::<Result<Vec<_>>>()?;
        Ok((Self::from_sizes(sizes), needed))
    }
}

/// Compresses consecutive slices of `data` (lengths from `counts`) as
/// independent blobs packed back to back.
pub fn compress_blocks(data: &[f32], counts: &[usize], eb: ErrorBound) -> Result<(Vec<u8>, BlockTable)> {
    let total: usize = counts.iter().sum();
    if total != data.len() {
        return Err(CodecError::CountsMismatch {
            expected: data.len(),
            actual: total,
        });
    }
    check_finite(data)?;
    let mut compressor = Compressor::new();
    let mut payload = Vec::new();
    let mut scratch = Vec::new();
    let mut sizes = Vec::with_capacity(counts.len());
    let mut start = 0;
    for &c in counts {
        compressor.compress_into(&data[start..start + c], eb, &mut scratch, None)?;
        payload.extend_from_slice(&scratch);
        sizes.push(scratch.len());
        start += c;
    }
    Ok((payload, BlockTable::from_sizes(sizes)))
}

/// Decodes block `index` without touching bytes outside its range.
pub fn decompress_block(payload: &[u8], table: &BlockTable, index: usize) -> Result<Vec<f32>> {
    let range = table.range(index)?;
    let bytes = payload.get(range.clone()).ok_or(CodecError::Truncated {
        needed: range.end,
        available: payload.len(),
    })?;
    decompress(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::HEADER_LEN;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eb(v: f64) -> ErrorBound {
        ErrorBound::new(v).unwrap()
    }

    fn uniform(n: usize, seed: u64) -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen::<f32>()).collect()
    }

    fn within(a: &[f32], b: &[f32], e: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (*x as f64 - *y as f64).abs() <= e)
    }

    #[test]
    fn degenerate_counts() {
        let data = uniform(8, 1);
        let (payload, table) = compress_blocks(&data, &[0, 5, 0, 3], eb(1e-3)).unwrap();
        assert_eq!(table.sizes()[0], HEADER_LEN);
        assert_eq!(table.sizes()[2], HEADER_LEN);
        assert!(decompress_block(&payload, &table, 0).unwrap().is_empty());
        assert!(within(
            &decompress_block(&payload, &table, 1).unwrap(),
            &data[..5],
            1e-3
        ));
        assert!(within(
            &decompress_block(&payload, &table, 3).unwrap(),
            &data[5..],
            1e-3
        ));
    }

    #[test]
    fn offsets_are_prefix_sums() {
        let data = uniform(4096, 2);
        let (payload, table) = compress_blocks(&data, &[1024; 4], eb(1e-4)).unwrap();
        assert_eq!(table.offsets()[0], 0);
        for i in 0..3 {
            assert_eq!(table.offsets()[i + 1], table.offsets()[i] + table.sizes()[i]);
            assert!(table.offsets()[i + 1] > table.offsets()[i]);
        }
        assert_eq!(table.total_len(), payload.len());
    }

    #[test]
    fn non_uniform_blocks_match_slices() {
        let data = uniform(4096, 3);
        let counts = [100, 2000, 4, 1992];
        let (payload, table) = compress_blocks(&data, &counts, eb(1e-4)).unwrap();
        let mut start = 0;
        for (i, &c) in counts.iter().enumerate() {
            let block = decompress_block(&payload, &table, i).unwrap();
            assert!(within(&block, &data[start..start + c], 1e-4), "block {i}");
            start += c;
        }
    }

    #[test]
    fn single_block_equals_whole_buffer() {
        let data = uniform(777, 4);
        let (payload, table) = compress_blocks(&data, &[777], eb(1e-4)).unwrap();
        assert_eq!(payload, crate::codec::compress(&data, eb(1e-4)).unwrap());
        assert_eq!(
            decompress_block(&payload, &table, 0).unwrap(),
            crate::codec::decompress(&payload).unwrap()
        );
    }

    #[test]
    fn index_and_count_errors() {
        let data = uniform(30, 5);
        let (payload, table) = compress_blocks(&data, &[10, 10, 10], eb(1e-3)).unwrap();
        assert_eq!(
            decompress_block(&payload, &table, 3),
            Err(CodecError::BlockIndex { index: 3, count: 3 })
        );
        assert!(matches!(
            compress_blocks(&data, &[10, 10], eb(1e-3)),
            Err(CodecError::CountsMismatch {
                expected: 30,
                actual: 20
            })
        ));
    }

    #[test]
    fn other_blocks_can_be_corrupted() {
        let data = uniform(300, 6);
        let (mut payload, table) = compress_blocks(&data, &[100, 100, 100], eb(1e-4)).unwrap();
        let middle = decompress_block(&payload, &table, 1).unwrap();
        for i in [0usize, 2] {
            for b in &mut payload[table.range(i).unwrap()] {
                *b ^= 0x5a;
            }
        }
        assert_eq!(decompress_block(&payload, &table, 1).unwrap(), middle);
        assert!(within(&middle, &data[100..200], 1e-4));
    }

    #[test]
    fn table_serialization() {
        let table = BlockTable::from_sizes(vec![24, 100, 0, 7]);
        let mut bytes = table.to_bytes();
        bytes.extend_from_slice(b"tail");
        let (parsed, used) = BlockTable::from_bytes(&bytes).unwrap();
        assert_eq!(parsed, table);
        assert_eq!(used, 40);
        assert!(BlockTable::from_bytes(&bytes[..20]).is_err());
        assert_eq!(table.span(1..3).unwrap(), 24..124);
        assert_eq!(table.span(2..2).unwrap(), 0..0);
    }
}
