//! Error-bounded lossy compression of binary32 buffers.
//!
//! The format is a 1D predictive quantizer in blocks of 32 values. Each block
//! stores its first value verbatim and every following value as a zigzag
//! quantization code relative to the previous *reconstructed* value, packed
//! at the smallest bit width that holds the block's largest code.
//!
//! ```text
//! blob   := header payload
//! header := "GZC1" | n: u64 | eb: f64 | payload_len: u32      (24 bytes, LE)
//! block  := w: u8 | first: f32 | codes: ceil((count-1)*w/8) bytes   (w <= 32)
//!         | 0xFF  | values: count * f32                              (raw)
//! ```
//!
//! Codes are packed least-significant bit first. Decoding a code `q` gives
//! `recon = f32(f64(prev) + q * 2 * eb)`, so every element of a decoded block
//! is within `eb` of its input and errors never propagate along the block.

mod blocks;
mod fixed_rate;

pub use blocks::{compress_blocks, decompress_block, BlockTable};
pub use fixed_rate::{fixed_rate_compress, fixed_rate_decompress, FixedRateBlob};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"GZC1";
pub const HEADER_LEN: usize = 24;
pub const BLOCK_LEN: usize = 32;
pub const RAW_WIDTH: u8 = 255;

/// Largest quantization code magnitude stored in packed form.
const MAX_ABS_CODE: f64 = (1u64 << 30) as f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("error bound must be finite and positive, got {0}")]
    InvalidErrorBound(f64),
    #[error("bad magic bytes")]
    BadMagic,
    #[error("truncated input: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("unknown width code {width} in block {block}")]
    UnknownWidth { block: usize, width: u8 },
    #[error("payload length mismatch: header says {expected} bytes, found {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid header: {0}")]
    InvalidHeader(&'static str),
    #[error("payload of {0} bytes does not fit the 32-bit length field")]
    PayloadTooLarge(usize),
    #[error("block counts sum to {actual}, data has {expected} values")]
    CountsMismatch { expected: usize, actual: usize },
    #[error("block index {index} out of range for {count} blocks")]
    BlockIndex { index: usize, count: usize },
    #[error("bits per value must be in 1..=16, got {0}")]
    BitsPerValue(u8),
}

pub type Result<T> = std::result::Result<T, CodecError>;

/// Absolute, per-element error bound.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ErrorBound(f64);

impl ErrorBound {
    pub fn new(eb: f64) -> Result<Self> {
        if eb.is_finite() && eb > 0.0 {
            Ok(Self(eb))
        } else {
            Err(CodecError::InvalidErrorBound(eb))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ErrorBound {
    type Error = CodecError;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ErrorBound> for f64 {
    fn from(eb: ErrorBound) -> f64 {
        eb.0
    }
}

/// A buffer of finite binary32 values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DataBuffer(Vec<f32>);

impl DataBuffer {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        check_finite(&values)?;
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f32]> for DataBuffer {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

pub(crate) fn check_finite(values: &[f32]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(CodecError::NonFinite { index }),
        None => Ok(()),
    }
}

/// Upper bound on the size of a blob holding `n` values.
pub fn max_compressed_len(n: usize) -> usize {
    HEADER_LEN + n.div_ceil(BLOCK_LEN) + 4 * n
}

/// Parsed blob header.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Header {
    pub n: u64,
    pub eb: f64,
    pub payload_len: u32,
}

impl Header {
    pub fn parse(blob: &[u8]) -> Result<Self> {
        if blob.len() < HEADER_LEN {
            return Err(CodecError::Truncated {
                needed: HEADER_LEN,
                available: blob.len(),
            });
        }
        if blob[..4] != MAGIC {
            return Err(CodecError::BadMagic);
        }
        let n = u64::from_le_bytes(blob[4..12].try_into().unwrap());
        let eb = f64::from_le_bytes(blob[12..20].try_into().unwrap());
        let payload_len = u32::from_le_bytes(blob[20..24].try_into().unwrap());
        if !(eb.is_finite() && eb > 0.0) {
            return Err(CodecError::InvalidHeader("error bound is not positive"));
        }
        Ok(Self { n, eb, payload_len })
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&self.eb.to_le_bytes());
        out.extend_from_slice(&self.payload_len.to_le_bytes());
    }
}

#[inline]
fn zigzag(q: i64) -> u64 {
    ((q << 1) ^ (q >> 63)) as u64
}

#[inline]
fn unzigzag(z: u64) -> i64 {
    ((z >> 1) as i64) ^ -((z & 1) as i64)
}

#[inline]
fn reconstruct(prev: f32, code: i64, step: f64) -> f32 {
    (prev as f64 + code as f64 * step) as f32
}

struct BitWriter<'a> {
    out: &'a mut Vec<u8>,
    acc: u64,
    bits: u32,
}

impl<'a> BitWriter<'a> {
    fn new(out: &'a mut Vec<u8>) -> Self {
        Self { out, acc: 0, bits: 0 }
    }

    fn push(&mut self, value: u64, width: u32) {
        self.acc |= value << self.bits;
        self.bits += width;
        while self.bits >= 8 {
            self.out.push(self.acc as u8);
            self.acc >>= 8;
            self.bits -= 8;
        }
    }

    fn finish(self) {
        if self.bits > 0 {
            self.out.push(self.acc as u8);
        }
    }
}

/// Reads `width`-bit codes from an exactly sized byte slice.
struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    acc: u64,
    bits: u32,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self {
            bytes,
            pos: 0,
            acc: 0,
            bits: 0,
        }
    }

    fn pull(&mut self, width: u32) -> u64 {
        while self.bits < width {
            self.acc |= (self.bytes[self.pos] as u64) << self.bits;
            self.pos += 1;
            self.bits += 8;
        }
        let v = if width == 64 {
            self.acc
        } else {
            self.acc & ((1u64 << width) - 1)
        };
        self.acc = if width == 64 { 0 } else { self.acc >> width };
        self.bits -= width;
        v
    }
}

/// Reusable compressor state.
///
/// Holds the code scratch so repeated calls inside a collective only touch
/// the caller's output buffers. Not `Sync`-shared by design of its `&mut`
/// API: give each rank or thread its own instance.
#[derive(Debug, Default)]
pub struct Compressor {
    codes: Vec<u64>,
}

impl Compressor {
    pub fn new() -> Self {
        Self {
            codes: Vec::with_capacity(BLOCK_LEN),
        }
    }

    pub fn compress(&mut self, data: &[f32], eb: ErrorBound) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(HEADER_LEN + data.len() * 2);
        self.compress_into(data, eb, &mut out, None)?;
        Ok(out)
    }

    /// Compresses into `out` (cleared first). When `recon` is given it
    /// receives exactly the values a decoder will produce.
    pub fn compress_into(
        &mut self,
        data: &[f32],
        eb: ErrorBound,
        out: &mut Vec<u8>,
        mut recon: Option<&mut Vec<f32>>,
    ) -> Result<()> {
        check_finite(data)?;
        out.clear();
        if let Some(r) = recon.as_deref_mut() {
            r.clear();
            r.reserve(data.len());
        }
        let eb = eb.get();
        Header {
            n: data.len() as u64,
            eb,
            payload_len: 0,
        }
        .write(out);
        for block in data.chunks(BLOCK_LEN) {
            self.encode_block(block, eb, out, recon.as_deref_mut());
        }
        let payload_len = out.len() - HEADER_LEN;
        let field = u32::try_from(payload_len).map_err(|_| CodecError::PayloadTooLarge(payload_len))?;
        out[20..24].copy_from_slice(&field.to_le_bytes());
        Ok(())
    }

    fn encode_block(&mut self, block: &[f32], eb: f64, out: &mut Vec<u8>, recon: Option<&mut Vec<f32>>) {
        let step = 2.0 * eb;
        let mut rec = [0f32; BLOCK_LEN];
        self.codes.clear();
        rec[0] = block[0];
        let mut prev = block[0];
        let mut any = 0u64;
        let mut raw = false;
        for (j, &x) in block.iter().enumerate().skip(1) {
            let q = ((x as f64 - prev as f64) / step).round();
            if q.abs() > MAX_ABS_CODE {
                raw = true;
                break;
            }
            let q = q as i64;
            let r = reconstruct(prev, q, step);
            if (r as f64 - x as f64).abs() > eb {
                raw = true;
                break;
            }
            let z = zigzag(q);
            any |= z;
            self.codes.push(z);
            rec[j] = r;
            prev = r;
        }
        let width = 64 - any.leading_zeros();
        let count = block.len();
        let packed_len = 5 + ((count - 1) * width as usize).div_ceil(8);
        if raw || packed_len > 1 + 4 * count {
            out.push(RAW_WIDTH);
            for v in block {
                out.extend_from_slice(&v.to_le_bytes());
            }
            if let Some(r) = recon {
                r.extend_from_slice(block);
            }
            return;
        }
        out.push(width as u8);
        out.extend_from_slice(&block[0].to_le_bytes());
        if width > 0 {
            let mut w = BitWriter::new(out);
            for &z in &self.codes {
                w.push(z, width);
            }
            w.finish();
        }
        if let Some(r) = recon {
            r.extend_from_slice(&rec[..count]);
        }
    }
}

/// Compresses `data` so every decoded value is within `eb` of its input.
pub fn compress(data: &[f32], eb: ErrorBound) -> Result<Vec<u8>> {
    Compressor::new().compress(data, eb)
}

pub fn decompress(blob: &[u8]) -> Result<Vec<f32>> {
    let mut out = Vec::new();
    decompress_into(blob, &mut out)?;
    Ok(out)
}

/// Decodes `blob` into `out`. On error `out` is left empty.
pub fn decompress_into(blob: &[u8], out: &mut Vec<f32>) -> Result<()> {
    out.clear();
    let res = decode(blob, out);
    if res.is_err() {
        out.clear();
    }
    res
}

fn decode(blob: &[u8], out: &mut Vec<f32>) -> Result<()> {
    let header = Header::parse(blob)?;
    let payload = &blob[HEADER_LEN..];
    let expected = header.payload_len as usize;
    if payload.len() < expected {
        return Err(CodecError::Truncated {
            needed: HEADER_LEN + expected,
            available: blob.len(),
        });
    }
    if payload.len() > expected {
        return Err(CodecError::LengthMismatch {
            expected,
            actual: payload.len(),
        });
    }
    let n = usize::try_from(header.n).map_err(|_| CodecError::InvalidHeader("element count overflows usize"))?;
    // every block takes at least 5 bytes
    if n.div_ceil(BLOCK_LEN).saturating_mul(5) > payload.len() {
        return Err(CodecError::Truncated {
            needed: HEADER_LEN + n.div_ceil(BLOCK_LEN) * 5,
            available: blob.len(),
        });
    }
    out.reserve(n);
    let step = 2.0 * header.eb;
    let mut pos = 0usize;
    let take = |pos: &mut usize, len: usize| -> Result<&[u8]> {
        let end = *pos + len;
        if end > payload.len() {
            return Err(CodecError::Truncated {
                needed: HEADER_LEN + end,
                available: blob.len(),
            });
        }
        let s = &payload[*pos..end];
        *pos = end;
        Ok(s)
    };
    let mut remaining = n;
    let mut block = 0usize;
    while remaining > 0 {
        let count = remaining.min(BLOCK_LEN);
        let width = take(&mut pos, 1)?[0];
        if width == RAW_WIDTH {
            let bytes = take(&mut pos, 4 * count)?;
            out.extend(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())));
        } else if width <= 32 {
            let first = f32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
            let codes = take(&mut pos, ((count - 1) * width as usize).div_ceil(8))?;
            out.push(first);
            let mut prev = first;
            if width == 0 {
                out.extend(std::iter::repeat_n(first, count - 1));
            } else {
                let mut reader = BitReader::new(codes);
                for _ in 1..count {
                    let q = unzigzag(reader.pull(width as u32));
                    prev = reconstruct(prev, q, step);
                    out.push(prev);
                }
            }
        } else {
            return Err(CodecError::UnknownWidth { block, width });
        }
        remaining -= count;
        block += 1;
    }
    if pos != payload.len() {
        return Err(CodecError::LengthMismatch {
            expected: pos,
            actual: payload.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eb(v: f64) -> ErrorBound {
        ErrorBound::new(v).unwrap()
    }

    fn max_err(a: &[f32], b: &[f32]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (*x as f64 - *y as f64).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zeros_compress_to_minimal_blocks() {
        let data = vec![0f32; 1024];
        let blob = compress(&data, eb(1e-4)).unwrap();
        assert_eq!(blob.len(), 24 + 32 * 5);
        assert_eq!(decompress(&blob).unwrap(), data);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn constant_blocks_are_five_bytes() {
        let data = vec![3.14f32; 1024];
        let blob = compress(&data, eb(1e-4)).unwrap();
        assert_eq!(blob.len(), 24 + 32 * 5);
        assert_eq!(&blob[24..29], &[0, 0xc3, 0xf5, 0x48, 0x40]);
        assert_eq!(decompress(&blob).unwrap(), data);
    }

    #[test]
    fn ramp_uses_four_bit_codes() {
        let data: Vec<f32> = (0..1024).map(|j| j as f32 * 0.001).collect();
        let blob = compress(&data, eb(1e-4)).unwrap();
        assert_eq!(blob.len(), 24 + 32 * 21);
        for b in 0..32 {
            assert_eq!(blob[24 + b * 21], 4, "block {b}");
        }
        // every code is q=5 -> zigzag 10 = 0b1010, two per byte
        assert_eq!(blob[24 + 5], 0xaa);
        let out = decompress(&blob).unwrap();
        assert!(max_err(&data, &out) <= 1e-4);
        let ratio = (4 * 1024) as f64 / blob.len() as f64;
        assert!((ratio - 5.885).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn partial_final_block() {
        let blob = compress(&[0f32; 7], eb(1e-3)).unwrap();
        assert_eq!(blob.len(), 24 + 5);
        assert_eq!(decompress(&blob).unwrap(), vec![0f32; 7]);
    }

    #[test]
    fn empty_buffer() {
        let blob = compress(&[], eb(1e-3)).unwrap();
        assert_eq!(blob.len(), HEADER_LEN);
        assert!(decompress(&blob).unwrap().is_empty());
    }

    #[test]
    fn header_fields() {
        let blob = compress(&[1.0, 2.0, 3.0], eb(0.5)).unwrap();
        let h = Header::parse(&blob).unwrap();
        assert_eq!(h.n, 3);
        assert_eq!(h.eb, 0.5);
        assert_eq!(h.payload_len as usize, blob.len() - HEADER_LEN);
    }

    #[test]
    fn rejects_non_finite_and_bad_bounds() {
        assert_eq!(
            compress(&[1.0, f32::NAN], eb(1e-3)),
            Err(CodecError::NonFinite { index: 1 })
        );
        assert_eq!(
            compress(&[f32::INFINITY], eb(1e-3)),
            Err(CodecError::NonFinite { index: 0 })
        );
        assert!(ErrorBound::new(0.0).is_err());
        assert!(ErrorBound::new(-1.0).is_err());
        assert!(ErrorBound::new(f64::NAN).is_err());
        assert!(DataBuffer::new(vec![f32::NEG_INFINITY]).is_err());
    }

    #[test]
    fn large_jumps_fall_back_to_raw() {
        let data = [0.0f32, 1e9, -1e9, 5.0];
        let blob = compress(&data, eb(1e-4)).unwrap();
        assert_eq!(blob[HEADER_LEN], RAW_WIDTH);
        assert_eq!(decompress(&blob).unwrap(), data);
    }

    #[test]
    fn tiny_bound_below_f32_resolution_stays_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f32> = (0..500).map(|_| rng.gen::<f32>()).collect();
        let out = decompress(&compress(&data, eb(1e-8)).unwrap()).unwrap();
        assert!(max_err(&data, &out) <= 1e-8);
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let data: Vec<f32> = (0..100).map(|j| (j as f32).sin()).collect();
        let blob = compress(&data, eb(1e-4)).unwrap();
        for cut in [1, 10, blob.len() - HEADER_LEN] {
            let short = &blob[..blob.len() - cut];
            assert!(
                matches!(decompress(short), Err(CodecError::Truncated { .. })),
                "cut {cut}"
            );
        }
        let mut out = vec![1.0; 3];
        assert!(decompress_into(&blob[..blob.len() - 1], &mut out).is_err());
        assert!(out.is_empty());
    }

    #[test]
    fn malformed_headers() {
        let blob = compress(&[1.0; 40], eb(1e-4)).unwrap();
        let mut bad = blob.clone();
        bad[0] = b'X';
        assert_eq!(decompress(&bad), Err(CodecError::BadMagic));
        let mut bad = blob.clone();
        bad[12..20].copy_from_slice(&(-1.0f64).to_le_bytes());
        assert!(matches!(decompress(&bad), Err(CodecError::InvalidHeader(_))));
        let mut bad = blob.clone();
        bad[HEADER_LEN] = 40;
        assert_eq!(decompress(&bad), Err(CodecError::UnknownWidth { block: 0, width: 40 }));
        let mut long = blob.clone();
        long.push(0);
        assert!(matches!(decompress(&long), Err(CodecError::LengthMismatch { .. })));
        // inflated element count with a consistent payload length
        let mut bad = blob;
        bad[4..12].copy_from_slice(&1000u64.to_le_bytes());
        assert!(matches!(decompress(&bad), Err(CodecError::Truncated { .. })));
    }

    #[test]
    fn reconstruction_matches_decoder() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<f32> = (0..1000).map(|_| rng.gen_range(-5.0f32..5.0)).collect();
        let mut c = Compressor::new();
        let mut blob = Vec::new();
        let mut recon = Vec::new();
        c.compress_into(&data, eb(1e-3), &mut blob, Some(&mut recon)).unwrap();
        assert_eq!(recon, decompress(&blob).unwrap());
    }

    #[test]
    fn workspace_reuse_is_stateless() {
        let mut c = Compressor::new();
        let a: Vec<f32> = (0..333).map(|j| (j as f32 * 0.1).cos()).collect();
        let b = vec![7.0f32; 90];
        let first = c.compress(&a, eb(1e-4)).unwrap();
        c.compress(&b, eb(1e-2)).unwrap();
        assert_eq!(c.compress(&a, eb(1e-4)).unwrap(), first);
    }

    proptest! {
        #[test]
        fn error_bound_holds(
            data in prop::collection::vec(-1e4f32..1e4, 0..300),
            eb_exp in 1usize..6,
        ) {
            let e = 10f64.powi(-(eb_exp as i32));
            let blob = compress(&data, eb(e)).unwrap();
            prop_assert!(blob.len() <= 24 + data.len().div_ceil(32) * 133);
            prop_assert!(blob.len() <= max_compressed_len(data.len()));
            let out = decompress(&blob).unwrap();
            prop_assert_eq!(out.len(), data.len());
            prop_assert!(max_err(&data, &out) <= e);
            prop_assert_eq!(compress(&data, eb(e)).unwrap(), blob);
        }

        #[test]
        fn second_pass_stays_within_bound(
            data in prop::collection::vec(0f32..1.0, 1..200),
        ) {
            let e = 1e-3;
            let first = decompress(&compress(&data, eb(e)).unwrap()).unwrap();
            let second = decompress(&compress(&first, eb(e)).unwrap()).unwrap();
            prop_assert!(max_err(&first, &second) <= e);
        }

        #[test]
        fn zigzag_round_trips(q in -(1i64 << 40)..(1i64 << 40)) {
            prop_assert_eq!(unzigzag(zigzag(q)), q);
        }
    }
}
