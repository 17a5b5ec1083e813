//! Fixed-rate uniform scalar quantization over `[min, max]`.
//!
//! Output size depends only on `n` and the rate; the reconstruction error
//! depends on the data range and can be arbitrarily large.

use super::{check_finite, CodecError, Result};

/// `n: u64 | bits: u8 | min: f32 | max: f32` followed by packed codes.
pub const FIXED_HEADER_LEN: usize = 17;

#[derive(Clone, Debug, PartialEq)]
pub struct FixedRateBlob {
    pub n: u64,
    pub bits_per_value: u8,
    pub buffer_min: f32,
    pub buffer_max: f32,
    pub payload: Vec<u8>,
}

impl FixedRateBlob {
    /// Worst-case absolute reconstruction error for this blob's range and rate.
    pub fn error_bound(&self) -> f64 {
        let levels = ((1u32 << self.bits_per_value) - 1) as f64;
        (self.buffer_max as f64 - self.buffer_min as f64) / (2.0 * levels)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FIXED_HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.n.to_le_bytes());
        out.push(self.bits_per_value);
        out.extend_from_slice(&self.buffer_min.to_le_bytes());
        out.extend_from_slice(&self.buffer_max.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < FIXED_HEADER_LEN {
            return Err(CodecError::Truncated {
                needed: FIXED_HEADER_LEN,
                available: bytes.len(),
            });
        }
        let n = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
        let bits = bytes[8];
        if !(1..=16).contains(&bits) {
            return Err(CodecError::BitsPerValue(bits));
        }
        let expected = (n as u128 * bits as u128).div_ceil(8);
        let actual = (bytes.len() - FIXED_HEADER_LEN) as u128;
        if actual < expected {
            return Err(CodecError::Truncated {
                needed: FIXED_HEADER_LEN + expected as usize,
                available: bytes.len(),
            });
        }
        if actual > expected {
            return Err(CodecError::LengthMismatch {
                expected: expected as usize,
                actual: actual as usize,
            });
        }
        Ok(Self {
            n,
            bits_per_value: bits,
            buffer_min: f32::from_le_bytes(bytes[9..13].try_into().unwrap()),
            buffer_max: f32::from_le_bytes(bytes[13..17].try_into().unwrap()),
            payload: bytes[FIXED_HEADER_LEN..].to_vec(),
        })
    }
}

pub fn fixed_rate_compress(data: &[f32], bits_per_value: u8) -> Result<FixedRateBlob> {
    if !(1..=16).contains(&bits_per_value) {
        return Err(CodecError::BitsPerValue(bits_per_value));
    }
    check_finite(data)?;
    let (lo, hi) = data.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let (lo, hi) = if data.is_empty() { (0.0, 0.0) } else { (lo, hi) };
    let bits = bits_per_value as u32;
    let levels = ((1u32 << bits) - 1) as f64;
    let range = hi as f64 - lo as f64;
    let mut payload = Vec::with_capacity((data.len() * bits as usize).div_ceil(8));
    let mut acc = 0u64;
    let mut held = 0u32;
    for &v in data {
        let code = if range > 0.0 {
            ((v as f64 - lo as f64) / range * levels).round().clamp(0.0, levels) as u64
        } else {
            0
        };
        acc |= code << held;
        held += bits;
        while held >= 8 {
            payload.push(acc as u8);
            acc >>= 8;
            held -= 8;
        }
    }
    if held > 0 {
        payload.push(acc as u8);
    }
    Ok(FixedRateBlob {
        n: data.len() as u64,
        bits_per_value,
        buffer_min: lo,
        buffer_max: hi,
        payload,
    })
}

pub fn fixed_rate_decompress(blob: &FixedRateBlob) -> Result<Vec<f32>> {
    let bits = blob.bits_per_value as u32;
    if !(1..=16).contains(&bits) {
        return Err(CodecError::BitsPerValue(blob.bits_per_value));
    }
    let n = blob.n as usize;
    let needed = (n * bits as usize).div_ceil(8);
    if blob.payload.len() != needed {
        return Err(CodecError::LengthMismatch {
            expected: needed,
            actual: blob.payload.len(),
        });
    }
    let levels = ((1u32 << bits) - 1) as f64;
    let lo = blob.buffer_min as f64;
    let scale = (blob.buffer_max as f64 - lo) / levels;
    let mask = (1u64 << bits) - 1;
    let mut out = Vec::with_capacity(n);
    let mut bytes = blob.payload.iter();
    let mut acc = 0u64;
    let mut held = 0u32;
    for _ in 0..n {
        while held < bits {
            acc |= (*bytes.next().unwrap() as u64) << held;
            held += 8;
        }
        let code = acc & mask;
        acc >>= bits;
        held -= bits;
        out.push((lo + code as f64 * scale) as f32);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn max_err(a: &[f32], b: &[f32]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (*x as f64 - *y as f64).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn constant_buffer_is_exact() {
        let data = vec![2.5f32; 10];
        let blob = fixed_rate_compress(&data, 3).unwrap();
        assert!(blob.payload.iter().all(|&b| b == 0));
        assert_eq!(fixed_rate_decompress(&blob).unwrap(), data);
    }

    #[test]
    fn unit_range_eight_bits() {
        let data = [0.0f32, 1.0, 0.3, 0.77];
        let blob = fixed_rate_compress(&data, 8).unwrap();
        assert!((blob.error_bound() - 1.0 / 510.0).abs() < 1e-12);
        let out = fixed_rate_decompress(&blob).unwrap();
        assert!(max_err(&data, &out) <= 1.0 / 510.0 + 1e-7);
    }

    #[test]
    fn wide_range_breaks_any_fixed_bound() {
        let mut data = vec![0.0f32, 1e6];
        data.extend((0..100).map(|j| j as f32 * 9876.5));
        let blob = fixed_rate_compress(&data, 8).unwrap();
        assert!((blob.error_bound() - 1e6 / 510.0).abs() < 1e-6);
        let out = fixed_rate_decompress(&blob).unwrap();
        assert!(max_err(&data, &out) > 1e-4);
    }

    #[test]
    fn rate_errors() {
        assert_eq!(fixed_rate_compress(&[1.0], 0), Err(CodecError::BitsPerValue(0)));
        assert_eq!(fixed_rate_compress(&[1.0], 17), Err(CodecError::BitsPerValue(17)));
    }

    #[test]
    fn byte_layout_round_trip() {
        let blob = fixed_rate_compress(&[0.0, 0.5, 1.0], 5).unwrap();
        let bytes = blob.to_bytes();
        assert_eq!(bytes.len(), FIXED_HEADER_LEN + 2);
        assert_eq!(FixedRateBlob::from_bytes(&bytes).unwrap(), blob);
        assert!(FixedRateBlob::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    proptest! {
        #[test]
        fn size_is_exact_and_error_within_range_bound(
            data in prop::collection::vec(-1e3f32..1e3, 0..200),
            bits in 1u8..=16,
        ) {
            let blob = fixed_rate_compress(&data, bits).unwrap();
            prop_assert_eq!(blob.payload.len(), (data.len() * bits as usize).div_ceil(8));
            let out = fixed_rate_decompress(&blob).unwrap();
            prop_assert_eq!(out.len(), data.len());
            // binary32 rounding of the reconstruction adds at most half an ulp of 1e3
            prop_assert!(max_err(&data, &out) <= blob.error_bound() + 1e-4);
        }
    }
}
