//! Accuracy statistics and collective reports.

use crate::simnet::OpCounters;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: reference has {reference} values, test has {test}")]
    LengthMismatch { reference: usize, test: usize },
    #[error("empty input")]
    Empty,
    #[error("reference range is zero but the error is not")]
    DegenerateRange,
    #[error("compressed size must be positive")]
    ZeroCompressed,
}

fn check_lengths(reference: &[f32], test: &[f32]) -> Result<(), MetricsError> {
    if reference.len() != test.len() {
        return Err(MetricsError::LengthMismatch {
            reference: reference.len(),
            test: test.len(),
        });
    }
    Ok(())
}

pub fn max_abs_error(reference: &[f32], test: &[f32]) -> Result<f64, MetricsError> {
    check_lengths(reference, test)?;
    Ok(reference
        .iter()
        .zip(test)
        .map(|(r, t)| (*r as f64 - *t as f64).abs())
        .fold(0.0, f64::max))
}

pub fn mse(reference: &[f32], test: &[f32]) -> Result<f64, MetricsError> {
    check_lengths(reference, test)?;
    if reference.is_empty() {
        return Err(MetricsError::Empty);
    }
    let sum: f64 = reference
        .iter()
        .zip(test)
        .map(|(r, t)| {
            let d = *r as f64 - *t as f64;
            d * d
        })
        .sum();
    Ok(sum / reference.len() as f64)
}

fn value_range(values: &[f32]) -> f64 {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v as f64), hi.max(v as f64))
    });
    hi - lo
}

/// `10 log10(range^2 / mse)` with `range = max(ref) - min(ref)`;
/// `+inf` when the buffers are identical.
pub fn psnr(reference: &[f32], test: &[f32]) -> Result<f64, MetricsError> {
    let mse = mse(reference, test)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let range = value_range(reference);
    if range == 0.0 {
        return Err(MetricsError::DegenerateRange);
    }
    Ok(10.0 * (range * range / mse).log10())
}

pub fn compression_ratio(original_bytes: u64, compressed_bytes: u64) -> Result<f64, MetricsError> {
    if compressed_bytes == 0 {
        return Err(MetricsError::ZeroCompressed);
    }
    Ok(original_bytes as f64 / compressed_bytes as f64)
}

/// PSNR in JSON: a number, the string `"inf"` for identical buffers, or
/// `null` when undefined (constant reference with nonzero error).
pub(crate) mod psnr_json {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(f64::NAN),
            Some(Repr::Num(v)) => Ok(v),
            Some(Repr::Text(t)) if t == "inf" => Ok(f64::INFINITY),
            Some(Repr::Text(t)) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Some(Repr::Text(t)) => Err(serde::de::Error::custom(format!("bad psnr `{t}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyStats {
    pub max_abs_err: f64,
    pub mse: f64,
    #[serde(with = "psnr_json")]
    pub psnr: f64,
    pub mean_signed_err: f64,
}

impl AccuracyStats {
    /// Statistics of `test` against `reference`. Empty inputs give zero
    /// error and infinite PSNR.
    pub fn compute(reference: &[f32], test: &[f32]) -> Result<Self, MetricsError> {
        check_lengths(reference, test)?;
        if reference.is_empty() {
            return Ok(Self {
                max_abs_err: 0.0,
                mse: 0.0,
                psnr: f64::INFINITY,
                mean_signed_err: 0.0,
            });
        }
        let mse = mse(reference, test)?;
        let psnr = match psnr(reference, test) {
            Ok(p) => p,
            Err(MetricsError::DegenerateRange) => f64::NAN,
            Err(e) => return Err(e),
        };
        let signed: f64 = reference.iter().zip(test).map(|(r, t)| *t as f64 - *r as f64).sum();
        Ok(Self {
            max_abs_err: max_abs_error(reference, test)?,
            mse,
            psnr,
            mean_signed_err: signed / reference.len() as f64,
        })
    }
}

/// Share of simulated time per category, summed over ranks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    /// Compression and decompression.
    pub compress_pct: f64,
    pub comm_pct: f64,
    pub reduce_pct: f64,
    /// Host staging and everything else.
    pub other_pct: f64,
}

impl Breakdown {
    pub fn from_counters(c: &OpCounters) -> Self {
        let total = c.total_s();
        if total <= 0.0 {
            return Self {
                compress_pct: 0.0,
                comm_pct: 0.0,
                reduce_pct: 0.0,
                other_pct: 100.0,
            };
        }
        let pct = |v: f64| 100.0 * v / total;
        Self {
            compress_pct: pct(c.compress_s + c.decompress_s),
            comm_pct: pct(c.comm_s),
            reduce_pct: pct(c.reduce_s),
            other_pct: pct(c.staging_s + c.other_s),
        }
    }

    pub fn sum(&self) -> f64 {
        self.compress_pct + self.comm_pct + self.reduce_pct + self.other_pct
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectiveReport {
    pub algorithm: String,
    pub codec: String,
    pub ranks: usize,
    /// Input values per rank (root data for scatter).
    pub elements: usize,
    pub eb: Option<f64>,
    pub counters: OpCounters,
    pub per_rank: Vec<OpCounters>,
    pub accuracy: AccuracyStats,
    /// Bytes fed to the compressor over bytes it produced, all ranks;
    /// 1 when nothing was compressed.
    pub compression_ratio: f64,
    pub makespan_s: f64,
    pub breakdown: Breakdown,
}

impl CollectiveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Sums per-rank counters.
pub fn aggregate(per_rank: &[OpCounters]) -> OpCounters {
    per_rank.iter().fold(OpCounters::default(), |mut acc, c| {
        acc.accumulate(c);
        acc
    })
}
