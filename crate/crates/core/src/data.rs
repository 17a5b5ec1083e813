//! Input generation and raw binary32 dataset ingestion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} holds {found} values, {needed} required")]
    ShortFile { path: PathBuf, needed: usize, found: usize },
    #[error("non-finite value {value} at index {index} (byte offset {offset})")]
    NonFinite { index: usize, offset: usize, value: f32 },
    #[error("invalid image dimensions {width}x{height}")]
    InvalidDims { width: usize, height: usize },
    #[error("unknown data source `{0}` (expected uniform, ramp or file:PATH)")]
    UnknownSource(String),
}

/// Reads the first `count` little-endian binary32 values of `path`.
pub fn load_dataset(path: &Path, count: usize) -> Result<Vec<f32>, DataError> {
    let bytes = std::fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.len() / 4 < count {
        return Err(DataError::ShortFile {
            path: path.to_path_buf(),
            needed: count,
            found: bytes.len() / 4,
        });
    }
    let values: Vec<f32> = bytes[..4 * count]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(DataError::NonFinite {
            index,
            offset: 4 * index,
            value,
        });
    }
    Ok(values)
}

pub fn write_f32(path: &Path, values: &[f32]) -> std::io::Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(path, bytes)
}

/// Where benchmark inputs come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DataSource {
    /// Seeded uniform values in `[0, 1)`, an independent stream per rank.
    Uniform,
    /// `0.001 * global index`.
    Ramp,
    /// Consecutive slices of a raw binary32 file.
    File(PathBuf),
}

impl FromStr for DataSource {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, DataError> {
        match s {
            "uniform" => Ok(DataSource::Uniform),
            "ramp" => Ok(DataSource::Ramp),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(DataSource::File(PathBuf::from(p))),
                _ => Err(DataError::UnknownSource(s.to_string())),
            },
        }
    }
}

impl fmt::Display for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataSource::Uniform => f.write_str("uniform"),
            DataSource::Ramp => f.write_str("ramp"),
            DataSource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

pub fn uniform(n: usize, seed: u64, stream: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..n).map(|_| rng.gen::<f32>()).collect()
}

/// `ranks` buffers of `elements` values each.
pub fn rank_inputs(source: &DataSource, ranks: usize, elements: usize, seed: u64) -> Result<Vec<Vec<f32>>, DataError> {
    Ok(match source {
        DataSource::Uniform => (0..ranks).map(|r| uniform(elements, seed, r as u64)).collect(),
        DataSource::Ramp => (0..ranks)
            .map(|r| {
                (0..elements)
                    .map(|j| ((r * elements + j) as f64 * 1e-3) as f32)
                    .collect()
            })
            .collect(),
        DataSource::File(path) => {
            let all = load_dataset(path, ranks * elements)?;
            if elements == 0 {
                vec![Vec::new(); ranks]
            } else {
                all.chunks(elements).map(<[f32]>::to_vec).collect()
            }
        }
    })
}

/// `count` seeded images of `width * height` pixels in `[0, 1]`: a shared
/// smooth sinusoidal field plus independent uniform noise per image, each
/// image min-max normalized.
pub fn stacking_images(count: usize, width: usize, height: usize, seed: u64) -> Result<Vec<Vec<f32>>, DataError> {
    if width == 0 || height == 0 {
        return Err(DataError::InvalidDims { width, height });
    }
    let base: Vec<f64> = (0..height)
        .flat_map(|y| {
            (0..width).map(move |x| {
                let u = x as f64 / width as f64;
                let v = y as f64 / height as f64;
                0.5 + 0.3 * (2.0 * PI * (1.5 * u + 0.5 * v)).sin() * (2.0 * PI * v).cos()
                    + 0.2 * (2.0 * PI * 3.0 * u * v).sin()
            })
        })
        .collect();
    let images = (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let raw: Vec<f64> = base.iter().map(|b| b + rng.gen_range(-0.1..0.1)).collect();
            let (lo, hi) = raw
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            let span = if hi > lo { hi - lo } else { 1.0 };
            raw.iter().map(|v| ((v - lo) / span) as f32).collect()
        })
        .collect();
    Ok(images)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sources_parse() {
        assert_eq!("uniform".parse::<DataSource>().unwrap(), DataSource::Uniform);
        assert_eq!(
            "file:/a/b".parse::<DataSource>().unwrap(),
            DataSource::File("/a/b".into())
        );
        assert!("file:".parse::<DataSource>().is_err());
        assert!("gauss".parse::<DataSource>().is_err());
        assert_eq!(DataSource::File("x.f32".into()).to_string(), "file:x.f32");
    }

    #[test]
    fn uniform_streams_differ_and_repeat() {
        let a = uniform(64, 7, 0);
        assert_eq!(a, uniform(64, 7, 0));
        assert_ne!(a, uniform(64, 7, 1));
        assert!(a.iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn ramp_is_global_index() {
        let r = rank_inputs(&DataSource::Ramp, 2, 3, 0).unwrap();
        assert_eq!(r[1][0], 0.003);
    }

    #[test]
    fn images_in_unit_range() {
        let imgs = stacking_images(3, 16, 8, 1).unwrap();
        for img in &imgs {
            assert_eq!(img.len(), 128);
            assert!(img.iter().all(|v| (0.0..=1.0).contains(v)));
            assert_eq!(img.iter().cloned().fold(f32::MAX, f32::min), 0.0);
        }
        assert_ne!(imgs[0], imgs[1]);
        assert!(stacking_images(2, 0, 4, 1).is_err());
    }
}
