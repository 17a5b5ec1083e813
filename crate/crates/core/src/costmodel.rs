//! Analytical timing model for links and device kernels.
//!
//! A message costs `alpha + bytes * beta`. A kernel costs a launch overhead
//! plus `max(bytes, saturation) / throughput`: below the saturation size the
//! device is under-filled and the time stays flat.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Megabyte used throughout the model (decimal).
pub const MB: f64 = 1e6;

#[derive(Debug, Error)]
pub enum CostConfigError {
    #[error("cannot read cost config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid cost config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cost parameter `{0}` must be finite and positive")]
    NotPositive(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Compress,
    Decompress,
    Reduce,
}

/// Link, kernel and mode parameters. JSON field names match the struct
/// fields; missing fields take the defaults below.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostParams {
    /// Seconds per message.
    pub alpha: f64,
    /// Seconds per byte on the link (100 Gbps).
    pub beta: f64,
    /// Seconds per kernel invocation.
    pub launch: f64,
    /// Bytes below which kernel time plateaus.
    pub saturation: f64,
    pub compress_throughput: f64,
    pub decompress_throughput: f64,
    pub reduce_throughput: f64,
    pub host_device_bandwidth: f64,
    /// Route every message through host memory.
    pub staging: bool,
    /// Overlap per-step compute with communication.
    pub overlap: bool,
    /// Batch independent kernels into one launch.
    pub multi_stream: bool,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            alpha: 1e-5,
            beta: 8e-11,
            launch: 1.5e-4,
            saturation: 5.05 * MB,
            compress_throughput: 1.28e11,
            decompress_throughput: 1.28e11,
            reduce_throughput: 4e11,
            host_device_bandwidth: 2.4e10,
            staging: false,
            overlap: false,
            multi_stream: false,
        }
    }
}

impl CostParams {
    pub fn from_json(text: &str) -> Result<Self, CostConfigError> {
        let params: Self = serde_json::from_str(text)?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self, CostConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| CostConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CostConfigError> {
        let fields = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("launch", self.launch),
            ("saturation", self.saturation),
            ("compress_throughput", self.compress_throughput),
            ("decompress_throughput", self.decompress_throughput),
            ("reduce_throughput", self.reduce_throughput),
            ("host_device_bandwidth", self.host_device_bandwidth),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(CostConfigError::NotPositive(name));
            }
        }
        Ok(())
    }

    pub fn with_flags(mut self, staging: bool, overlap: bool, multi_stream: bool) -> Self {
        self.staging = staging;
        self.overlap = overlap;
        self.multi_stream = multi_stream;
        self
    }

    fn throughput(&self, kind: KernelKind) -> f64 {
        match kind {
            KernelKind::Compress => self.compress_throughput,
            KernelKind::Decompress => self.decompress_throughput,
            KernelKind::Reduce => self.reduce_throughput,
        }
    }

    pub fn msg_time(&self, bytes: usize) -> f64 {
        self.alpha + bytes as f64 * self.beta
    }

    pub fn kernel_time(&self, bytes: usize, kind: KernelKind) -> f64 {
        self.launch + (bytes as f64).max(self.saturation) / self.throughput(kind)
    }

    /// Time for a batch of independent kernels of the same kind.
    ///
    /// With multi-stream the batch pays one launch and fills the device with
    /// the aggregate size; otherwise each kernel runs on its own.
    pub fn multi_launch_time(&self, sizes: &[usize], kind: KernelKind) -> f64 {
        if self.multi_stream {
            let total: usize = sizes.iter().sum();
            self.kernel_time(total, kind)
        } else {
            sizes.iter().map(|&s| self.kernel_time(s, kind)).sum()
        }
    }

    /// Device-to-host before send plus host-to-device after receive.
    pub fn staging_time(&self, bytes: usize) -> f64 {
        if self.staging {
            2.0 * bytes as f64 / self.host_device_bandwidth
        } else {
            0.0
        }
    }

    pub fn step_time(&self, comm: f64, compute: f64) -> f64 {
        if self.overlap {
            comm.max(compute)
        } else {
            comm + compute
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-30)
    }

    #[test]
    fn message_time() {
        let p = CostParams::default();
        assert_eq!(p.msg_time(0), p.alpha);
        assert!(close(p.msg_time(1_000_000), 9.0e-5));
        // doubling only more than doubles when bandwidth dominates latency
        let small = 10;
        assert!(p.msg_time(2 * small) < 2.0 * p.msg_time(small));
    }

    #[test]
    fn kernel_plateau() {
        let p = CostParams::default();
        let s = p.saturation as usize;
        for kind in [KernelKind::Compress, KernelKind::Decompress, KernelKind::Reduce] {
            let floor = p.launch + p.saturation / p.throughput(kind);
            assert!(close(p.kernel_time(0, kind), floor));
            assert_eq!(p.kernel_time(s / 2, kind), p.kernel_time(s, kind));
            assert!(p.kernel_time(2 * s, kind) > p.kernel_time(s, kind));
        }
    }

    #[test]
    fn multi_launch() {
        let p = CostParams::default();
        let seq = p;
        let ms = p.with_flags(false, false, true);
        for mode in [seq, ms] {
            assert_eq!(
                mode.multi_launch_time(&[123_456], KernelKind::Compress),
                mode.kernel_time(123_456, KernelKind::Compress)
            );
        }
        let blocks = vec![MB as usize; 64];
        let a = ms.multi_launch_time(&blocks, KernelKind::Compress);
        let b = seq.multi_launch_time(&blocks, KernelKind::Compress);
        assert!(close(a, p.launch + 64.0 * MB / p.compress_throughput));
        assert!(close(b, 64.0 * (p.launch + p.saturation / p.compress_throughput)));
        assert!(a < b);
        assert!(close(
            ms.multi_launch_time(&[0, 0, 0], KernelKind::Decompress),
            p.launch + p.saturation / p.decompress_throughput
        ));
    }

    #[test]
    fn staging() {
        let p = CostParams::default();
        assert_eq!(p.staging_time(1 << 30), 0.0);
        let on = p.with_flags(true, false, false);
        assert_eq!(on.staging_time(0), 0.0);
        let custom = CostParams {
            host_device_bandwidth: 2.4e10,
            ..on
        };
        assert!(close(custom.staging_time(600_000_000), 0.05));
    }

    #[test]
    fn step_overlap() {
        let p = CostParams::default();
        let ov = p.with_flags(false, true, false);
        assert_eq!(ov.step_time(3.0, 4.0), 4.0);
        assert_eq!(p.step_time(3.0, 4.0), 7.0);
        assert_eq!(ov.step_time(2.5, 0.0), 2.5);
        assert_eq!(p.step_time(2.5, 0.0), 2.5);
    }

    #[test]
    fn json_config() {
        let p = CostParams::from_json(r#"{"alpha": 2e-6, "overlap": true}"#).unwrap();
        assert_eq!(p.alpha, 2e-6);
        assert!(p.overlap);
        assert_eq!(p.beta, CostParams::default().beta);
        assert!(CostParams::from_json(r#"{"alpah": 1}"#).is_err());
        assert!(matches!(
            CostParams::from_json(r#"{"beta": 0}"#),
            Err(CostConfigError::NotPositive("beta"))
        ));
        let round = CostParams::from_json(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(round, p);
    }

    proptest! {
        #[test]
        fn invariants(
            sizes in prop::collection::vec(0usize..50_000_000, 1..40),
            comm in 0f64..1.0,
            compute in 0f64..1.0,
            extra in 1usize..10_000_000,
        ) {
            let p = CostParams::default();
            let ms = p.with_flags(false, false, true);
            for kind in [KernelKind::Compress, KernelKind::Decompress, KernelKind::Reduce] {
                prop_assert!(ms.multi_launch_time(&sizes, kind) <= p.multi_launch_time(&sizes, kind));
                let s = p.saturation as usize;
                prop_assert!(p.kernel_time(s + extra, kind) > p.kernel_time(s, kind));
                prop_assert_eq!(p.kernel_time(sizes[0].min(s), kind), p.kernel_time(0, kind));
            }
            let ov = p.with_flags(false, true, false);
            prop_assert!(ov.step_time(comm, compute) <= p.step_time(comm, compute));
        }
    }
}
