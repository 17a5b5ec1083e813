//! Image stacking: summing many noisy exposures with an allreduce.

use crate::collectives::{run_collective, Algorithm, AlgorithmId, CodecKind, RunSpec};
use crate::costmodel::CostParams;
use crate::data::stacking_images;
use crate::metrics::{AccuracyStats, CollectiveReport};
use crate::simnet::Network;
use crate::{Error, ErrorBound, Result};
use serde::Serialize;

#[derive(Clone, Debug)]
pub struct StackConfig {
    pub images: usize,
    pub width: usize,
    pub height: usize,
    pub eb: f64,
    pub algorithm: AlgorithmId,
    pub seed: u64,
    pub params: CostParams,
}

#[derive(Clone, Debug, Serialize)]
pub struct StackReport {
    pub images: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    /// Worst-case per-pixel error of the chosen algorithm.
    pub error_budget: f64,
    /// Stacked image against the stack produced without compression.
    pub vs_lossless: AccuracyStats,
    pub collective: CollectiveReport,
}

impl StackReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Clone, Debug)]
pub struct StackResult {
    pub stacked: Vec<f32>,
    pub lossless: Vec<f32>,
    pub report: StackReport,
}

/// Generates `images` synthetic exposures, one per rank, and sums them with
/// the configured allreduce and with its lossless twin.
pub fn run_stack(cfg: &StackConfig) -> Result<StackResult> {
    if cfg.images < 2 {
        return Err(Error::Invalid(format!(
            "stacking needs at least 2 images, got {}",
            cfg.images
        )));
    }
    if !matches!(
        cfg.algorithm.algorithm,
        Algorithm::RingAllreduce | Algorithm::RdAllreduce
    ) {
        return Err(Error::Invalid(format!("`{}` is not an allreduce", cfg.algorithm)));
    }
    let inputs = stacking_images(cfg.images, cfg.width, cfg.height, cfg.seed)?;
    let eb = ErrorBound::new(cfg.eb)?;

    let mut net = Network::with_size(cfg.images, cfg.params)?;
    let run = run_collective(
        &mut net,
        &RunSpec::new(cfg.algorithm, CodecKind::ErrorBounded(eb)),
        &inputs,
        None,
    )?;
    let twin = AlgorithmId {
        lossless: true,
        ..cfg.algorithm
    };
    let mut net = Network::with_size(cfg.images, cfg.params)?;
    let exact = run_collective(&mut net, &RunSpec::new(twin, CodecKind::None), &inputs, None)?;

    let stacked = run.outputs.into_iter().next().unwrap_or_default();
    let lossless = exact.outputs.into_iter().next().unwrap_or_default();
    let budget = if cfg.algorithm.lossless {
        0.0
    } else {
        cfg.algorithm.algorithm.error_budget(cfg.images, cfg.eb)
    };
    let report = StackReport {
        images: cfg.images,
        width: cfg.width,
        height: cfg.height,
        seed: cfg.seed,
        error_budget: budget,
        vs_lossless: AccuracyStats::compute(&lossless, &stacked)?,
        collective: run.report,
    };
    Ok(StackResult {
        stacked,
        lossless,
        report,
    })
}
