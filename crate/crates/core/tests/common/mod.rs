#![allow(dead_code)]

use gzccl::collectives::{run_collective, AlgorithmId, CodecKind, RunOutput, RunSpec};
use gzccl::{CostParams, ErrorBound, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn ebz(eb: f64) -> CodecKind {
    CodecKind::ErrorBounded(ErrorBound::new(eb).unwrap())
}

pub fn id(s: &str) -> AlgorithmId {
    s.parse().unwrap()
}

pub fn uniform_inputs(ranks: usize, elements: usize, lo: f32, hi: f32, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..ranks)
        .map(|_| (0..elements).map(|_| rng.gen_range(lo..hi)).collect())
        .collect()
}

pub fn integer_inputs(ranks: usize, elements: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..ranks)
        .map(|_| (0..elements).map(|_| rng.gen_range(-1000..=1000) as f32).collect())
        .collect()
}

/// Inputs for `algorithm`: scatter reads only the root (rank 0).
pub fn shaped(algorithm: AlgorithmId, mut inputs: Vec<Vec<f32>>) -> Vec<Vec<f32>> {
    if algorithm.algorithm == gzccl::Algorithm::BinomialScatter {
        for v in inputs.iter_mut().skip(1) {
            v.clear();
        }
    }
    inputs
}

pub fn run(algorithm: AlgorithmId, codec: CodecKind, params: CostParams, inputs: &[Vec<f32>]) -> (Network, RunOutput) {
    let mut net = Network::with_size(inputs.len(), params).unwrap();
    let out = run_collective(&mut net, &RunSpec::new(algorithm, codec), inputs, None).unwrap();
    (net, out)
}

/// Slack for binary32 rounding in the reductions themselves: each of the
/// at most `n` additions into a partial sum rounds by half an ulp of a value
/// bounded by the sum of magnitudes. Twice that covers the oracle's single
/// rounding and the reconstruction offsets.
pub fn rounding_allowance(inputs: &[Vec<f32>]) -> f64 {
    let n = inputs.len() as f64;
    let mass: f64 = inputs
        .iter()
        .map(|v| v.iter().fold(0.0f64, |m, x| m.max(x.abs() as f64)))
        .sum();
    2.0 * n * f32::EPSILON as f64 * mass
}

pub fn max_err(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x as f64 - *y as f64).abs())
        .fold(0.0, f64::max)
}
