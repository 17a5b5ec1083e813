//! Command-line front end.

use crate::codec::{self, ErrorBound};
use crate::collectives::predict::{predict, SizeModel};
use crate::collectives::{run_collective, Algorithm, AlgorithmId, CodecKind, ReduceOp, RunSpec};
use crate::costmodel::{CostParams, KernelKind, MB};
use crate::data::{rank_inputs, uniform, write_f32, DataSource};
use crate::metrics::CollectiveReport;
use crate::simnet::Network;
use crate::stacking::{run_stack, StackConfig};
use crate::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Environment variable naming a cost-model JSON file when `--cost-config`
/// is not given.
pub const COST_CONFIG_ENV: &str = "GZCCL_COST_CONFIG";

pub const BENCH_CSV_HEADER: &str = "algorithm,codec,ranks,elements,eb,n_compress,n_decompress,n_messages,bytes_sent,\
compression_ratio,max_abs_err,mse,psnr,makespan_s,compress_pct,comm_pct,reduce_pct,other_pct";

pub const CHARACTERIZE_CSV_HEADER: &str =
    "bytes,model_compress_s,model_decompress_s,measured_compress_s,measured_decompress_s";

#[derive(Debug, Parser)]
#[command(
    name = "gzccl",
    version,
    about = "Compressed collectives on a simulated multi-rank network"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one collective and write its report.
    Bench(BenchArgs),
    /// Tabulate modeled and measured codec time against buffer size.
    Characterize(CharacterizeArgs),
    /// Stack synthetic images with an allreduce.
    Stack(StackArgs),
    /// Predicted ring and recursive-doubling allreduce time per rank count.
    Crossover(CrossoverArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Cost-model JSON; falls back to $GZCCL_COST_CONFIG, then defaults.
    #[arg(long)]
    pub cost_config: Option<PathBuf>,
    /// Stage every message through host memory.
    #[arg(long)]
    pub staging: bool,
    /// Overlap compute with communication.
    #[arg(long)]
    pub overlap: bool,
    /// Batch independent kernels.
    #[arg(long)]
    pub multi_stream: bool,
}

impl ModelArgs {
    pub fn params(&self) -> Result<CostParams> {
        let path = self.cost_config.clone().or_else(|| {
            std::env::var_os(COST_CONFIG_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        });
        let mut p = match path {
            Some(path) => CostParams::load(&path)?,
            None => CostParams::default(),
        };
        p.staging |= self.staging;
        p.overlap |= self.overlap;
        p.multi_stream |= self.multi_stream;
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CodecArg {
    Ebz,
    FixedRate,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OpArg {
    Sum,
    Max,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Algorithm id, e.g. ring-allreduce or lossless-rd-allreduce.
    #[arg(long)]
    pub algo: String,
    #[arg(long)]
    pub ranks: usize,
    /// Values per rank (root data for scatter).
    #[arg(long)]
    pub elements: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub eb: f64,
    #[arg(long, value_enum, default_value_t = CodecArg::Ebz)]
    pub codec: CodecArg,
    /// Bits per value for the fixed-rate codec.
    #[arg(long, default_value_t = 8)]
    pub bits: u8,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// uniform, ramp or file:PATH
    #[arg(long, default_value = "uniform")]
    pub data: String,
    #[arg(long, value_enum, default_value_t = OpArg::Sum)]
    pub op: OpArg,
    /// Scatter root.
    #[arg(long, default_value_t = 0)]
    pub root: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write every rank's output, concatenated, as raw binary32.
    #[arg(long)]
    pub dump_outputs: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CharacterizeArgs {
    #[arg(long, default_value_t = 4096)]
    pub min_bytes: usize,
    #[arg(long, default_value_t = 64_000_000)]
    pub max_bytes: usize,
    #[arg(long, default_value_t = 16)]
    pub points: usize,
    /// Skip wall-clock measurement (columns left empty).
    #[arg(long)]
    pub model_only: bool,
    #[arg(long, default_value_t = 1e-4)]
    pub eb: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StackArgs {
    #[arg(long, default_value_t = 64)]
    pub images: usize,
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 256)]
    pub height: usize,
    #[arg(long, default_value_t = 2e-4)]
    pub eb: f64,
    #[arg(long, default_value = "rd-allreduce")]
    pub algo: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Stacked image as raw binary32.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON report path; defaults to OUT with `.json` appended.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CrossoverArgs {
    /// Per-rank buffer in megabytes.
    #[arg(long, default_value_t = 646.0)]
    pub mbytes: f64,
    /// Assumed compression ratio.
    #[arg(long, default_value_t = 25.6)]
    pub ratio: f64,
    #[arg(long, default_value_t = 2)]
    pub min_ranks: usize,
    #[arg(long, default_value_t = 512)]
    pub max_ranks: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn parse_algorithm(s: &str) -> Result<AlgorithmId> {
    Ok(s.parse::<AlgorithmId>()?)
}

/// Runs the configured collective and returns its report and outputs.
pub fn bench(args: &BenchArgs) -> Result<(CollectiveReport, Vec<Vec<f32>>)> {
    let algorithm = parse_algorithm(&args.algo)?;
    if args.ranks == 0 {
        return Err(Error::Invalid("--ranks must be positive".into()));
    }
    let codec = match args.codec {
        CodecArg::Ebz => CodecKind::ErrorBounded(ErrorBound::new(args.eb)?),
        CodecArg::FixedRate => {
            if !(1..=16).contains(&args.bits) {
                return Err(codec::CodecError::BitsPerValue(args.bits).into());
            }
            CodecKind::FixedRate(args.bits)
        }
        CodecArg::None => CodecKind::None,
    };
    let source: DataSource = args.data.parse()?;
    let params = args.model.params()?;
    let mut inputs = rank_inputs(&source, args.ranks, args.elements, args.seed)?;
    if algorithm.algorithm == Algorithm::BinomialScatter {
        // only the root's buffer is scattered
        for (r, v) in inputs.iter_mut().enumerate() {
            if r != args.root {
                v.clear();
            }
        }
    }
    let spec = RunSpec {
        algorithm,
        codec,
        op: match args.op {
            OpArg::Sum => ReduceOp::Sum,
            OpArg::Max => ReduceOp::Max,
        },
        root: args.root,
    };
    let mut net = Network::with_size(args.ranks, params)?;
    let run = run_collective(&mut net, &spec, &inputs, None)?;
    Ok((run.report, run.outputs))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn report_csv(r: &CollectiveReport) -> String {
    let c = &r.counters;
    let b = &r.breakdown;
    let psnr = if r.accuracy.psnr.is_nan() {
        String::new()
    } else {
        r.accuracy.psnr.to_string()
    };
    format!(
        "{BENCH_CSV_HEADER}\n{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        r.algorithm,
        r.codec,
        r.ranks,
        r.elements,
        fmt_opt(r.eb),
        c.n_compress,
        c.n_decompress,
        c.n_messages,
        c.bytes_sent,
        r.compression_ratio,
        r.accuracy.max_abs_err,
        r.accuracy.mse,
        psnr,
        r.makespan_s,
        b.compress_pct,
        b.comm_pct,
        b.reduce_pct,
        b.other_pct
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct CharacterizeRow {
    pub bytes: usize,
    pub model_compress_s: f64,
    pub model_decompress_s: f64,
    pub measured_compress_s: Option<f64>,
    pub measured_decompress_s: Option<f64>,
}

/// `points` sizes log-spaced over `[min, max]`, rounded down to whole
/// values (at least one value), strictly increasing.
pub fn log_sizes(min_bytes: usize, max_bytes: usize, points: usize) -> Result<Vec<usize>> {
    if min_bytes < 4 || min_bytes >= max_bytes || points < 2 {
        return Err(Error::Invalid(format!(
            "bad range: need 4 <= min < max and points >= 2 (got {min_bytes}, {max_bytes}, {points})"
        )));
    }
    let (lo, hi) = (min_bytes as f64, max_bytes as f64);
    let mut sizes: Vec<usize> = (0..points)
        .map(|i| {
            let b = lo * (hi / lo).powf(i as f64 / (points - 1) as f64);
            (b.round() as usize / 4).max(1) * 4
        })
        .collect();
    sizes.dedup();
    Ok(sizes)
}

fn best_of<F: FnMut()>(reps: usize, mut f: F) -> f64 {
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn characterize(args: &CharacterizeArgs) -> Result<Vec<CharacterizeRow>> {
    let params = args.model.params()?;
    let eb = ErrorBound::new(args.eb)?;
    let sizes = log_sizes(args.min_bytes, args.max_bytes, args.points)?;
    let mut compressor = codec::Compressor::new();
    let mut rows = Vec::with_capacity(sizes.len());
    for bytes in sizes {
        let (mut mc, mut md) = (None, None);
        if !args.model_only {
            let data = uniform(bytes / 4, args.seed, 0);
            let reps = if bytes < 8_000_000 { 5 } else { 2 };
            let mut blob = Vec::new();
            mc = Some(best_of(reps, || {
                compressor
                    .compress_into(&data, eb, &mut blob, None)
                    .expect("finite data compresses");
            }));
            let mut out = Vec::new();
            md = Some(best_of(reps, || {
                codec::decompress_into(&blob, &mut out).expect("fresh blob decodes");
            }));
        }
        rows.push(CharacterizeRow {
            bytes,
            model_compress_s: params.kernel_time(bytes, KernelKind::Compress),
            model_decompress_s: params.kernel_time(bytes, KernelKind::Decompress),
            measured_compress_s: mc,
            measured_decompress_s: md,
        });
    }
    Ok(rows)
}

pub fn characterize_csv(rows: &[CharacterizeRow]) -> String {
    let mut s = format!("{CHARACTERIZE_CSV_HEADER}\n");
    for r in rows {
        s += &format!(
            "{},{},{},{},{}\n",
            r.bytes,
            r.model_compress_s,
            r.model_decompress_s,
            fmt_opt(r.measured_compress_s),
            fmt_opt(r.measured_decompress_s)
        );
    }
    s
}

pub fn crossover_csv(args: &CrossoverArgs) -> Result<(String, Option<usize>)> {
    if args.min_ranks < 1 || args.min_ranks > args.max_ranks {
        return Err(Error::Invalid("need 1 <= min-ranks <= max-ranks".into()));
    }
    if !(args.ratio.is_finite() && args.ratio > 0.0) || !(args.mbytes.is_finite() && args.mbytes > 0.0) {
        return Err(Error::Invalid("ratio and mbytes must be positive".into()));
    }
    let params = args.model.params()?;
    let elements = (args.mbytes * MB / 4.0) as usize;
    let sizes = SizeModel::Ratio(args.ratio);
    let ring = AlgorithmId {
        algorithm: Algorithm::RingAllreduce,
        lossless: false,
    };
    let rd = AlgorithmId {
        algorithm: Algorithm::RdAllreduce,
        lossless: false,
    };
    let mut s = String::from("ranks,ring_allreduce_s,rd_allreduce_s\n");
    let mut first = None;
    for n in args.min_ranks..=args.max_ranks {
        let t_ring = predict(ring, &params, n, elements, sizes).makespan;
        let t_rd = predict(rd, &params, n, elements, sizes).makespan;
        s += &format!("{n},{t_ring},{t_rd}\n");
        match (t_rd < t_ring, first) {
            (true, None) => first = Some(n),
            (false, Some(_)) => first = None,
            _ => {}
        }
    }
    Ok((s, first))
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bench(args) => {
            let (report, outputs) = bench(&args)?;
            let text = match args.format {
                Format::Json => report.to_json() + "\n",
                Format::Csv => report_csv(&report),
            };
            emit(args.out.as_deref(), &text)?;
            if let Some(path) = &args.dump_outputs {
                write_f32(path, &outputs.concat())?;
            }
        }
        Command::Characterize(args) => {
            let rows = characterize(&args)?;
            emit(args.out.as_deref(), &characterize_csv(&rows))?;
        }
        Command::Stack(args) => {
            let cfg = StackConfig {
                images: args.images,
                width: args.width,
                height: args.height,
                eb: args.eb,
                algorithm: parse_algorithm(&args.algo)?,
                seed: args.seed,
                params: args.model.params()?,
            };
            let result = run_stack(&cfg)?;
            write_f32(&args.out, &result.stacked)?;
            let report_path = args.report.clone().unwrap_or_else(|| {
                let mut p = args.out.clone().into_os_string();
                p.push(".json");
                PathBuf::from(p)
            });
            std::fs::write(report_path, result.report.to_json() + "\n")?;
        }
        Command::Crossover(args) => {
            let (csv, first) = crossover_csv(&args)?;
            emit(args.out.as_deref(), &csv)?;
            match first {
                Some(n) => eprintln!("recursive doubling is faster from {n} ranks on"),
                None => eprintln!("no crossover in range"),
            }
        }
    }
    Ok(())
}
