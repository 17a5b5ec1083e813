//! C ABI over `gzccl`.
//!
//! Every fallible function returns a [`GzcclStatus`]; on failure the
//! message is available from [`gzccl_last_error`] on the same thread.
//! Compressors and collective results are opaque handles that must be
//! released with their `_free` function.

use gzccl::codec::{self, Compressor, ErrorBound, Header};
use gzccl::collectives::{run_collective, AlgorithmId, CodecKind, RunSpec};
use gzccl::costmodel::{CostParams, KernelKind};
use gzccl::simnet::Network;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GzcclStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Codec = 3,
    Collective = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GzcclKernel {
    Compress = 0,
    Decompress = 1,
    Reduce = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GzcclCodec {
    /// Error-bounded codec; uses `eb`.
    ErrorBounded = 0,
    /// Fixed-rate quantizer; uses `bits`.
    FixedRate = 1,
    /// Raw binary32 on the wire.
    None = 2,
}

/// Cost-model parameters. Obtain defaults from [`gzccl_cost_params_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct GzcclCostParams {
    pub alpha: f64,
    pub beta: f64,
    pub launch: f64,
    pub saturation: f64,
    pub compress_throughput: f64,
    pub decompress_throughput: f64,
    pub reduce_throughput: f64,
    pub host_device_bandwidth: f64,
    pub staging: bool,
    pub overlap: bool,
    pub multi_stream: bool,
}

impl From<CostParams> for GzcclCostParams {
    fn from(p: CostParams) -> Self {
        Self {
            alpha: p.alpha,
            beta: p.beta,
            launch: p.launch,
            saturation: p.saturation,
            compress_throughput: p.compress_throughput,
            decompress_throughput: p.decompress_throughput,
            reduce_throughput: p.reduce_throughput,
            host_device_bandwidth: p.host_device_bandwidth,
            staging: p.staging,
            overlap: p.overlap,
            multi_stream: p.multi_stream,
        }
    }
}

impl From<GzcclCostParams> for CostParams {
    fn from(p: GzcclCostParams) -> Self {
        Self {
            alpha: p.alpha,
            beta: p.beta,
            launch: p.launch,
            saturation: p.saturation,
            compress_throughput: p.compress_throughput,
            decompress_throughput: p.decompress_throughput,
            reduce_throughput: p.reduce_throughput,
            host_device_bandwidth: p.host_device_bandwidth,
            staging: p.staging,
            overlap: p.overlap,
            multi_stream: p.multi_stream,
        }
    }
}

/// Reusable compression workspace.
pub struct GzcclCompressor {
    inner: Compressor,
    blob: Vec<u8>,
}

/// Outputs and report of one collective run.
pub struct GzcclRun {
    outputs: Vec<Vec<f32>>,
    makespan: f64,
    report: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(GzcclStatus, String);

type Outcome = Result<(), Failure>;

fn fail(status: GzcclStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

impl From<codec::CodecError> for Failure {
    fn from(e: codec::CodecError) -> Self {
        fail(GzcclStatus::Codec, e.to_string())
    }
}

fn set_error(msg: Option<String>) {
    let c = msg.map(|m| CString::new(m.replace('\0', " ")).expect("nul bytes removed"));
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard<F: FnOnce() -> Outcome>(f: F) -> GzcclStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(None);
            GzcclStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(Some(msg));
            status
        }
        Err(_) => {
            set_error(Some("internal panic".into()));
            GzcclStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(fail(GzcclStatus::NullPointer, format!("{what} is null")));
    }
    Ok(())
}

/// # Safety
/// `data` must point to `n` readable values unless `n == 0`.
unsafe fn slice<'a, T>(data: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    non_null(data, what)?;
    Ok(std::slice::from_raw_parts(data, n))
}

fn copy_out<T: Copy>(src: &[T], out: *mut T, cap: usize, out_len: *mut usize) -> Outcome {
    non_null(out_len, "out_len")?;
    // SAFETY: checked non-null; caller provides a writable size_t.
    unsafe { *out_len = src.len() };
    if src.len() > cap {
        return Err(fail(
            GzcclStatus::BufferTooSmall,
            format!("need room for {} items, have {cap}", src.len()),
        ));
    }
    if !src.is_empty() {
        non_null(out, "out")?;
        // SAFETY: `out` holds at least `cap >= src.len()` items.
        unsafe { ptr::copy_nonoverlapping(src.as_ptr(), out, src.len()) };
    }
    Ok(())
}

/// Message for the last failed call on this thread, or null after a
/// success. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn gzccl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn gzccl_cost_params_default() -> GzcclCostParams {
    CostParams::default().into()
}

/// Modeled kernel seconds for `bytes` of input; negative if `params` is null.
///
/// # Safety
/// `params` must be null or point to a valid struct.
#[no_mangle]
pub unsafe extern "C" fn gzccl_kernel_time(params: *const GzcclCostParams, bytes: usize, kind: GzcclKernel) -> f64 {
    let Some(p) = params.as_ref() else { return -1.0 };
    let kind = match kind {
        GzcclKernel::Compress => KernelKind::Compress,
        GzcclKernel::Decompress => KernelKind::Decompress,
        GzcclKernel::Reduce => KernelKind::Reduce,
    };
    CostParams::from(*p).kernel_time(bytes, kind)
}

/// Modeled seconds to move one message of `bytes`; negative if `params` is null.
///
/// # Safety
/// `params` must be null or point to a valid struct.
#[no_mangle]
pub unsafe extern "C" fn gzccl_msg_time(params: *const GzcclCostParams, bytes: usize) -> f64 {
    match params.as_ref() {
        Some(p) => CostParams::from(*p).msg_time(bytes),
        None => -1.0,
    }
}

/// Largest blob `gzccl_compress` can produce for `n` values.
#[no_mangle]
pub extern "C" fn gzccl_max_compressed_len(n: usize) -> usize {
    codec::max_compressed_len(n)
}

#[no_mangle]
pub extern "C" fn gzccl_compressor_new() -> *mut GzcclCompressor {
    Box::into_raw(Box::new(GzcclCompressor {
        inner: Compressor::new(),
        blob: Vec::new(),
    }))
}

/// # Safety
/// `h` must be null or a handle from `gzccl_compressor_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gzccl_compressor_free(h: *mut GzcclCompressor) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Compresses `n` values with absolute bound `eb` into `out` (capacity
/// `cap` bytes). `*out_len` receives the blob size, also when the buffer
/// is too small.
///
/// # Safety
/// `h` must be a live handle; `data` must hold `n` values; `out` must hold
/// `cap` bytes; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gzccl_compressor_compress(
    h: *mut GzcclCompressor,
    data: *const f32,
    n: usize,
    eb: f64,
    out: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> GzcclStatus {
    guard(|| {
        non_null(h, "compressor")?;
        let h = &mut *h;
        let data = slice(data, n, "data")?;
        let eb = ErrorBound::new(eb)?;
        h.inner.compress_into(data, eb, &mut h.blob, None)?;
        copy_out(&h.blob, out, cap, out_len)
    })
}

/// One-shot form of [`gzccl_compressor_compress`].
///
/// # Safety
/// As for `gzccl_compressor_compress`, without the handle.
#[no_mangle]
pub unsafe extern "C" fn gzccl_compress(
    data: *const f32,
    n: usize,
    eb: f64,
    out: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> GzcclStatus {
    guard(|| {
        let data = slice(data, n, "data")?;
        let blob = codec::compress(data, ErrorBound::new(eb)?)?;
        copy_out(&blob, out, cap, out_len)
    })
}

/// Number of values encoded in `blob`.
///
/// # Safety
/// `blob` must hold `len` bytes; `n` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gzccl_decompressed_len(blob: *const u8, len: usize, n: *mut usize) -> GzcclStatus {
    guard(|| {
        let blob = slice(blob, len, "blob")?;
        non_null(n, "n")?;
        let header = Header::parse(blob)?;
        *n = usize::try_from(header.n).map_err(|_| fail(GzcclStatus::Codec, "value count overflows size_t"))?;
        Ok(())
    })
}

/// Decodes `blob` into `out` (capacity `cap` values); `*n` receives the
/// value count.
///
/// # Safety
/// `blob` must hold `len` bytes, `out` `cap` values; `n` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gzccl_decompress(
    blob: *const u8,
    len: usize,
    out: *mut f32,
    cap: usize,
    n: *mut usize,
) -> GzcclStatus {
    guard(|| {
        let blob = slice(blob, len, "blob")?;
        let values = codec::decompress(blob)?;
        copy_out(&values, out, cap, n)
    })
}

/// Runs collective `algorithm` (e.g. `"ring-allreduce"`) over `ranks`
/// simulated ranks. Rank `r` contributes `lens[r]` values at `inputs[r]`
/// (for scatter only the root, rank 0, needs data). `params` may be null
/// for defaults. On success `*out` receives a handle.
///
/// # Safety
/// `algorithm` must be a nul-terminated string; `inputs` and `lens` must
/// hold `ranks` entries with each `inputs[r]` holding `lens[r]` values;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gzccl_run(
    algorithm: *const c_char,
    ranks: usize,
    inputs: *const *const f32,
    lens: *const usize,
    codec: GzcclCodec,
    eb: f64,
    bits: u8,
    params: *const GzcclCostParams,
    out: *mut *mut GzcclRun,
) -> GzcclStatus {
    guard(|| {
        non_null(algorithm, "algorithm")?;
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let name = CStr::from_ptr(algorithm)
            .to_str()
            .map_err(|_| fail(GzcclStatus::InvalidArgument, "algorithm is not UTF-8"))?;
        let id: AlgorithmId = name
            .parse()
            .map_err(|e: gzccl::collectives::CollectiveError| fail(GzcclStatus::InvalidArgument, e.to_string()))?;
        if ranks == 0 {
            return Err(fail(GzcclStatus::InvalidArgument, "ranks must be positive"));
        }
        let ptrs = slice(inputs, ranks, "inputs")?;
        let lens = slice(lens, ranks, "lens")?;
        let data = ptrs
            .iter()
            .zip(lens)
            .map(|(&p, &n)| slice(p, n, "inputs[r]").map(<[f32]>::to_vec))
            .collect::<Result<Vec<_>, _>>()?;
        let kind = match codec {
            GzcclCodec::ErrorBounded => CodecKind::ErrorBounded(ErrorBound::new(eb)?),
            GzcclCodec::FixedRate => CodecKind::FixedRate(bits),
            GzcclCodec::None => CodecKind::None,
        };
        let params = params
            .as_ref()
            .map_or_else(CostParams::default, |p| CostParams::from(*p));
        params
            .validate()
            .map_err(|e| fail(GzcclStatus::InvalidArgument, e.to_string()))?;
        let mut net =
            Network::with_size(ranks, params).map_err(|e| fail(GzcclStatus::InvalidArgument, e.to_string()))?;
        let run = run_collective(&mut net, &RunSpec::new(id, kind), &data, None)
            .map_err(|e| fail(GzcclStatus::Collective, e.to_string()))?;
        let report = CString::new(run.report.to_json()).expect("JSON has no nul bytes");
        *out = Box::into_raw(Box::new(GzcclRun {
            outputs: run.outputs,
            makespan: run.report.makespan_s,
            report,
        }));
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gzccl_run_ranks(run: *const GzcclRun) -> usize {
    run.as_ref().map_or(0, |r| r.outputs.len())
}

/// Output length of `rank`, 0 for a null handle or bad rank.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gzccl_run_output_len(run: *const GzcclRun, rank: usize) -> usize {
    run.as_ref().and_then(|r| r.outputs.get(rank)).map_or(0, Vec::len)
}

/// Output values of `rank`, owned by the handle; null for a bad rank.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gzccl_run_output(run: *const GzcclRun, rank: usize) -> *const f32 {
    run.as_ref()
        .and_then(|r| r.outputs.get(rank))
        .map_or(ptr::null(), |v| v.as_ptr())
}

/// Simulated completion time in seconds; negative for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gzccl_run_makespan(run: *const GzcclRun) -> f64 {
    run.as_ref().map_or(-1.0, |r| r.makespan)
}

/// The run's JSON report, owned by the handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gzccl_run_report_json(run: *const GzcclRun) -> *const c_char {
    run.as_ref().map_or(ptr::null(), |r| r.report.as_ptr())
}

/// # Safety
/// `run` must be null or a handle from `gzccl_run` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gzccl_run_free(run: *mut GzcclRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
