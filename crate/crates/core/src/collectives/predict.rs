//! Size-only replay of every collective schedule.
//!
//! Runs the same step sequence as the real collectives, but tracks only
//! element counts, message sizes and per-rank clocks. This makes it cheap
//! to evaluate configurations far too large to hold in memory (hundreds of
//! ranks times hundreds of megabytes). When the size model matches what the
//! codec really produces, the predicted makespan equals the simulated one.

use super::{Algorithm, AlgorithmId, ChunkLayout, RdRole, RecursiveDoublingPlan};
use crate::codec::{BLOCK_LEN, HEADER_LEN};
use crate::costmodel::{CostParams, KernelKind};
use std::collections::{HashMap, VecDeque};

/// Compressed size as a function of element count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SizeModel {
    /// Exact size for constant-valued buffers: five bytes per block.
    ConstantData,
    /// Header plus `4 * elems / ratio` bytes.
    Ratio(f64),
}

impl SizeModel {
    pub fn compressed_bytes(&self, elems: usize) -> usize {
        match *self {
            SizeModel::ConstantData => HEADER_LEN + 5 * elems.div_ceil(BLOCK_LEN),
            SizeModel::Ratio(r) => HEADER_LEN + (4.0 * elems as f64 / r).ceil() as usize,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub makespan: f64,
    pub clocks: Vec<f64>,
    pub messages: u64,
    pub bytes: u64,
}

struct Replay<'a> {
    p: &'a CostParams,
    lossless: bool,
    sizes: SizeModel,
    clock: Vec<f64>,
    queues: HashMap<(usize, usize), VecDeque<f64>>,
    messages: u64,
    bytes: u64,
}

/// Compute of one rank around one exchange.
#[derive(Clone, Copy, Default)]
struct Work {
    compress: f64,
    decompress: f64,
    reduce: f64,
}

impl<'a> Replay<'a> {
    fn wire(&self, elems: usize) -> usize {
        if self.lossless {
            4 * elems
        } else {
            self.sizes.compressed_bytes(elems)
        }
    }

    fn kernel(&self, elems: usize, kind: KernelKind) -> f64 {
        if self.lossless {
            0.0
        } else {
            self.p.kernel_time(4 * elems, kind)
        }
    }

    fn reduce(&self, elems: usize) -> f64 {
        self.p.kernel_time(4 * elems, KernelKind::Reduce)
    }

    fn send(&mut self, from: usize, to: usize, bytes: usize) {
        let staging = self.p.staging_time(bytes);
        let arrival = self.clock[from] + staging + self.p.msg_time(bytes);
        self.clock[from] += staging;
        self.queues.entry((from, to)).or_default().push_back(arrival);
        self.messages += 1;
        self.bytes += bytes as u64;
    }

    fn recv(&mut self, at: usize, from: usize) {
        let arrival = self
            .queues
            .get_mut(&(from, at))
            .and_then(VecDeque::pop_front)
            .expect("replay schedule receives only what was sent");
        self.clock[at] = self.clock[at].max(arrival);
    }

    fn before_send(&mut self, rank: usize, w: Work) {
        if !self.p.overlap {
            self.clock[rank] += w.compress;
        }
    }

    fn after_send(&mut self, rank: usize, w: Work) {
        if self.p.overlap {
            self.clock[rank] += w.compress + w.decompress + w.reduce;
        }
    }

    fn after_recv(&mut self, rank: usize, w: Work) {
        if !self.p.overlap {
            self.clock[rank] += w.decompress + w.reduce;
        }
    }

    fn reduce_scatter(&mut self, layout: &ChunkLayout) {
        let n = self.clock.len();
        for s in 0..n - 1 {
            let work = |r: &Self, i: usize| {
                let send = layout.len((i + n - s) % n);
                let recv = layout.len((i + 2 * n - s - 1) % n);
                (
                    send,
                    Work {
                        compress: r.kernel(send, KernelKind::Compress),
                        decompress: r.kernel(recv, KernelKind::Decompress),
                        reduce: r.reduce(recv),
                    },
                )
            };
            for i in 0..n {
                let (elems, w) = work(self, i);
                self.before_send(i, w);
                self.send(i, (i + 1) % n, self.wire(elems));
                self.after_send(i, w);
            }
            for i in 0..n {
                let (_, w) = work(self, i);
                self.recv(i, (i + n - 1) % n);
                self.after_recv(i, w);
            }
        }
    }

    /// `owned[i]` = chunk index owned by rank `i`; `lens[c]` = chunk length.
    fn allgather(&mut self, owned: &[usize], lens: &[usize]) {
        let n = self.clock.len();
        for (i, &c) in owned.iter().enumerate() {
            self.clock[i] += self.kernel(lens[c], KernelKind::Compress);
        }
        let batched = self.p.multi_stream;
        let mut idx = owned.to_vec();
        let mut deferred = vec![Vec::new(); n];
        for _ in 0..n - 1 {
            let work = |r: &Self, idx: &[usize], i: usize| Work {
                decompress: if batched {
                    0.0
                } else {
                    r.kernel(lens[idx[(i + n - 1) % n]], KernelKind::Decompress)
                },
                ..Default::default()
            };
            for i in 0..n {
                let w = work(self, &idx, i);
                self.before_send(i, w);
                self.send(i, (i + 1) % n, self.wire(lens[idx[i]]));
                self.after_send(i, w);
            }
            let mut next = vec![0; n];
            for i in 0..n {
                let w = work(self, &idx, i);
                let from = (i + n - 1) % n;
                self.recv(i, from);
                next[i] = idx[from];
                deferred[i].push(4 * lens[idx[from]]);
                self.after_recv(i, w);
            }
            idx = next;
        }
        if batched && !self.lossless {
            for (i, sizes) in deferred.iter().enumerate() {
                self.clock[i] += self.p.multi_launch_time(sizes, KernelKind::Decompress);
            }
        }
    }

    fn cprp2p(&mut self, elems: usize) {
        let n = self.clock.len();
        let w = Work {
            compress: self.kernel(elems, KernelKind::Compress),
            decompress: self.kernel(elems, KernelKind::Decompress),
            reduce: 0.0,
        };
        for _ in 0..n - 1 {
            for i in 0..n {
                self.before_send(i, w);
                self.send(i, (i + 1) % n, self.wire(elems));
                self.after_send(i, w);
            }
            for i in 0..n {
                self.recv(i, (i + n - 1) % n);
                self.after_recv(i, w);
            }
        }
    }

    fn recursive_doubling(&mut self, elems: usize) {
        let n = self.clock.len();
        let plan = RecursiveDoublingPlan::new(n);
        let kc = self.kernel(elems, KernelKind::Compress);
        let kd = self.kernel(elems, KernelKind::Decompress);
        let kr = self.reduce(elems);
        let bytes = self.wire(elems);
        let only = |compress, decompress, reduce| Work {
            compress,
            decompress,
            reduce,
        };

        for i in 0..n {
            match plan.role(i) {
                RdRole::Donor => {
                    self.before_send(i, only(kc, 0.0, 0.0));
                    self.send(i, i + 1, bytes);
                    self.after_send(i, only(kc, 0.0, 0.0));
                }
                RdRole::Absorber => self.after_send(i, only(0.0, kd, kr)),
                RdRole::Direct => {}
            }
        }
        for i in 0..n {
            if plan.role(i) == RdRole::Absorber {
                self.recv(i, i - 1);
                self.after_recv(i, only(0.0, kd, kr));
            }
        }
        let full = only(kc, kd, kr);
        let participants: Vec<usize> = (0..n).filter(|&i| plan.role(i) != RdRole::Donor).collect();
        for t in 0..plan.steps() {
            for &i in &participants {
                self.before_send(i, full);
                self.send(i, plan.partner(i, t).unwrap(), bytes);
                self.after_send(i, full);
            }
            for &i in &participants {
                self.recv(i, plan.partner(i, t).unwrap());
                self.after_recv(i, full);
            }
        }
        for i in 0..n {
            match plan.role(i) {
                RdRole::Absorber => {
                    self.before_send(i, only(kc, 0.0, 0.0));
                    self.send(i, i - 1, bytes);
                    self.after_send(i, only(kc, 0.0, 0.0));
                }
                RdRole::Donor => self.after_send(i, only(0.0, kd, 0.0)),
                RdRole::Direct => {}
            }
        }
        for i in 0..n {
            if plan.role(i) == RdRole::Donor {
                self.recv(i, i + 1);
                self.after_recv(i, only(0.0, kd, 0.0));
            }
        }
    }

    fn scatter(&mut self, elems: usize) {
        let n = self.clock.len();
        // root 0; with an even split the relative order is the rank order
        let counts = ChunkLayout::new(elems, n).counts();
        let block_bytes: Vec<usize> = counts.iter().map(|&c| self.wire(c)).collect();
        if !self.lossless {
            let kernel_sizes: Vec<usize> = counts.iter().map(|c| 4 * c).collect();
            self.clock[0] += self.p.multi_launch_time(&kernel_sizes, KernelKind::Compress);
        }
        let table = 8 + 8 * n;
        let mut mask = n.next_power_of_two() / 2;
        while mask > 0 {
            let senders: Vec<usize> = (0..n).step_by(2 * mask).filter(|r| r + mask < n).collect();
            for &r in &senders {
                let hi = (r + 2 * mask).min(n);
                let payload: usize = block_bytes[r + mask..hi].iter().sum();
                self.send(r, r + mask, table + 16 + payload);
            }
            for &r in &senders {
                self.recv(r + mask, r);
            }
            mask /= 2;
        }
        for (r, &c) in counts.iter().enumerate().skip(1) {
            self.clock[r] += self.kernel(c, KernelKind::Decompress);
        }
    }
}

/// Predicts one run. `elements` is the per-rank input length, as in
/// [`run_collective`](super::run_collective): the chunk for allgathers,
/// the full buffer for reductions, and the root's data for scatter (root 0,
/// even split).
pub fn predict(
    algorithm: AlgorithmId,
    params: &CostParams,
    ranks: usize,
    elements: usize,
    sizes: SizeModel,
) -> Prediction {
    assert!(ranks > 0, "prediction needs at least one rank");
    let mut r = Replay {
        p: params,
        lossless: algorithm.lossless,
        sizes,
        clock: vec![0.0; ranks],
        queues: HashMap::new(),
        messages: 0,
        bytes: 0,
    };
    if ranks > 1 {
        match algorithm.algorithm {
            Algorithm::RingAllgather => {
                let owned: Vec<usize> = (0..ranks).collect();
                r.allgather(&owned, &vec![elements; ranks]);
            }
            Algorithm::RingReduceScatter => r.reduce_scatter(&ChunkLayout::new(elements, ranks)),
            Algorithm::RingAllreduce => {
                let layout = ChunkLayout::new(elements, ranks);
                r.reduce_scatter(&layout);
                let owned: Vec<usize> = (0..ranks).map(|i| (i + 1) % ranks).collect();
                r.allgather(&owned, &layout.counts());
            }
            Algorithm::RdAllreduce => r.recursive_doubling(elements),
            Algorithm::BinomialScatter => r.scatter(elements),
            Algorithm::Cprp2pAllgather => r.cprp2p(elements),
        }
    }
    let makespan = r.clock.iter().copied().fold(0.0, f64::max);
    Prediction {
        makespan,
        clocks: r.clock,
        messages: r.messages,
        bytes: r.bytes,
    }
}

/// Smallest `N` in `range` such that recursive doubling beats ring allreduce
/// for every `N' >= N` in the range, if any.
pub fn allreduce_crossover(
    params: &CostParams,
    elements: usize,
    sizes: SizeModel,
    range: std::ops::RangeInclusive<usize>,
) -> Option<usize> {
    let ring = AlgorithmId {
        algorithm: Algorithm::RingAllreduce,
        lossless: false,
    };
    let rd = AlgorithmId {
        algorithm: Algorithm::RdAllreduce,
        lossless: false,
    };
    let mut first = None;
    for n in range {
        let rd_wins =
            predict(rd, params, n, elements, sizes).makespan < predict(ring, params, n, elements, sizes).makespan;
        match (rd_wins, first) {
            (true, None) => first = Some(n),
            (false, Some(_)) => first = None,
            _ => {}
        }
    }
    first
}
