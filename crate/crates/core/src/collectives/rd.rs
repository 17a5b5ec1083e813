//! Recursive-doubling allreduce on whole buffers, with remainder folding
//! for non-power-of-two communicators.

#![allow(clippy::needless_range_loop)]

use super::{
    check_equal_lengths, check_ranks, reduce_time, CodecKind, CollectiveError, Lane, RdRole, RecursiveDoublingPlan,
    ReduceOp, Result, StepCompute,
};
use crate::costmodel::KernelKind;
use crate::simnet::Network;

fn expect_len(rank: usize, values: &[f32], len: usize) -> Result<()> {
    if values.len() != len {
        return Err(CollectiveError::Shape(format!(
            "rank {rank} expected {len} values, received {}",
            values.len()
        )));
    }
    Ok(())
}

/// Three stages:
///
/// 1. every donor compresses its whole buffer for its absorber (`rank + 1`),
///    which reduces it into its own;
/// 2. the `2^k` participants run `k` pairwise exchanges of their whole
///    current buffer with partner `id ^ 2^t`;
/// 3. absorbers return the result compressed to their donors.
pub fn rd_allreduce(net: &mut Network, codec: CodecKind, inputs: &[Vec<f32>], op: ReduceOp) -> Result<Vec<Vec<f32>>> {
    check_ranks(net, inputs)?;
    let len = check_equal_lengths(inputs)?;
    let n = net.size();
    if n == 1 {
        return Ok(inputs.to_vec());
    }
    let plan = RecursiveDoublingPlan::new(n);
    let mut lane = Lane::new(codec);
    let mut acc = inputs.to_vec();
    let kc = lane.kernel(net, len, KernelKind::Compress);
    let kd = lane.kernel(net, len, KernelKind::Decompress);
    let kr = reduce_time(net, len);

    let donor_step = StepCompute {
        compress: kc,
        ..Default::default()
    };
    let absorb_step = StepCompute {
        decompress: kd,
        reduce: kr,
        ..Default::default()
    };
    for i in 0..n {
        match plan.role(i) {
            RdRole::Donor => {
                let bytes = lane.compress(net, i, &acc[i], None)?;
                donor_step.before_send(net, i);
                net.send(i, i + 1, &bytes)?;
                donor_step.after_send(net, i);
            }
            RdRole::Absorber => absorb_step.after_send(net, i),
            RdRole::Direct => {}
        }
    }
    for i in 0..n {
        if plan.role(i) == RdRole::Absorber {
            let bytes = net.recv(i, i - 1)?;
            let values = lane.decompress(net, i, &bytes)?;
            expect_len(i, &values, len)?;
            op.apply(&mut acc[i], &values);
            absorb_step.after_recv(net, i);
        }
    }

    let exchange = StepCompute {
        compress: kc,
        decompress: kd,
        reduce: kr,
    };
    let participants: Vec<usize> = (0..n).filter(|&i| plan.role(i) != RdRole::Donor).collect();
    for t in 0..plan.steps() {
        for &i in &participants {
            let partner = plan.partner(i, t).expect("participant has a partner");
            let bytes = lane.compress(net, i, &acc[i], None)?;
            exchange.before_send(net, i);
            net.send(i, partner, &bytes)?;
            exchange.after_send(net, i);
        }
        for &i in &participants {
            let partner = plan.partner(i, t).expect("participant has a partner");
            let bytes = net.recv(i, partner)?;
            let values = lane.decompress(net, i, &bytes)?;
            expect_len(i, &values, len)?;
            op.apply(&mut acc[i], &values);
            exchange.after_recv(net, i);
        }
    }

    let ret_step = StepCompute {
        compress: kc,
        ..Default::default()
    };
    let fetch_step = StepCompute {
        decompress: kd,
        ..Default::default()
    };
    for i in 0..n {
        match plan.role(i) {
            RdRole::Absorber => {
                let bytes = lane.compress(net, i, &acc[i], None)?;
                ret_step.before_send(net, i);
                net.send(i, i - 1, &bytes)?;
                ret_step.after_send(net, i);
            }
            RdRole::Donor => fetch_step.after_send(net, i),
            RdRole::Direct => {}
        }
    }
    for i in 0..n {
        if plan.role(i) == RdRole::Donor {
            let bytes = net.recv(i, i + 1)?;
            let values = lane.decompress(net, i, &bytes)?;
            expect_len(i, &values, len)?;
            acc[i] = values;
            fetch_step.after_recv(net, i);
        }
    }
    Ok(acc)
}
