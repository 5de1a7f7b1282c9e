//! Selective-repeat ARQ without any forward error correction.
//!
//! The first iteration sends all `K` packets, each later one resends exactly
//! the packets still missing. No parity is ever sent.

use num_rational::Ratio;

use crate::channel::{Channel, StreamId};
use crate::error::{invalid, Result};
use crate::feedback::FeedbackRepairSet;
use crate::packet::PacketIndex;
use crate::protocol::{BlockTrace, CycleOutcome, ProtocolConfig};

/// Run one block of `k` packets over `channel`. Packet `i` keeps cell id `i`
/// in every round, so its fate in round `r` is drawn from stream `(lane, r)`.
pub fn run_tcp_block<C: Channel + ?Sized>(
    k: usize,
    channel: &C,
    config: ProtocolConfig,
    lane: u64,
    len: usize,
) -> Result<BlockTrace> {
    if k == 0 {
        return invalid("a block needs at least one packet");
    }
    let mut missing: Vec<usize> = (0..k).collect();
    let mut iterations = Vec::new();
    while !missing.is_empty() && iterations.len() < config.max_iters {
        let stream = StreamId::new(lane, iterations.len() as u64);
        let sent_count = missing.len();
        missing.retain(|&i| !channel.fate(stream, i as u64, len).is_delivered());
        let frs = FeedbackRepairSet {
            packets: missing.iter().map(|&i| PacketIndex(i)).collect(),
            cost: Ratio::from_integer(missing.len() as u64),
        };
        iterations.push(CycleOutcome {
            sent_count,
            decoded: missing.is_empty(),
            frs,
            block_len: sent_count,
            reemitted: false,
        });
    }
    let total_sent = iterations.iter().map(|c| c.sent_count).sum();
    Ok(BlockTrace {
        k,
        terminated: missing.is_empty(),
        iterations,
        total_sent,
    })
}

/// Mean number of iterations: the expected maximum of `k` independent
/// geometric counts, `sum_{t >= 0} (1 - (1 - p^t)^k)`.
pub fn tcp_mean_iterations(k: usize, p: f64) -> f64 {
    tail_sum(k, p, |_| 1.0)
}

/// Variance of the iteration count, from `E[T^2] = sum_{t >= 0} (2t + 1) P(T > t)`.
pub fn tcp_iteration_variance(k: usize, p: f64) -> f64 {
    let mean = tcp_mean_iterations(k, p);
    tail_sum(k, p, |t| (2 * t + 1) as f64) - mean * mean
}

fn tail_sum(k: usize, p: f64, weight: impl Fn(u64) -> f64) -> f64 {
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut sum = 0.0;
    let mut pt = 1.0f64;
    for t in 0u64.. {
        // P(T > t) = 1 - (1 - p^t)^k
        let tail = if pt >= 1.0 {
            1.0
        } else {
            -((k as f64) * (-pt).ln_1p()).exp_m1()
        };
        let term = weight(t) * tail;
        sum += term;
        if term < 1e-17 * sum.max(1.0) || t > 100_000 {
            break;
        }
        pt *= p;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelConfig;

    #[test]
    fn lossless_channel_needs_one_round() {
        let ch = ChannelConfig::erasure(0.0, 3).unwrap();
        let t = run_tcp_block(256, &ch, ProtocolConfig::default(), 0, 1).unwrap();
        assert_eq!(t.iteration_count(), 1);
        assert_eq!(t.total_sent, 256);
        assert!(t.terminated);
    }

    #[test]
    fn dead_channel_is_capped() {
        let ch = ChannelConfig::erasure(1.0, 3).unwrap();
        let cfg = ProtocolConfig {
            max_iters: 20,
            ..Default::default()
        };
        let t = run_tcp_block(4, &ch, cfg, 0, 1).unwrap();
        assert!(!t.terminated);
        assert_eq!(t.total_sent, 80);
    }

    #[test]
    fn closed_form_values() {
        assert!((tcp_mean_iterations(1, 0.5) - 2.0).abs() < 1e-12);
        assert!((tcp_mean_iterations(7, 0.0) - 1.0).abs() < 1e-12);
        // K = 1: geometric with variance p / (1 - p)^2
        assert!((tcp_iteration_variance(1, 0.5) - 2.0).abs() < 1e-9);
        // K = 2, p = 1/2: E max = 8/3 by direct summation
        assert!((tcp_mean_iterations(2, 0.5) - 8.0 / 3.0).abs() < 1e-12);
        let m = tcp_mean_iterations(256, 0.3);
        assert!(m > 5.0 && m < 7.0, "{m}");
    }

    #[test]
    fn single_packet_mean_is_geometric() {
        let ch = ChannelConfig::erasure(0.5, 11).unwrap();
        let trials = 100_000u64;
        let total: usize = (0..trials)
            .map(|lane| {
                run_tcp_block(1, &ch, ProtocolConfig::default(), lane, 1)
                    .unwrap()
                    .iteration_count()
            })
            .sum();
        let mean = total as f64 / trials as f64;
        let sigma = (2.0 / trials as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * sigma, "{mean}");
    }

    #[test]
    fn sent_packets_mean() {
        let (k, p) = (16, 0.3);
        let ch = ChannelConfig::erasure(p, 1).unwrap();
        let trials = 20_000u64;
        let sent: Vec<f64> = (0..trials)
            .map(|lane| run_tcp_block(k, &ch, ProtocolConfig::default(), lane, 1).unwrap().total_sent as f64)
            .collect();
        let mean = sent.iter().sum::<f64>() / trials as f64;
        // each packet is sent a geometric number of times, variance p / (1-p)^2
        let sigma = (k as f64 * p / (1.0 - p).powi(2) / trials as f64).sqrt();
        let expected = k as f64 / (1.0 - p);
        assert!((mean - expected).abs() < 3.0 * sigma, "{mean} vs {expected}");
    }
}
