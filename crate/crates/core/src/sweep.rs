//! Block-protocol vs ARQ experiment over random erasure probabilities.
//!
//! Each trial draws `p`, then runs the block protocol and the ARQ baseline
//! on the same `p` with independent channel lanes. Results are binned by
//! `p` and written as CSV.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::baseline::run_tcp_block;
use crate::channel::ChannelConfig;
use crate::error::{invalid, Result};
use crate::packet::Packet;
use crate::protocol::{run_block, ProtocolConfig};

/// How each trial picks its erasure probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PPolicy {
    /// Uniform on the open interval (0, 1).
    Uniform,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub ks: Vec<usize>,
    pub trials: u64,
    pub seed: u64,
    pub bins: usize,
    pub policy: PPolicy,
    pub protocol: ProtocolConfig,
    /// Payload bytes per packet. Erasure statistics do not depend on it.
    pub payload_len: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ks: vec![16, 256],
            trials: 10_000,
            seed: 0,
            bins: 100,
            policy: PPolicy::Uniform,
            protocol: ProtocolConfig::default(),
            payload_len: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialResult {
    pub k: usize,
    pub p: f64,
    pub ours_iters: usize,
    pub ours_sent: usize,
    pub ours_terminated: bool,
    pub tcp_iters: usize,
    pub tcp_sent: usize,
    pub tcp_terminated: bool,
}

/// One CSV line: the trials of one `K` whose `p` fell in one bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinRow {
    pub k: usize,
    /// Bin centre.
    pub p_bin: f64,
    /// Mean of `total_sent / K` for the block protocol.
    pub e_k: f64,
    pub i_k_ours: f64,
    pub i_k_tcp: f64,
    pub iter_ratio: f64,
    pub sent_ratio: f64,
    pub trials: u64,
}

pub const CSV_HEADER: &str = "K,p_bin,e_K,i_K_ours,i_K_tcp,iter_ratio,sent_ratio,trials";

fn trial_p(policy: PPolicy, seed: u64, k: usize, trial: u64) -> f64 {
    match policy {
        PPolicy::Fixed(p) => p,
        PPolicy::Uniform => {
            let mut key = [0u8; 32];
            key[..8].copy_from_slice(&seed.to_le_bytes());
            key[8..16].copy_from_slice(&(k as u64).to_le_bytes());
            key[16..24].copy_from_slice(b"sweep-p\0");
            let mut rng = ChaCha8Rng::from_seed(key);
            rng.set_stream(trial);
            loop {
                let p: f64 = rng.random();
                if p > 0.0 {
                    return p;
                }
            }
        }
    }
}

/// Run trial `trial` for block size `k`: the protocol on lane `2 trial`,
/// the baseline on lane `2 trial + 1`.
pub fn run_trial(config: &SweepConfig, k: usize, trial: u64) -> Result<TrialResult> {
    let p = trial_p(config.policy, config.seed, k, trial);
    let channel_seed = config.seed ^ (k as u64).rotate_left(32);
    let channel = ChannelConfig::erasure(p, channel_seed)?;
    let inputs = vec![Packet::zeroed(config.payload_len); k];
    let ours = run_block(inputs, &channel, config.protocol, 2 * trial)?.trace;
    let tcp = run_tcp_block(k, &channel, config.protocol, 2 * trial + 1, config.payload_len)?;
    Ok(TrialResult {
        k,
        p,
        ours_iters: ours.iteration_count(),
        ours_sent: ours.total_sent,
        ours_terminated: ours.terminated,
        tcp_iters: tcp.iteration_count(),
        tcp_sent: tcp.total_sent,
        tcp_terminated: tcp.terminated,
    })
}

/// All trials of one `K`, in trial order whatever the scheduling.
pub fn run_trials(config: &SweepConfig, k: usize) -> Result<Vec<TrialResult>> {
    check(config)?;
    (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, k, t))
        .collect()
}

fn check(config: &SweepConfig) -> Result<()> {
    if config.trials == 0 {
        return invalid("at least one trial is needed");
    }
    if config.bins == 0 {
        return invalid("at least one bin is needed");
    }
    if config.ks.contains(&0) {
        return invalid("block sizes must be positive");
    }
    if let PPolicy::Fixed(p) = config.policy {
        if !(0.0..=1.0).contains(&p) {
            return invalid(format!("p must lie in [0, 1], got {p}"));
        }
    }
    Ok(())
}

fn bin_of(p: f64, bins: usize) -> usize {
    ((p * bins as f64) as usize).min(bins - 1)
}

/// Aggregate trials of one `K` into bins of `p`; empty bins are skipped.
/// Sums are taken in trial order.
pub fn bin_trials(trials: &[TrialResult], bins: usize) -> Vec<BinRow> {
    #[derive(Default, Clone, Copy)]
    struct Acc {
        count: u64,
        e_k: f64,
        ours_iters: u64,
        tcp_iters: u64,
        ours_sent: u64,
        tcp_sent: u64,
    }
    let mut accs = vec![Acc::default(); bins];
    for t in trials {
        let a = &mut accs[bin_of(t.p, bins)];
        a.count += 1;
        a.e_k += t.ours_sent as f64 / t.k as f64;
        a.ours_iters += t.ours_iters as u64;
        a.tcp_iters += t.tcp_iters as u64;
        a.ours_sent += t.ours_sent as u64;
        a.tcp_sent += t.tcp_sent as u64;
    }
    let k = trials.first().map_or(0, |t| t.k);
    accs.iter()
        .enumerate()
        .filter(|(_, a)| a.count > 0)
        .map(|(b, a)| {
            let c = a.count as f64;
            BinRow {
                k,
                p_bin: (b as f64 + 0.5) / bins as f64,
                e_k: a.e_k / c,
                i_k_ours: a.ours_iters as f64 / c,
                i_k_tcp: a.tcp_iters as f64 / c,
                iter_ratio: a.ours_iters as f64 / a.tcp_iters as f64,
                sent_ratio: a.ours_sent as f64 / a.tcp_sent as f64,
                trials: a.count,
            }
        })
        .collect()
}

/// Whole-run figures for one `K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub k: usize,
    pub trials: u64,
    pub mean_iters_ours: f64,
    pub mean_iters_tcp: f64,
    /// Average over non-empty bins of the per-bin iteration ratio.
    pub curve_iter_ratio: f64,
    /// Average over non-empty bins of the per-bin sent-packet ratio.
    pub curve_sent_ratio: f64,
    pub unterminated_ours: u64,
    pub unterminated_tcp: u64,
}

pub fn summarize(trials: &[TrialResult], rows: &[BinRow]) -> SweepSummary {
    let n = trials.len() as f64;
    let rn = rows.len() as f64;
    SweepSummary {
        k: trials.first().map_or(0, |t| t.k),
        trials: trials.len() as u64,
        mean_iters_ours: trials.iter().map(|t| t.ours_iters as f64).sum::<f64>() / n,
        mean_iters_tcp: trials.iter().map(|t| t.tcp_iters as f64).sum::<f64>() / n,
        curve_iter_ratio: rows.iter().map(|r| r.iter_ratio).sum::<f64>() / rn,
        curve_sent_ratio: rows.iter().map(|r| r.sent_ratio).sum::<f64>() / rn,
        unterminated_ours: trials.iter().filter(|t| !t.ours_terminated).count() as u64,
        unterminated_tcp: trials.iter().filter(|t| !t.tcp_terminated).count() as u64,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<BinRow>,
    pub summaries: Vec<SweepSummary>,
}

pub fn experiment_sweep(config: &SweepConfig) -> Result<SweepOutput> {
    check(config)?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &k in &config.ks {
        let trials = run_trials(config, k)?;
        let binned = bin_trials(&trials, config.bins);
        summaries.push(summarize(&trials, &binned));
        rows.extend(binned);
    }
    Ok(SweepOutput { rows, summaries })
}

pub fn write_csv<W: Write>(rows: &[BinRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.4},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            r.k, r.p_bin, r.e_k, r.i_k_ours, r.i_k_tcp, r.iter_ratio, r.sent_ratio, r.trials
        )?;
    }
    out.flush()?;
    Ok(())
}
