//! Seeded channel models.
//!
//! Randomness is counter based: the fate of a packet is a pure function of
//! `(seed, stream, cell)`. Each cell reads its own ChaCha8 sub-stream, so
//! concurrent trials never share generator state and a trial replays
//! identically whatever else runs beside it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::codec::CodeGrid;
use crate::error::{invalid, Result};
use crate::packet::{CorruptionMask, Packet, PacketIndex, Status};

/// Identifies one emission: `lane` separates independent sessions (trials,
/// or the two arms of a comparison), `round` numbers emissions inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub lane: u64,
    pub round: u64,
}

impl StreamId {
    pub const fn new(lane: u64, round: u64) -> Self {
        Self { lane, round }
    }
}

/// What happened to one packet on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fate {
    Delivered,
    Erased,
    Corrupted(CorruptionMask),
}

impl Fate {
    pub fn is_delivered(&self) -> bool {
        matches!(self, Fate::Delivered)
    }
}

/// A forward channel. The feedback channel is error free and not modelled.
pub trait Channel {
    /// Fate of packet `cell` of emission `stream`; `len` is the payload
    /// length in bytes.
    fn fate(&self, stream: StreamId, cell: u64, len: usize) -> Fate;

    /// Pass every sent cell of `grid` through the channel. Erased payloads
    /// are zeroed, corrupted ones have their masked bits flipped. Padding is
    /// never sent and stays correct.
    fn transmit(&self, grid: &CodeGrid, stream: StreamId) -> CodeGrid {
        let mut out = grid.clone();
        let len = grid.packet_len();
        for k in 0..grid.params().cell_count() {
            let idx = PacketIndex(k);
            if grid.is_pad(idx) {
                continue;
            }
            let status = match self.fate(stream, k as u64, len) {
                Fate::Delivered => continue,
                Fate::Erased => Status::Erased,
                Fate::Corrupted(mask) => Status::BitCorrupted(mask),
            };
            let c = out.params().coord_of(idx).expect("index in range");
            let cell = out.cell_mut(c);
            let mut payload = std::mem::take(cell).into_payload();
            match &status {
                Status::BitCorrupted(mask) => payload
                    .iter_mut()
                    .zip(mask.as_bytes())
                    .for_each(|(b, m)| *b ^= m),
                _ => payload.iter_mut().for_each(|b| *b = 0),
            }
            let mut p = Packet::new(payload);
            // checksum stays the one computed before corruption
            p.set_status(status);
            *cell = p.with_checksum(grid.cell(c).checksum());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// Each packet is lost independently with probability `p`.
    Erasure { p: f64 },
    /// Each bit flips independently with probability `p_b`; a packet with
    /// any flipped bit is flagged corrupted together with its mask.
    BitFlip { p_b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub mode: ChannelMode,
    pub seed: u64,
}

// Words reserved per cell inside a ChaCha stream.
const CELL_STRIDE_BITS: u32 = 36;

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("{name} must lie in [0, 1], got {p}"));
    }
    Ok(())
}

impl ChannelConfig {
    pub fn new(mode: ChannelMode, seed: u64) -> Result<Self> {
        match mode {
            ChannelMode::Erasure { p } => check_probability("p", p)?,
            ChannelMode::BitFlip { p_b } => check_probability("p_b", p_b)?,
        }
        Ok(Self { mode, seed })
    }

    pub fn erasure(p: f64, seed: u64) -> Result<Self> {
        Self::new(ChannelMode::Erasure { p }, seed)
    }

    pub fn bit_flip(p_b: f64, seed: u64) -> Result<Self> {
        Self::new(ChannelMode::BitFlip { p_b }, seed)
    }

    /// Probability that a packet of `len` bytes arrives damaged.
    pub fn packet_error_rate(&self, len: usize) -> f64 {
        match self.mode {
            ChannelMode::Erasure { p } => p,
            ChannelMode::BitFlip { p_b } => packet_error_rate(p_b, len),
        }
    }

    fn cell_rng(&self, stream: StreamId, cell: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&stream.lane.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream.round);
        rng.set_word_pos(u128::from(cell) << CELL_STRIDE_BITS);
        rng
    }
}

/// `1 - (1 - p_b)^(8 len)`.
pub fn packet_error_rate(p_b: f64, len: usize) -> f64 {
    -(8.0 * len as f64 * (-p_b).ln_1p()).exp_m1()
}

impl Channel for ChannelConfig {
    fn fate(&self, stream: StreamId, cell: u64, len: usize) -> Fate {
        let mut rng = self.cell_rng(stream, cell);
        match self.mode {
            ChannelMode::Erasure { p } => {
                if rng.random::<f64>() < p {
                    Fate::Erased
                } else {
                    Fate::Delivered
                }
            }
            ChannelMode::BitFlip { p_b } => {
                let bits = 8 * len as u64;
                if p_b <= 0.0 || bits == 0 {
                    return Fate::Delivered;
                }
                let mut mask = vec![0u8; len];
                if p_b >= 1.0 {
                    mask.fill(0xFF);
                } else {
                    // gaps between flipped bits are geometric
                    let gap = Geometric::new(p_b).expect("p_b in (0, 1)");
                    let mut pos = gap.sample(&mut rng);
                    while pos < bits {
                        mask[(pos / 8) as usize] |= 1 << (pos % 8);
                        pos = pos.saturating_add(1).saturating_add(gap.sample(&mut rng));
                    }
                }
                match CorruptionMask::new(mask) {
                    Ok(mask) => Fate::Corrupted(mask),
                    Err(_) => Fate::Delivered,
                }
            }
        }
    }
}
