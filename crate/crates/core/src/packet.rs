//! Packets, grid coordinates and error configurations.
//!
//! A packet is a fixed-length payload together with a CRC-32 and a receive
//! status. The CRC is carried for realism of the packet format only: erasure
//! detection is modelled as perfect and statuses are stamped by the channel.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default payload length in bytes.
pub const DEFAULT_PACKET_LEN: usize = 1024;

/// CRC-32 (IEEE, reflected polynomial `0xEDB88320`).
pub fn crc32(payload: &[u8]) -> u32 {
    crc32fast::hash(payload)
}

/// Set of corrupted bit positions of a payload, one bit per payload bit.
///
/// Never empty: a mask without any set bit is rejected at construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CorruptionMask(Vec<u8>);

impl CorruptionMask {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().all(|&b| b == 0) {
            return Err(Error::Invariant(
                "corruption mask must have at least one set bit".into(),
            ));
        }
        Ok(Self(bits))
    }

    /// Number of corrupted bits.
    pub fn popcount(&self) -> u64 {
        self.0.iter().map(|b| u64::from(b.count_ones())).sum()
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// Length of the masked payload in bytes.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Receive status of a packet.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Status {
    Correct,
    Erased,
    BitCorrupted(CorruptionMask),
}

impl Status {
    pub fn is_correct(&self) -> bool {
        matches!(self, Status::Correct)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Packet {
    payload: Vec<u8>,
    checksum: u32,
    status: Status,
}

impl Default for Packet {
    fn default() -> Self {
        Self::new(Vec::new())
    }
}

impl Packet {
    /// A correctly received packet; the checksum is computed over `payload`.
    pub fn new(payload: Vec<u8>) -> Self {
        let checksum = crc32(&payload);
        Self {
            payload,
            checksum,
            status: Status::Correct,
        }
    }

    pub fn zeroed(len: usize) -> Self {
        Self::new(vec![0; len])
    }

    /// Replace the status. A corruption mask must cover the whole payload.
    pub fn with_status(mut self, status: Status) -> Result<Self> {
        if let Status::BitCorrupted(mask) = &status {
            if mask.len() != self.payload.len() {
                return invalid(format!(
                    "corruption mask covers {} bytes, payload has {}",
                    mask.len(),
                    self.payload.len()
                ));
            }
        }
        self.status = status;
        Ok(self)
    }

    pub(crate) fn set_status(&mut self, status: Status) {
        self.status = status;
    }

    pub(crate) fn with_checksum(mut self, checksum: u32) -> Self {
        self.checksum = checksum;
        self
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn into_payload(self) -> Vec<u8> {
        self.payload
    }

    pub fn checksum(&self) -> u32 {
        self.checksum
    }

    pub fn status(&self) -> &Status {
        &self.status
    }

    pub fn is_correct(&self) -> bool {
        self.status.is_correct()
    }

    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    /// Whether the payload matches the carried checksum.
    pub fn checksum_matches(&self) -> bool {
        crc32(&self.payload) == self.checksum
    }
}

pub(crate) fn xor_into(dst: &mut [u8], src: &[u8]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= *s;
    }
}

/// Bitwise xor of two payloads, re-authenticated as a fresh correct packet.
pub fn xor_packets(a: &Packet, b: &Packet) -> Result<Packet> {
    if a.len() != b.len() {
        return invalid(format!(
            "cannot xor packets of lengths {} and {}",
            a.len(),
            b.len()
        ));
    }
    let mut payload = a.payload.clone();
    xor_into(&mut payload, &b.payload);
    Ok(Packet::new(payload))
}

/// Position of a cell in the `(n+1) x (m+1)` code grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridCoord {
    pub row: usize,
    pub col: usize,
}

impl GridCoord {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for GridCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Index `k` of a code packet `C_k`, `0 <= k < N`. Indices below `K` are
/// sources; the rest are parities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PacketIndex(pub usize);

impl fmt::Display for PacketIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Set of erroneous cells of an `(n+1) x (m+1)` grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ErrorConfiguration {
    n: usize,
    m: usize,
    errors: BTreeSet<GridCoord>,
}

impl ErrorConfiguration {
    pub fn empty(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            errors: BTreeSet::new(),
        }
    }

    /// Build a configuration; duplicates collapse, out-of-bounds cells are rejected.
    pub fn new(n: usize, m: usize, errors: impl IntoIterator<Item = GridCoord>) -> Result<Self> {
        let mut config = Self::empty(n, m);
        for c in errors {
            config.insert(c)?;
        }
        Ok(config)
    }

    /// Configuration from a bitmask over cells in row-major order.
    pub fn from_mask(n: usize, m: usize, mask: u64) -> Self {
        let cols = m + 1;
        let cells = (n + 1) * cols;
        debug_assert!(cells <= 64);
        let errors = (0..cells)
            .filter(|&c| mask >> c & 1 == 1)
            .map(|c| GridCoord::new(c / cols, c % cols))
            .collect();
        Self { n, m, errors }
    }

    pub fn insert(&mut self, c: GridCoord) -> Result<bool> {
        if c.row > self.n || c.col > self.m {
            return invalid(format!(
                "cell {c} outside a {}x{} grid",
                self.n + 1,
                self.m + 1
            ));
        }
        Ok(self.errors.insert(c))
    }

    pub fn remove(&mut self, c: &GridCoord) -> bool {
        self.errors.remove(c)
    }

    pub fn contains(&self, c: &GridCoord) -> bool {
        self.errors.contains(c)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    /// `N_e`, the number of erroneous cells.
    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = GridCoord> + '_ {
        self.errors.iter().copied()
    }

    /// `R`, the number of rows holding at least one error.
    pub fn rows_touched(&self) -> usize {
        let mut seen = vec![false; self.n + 1];
        self.errors.iter().for_each(|c| seen[c.row] = true);
        seen.into_iter().filter(|&s| s).count()
    }

    /// `C`, the number of columns holding at least one error.
    pub fn cols_touched(&self) -> usize {
        let mut seen = vec![false; self.m + 1];
        self.errors.iter().for_each(|c| seen[c.col] = true);
        seen.into_iter().filter(|&s| s).count()
    }

    /// Configuration without the cells of `other`.
    pub fn difference(&self, other: &ErrorConfiguration) -> ErrorConfiguration {
        Self {
            n: self.n,
            m: self.m,
            errors: self.errors.difference(&other.errors).copied().collect(),
        }
    }
}

impl fmt::Display for ErrorConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.errors.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}
