//! Two-dimensional rectangular code.
//!
//! `K = n*m` source packets are laid out in an `n x m` rectangle, each row and
//! each column receives a parity packet and one overall parity closes the
//! `(n+1) x (m+1)` grid, so every row and every column xors to zero.
//!
//! Packet indices follow the layout table
//!
//! | index `k`              | cell            |
//! |------------------------|-----------------|
//! | `0 <= k < K`           | `ordering(k)`   |
//! | `K <= k < K+n`         | `(k-K, m)`      |
//! | `K+n <= k < N-1`       | `(n, k-K-n)`    |
//! | `k = N-1`              | `(n, m)`        |

use std::collections::VecDeque;

use num_integer::{Integer, Roots};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::packet::{xor_into, ErrorConfiguration, GridCoord, Packet, PacketIndex, Status};

/// Placement of source packets inside the `n x m` rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceOrder {
    /// `k -> (k / m, k % m)`.
    #[default]
    RowMajor,
    /// `k -> (k mod n, k mod m)`; a bijection only when `gcd(n, m) = 1`.
    Crt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodeParams {
    n: usize,
    m: usize,
    order: SourceOrder,
    // n^-1 mod m, used to invert the CRT ordering.
    n_inv_mod_m: usize,
}

impl CodeParams {
    pub fn new(n: usize, m: usize, order: SourceOrder) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Config(format!(
                "code dimensions must be positive, got {n}x{m}"
            )));
        }
        let mut n_inv_mod_m = 0;
        if order == SourceOrder::Crt {
            let eg = (n as i64).extended_gcd(&(m as i64));
            if eg.gcd != 1 {
                return Err(Error::Config(format!(
                    "CRT ordering needs coprime dimensions, gcd({n}, {m}) = {}",
                    eg.gcd
                )));
            }
            n_inv_mod_m = eg.x.rem_euclid(m as i64) as usize;
        }
        Ok(Self {
            n,
            m,
            order,
            n_inv_mod_m,
        })
    }

    pub fn row_major(n: usize, m: usize) -> Result<Self> {
        Self::new(n, m, SourceOrder::RowMajor)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> SourceOrder {
        self.order
    }

    /// `K = n*m`.
    pub fn source_count(&self) -> usize {
        self.n * self.m
    }

    /// `N = (n+1)(m+1)`.
    pub fn cell_count(&self) -> usize {
        (self.n + 1) * (self.m + 1)
    }

    pub fn rate(&self) -> f64 {
        (self.n as f64 / (self.n + 1) as f64) * (self.m as f64 / (self.m + 1) as f64)
    }

    /// The ordering function: cell of source `k`.
    pub fn place(&self, k: usize) -> Result<GridCoord> {
        if k >= self.source_count() {
            return invalid(format!(
                "source index {k} out of range for K = {}",
                self.source_count()
            ));
        }
        Ok(self.place_unchecked(k))
    }

    fn place_unchecked(&self, k: usize) -> GridCoord {
        match self.order {
            SourceOrder::RowMajor => GridCoord::new(k / self.m, k % self.m),
            SourceOrder::Crt => GridCoord::new(k % self.n, k % self.m),
        }
    }

    /// Inverse of [`place`](Self::place) on the source rectangle.
    fn source_at(&self, row: usize, col: usize) -> usize {
        match self.order {
            SourceOrder::RowMajor => row * self.m + col,
            SourceOrder::Crt => {
                // x = row + n*t with t = (col - row) * n^-1 (mod m)
                let diff = (col + self.m - row % self.m) % self.m;
                let t = diff * self.n_inv_mod_m % self.m;
                row + self.n * t
            }
        }
    }

    /// Grid cell of code packet `C_k`.
    pub fn coord_of(&self, idx: PacketIndex) -> Result<GridCoord> {
        let (n, m, k) = (self.n, self.m, self.source_count());
        let i = idx.0;
        match i {
            _ if i < k => Ok(self.place_unchecked(i)),
            _ if i < k + n => Ok(GridCoord::new(i - k, m)),
            _ if i < k + n + m => Ok(GridCoord::new(n, i - k - n)),
            _ if i == k + n + m => Ok(GridCoord::new(n, m)),
            _ => invalid(format!(
                "packet index {i} out of range for N = {}",
                self.cell_count()
            )),
        }
    }

    /// Index of the code packet stored at `c`.
    pub fn index_of(&self, c: GridCoord) -> Result<PacketIndex> {
        let (n, m, k) = (self.n, self.m, self.source_count());
        if c.row > n || c.col > m {
            return invalid(format!("cell {c} outside a {}x{} grid", n + 1, m + 1));
        }
        Ok(PacketIndex(match (c.row < n, c.col < m) {
            (true, true) => self.source_at(c.row, c.col),
            (true, false) => k + c.row,
            (false, true) => k + n + c.col,
            (false, false) => k + n + m,
        }))
    }

    pub(crate) fn offset(&self, c: GridCoord) -> usize {
        c.row * (self.m + 1) + c.col
    }
}

/// Number of payload xor operations performed by [`encode`]: every source is
/// folded into one row and one column accumulator, and the overall parity
/// folds the shorter family of hyperplane parities.
pub fn encode_xor_count(params: &CodeParams) -> usize {
    2 * params.source_count() + params.n().min(params.m())
}

/// An `(n+1) x (m+1)` grid of packets with receive statuses.
///
/// The last `pad` source slots (indices `K-pad .. K`) hold zero padding that is
/// never transmitted; the receiver knows them to be zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeGrid {
    params: CodeParams,
    len: usize,
    pad: usize,
    cells: Vec<Packet>,
}

impl CodeGrid {
    /// Assemble a grid from packets given in packet-index order.
    pub fn from_packets(params: CodeParams, pad: usize, packets: Vec<Packet>) -> Result<Self> {
        if packets.len() != params.cell_count() {
            return invalid(format!(
                "expected {} packets, got {}",
                params.cell_count(),
                packets.len()
            ));
        }
        if pad >= params.source_count() {
            return invalid(format!(
                "padding {pad} leaves no source in a code with K = {}",
                params.source_count()
            ));
        }
        let len = packets[0].len();
        if packets.iter().any(|p| p.len() != len) {
            return invalid("packets of a grid must share one length");
        }
        let mut cells = vec![Packet::zeroed(0); packets.len()];
        for (k, p) in packets.into_iter().enumerate() {
            let c = params.coord_of(PacketIndex(k))?;
            cells[params.offset(c)] = p;
        }
        Ok(Self {
            params,
            len,
            pad,
            cells,
        })
    }

    pub fn params(&self) -> &CodeParams {
        &self.params
    }

    /// Payload length shared by every packet.
    pub fn packet_len(&self) -> usize {
        self.len
    }

    pub fn pad_count(&self) -> usize {
        self.pad
    }

    /// Number of real (non-padding) sources.
    pub fn data_count(&self) -> usize {
        self.params.source_count() - self.pad
    }

    pub fn is_pad(&self, idx: PacketIndex) -> bool {
        let k = self.params.source_count();
        idx.0 < k && idx.0 >= k - self.pad
    }

    /// Cells actually put on the wire: every cell except padding.
    pub fn sent_count(&self) -> usize {
        self.params.cell_count() - self.pad
    }

    pub fn cell(&self, c: GridCoord) -> &Packet {
        &self.cells[self.params.offset(c)]
    }

    pub(crate) fn cell_mut(&mut self, c: GridCoord) -> &mut Packet {
        let off = self.params.offset(c);
        &mut self.cells[off]
    }

    pub fn packet(&self, idx: PacketIndex) -> Result<&Packet> {
        let c = self.params.coord_of(idx)?;
        Ok(self.cell(c))
    }

    /// Overwrite the status of the packet at `idx`. Padding cannot be
    /// marked erroneous.
    pub fn set_status(&mut self, idx: PacketIndex, status: Status) -> Result<()> {
        if self.is_pad(idx) && !status.is_correct() {
            return invalid(format!("padding packet {idx} is never sent"));
        }
        let c = self.params.coord_of(idx)?;
        let cell = self.cell_mut(c);
        *cell = std::mem::replace(cell, Packet::zeroed(0)).with_status(status)?;
        Ok(())
    }

    /// Replace the packet at `idx` by a correctly received copy of `payload`.
    pub(crate) fn fill(&mut self, idx: PacketIndex, payload: Vec<u8>) -> Result<()> {
        let c = self.params.coord_of(idx)?;
        *self.cell_mut(c) = Packet::new(payload);
        Ok(())
    }

    /// Packets in index order.
    pub fn packets(&self) -> impl Iterator<Item = (PacketIndex, &Packet)> + '_ {
        (0..self.params.cell_count()).map(move |k| {
            let idx = PacketIndex(k);
            let c = self.params.coord_of(idx).expect("index in range");
            (idx, self.cell(c))
        })
    }

    /// Cells whose status is not `Correct`.
    pub fn error_configuration(&self) -> ErrorConfiguration {
        let cols = self.params.m() + 1;
        let errors = self
            .cells
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_correct())
            .map(|(off, _)| GridCoord::new(off / cols, off % cols));
        ErrorConfiguration::new(self.params.n(), self.params.m(), errors)
            .expect("grid cells are in bounds")
    }

    /// Whether every row and every column xors to zero.
    pub fn parity_holds(&self) -> bool {
        let (n, m) = (self.params.n(), self.params.m());
        let mut rows = vec![vec![0u8; self.len]; n + 1];
        let mut cols = vec![vec![0u8; self.len]; m + 1];
        for i in 0..=n {
            for j in 0..=m {
                let p = self.cell(GridCoord::new(i, j)).payload();
                xor_into(&mut rows[i], p);
                xor_into(&mut cols[j], p);
            }
        }
        rows.iter().chain(cols.iter()).all(|v| v.iter().all(|&b| b == 0))
    }

    /// The real sources `C_0 .. C_{K-pad}`, in index order.
    pub fn sources(&self) -> Vec<Packet> {
        (0..self.data_count())
            .map(|k| self.cell(self.params.place_unchecked(k)).clone())
            .collect()
    }
}

/// Encode exactly `K` sources.
pub fn encode(params: CodeParams, sources: Vec<Packet>) -> Result<CodeGrid> {
    if sources.len() != params.source_count() {
        return invalid(format!(
            "expected {} sources, got {}",
            params.source_count(),
            sources.len()
        ));
    }
    encode_padded(params, sources)
}

/// Encode between 1 and `K` sources; missing trailing slots are zero padding.
pub fn encode_padded(params: CodeParams, sources: Vec<Packet>) -> Result<CodeGrid> {
    let k = params.source_count();
    if sources.is_empty() || sources.len() > k {
        return invalid(format!(
            "a code with K = {k} takes 1..={k} sources, got {}",
            sources.len()
        ));
    }
    let len = sources[0].len();
    if sources.iter().any(|p| p.len() != len) {
        return invalid("sources must share one length");
    }
    let (n, m) = (params.n(), params.m());
    let pad = k - sources.len();
    let mut cells = vec![Packet::zeroed(len); params.cell_count()];
    let mut row_par = vec![vec![0u8; len]; n];
    let mut col_par = vec![vec![0u8; len]; m];
    for (idx, src) in sources.into_iter().enumerate() {
        let c = params.place_unchecked(idx);
        xor_into(&mut row_par[c.row], src.payload());
        xor_into(&mut col_par[c.col], src.payload());
        cells[params.offset(c)] = Packet::new(src.into_payload());
    }
    let mut overall = vec![0u8; len];
    let shorter = if n <= m { &row_par } else { &col_par };
    shorter.iter().for_each(|p| xor_into(&mut overall, p));
    for (i, p) in row_par.into_iter().enumerate() {
        cells[params.offset(GridCoord::new(i, m))] = Packet::new(p);
    }
    for (j, p) in col_par.into_iter().enumerate() {
        cells[params.offset(GridCoord::new(n, j))] = Packet::new(p);
    }
    cells[params.offset(GridCoord::new(n, m))] = Packet::new(overall);
    Ok(CodeGrid {
        params,
        len,
        pad,
        cells,
    })
}

/// Hyperplane through which an isolated error was repaired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hyperplane {
    Row(usize),
    Col(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeelStep {
    pub cell: GridCoord,
    pub via: Hyperplane,
}

/// Peeling on coordinates only. `errors` must be sorted and duplicate free.
/// Calls `on_repair` for every repaired cell, in repair order, and returns
/// the stopping set left over (sorted).
fn peel_with(
    n: usize,
    m: usize,
    errors: &[GridCoord],
    mut on_repair: impl FnMut(PeelStep),
) -> Vec<GridCoord> {
    let mut row_cnt = vec![0usize; n + 1];
    let mut col_cnt = vec![0usize; m + 1];
    // Sum of the column (resp. row) indices of the errors still open on a
    // row (resp. column); equals the lone index once the count drops to one.
    let mut row_sum = vec![0usize; n + 1];
    let mut col_sum = vec![0usize; m + 1];
    for c in errors {
        row_cnt[c.row] += 1;
        row_sum[c.row] += c.col;
        col_cnt[c.col] += 1;
        col_sum[c.col] += c.row;
    }
    let mut queue: VecDeque<Hyperplane> = (0..=n)
        .filter(|&i| row_cnt[i] == 1)
        .map(Hyperplane::Row)
        .chain((0..=m).filter(|&j| col_cnt[j] == 1).map(Hyperplane::Col))
        .collect();
    let mut repaired = vec![false; errors.len()];
    let mut left = errors.len();
    while let Some(h) = queue.pop_front() {
        let cell = match h {
            Hyperplane::Row(i) if row_cnt[i] == 1 => GridCoord::new(i, row_sum[i]),
            Hyperplane::Col(j) if col_cnt[j] == 1 => GridCoord::new(col_sum[j], j),
            _ => continue,
        };
        let pos = errors.binary_search(&cell).expect("open error is listed");
        repaired[pos] = true;
        left -= 1;
        row_cnt[cell.row] -= 1;
        row_sum[cell.row] -= cell.col;
        col_cnt[cell.col] -= 1;
        col_sum[cell.col] -= cell.row;
        if row_cnt[cell.row] == 1 {
            queue.push_back(Hyperplane::Row(cell.row));
        }
        if col_cnt[cell.col] == 1 {
            queue.push_back(Hyperplane::Col(cell.col));
        }
        on_repair(PeelStep { cell, via: h });
        if left == 0 {
            break;
        }
    }
    errors
        .iter()
        .zip(repaired)
        .filter(|(_, r)| !r)
        .map(|(c, _)| *c)
        .collect()
}

/// Peeling fixpoint of a configuration: the errors that cannot be repaired
/// by isolated-error elimination. Independent of the repair order.
pub fn peel_residual(config: &ErrorConfiguration) -> ErrorConfiguration {
    let (n, m) = config.dims();
    let errors: Vec<GridCoord> = config.iter().collect();
    let residual = peel_with(n, m, &errors, |_| {});
    ErrorConfiguration::new(n, m, residual).expect("residual is a subset")
}

#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    pub repaired: CodeGrid,
    /// Stopping set left after peeling; empty iff decoding succeeded.
    pub residual: ErrorConfiguration,
    /// Payload xor operations performed.
    pub xor_ops: usize,
}

impl DecodeOutcome {
    pub fn is_complete(&self) -> bool {
        self.residual.is_empty()
    }
}

/// Iterative peeling decoder.
///
/// Row and column syndromes (xor of the correct cells of each hyperplane)
/// are computed once; an error isolated in a hyperplane equals that
/// hyperplane's syndrome and is then folded into the crossing hyperplane.
/// The work is at most `2N` payload xors.
pub fn decode_peel(grid: &CodeGrid) -> DecodeOutcome {
    let params = *grid.params();
    let (n, m, len) = (params.n(), params.m(), grid.packet_len());
    let config = grid.error_configuration();
    let errors: Vec<GridCoord> = config.iter().collect();
    let mut repaired = grid.clone();
    let mut xor_ops = 0;
    if errors.is_empty() {
        return DecodeOutcome {
            repaired,
            residual: config,
            xor_ops,
        };
    }
    let mut row_syn = vec![vec![0u8; len]; n + 1];
    let mut col_syn = vec![vec![0u8; len]; m + 1];
    for i in 0..=n {
        for j in 0..=m {
            let p = grid.cell(GridCoord::new(i, j));
            if p.is_correct() {
                xor_into(&mut row_syn[i], p.payload());
                xor_into(&mut col_syn[j], p.payload());
                xor_ops += 2;
            }
        }
    }
    let residual = peel_with(n, m, &errors, |step| {
        let c = step.cell;
        let payload = match step.via {
            Hyperplane::Row(i) => {
                let v = row_syn[i].clone();
                xor_into(&mut col_syn[c.col], &v);
                v
            }
            Hyperplane::Col(j) => {
                let v = col_syn[j].clone();
                xor_into(&mut row_syn[c.row], &v);
                v
            }
        };
        xor_ops += 1;
        *repaired.cell_mut(c) = Packet::new(payload);
    });
    DecodeOutcome {
        repaired,
        residual: ErrorConfiguration::new(n, m, residual).expect("residual is a subset"),
        xor_ops,
    }
}

/// Good / bad / minimal-bad classification of an error configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConfigClass {
    /// Fully repaired by peeling (possibly empty).
    Good,
    /// Not fully repaired, but at least one error peels.
    Bad,
    /// Non-empty and no error peels at all.
    MinimalBad,
}

impl ConfigClass {
    /// Minimal-bad configurations are bad too.
    pub fn is_bad(self) -> bool {
        self != ConfigClass::Good
    }
}

pub fn classify(config: &ErrorConfiguration) -> ConfigClass {
    let residual = peel_residual(config);
    if residual.is_empty() {
        ConfigClass::Good
    } else if residual.len() == config.len() {
        ConfigClass::MinimalBad
    } else {
        ConfigClass::Bad
    }
}

/// Square code chosen for a block of `K` packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dimensions {
    pub params: CodeParams,
    /// Zero packets appended to fill the `n x n` rectangle; never sent.
    pub pad: usize,
}

impl Dimensions {
    /// Packets put on the wire: `(n+1)^2 - pad`.
    pub fn emission_size(&self) -> usize {
        self.params.cell_count() - self.pad
    }
}

/// `n = m = ceil(sqrt(K))`, padded with `n^2 - K` zero packets.
pub fn choose_dimensions(k: usize) -> Result<Dimensions> {
    if k == 0 {
        return invalid("cannot encode an empty block");
    }
    let mut n = k.sqrt();
    if n * n < k {
        n += 1;
    }
    Ok(Dimensions {
        params: CodeParams::row_major(n, n)?,
        pad: n * n - k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::IndexedRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coords(list: &[(usize, usize)]) -> Vec<GridCoord> {
        list.iter().map(|&(r, c)| GridCoord::new(r, c)).collect()
    }

    fn config(n: usize, m: usize, list: &[(usize, usize)]) -> ErrorConfiguration {
        ErrorConfiguration::new(n, m, coords(list)).unwrap()
    }

    fn random_sources(rng: &mut impl Rng, count: usize, len: usize) -> Vec<Packet> {
        (0..count)
            .map(|_| Packet::new((0..len).map(|_| rng.random()).collect()))
            .collect()
    }

    fn erase(grid: &CodeGrid, cells: &ErrorConfiguration) -> CodeGrid {
        let mut g = grid.clone();
        for c in cells.iter() {
            let idx = g.params().index_of(c).unwrap();
            g.set_status(idx, Status::Erased).unwrap();
            *g.cell_mut(c) = Packet::zeroed(g.packet_len()).with_status(Status::Erased).unwrap();
        }
        g
    }

    // Naive peeling: repeatedly repair a uniformly chosen isolated error.
    fn naive_peel(config: &ErrorConfiguration, rng: &mut impl Rng) -> ErrorConfiguration {
        let mut left: Vec<GridCoord> = config.iter().collect();
        loop {
            let isolated: Vec<usize> = (0..left.len())
                .filter(|&a| {
                    let c = left[a];
                    left.iter().filter(|o| o.row == c.row).count() == 1
                        || left.iter().filter(|o| o.col == c.col).count() == 1
                })
                .collect();
            match isolated.choose(rng) {
                Some(&a) => {
                    left.swap_remove(a);
                }
                None => break,
            }
        }
        let (n, m) = config.dims();
        ErrorConfiguration::new(n, m, left).unwrap()
    }

    #[test]
    fn crt_ordering_examples() {
        let p = CodeParams::new(2, 3, SourceOrder::Crt).unwrap();
        let got: Vec<_> = (0..6).map(|k| p.place(k).unwrap()).collect();
        assert_eq!(got, coords(&[(0, 0), (1, 1), (0, 2), (1, 0), (0, 1), (1, 2)]));
        let rm = CodeParams::row_major(2, 3).unwrap();
        assert_eq!(rm.place(4).unwrap(), GridCoord::new(1, 1));
        assert!(matches!(
            CodeParams::new(2, 4, SourceOrder::Crt),
            Err(Error::Config(_))
        ));
        assert!(rm.place(6).is_err());
    }

    #[test]
    fn index_layout_is_a_bijection() {
        for &(n, m, order) in &[
            (2, 3, SourceOrder::Crt),
            (5, 7, SourceOrder::Crt),
            (4, 1, SourceOrder::Crt),
            (3, 3, SourceOrder::RowMajor),
            (1, 6, SourceOrder::RowMajor),
        ] {
            let p = CodeParams::new(n, m, order).unwrap();
            let mut seen = vec![false; p.cell_count()];
            for k in 0..p.cell_count() {
                let c = p.coord_of(PacketIndex(k)).unwrap();
                assert_eq!(p.index_of(c).unwrap(), PacketIndex(k));
                assert!(!std::mem::replace(&mut seen[p.offset(c)], true));
            }
            let (k, nn) = (p.source_count(), p.cell_count());
            assert_eq!(p.coord_of(PacketIndex(k)).unwrap(), GridCoord::new(0, m));
            assert_eq!(p.coord_of(PacketIndex(k + n)).unwrap(), GridCoord::new(n, 0));
            assert_eq!(p.coord_of(PacketIndex(nn - 1)).unwrap(), GridCoord::new(n, m));
            assert!(p.coord_of(PacketIndex(nn)).is_err());
        }
    }

    #[test]
    fn rate_and_counts() {
        let p = CodeParams::row_major(3, 4).unwrap();
        assert_eq!(p.source_count(), 12);
        assert_eq!(p.cell_count(), 20);
        assert!((p.rate() - 12.0 / 20.0).abs() < 1e-15);
        assert_eq!(encode_xor_count(&p), 27);
    }

    #[test]
    fn encode_single_source() {
        let x = Packet::new(vec![7, 1, 9]);
        let grid = encode(CodeParams::row_major(1, 1).unwrap(), vec![x.clone()]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(grid.cell(GridCoord::new(i, j)).payload(), x.payload());
            }
        }
    }

    #[test]
    fn encode_zero_sources() {
        let params = CodeParams::row_major(3, 2).unwrap();
        let grid = encode(params, vec![Packet::zeroed(5); 6]).unwrap();
        assert!(grid.packets().all(|(_, p)| p.payload() == [0; 5]));
    }

    #[test]
    fn encode_random_rows_and_columns_sum_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = CodeParams::row_major(3, 4).unwrap();
        let sources = random_sources(&mut rng, 12, 32);
        let grid = encode(params, sources.clone()).unwrap();
        // direct summation, independent of parity_holds
        for i in 0..=3 {
            let mut acc = vec![0u8; 32];
            (0..=4).for_each(|j| xor_into(&mut acc, grid.cell(GridCoord::new(i, j)).payload()));
            assert!(acc.iter().all(|&b| b == 0));
        }
        for j in 0..=4 {
            let mut acc = vec![0u8; 32];
            (0..=3).for_each(|i| xor_into(&mut acc, grid.cell(GridCoord::new(i, j)).payload()));
            assert!(acc.iter().all(|&b| b == 0));
        }
        assert!(grid.parity_holds());
        assert_eq!(grid.sources(), sources);
        assert!(grid.packets().all(|(_, p)| p.checksum_matches()));
    }

    #[test]
    fn encode_rejects_bad_inputs() {
        let params = CodeParams::row_major(2, 2).unwrap();
        assert!(encode(params, vec![Packet::zeroed(4); 3]).is_err());
        let mut mixed = vec![Packet::zeroed(4); 4];
        mixed[2] = Packet::zeroed(5);
        assert!(encode(params, mixed).is_err());
        assert!(encode_padded(params, vec![]).is_err());
    }

    #[test]
    fn decode_single_erasure_anywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = CodeParams::row_major(3, 3).unwrap();
        let grid = encode(params, random_sources(&mut rng, 9, 16)).unwrap();
        for k in 0..params.cell_count() {
            let c = params.coord_of(PacketIndex(k)).unwrap();
            let out = decode_peel(&erase(&grid, &ErrorConfiguration::new(3, 3, [c]).unwrap()));
            assert!(out.is_complete());
            assert_eq!(out.repaired, grid);
        }
    }

    #[test]
    fn decode_four_cycle_stalls() {
        let square = config(2, 2, &[(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(peel_residual(&square), square);
        let with_lone = config(2, 2, &[(0, 0), (0, 1), (1, 0), (1, 1), (2, 2)]);
        assert_eq!(peel_residual(&with_lone), square);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let grid = encode(CodeParams::row_major(2, 2).unwrap(), random_sources(&mut rng, 4, 8)).unwrap();
        let out = decode_peel(&erase(&grid, &with_lone));
        assert_eq!(out.residual, square);
        assert_eq!(out.repaired.cell(GridCoord::new(2, 2)), grid.cell(GridCoord::new(2, 2)));
    }

    #[test]
    fn decode_work_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = CodeParams::row_major(6, 5).unwrap();
        let grid = encode(params, random_sources(&mut rng, 30, 8)).unwrap();
        for _ in 0..50 {
            let cells: Vec<GridCoord> = (0..10)
                .map(|_| GridCoord::new(rng.random_range(0..=6), rng.random_range(0..=5)))
                .collect();
            let cfg = ErrorConfiguration::new(6, 5, cells).unwrap();
            let out = decode_peel(&erase(&grid, &cfg));
            assert!(out.xor_ops <= 2 * params.cell_count());
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&ErrorConfiguration::empty(2, 2)), ConfigClass::Good);
        let square = config(2, 2, &[(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(classify(&square), ConfigClass::MinimalBad);
        assert!(classify(&square).is_bad());
        let with_lone = config(2, 2, &[(0, 0), (0, 1), (1, 0), (1, 1), (2, 2)]);
        assert_eq!(classify(&with_lone), ConfigClass::Bad);
        assert_eq!(classify(&config(2, 2, &[(0, 0), (0, 1), (1, 1)])), ConfigClass::Good);
    }

    #[test]
    fn choose_dimensions_examples() {
        let d = choose_dimensions(36).unwrap();
        assert_eq!((d.params.n(), d.params.m(), d.pad), (6, 6, 0));
        assert_eq!(d.emission_size(), 49);
        let d = choose_dimensions(5).unwrap();
        assert_eq!((d.params.n(), d.pad), (3, 4));
        let d = choose_dimensions(3).unwrap();
        assert_eq!((d.params.n(), d.pad, d.emission_size()), (2, 1, 8));
        assert_eq!(choose_dimensions(1).unwrap().emission_size(), 4);
        assert_eq!(choose_dimensions(256).unwrap().emission_size(), 289);
        assert!(choose_dimensions(0).is_err());
    }

    #[test]
    fn padding_is_zero_and_unsent() {
        let d = choose_dimensions(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sources = random_sources(&mut rng, 3, 8);
        let grid = encode_padded(d.params, sources.clone()).unwrap();
        assert_eq!(grid.pad_count(), 1);
        assert_eq!(grid.sent_count(), 8);
        assert!(grid.is_pad(PacketIndex(3)));
        assert!(!grid.is_pad(PacketIndex(2)) && !grid.is_pad(PacketIndex(4)));
        assert_eq!(grid.packet(PacketIndex(3)).unwrap().payload(), &[0; 8]);
        assert!(grid.parity_holds());
        assert_eq!(grid.sources(), sources);
        let mut g = grid.clone();
        assert!(g.set_status(PacketIndex(3), Status::Erased).is_err());
    }

    #[test]
    fn good_configurations_recover_originals_exhaustively() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = CodeParams::row_major(2, 2).unwrap();
        let grid = encode(params, random_sources(&mut rng, 4, 12)).unwrap();
        let mut good = 0;
        for mask in 0u64..(1 << 9) {
            let cfg = ErrorConfiguration::from_mask(2, 2, mask);
            let out = decode_peel(&erase(&grid, &cfg));
            assert_eq!(out.residual, peel_residual(&cfg));
            if out.is_complete() {
                good += 1;
                assert_eq!(out.repaired, grid, "mask {mask:#b}");
            } else {
                for c in cfg.difference(&out.residual).iter() {
                    assert_eq!(out.repaired.cell(c), grid.cell(c));
                }
            }
        }
        assert!(good > 0);
    }

    #[test]
    fn residual_depends_only_on_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rm = encode(CodeParams::row_major(2, 3).unwrap(), random_sources(&mut rng, 6, 4)).unwrap();
        let crt = encode(
            CodeParams::new(2, 3, SourceOrder::Crt).unwrap(),
            random_sources(&mut rng, 6, 4),
        )
        .unwrap();
        for mask in 0u64..(1 << 12) {
            let cfg = ErrorConfiguration::from_mask(2, 3, mask);
            let a = decode_peel(&erase(&rm, &cfg));
            let b = decode_peel(&erase(&crt, &cfg));
            assert_eq!(a.residual, b.residual);
            if b.is_complete() {
                assert_eq!(b.repaired, crt);
            }
        }
    }

    #[test]
    fn peeling_is_confluent() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..400 {
            let (n, m) = (rng.random_range(1..6), rng.random_range(1..6));
            let e = rng.random_range(0..=(n + 1) * (m + 1));
            let cells: Vec<GridCoord> = (0..e)
                .map(|_| GridCoord::new(rng.random_range(0..=n), rng.random_range(0..=m)))
                .collect();
            let cfg = ErrorConfiguration::new(n, m, cells).unwrap();
            let fixpoint = peel_residual(&cfg);
            for _ in 0..4 {
                assert_eq!(naive_peel(&cfg, &mut rng), fixpoint);
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_without_erasures(
            n in 1usize..6,
            m in 1usize..6,
            crt in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let order = if crt && n.gcd(&m) == 1 { SourceOrder::Crt } else { SourceOrder::RowMajor };
            let params = CodeParams::new(n, m, order).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let grid = encode(params, random_sources(&mut rng, n * m, 6)).unwrap();
            prop_assert!(grid.parity_holds());
            let out = decode_peel(&grid);
            prop_assert!(out.is_complete());
            prop_assert_eq!(out.repaired, grid);
        }
    }
}
