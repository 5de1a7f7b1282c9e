//! Emission/repair protocol.
//!
//! A cycle encodes a block with a padded square code, pushes it through the
//! channel, lets the receiver peel and compute a minimum feedback repair set
//! (FRS), and hands the FRS indices back over the error-free feedback path.
//!
//! On a single block, cycles repeat until an empty FRS comes back. After each
//! cycle the `k` requested packets are encoded as a fresh block when that
//! emission is smaller than the previous one; otherwise the previous emission
//! is repeated and the receiver merges both receptions.
//!
//! On a stream, each full block is made of the previous FRS followed by the
//! next `K - k` message packets. Whatever is left at the end goes through the
//! single-block loop.
//!
//! Once a chain terminates, the receiver unwinds it from the last block to
//! the first: each decoded block yields the FRS packets of its predecessor,
//! which then decodes as well.

use std::ops::Range;

use serde::Serialize;

use crate::channel::{Channel, StreamId};
use crate::codec::{choose_dimensions, decode_peel, encode_padded, CodeGrid, Dimensions};
use crate::error::{invalid, Error, Result};
use crate::feedback::{build_gadget, min_frs_unit, min_frs_weighted, CostFunction, FeedbackRepairSet};
use crate::packet::{Packet, PacketIndex, Status};

/// Default cap on the number of emissions of one session.
pub const DEFAULT_MAX_ITERS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolConfig {
    pub cost: CostFunction,
    pub max_iters: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            cost: CostFunction::AllOrNone,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

/// Result of one emission/repair cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleOutcome {
    /// Packets put on the wire.
    pub sent_count: usize,
    /// Requested repair set; empty iff the block decoded.
    pub frs: FeedbackRepairSet,
    pub decoded: bool,
    /// Packets in the encoded block.
    pub block_len: usize,
    /// Whether this emission repeated the previous one.
    pub reemitted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockTrace {
    pub k: usize,
    pub iterations: Vec<CycleOutcome>,
    pub total_sent: usize,
    pub terminated: bool,
}

impl BlockTrace {
    fn new(k: usize, iterations: Vec<CycleOutcome>, terminated: bool) -> Self {
        let total_sent = iterations.iter().map(|c| c.sent_count).sum();
        Self {
            k,
            iterations,
            total_sent,
            terminated,
        }
    }

    pub fn iteration_count(&self) -> usize {
        self.iterations.len()
    }

    /// Packets sent per source packet.
    pub fn efficiency(&self) -> f64 {
        self.total_sent as f64 / self.k as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamTrace {
    pub message_len: usize,
    pub k: usize,
    pub iterations: Vec<CycleOutcome>,
    /// Cycles run on full blocks of `K` packets.
    pub full_blocks: usize,
    /// Fresh message packets left for the closing single-block phase.
    pub tail_packets: usize,
    pub total_sent: usize,
    pub terminated: bool,
}

/// The sending side. After a request is served only the requested packets
/// are kept; the last emission is kept as well when it is about to be
/// repeated.
#[derive(Debug, Default)]
pub struct Sender {
    pending: Vec<Packet>,
    last: Option<CodeGrid>,
}

impl Sender {
    pub fn new() -> Self {
        Self::default()
    }

    /// Packets kept for a possible new request.
    pub fn pending(&self) -> &[Packet] {
        &self.pending
    }

    /// Whether the full previous emission is still held.
    pub fn holds_emission(&self) -> bool {
        self.last.is_some()
    }

    pub fn last_emission_size(&self) -> Option<usize> {
        self.last.as_ref().map(CodeGrid::sent_count)
    }

    fn emit_block(&mut self, inputs: Vec<Packet>) -> Result<&CodeGrid> {
        let dims = choose_dimensions(inputs.len())?;
        self.pending.clear();
        Ok(self.last.insert(encode_padded(dims.params, inputs)?))
    }

    fn reemit(&self) -> Result<&CodeGrid> {
        self.last
            .as_ref()
            .ok_or_else(|| Error::State("no emission left to repeat".into()))
    }

    /// Keep the requested packets; drop the emission unless it is needed again.
    fn serve(&mut self, frs: &FeedbackRepairSet, keep_emission: bool) -> Result<()> {
        let grid = self.reemit()?;
        self.pending = frs
            .packets
            .iter()
            .map(|&k| grid.packet(k).map(|p| Packet::new(p.payload().to_vec())))
            .collect::<Result<_>>()?;
        if !keep_emission {
            self.last = None;
        }
        Ok(())
    }
}

/// Receiver-side state of one block.
#[derive(Debug)]
struct BlockRecord {
    dims: Dimensions,
    len: usize,
    /// Payloads known by packet index: received correct, repaired or padding.
    known: Vec<Option<Vec<u8>>>,
    /// Latest status of the cells still unknown (for graded costs).
    last_status: Vec<Status>,
    frs: Vec<PacketIndex>,
    /// Leading inputs that are the previous block's FRS packets.
    carried: usize,
    /// Message positions of the remaining inputs.
    fresh: Range<usize>,
}

impl BlockRecord {
    fn grid(&self) -> Result<CodeGrid> {
        let packets = self
            .known
            .iter()
            .zip(&self.last_status)
            .map(|(k, status)| match k {
                Some(payload) => Ok(Packet::new(payload.clone())),
                None => Packet::zeroed(self.len).with_status(status.clone()),
            })
            .collect::<Result<Vec<_>>>()?;
        CodeGrid::from_packets(self.dims.params, self.dims.pad, packets)
    }
}

/// The receiving side: one record per block of the repair chain.
#[derive(Debug, Default)]
pub struct Receiver {
    cost: CostFunction,
    blocks: Vec<BlockRecord>,
}

impl Receiver {
    pub fn new(cost: CostFunction) -> Self {
        Self {
            cost,
            blocks: Vec::new(),
        }
    }

    /// FRS of every block of the chain, oldest first.
    pub fn frs_chain(&self) -> Vec<Vec<PacketIndex>> {
        self.blocks.iter().map(|b| b.frs.clone()).collect()
    }

    /// Payloads held for the current block.
    pub fn retained_payloads(&self) -> usize {
        self.blocks
            .last()
            .map_or(0, |b| b.known.iter().filter(|k| k.is_some()).count())
    }

    /// Cells of the current block whose payload is unknown.
    pub fn unknown_cells(&self) -> usize {
        self.blocks
            .last()
            .map_or(0, |b| b.known.iter().filter(|k| k.is_none()).count())
    }

    fn open_block(&mut self, data: usize, len: usize, carried: usize, fresh: Range<usize>) -> Result<()> {
        let dims = choose_dimensions(data)?;
        let cells = dims.params.cell_count();
        let k = dims.params.source_count();
        let known = (0..cells)
            .map(|i| (i >= k - dims.pad && i < k).then(|| vec![0u8; len]))
            .collect();
        self.blocks.push(BlockRecord {
            dims,
            len,
            known,
            last_status: vec![Status::Erased; cells],
            frs: Vec::new(),
            carried,
            fresh,
        });
        Ok(())
    }

    /// Merge a reception into the current block, peel, and compute the FRS.
    fn absorb(&mut self, received: &CodeGrid) -> Result<FeedbackRepairSet> {
        let cost = self.cost;
        let block = self
            .blocks
            .last_mut()
            .ok_or_else(|| Error::State("no open block".into()))?;
        for (idx, p) in received.packets() {
            if block.known[idx.0].is_some() {
                continue;
            }
            if p.is_correct() {
                block.known[idx.0] = Some(p.payload().to_vec());
            } else {
                block.last_status[idx.0] = p.status().clone();
            }
        }
        let outcome = decode_peel(&block.grid()?);
        for (idx, p) in outcome.repaired.packets() {
            if p.is_correct() && block.known[idx.0].is_none() {
                block.known[idx.0] = Some(p.payload().to_vec());
            }
        }
        let params = block.dims.params;
        let g = build_gadget(&outcome.residual, cost, &params, Some(&outcome.repaired))?;
        let frs = match cost {
            CostFunction::AllOrNone => min_frs_unit(&g)?,
            _ => min_frs_weighted(&g)?,
        };
        block.frs = frs.packets.clone();
        Ok(frs)
    }

    /// Unwind the repair chain and return the message packets.
    pub fn reconstruct(&self) -> Result<Vec<Packet>> {
        let last = self
            .blocks
            .last()
            .ok_or_else(|| Error::State("nothing was received".into()))?;
        if !last.frs.is_empty() {
            return Err(Error::State(
                "the last block still has an open repair request".into(),
            ));
        }
        let message_len = self.blocks.iter().map(|b| b.fresh.end).max().unwrap_or(0);
        let mut message: Vec<Option<Packet>> = vec![None; message_len];
        let mut carry: Vec<Vec<u8>> = Vec::new();
        for (depth, block) in self.blocks.iter().enumerate().rev() {
            if carry.len() != block.frs.len() {
                return Err(Error::State(format!(
                    "block {depth} requested {} packets but {} came back",
                    block.frs.len(),
                    carry.len()
                )));
            }
            let mut grid = block.grid()?;
            for (&idx, payload) in block.frs.iter().zip(carry.drain(..)) {
                grid.fill(idx, payload)?;
            }
            let outcome = decode_peel(&grid);
            if !outcome.is_complete() {
                return Err(Error::State(format!("block {depth} cannot be decoded")));
            }
            let inputs = outcome.repaired.sources();
            let (carried, fresh) = inputs.split_at(block.carried);
            carry = carried.iter().map(|p| p.payload().to_vec()).collect();
            for (pos, p) in block.fresh.clone().zip(fresh) {
                message[pos] = Some(Packet::new(p.payload().to_vec()));
            }
        }
        if !carry.is_empty() {
            return Err(Error::State("first block claims carried packets".into()));
        }
        message
            .into_iter()
            .enumerate()
            .map(|(i, p)| p.ok_or_else(|| Error::State(format!("message packet {i} never sent"))))
            .collect()
    }
}

/// One protocol session: a sender, a receiver and a channel lane.
pub struct Session<'c, C: Channel + ?Sized> {
    pub sender: Sender,
    pub receiver: Receiver,
    channel: &'c C,
    config: ProtocolConfig,
    lane: u64,
    iterations: Vec<CycleOutcome>,
}

impl<'c, C: Channel + ?Sized> Session<'c, C> {
    pub fn new(channel: &'c C, config: ProtocolConfig, lane: u64) -> Self {
        Self {
            sender: Sender::new(),
            receiver: Receiver::new(config.cost),
            channel,
            config,
            lane,
            iterations: Vec::new(),
        }
    }

    pub fn iterations(&self) -> &[CycleOutcome] {
        &self.iterations
    }

    fn next_stream(&self) -> StreamId {
        StreamId::new(self.lane, self.iterations.len() as u64)
    }

    fn at_cap(&self) -> bool {
        self.iterations.len() >= self.config.max_iters
    }

    fn exchange(&mut self, grid: CodeGrid, block_len: usize, reemitted: bool) -> Result<CycleOutcome> {
        let received = self.channel.transmit(&grid, self.next_stream());
        let frs = self.receiver.absorb(&received)?;
        let outcome = CycleOutcome {
            sent_count: grid.sent_count(),
            decoded: frs.is_empty(),
            frs,
            block_len,
            reemitted,
        };
        self.iterations.push(outcome.clone());
        Ok(outcome)
    }

    /// A single emission/repair cycle on a new block. The first `carried`
    /// inputs are the packets the receiver asked for last; the rest are the
    /// message packets at positions `fresh`.
    pub fn run_cycle(
        &mut self,
        inputs: Vec<Packet>,
        carried: usize,
        fresh: Range<usize>,
    ) -> Result<CycleOutcome> {
        let block_len = inputs.len();
        if carried + fresh.len() != block_len {
            return invalid(format!(
                "block of {block_len} packets cannot hold {carried} carried and {} fresh ones",
                fresh.len()
            ));
        }
        let len = inputs.first().map_or(0, Packet::len);
        let grid = self.sender.emit_block(inputs)?.clone();
        self.receiver.open_block(block_len, len, carried, fresh)?;
        let outcome = self.exchange(grid, block_len, false)?;
        self.sender.serve(&outcome.frs, true)?;
        Ok(outcome)
    }

    fn reemit_cycle(&mut self) -> Result<CycleOutcome> {
        let grid = self.sender.reemit()?.clone();
        let block_len = grid.data_count();
        let outcome = self.exchange(grid, block_len, true)?;
        self.sender.serve(&outcome.frs, true)?;
        Ok(outcome)
    }

    /// Repeat cycles on the current block until the receiver asks for
    /// nothing, or the iteration cap is hit. Returns whether it terminated.
    pub fn finish_block(&mut self) -> Result<bool> {
        loop {
            let last = self
                .iterations
                .last()
                .ok_or_else(|| Error::State("no block in flight".into()))?;
            if last.decoded {
                self.sender.last = None;
                return Ok(true);
            }
            if self.at_cap() {
                return Ok(false);
            }
            let k = last.frs.len();
            if choose_dimensions(k)?.emission_size() < last.sent_count {
                self.sender.last = None;
                let inputs = self.sender.pending.clone();
                self.run_cycle(inputs, k, 0..0)?;
            } else {
                self.reemit_cycle()?;
            }
        }
    }
}

#[derive(Debug)]
pub struct BlockRun {
    pub trace: BlockTrace,
    pub receiver: Receiver,
}

/// Send one block of packets with as many cycles as needed.
pub fn run_block<C: Channel + ?Sized>(
    inputs: Vec<Packet>,
    channel: &C,
    config: ProtocolConfig,
    lane: u64,
) -> Result<BlockRun> {
    let k = inputs.len();
    if k == 0 {
        return invalid("a block needs at least one packet");
    }
    check_lengths(&inputs)?;
    let mut session = Session::new(channel, config, lane);
    session.run_cycle(inputs, 0, 0..k)?;
    let terminated = session.finish_block()?;
    Ok(BlockRun {
        trace: BlockTrace::new(k, session.iterations, terminated),
        receiver: session.receiver,
    })
}

#[derive(Debug)]
pub struct StreamRun {
    pub trace: StreamTrace,
    pub receiver: Receiver,
}

/// Send a message as a stream of blocks of `k` packets.
pub fn run_stream<C: Channel + ?Sized>(
    message: &[Packet],
    k: usize,
    channel: &C,
    config: ProtocolConfig,
    lane: u64,
) -> Result<StreamRun> {
    if message.is_empty() {
        return invalid("cannot stream an empty message");
    }
    if k == 0 {
        return invalid("block size must be positive");
    }
    check_lengths(message)?;
    let mut session = Session::new(channel, config, lane);
    let mut pos = 0;
    let mut full_blocks = 0;
    let mut capped = false;
    loop {
        let carried = session.sender.pending().len();
        let need = k - carried;
        let remaining = message.len() - pos;
        if remaining == 0 || remaining < need {
            break;
        }
        if session.at_cap() {
            capped = true;
            break;
        }
        let mut inputs = session.sender.pending().to_vec();
        inputs.extend_from_slice(&message[pos..pos + need]);
        session.sender.last = None;
        session.run_cycle(inputs, carried, pos..pos + need)?;
        pos += need;
        full_blocks += 1;
    }
    let tail_packets = message.len() - pos;
    let terminated = if capped {
        false
    } else if tail_packets > 0 {
        if session.at_cap() {
            false
        } else {
            let carried = session.sender.pending().len();
            let mut inputs = session.sender.pending().to_vec();
            inputs.extend_from_slice(&message[pos..]);
            session.sender.last = None;
            session.run_cycle(inputs, carried, pos..message.len())?;
            session.finish_block()?
        }
    } else {
        session.finish_block()?
    };
    let total_sent = session.iterations.iter().map(|c| c.sent_count).sum();
    Ok(StreamRun {
        trace: StreamTrace {
            message_len: message.len(),
            k,
            iterations: session.iterations,
            full_blocks,
            tail_packets,
            total_sent,
            terminated,
        },
        receiver: session.receiver,
    })
}

/// Recover the transmitted packets from a terminated session.
pub fn reconstruct(receiver: &Receiver) -> Result<Vec<Packet>> {
    receiver.reconstruct()
}

fn check_lengths(packets: &[Packet]) -> Result<()> {
    let len = packets[0].len();
    if packets.iter().any(|p| p.len() != len) {
        return invalid("all packets must share one length");
    }
    Ok(())
}
