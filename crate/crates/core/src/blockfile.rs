//! Binary block file.
//!
//! Little-endian header `"RFEC"`, `version: u16 = 1`, `n: u32`, `m: u32`,
//! `len: u32`, `K: u32`, then `N = (n+1)(m+1)` records `{status: u8, payload:
//! [u8; len]}` in packet-index order. Status is 0 for correct, 1 for erased.
//! The code uses row-major ordering and `K` counts real sources; the
//! remaining `n*m - K` source slots are zero padding.

use std::io::{Read, Write};

use crate::codec::{CodeGrid, CodeParams};
use crate::error::{Error, Result};
use crate::packet::{Packet, Status};

pub const MAGIC: &[u8; 4] = b"RFEC";
pub const VERSION: u16 = 1;

const STATUS_CORRECT: u8 = 0;
const STATUS_ERASED: u8 = 1;

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

pub fn write_block<W: Write>(grid: &CodeGrid, mut out: W) -> Result<()> {
    let params = grid.params();
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} = {v} exceeds u32")))
    };
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&to_u32(params.n(), "n")?.to_le_bytes())?;
    out.write_all(&to_u32(params.m(), "m")?.to_le_bytes())?;
    out.write_all(&to_u32(grid.packet_len(), "len")?.to_le_bytes())?;
    out.write_all(&to_u32(grid.data_count(), "K")?.to_le_bytes())?;
    for (idx, p) in grid.packets() {
        let status = match p.status() {
            Status::Correct => STATUS_CORRECT,
            Status::Erased => STATUS_ERASED,
            Status::BitCorrupted(_) => {
                return Err(Error::InvalidArgument(format!(
                    "packet {idx} is bit-corrupted; block files only carry correct or erased packets"
                )))
            }
        };
        out.write_all(&[status])?;
        out.write_all(p.payload())?;
    }
    out.flush()?;
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_block<R: Read>(mut input: R) -> Result<CodeGrid> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return format_err(format!("bad magic {magic:?}"));
    }
    let mut v = [0u8; 2];
    input.read_exact(&mut v)?;
    let version = u16::from_le_bytes(v);
    if version != VERSION {
        return format_err(format!("unsupported version {version}"));
    }
    let n = read_u32(&mut input)? as usize;
    let m = read_u32(&mut input)? as usize;
    let len = read_u32(&mut input)? as usize;
    let k = read_u32(&mut input)? as usize;
    let params = CodeParams::row_major(n, m).map_err(|e| Error::Format(e.to_string()))?;
    if k == 0 || k > params.source_count() {
        return format_err(format!("K = {k} does not fit a {n}x{m} code"));
    }
    let mut packets = Vec::with_capacity(params.cell_count());
    for idx in 0..params.cell_count() {
        let mut status = [0u8; 1];
        input.read_exact(&mut status)?;
        let mut payload = vec![0u8; len];
        input.read_exact(&mut payload)?;
        let status = match status[0] {
            STATUS_CORRECT => Status::Correct,
            STATUS_ERASED => Status::Erased,
            other => return format_err(format!("packet {idx} has unknown status {other}")),
        };
        packets.push(Packet::new(payload).with_status(status)?);
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return format_err("trailing bytes after the last record");
    }
    let grid = CodeGrid::from_packets(params, params.source_count() - k, packets)?;
    if let Some((idx, _)) = grid.packets().find(|(i, p)| grid.is_pad(*i) && !p.is_correct()) {
        return format_err(format!("padding packet {idx} is marked erased"));
    }
    Ok(grid)
}
