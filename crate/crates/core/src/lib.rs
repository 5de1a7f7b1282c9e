//! Rectangular (two-dimensional product) erasure codes paired with a
//! minimum-feedback repair loop.
//!
//! The crate is organised bottom-up:
//!
//! * [`packet`]: packets, xor, CRC-32, grid coordinates and error configurations.
//! * [`codec`]: the rectangular encoder, the peeling decoder and padding rules.
//! * [`feedback`]: the coordinates graph and minimum feedback repair set solvers.
//! * [`channel`]: seeded, counter-based erasure and bit-flip channels.
//! * [`protocol`]: emission/repair cycles on a block and on a stream.
//! * [`baseline`]: a selective-repeat ARQ reference.
//! * [`analysis`]: exact formulas, brute-force oracles and Monte Carlo estimators.
//! * [`sweep`]: the protocol-versus-ARQ experiment driver.
//! * [`blockfile`]: the on-disk block format used by the command line tool.

pub mod analysis;
pub mod baseline;
pub mod blockfile;
pub mod channel;
pub mod codec;
pub mod error;
pub mod feedback;
pub mod packet;
pub mod protocol;
pub mod sweep;

pub use error::{Error, Result};
