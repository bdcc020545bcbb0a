//! Binary flow-state checkpoints.
//!
//! Layout (all little-endian): magic `RBC1`, `u32 nx`, `u32 ny`, `f64 ra`,
//! `f64 pr`, `f64 time`, then the `u_x`, `u_y` and `temp` arrays of
//! `nx * ny` `f64` each in row-major order (x fastest). Pressure is not
//! stored; the solver recomputes it on the first step.

use super::FieldState;
use crate::error::{RbcError, Result};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"RBC1";
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8 + 8;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub ra: f64,
    pub pr: f64,
    pub state: FieldState,
}

pub fn encode(ra: f64, pr: f64, state: &FieldState) -> Vec<u8> {
    let n = state.nx * state.ny;
    let mut buf = Vec::with_capacity(HEADER_LEN + 3 * n * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(state.nx as u32).to_le_bytes());
    buf.extend_from_slice(&(state.ny as u32).to_le_bytes());
    buf.extend_from_slice(&ra.to_le_bytes());
    buf.extend_from_slice(&pr.to_le_bytes());
    buf.extend_from_slice(&state.time.to_le_bytes());
    for field in [&state.u_x, &state.u_y, &state.temp] {
        for v in field.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(RbcError::Format("missing RBC1 checkpoint header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (nx, ny) = (u32_at(4), u32_at(8));
    let (ra, pr, time) = (f64_at(12), f64_at(20), f64_at(28));
    let n = nx * ny;
    if bytes.len() != HEADER_LEN + 3 * n * 8 {
        return Err(RbcError::Format(format!(
            "checkpoint body has {} bytes, expected {} for a {nx}x{ny} grid",
            bytes.len() - HEADER_LEN,
            3 * n * 8
        )));
    }
    let read_field = |k: usize| -> Vec<f64> {
        (0..n).map(|i| f64_at(HEADER_LEN + (k * n + i) * 8)).collect()
    };
    let state = FieldState {
        nx,
        ny,
        u_x: read_field(0),
        u_y: read_field(1),
        temp: read_field(2),
        pressure: vec![0.0; n],
        time,
    };
    Ok(Checkpoint { ra, pr, state })
}

pub fn write_checkpoint(path: impl AsRef<Path>, ra: f64, pr: f64, state: &FieldState) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&encode(ra, pr, state))?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_fixed() {
        let mut s = FieldState::zeros(8, 9);
        s.time = 1.5;
        s.u_x[1] = -3.25;
        let bytes = encode(1e4, 0.7, &s);
        assert_eq!(&bytes[..4], b"RBC1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 8);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 9);
        assert_eq!(f64::from_le_bytes(bytes[12..20].try_into().unwrap()), 1e4);
        assert_eq!(f64::from_le_bytes(bytes[28..36].try_into().unwrap()), 1.5);
        assert_eq!(f64::from_le_bytes(bytes[44..52].try_into().unwrap()), -3.25);
        assert_eq!(bytes.len(), 36 + 3 * 72 * 8);
    }

    #[test]
    fn rejects_truncated_or_foreign_files() {
        let s = FieldState::zeros(8, 8);
        let bytes = encode(1e4, 0.7, &s);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(matches!(decode(&wrong), Err(RbcError::Format(_))));
    }
}
