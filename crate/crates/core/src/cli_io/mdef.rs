//! `MDEF1` deformation files.
//!
//! Layout: the five bytes `MDEF1`, the spline level and the two control grid
//! dimensions as little-endian `u32`, then the ghost-inclusive control
//! displacements row by row as little-endian `f64` pairs `(dx, dy)`.

use std::path::Path;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::grid::Deformation;

const MAGIC: &[u8; 5] = b"MDEF1";
const HEADER: usize = 5 + 3 * 4;

pub fn encode_deformation(phi: &Deformation) -> Vec<u8> {
    let side = phi.control_side() as u32;
    let mut out = Vec::with_capacity(HEADER + 16 * phi.controls().len());
    out.extend_from_slice(MAGIC);
    for v in [phi.level(), side, side] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for c in phi.controls() {
        out.extend_from_slice(&c[0].to_le_bytes());
        out.extend_from_slice(&c[1].to_le_bytes());
    }
    out
}

pub fn decode_deformation(bytes: &[u8]) -> Result<Deformation> {
    if bytes.len() < HEADER || &bytes[..5] != MAGIC {
        return Err(Error::Format("not an MDEF1 deformation file".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[5 + 4 * i..9 + 4 * i].try_into().unwrap());
    let (level, w, h) = (word(0), word(1), word(2));
    if !(1..=24).contains(&level) {
        return Err(Error::Format(format!("unsupported spline level {level}")));
    }
    let side = (1u32 << level) + 3;
    if w != side || h != side {
        return Err(Error::Format(format!(
            "control grid {w}x{h} does not match level {level} ({side}x{side} expected)"
        )));
    }
    let count = (side * side) as usize;
    if bytes.len() != HEADER + 16 * count {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {}",
            bytes.len() - HEADER,
            16 * count
        )));
    }
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let ctrl = (0..count).map(|k| [f(HEADER + 16 * k), f(HEADER + 16 * k + 8)]).collect();
    Deformation::from_controls(level, ctrl)
}

pub fn save_deformation(phi: &Deformation, path: &Path) -> Result<()> {
    write_atomic(path, &encode_deformation(phi))
}

pub fn load_deformation(path: &Path) -> Result<Deformation> {
    decode_deformation(&std::fs::read(path)?)
}
