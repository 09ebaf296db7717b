use std::fs;
use std::path::Path;

use super::EnergyMatrix;
use crate::error::{Error, Result};

pub const QACF_MAGIC: &[u8; 5] = b"QACF1";

/// Serialises to the binary layout: magic, `F` and `T` as `u32` LE, then
/// `F · T` band-major `f64` LE values.
pub fn save_qacf(m: &EnergyMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 8 * m.values().len());
    out.extend_from_slice(QACF_MAGIC);
    out.extend_from_slice(&(m.bands() as u32).to_le_bytes());
    out.extend_from_slice(&(m.frames() as u32).to_le_bytes());
    for v in m.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn load_qacf(bytes: &[u8]) -> Result<EnergyMatrix> {
    if bytes.len() < QACF_MAGIC.len() || &bytes[..5] != QACF_MAGIC {
        return Err(Error::BadMagic { expected: "QACF1" });
    }
    if bytes.len() < 13 {
        return Err(Error::TruncatedFile(format!("{} byte header", bytes.len())));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (bands, frames) = (u32_at(5), u32_at(9));
    let body = &bytes[13..];
    let expected = bands
        .checked_mul(frames)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::DimensionMismatch(format!("{bands} x {frames} overflows")))?;
    if body.len() < expected {
        return Err(Error::TruncatedFile(format!(
            "{} of {expected} payload bytes for {bands} x {frames}",
            body.len()
        )));
    }
    if body.len() > expected {
        return Err(Error::DimensionMismatch(format!(
            "{} trailing bytes after {bands} x {frames} payload",
            body.len() - expected
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    EnergyMatrix::new(bands, frames, values)
}

/// CSV text with one frame per line and one band per column.
pub fn save_csv(m: &EnergyMatrix) -> String {
    let mut out = String::new();
    for t in 0..m.frames() {
        let row: Vec<String> = (0..m.bands()).map(|b| format!("{:?}", m.get(b, t))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn load_csv(text: &str) -> Result<EnergyMatrix> {
    let mut rows = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| {
                    Error::DimensionMismatch(format!("line {}: cannot parse {cell:?}", line_no + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    EnergyMatrix::from_frames(&rows)
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads a `.csv` file as CSV and anything else as QACF1.
pub fn load_features(path: &Path) -> Result<EnergyMatrix> {
    if is_csv(path) {
        load_csv(&fs::read_to_string(path)?)
    } else {
        load_qacf(&fs::read(path)?)
    }
}

pub fn save_features(m: &EnergyMatrix, path: &Path) -> Result<()> {
    if is_csv(path) {
        fs::write(path, save_csv(m))?;
    } else {
        fs::write(path, save_qacf(m))?;
    }
    Ok(())
}
