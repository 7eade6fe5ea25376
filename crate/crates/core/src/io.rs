//! The QAMP binary container for maps (version 1) and binary masks (version 2).
//!
//! Layout, all integers little-endian:
//!
//! | bytes        | content                                   |
//! |--------------|-------------------------------------------|
//! | 0..4         | magic `QAMP`                              |
//! | 4..8         | version (`u32`): 1 = f64 map, 2 = u8 mask  |
//! | 8..12        | rows (`u32`)                              |
//! | 12..16       | cols (`u32`)                              |
//! | 16..         | rows*cols payload values, row-major        |
//! | then 1 byte  | unit label length `L`                     |
//! | then L bytes | UTF-8 unit label                          |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::map::ParametricMap;

pub const MAGIC: [u8; 4] = *b"QAMP";
pub const VERSION_MAP: u32 = 1;
pub const VERSION_MASK: u32 = 2;
pub const HEADER_LEN: usize = 16;

/// Raw contents of a version-2 mask file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskRecord {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<u8>,
    pub label: String,
}

fn header(version: u32, rows: usize, cols: usize) -> Result<Vec<u8>> {
    let r = u32::try_from(rows).map_err(|_| Error::SizeOverflow {
        rows: rows as u64,
        cols: cols as u64,
    })?;
    let c = u32::try_from(cols).map_err(|_| Error::SizeOverflow {
        rows: rows as u64,
        cols: cols as u64,
    })?;
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&r.to_le_bytes());
    out.extend_from_slice(&c.to_le_bytes());
    Ok(out)
}

fn push_label(out: &mut Vec<u8>, label: &str) -> Result<()> {
    let len =
        u8::try_from(label.len()).map_err(|_| Error::InvalidArgument("unit label longer than 255 bytes".into()))?;
    out.push(len);
    out.extend_from_slice(label.as_bytes());
    Ok(())
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

/// Parses the header, returning (version, rows, cols, payload length in bytes).
fn parse_header(bytes: &[u8], elem_size: usize) -> Result<(u32, usize, usize, usize)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    let found: [u8; 4] = bytes[0..4].try_into().expect("4-byte slice");
    if found != MAGIC {
        return Err(Error::BadMagic { expected: MAGIC, found });
    }
    let version = u32_at(bytes, 4);
    let rows = u32_at(bytes, 8) as u64;
    let cols = u32_at(bytes, 12) as u64;
    let payload = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(elem_size as u64))
        .filter(|&n| n <= isize::MAX as u64 - HEADER_LEN as u64 - 256)
        .ok_or(Error::SizeOverflow { rows, cols })?;
    Ok((version, rows as usize, cols as usize, payload as usize))
}

fn parse_label(bytes: &[u8], at: usize) -> Result<String> {
    if bytes.len() < at + 1 {
        return Err(Error::Truncated {
            needed: at + 1,
            available: bytes.len(),
        });
    }
    let len = bytes[at] as usize;
    let end = at + 1 + len;
    if bytes.len() < end {
        return Err(Error::Truncated {
            needed: end,
            available: bytes.len(),
        });
    }
    if bytes.len() > end {
        return Err(Error::InvalidPayload(format!("{} trailing bytes", bytes.len() - end)));
    }
    String::from_utf8(bytes[at + 1..end].to_vec()).map_err(|_| Error::InvalidPayload("unit label is not UTF-8".into()))
}

pub fn encode_map(map: &ParametricMap) -> Result<Vec<u8>> {
    let mut out = header(VERSION_MAP, map.rows(), map.cols())?;
    out.reserve(map.len() * 8 + 1 + map.unit().len());
    for v in map.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    push_label(&mut out, map.unit())?;
    Ok(out)
}

pub fn decode_map(bytes: &[u8]) -> Result<ParametricMap> {
    let (version, rows, cols, payload) = parse_header(bytes, 8)?;
    if version != VERSION_MAP {
        return Err(Error::UnsupportedVersion(version));
    }
    let end = HEADER_LEN + payload;
    if bytes.len() < end {
        return Err(Error::Truncated {
            needed: end,
            available: bytes.len(),
        });
    }
    let data = bytes[HEADER_LEN..end]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let label = parse_label(bytes, end)?;
    ParametricMap::new(rows, cols, data, label)
}

pub fn encode_mask(record: &MaskRecord) -> Result<Vec<u8>> {
    if record.cells.len() != record.rows * record.cols {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} mask with {} cells",
            record.rows,
            record.cols,
            record.cells.len()
        )));
    }
    if record.cells.iter().any(|&c| c > 1) {
        return Err(Error::InvalidPayload("mask cells must be 0 or 1".into()));
    }
    let mut out = header(VERSION_MASK, record.rows, record.cols)?;
    out.extend_from_slice(&record.cells);
    push_label(&mut out, &record.label)?;
    Ok(out)
}

pub fn decode_mask(bytes: &[u8]) -> Result<MaskRecord> {
    let (version, rows, cols, payload) = parse_header(bytes, 1)?;
    if version != VERSION_MASK {
        return Err(Error::UnsupportedVersion(version));
    }
    let end = HEADER_LEN + payload;
    if bytes.len() < end {
        return Err(Error::Truncated {
            needed: end,
            available: bytes.len(),
        });
    }
    let cells = bytes[HEADER_LEN..end].to_vec();
    if cells.iter().any(|&c| c > 1) {
        return Err(Error::InvalidPayload("mask cells must be 0 or 1".into()));
    }
    let label = parse_label(bytes, end)?;
    Ok(MaskRecord {
        rows,
        cols,
        cells,
        label,
    })
}

pub fn save_map(map: &ParametricMap, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_map(map)?)?;
    Ok(())
}

pub fn load_map(path: impl AsRef<Path>) -> Result<ParametricMap> {
    decode_map(&fs::read(path)?)
}

pub fn save_mask(record: &MaskRecord, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_mask(record)?)?;
    Ok(())
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<MaskRecord> {
    decode_mask(&fs::read(path)?)
}
