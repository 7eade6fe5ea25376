//! QAMU model checkpoints.
//!
//! Little-endian layout: magic `QAMU`, then `u32` fields version (1), K, B,
//! C, M (rows of `A`) and flags (bit 0 trainable `A`, bit 1 deblocker), then
//! every parameter as `f64` in [`UnfoldedModel::params`] order.

use std::fs;
use std::path::Path;

use super::model::{DeblockParams, LearnedDenoiser, UnfoldedModel};
use crate::error::{Error, Result};
use crate::sampling::MeasurementMatrix;

pub const MAGIC: [u8; 4] = *b"QAMU";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 28;
const FLAG_TRAINABLE_A: u32 = 1;
const FLAG_DEBLOCK: u32 = 2;

pub fn encode_checkpoint(model: &UnfoldedModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    let flags = if model.trainable_a() { FLAG_TRAINABLE_A } else { 0 }
        | if model.deblockers().is_some() { FLAG_DEBLOCK } else { 0 };
    for v in [
        VERSION,
        model.iterations() as u32,
        model.block_size() as u32,
        model.channels() as u32,
        model.matrix().m() as u32,
        flags,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<UnfoldedModel> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    let found: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if found != MAGIC {
        return Err(Error::BadMagic { expected: MAGIC, found });
    }
    let field = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize;
    let version = field(0) as u32;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let (k, b, c, m, flags) = (field(1), field(2), field(3), field(4), field(5) as u32);
    let n = b.checked_mul(b).ok_or(Error::SizeOverflow {
        rows: b as u64,
        cols: b as u64,
    })?;
    let deblock = flags & FLAG_DEBLOCK != 0;
    let count = m
        .checked_mul(n)
        .and_then(|an| {
            k.checked_mul(18)
                .and_then(|t| t.checked_mul(c))
                .and_then(|t| an.checked_add(t))
        })
        .and_then(|t| t.checked_add(if deblock { k * 10 } else { 0 }))
        .ok_or(Error::SizeOverflow {
            rows: m as u64,
            cols: n as u64,
        })?;
    let needed = count
        .checked_mul(8)
        .and_then(|p| p.checked_add(HEADER_LEN))
        .ok_or(Error::SizeOverflow {
            rows: m as u64,
            cols: n as u64,
        })?;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            needed,
            available: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::InvalidPayload(format!(
            "{} trailing bytes",
            bytes.len() - needed
        )));
    }
    if k > 0 && c == 0 {
        return Err(Error::InvalidPayload("zero channels".into()));
    }
    let params: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|ch| f64::from_le_bytes(ch.try_into().expect("8 bytes")))
        .collect();
    let a = MeasurementMatrix::from_entries(m, n, vec![0.0; m * n], 0)?;
    let theta = vec![LearnedDenoiser::zeros(c.max(1)); k];
    let deblocks = deblock.then(|| {
        vec![
            DeblockParams {
                kernel: [0.0; 9],
                gain: 0.0
            };
            k
        ]
    });
    let mut model = UnfoldedModel::new(b, a, flags & FLAG_TRAINABLE_A != 0, theta, deblocks)?;
    model.set_all_params(&params);
    if params.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidPayload("non-finite parameter".into()));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &UnfoldedModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<UnfoldedModel> {
    decode_checkpoint(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unfolded::ModelConfig;

    #[test]
    fn round_trip() {
        for (trainable_a, deblock) in [(false, false), (true, true)] {
            let cfg = ModelConfig {
                block_size: 4,
                iterations: 2,
                channels: 3,
                trainable_a,
                deblock,
                seed: 7,
                ..Default::default()
            };
            let m = UnfoldedModel::init(&cfg).unwrap();
            let bytes = encode_checkpoint(&m);
            assert_eq!(bytes.len(), 28 + 8 * m.params().len());
            let back = decode_checkpoint(&bytes).unwrap();
            assert_eq!(back.params(), m.params());
            assert_eq!(encode_checkpoint(&back), bytes);
        }
    }

    #[test]
    fn rejects_corruption() {
        let m = UnfoldedModel::init(&ModelConfig {
            block_size: 4,
            iterations: 1,
            channels: 1,
            ..Default::default()
        })
        .unwrap();
        let mut bytes = encode_checkpoint(&m);
        assert!(matches!(
            decode_checkpoint(&bytes[..bytes.len() - 3]),
            Err(Error::Truncated { .. })
        ));
        bytes[0] = b'Z';
        assert!(matches!(decode_checkpoint(&bytes), Err(Error::BadMagic { .. })));
    }
}
