//! Little-endian binary codecs.
//!
//! Factorization layout: `"HSSF" | u32 version | u32 L | u32 k`, then for
//! `ℓ = L..1` the `U` blocks, `V` blocks and `D` blocks of that level, then
//! the root block. Matrix layout: `"DMAT" | u32 rows | u32 cols`. All
//! numbers are `f64` in row-major order.

use std::fs;
use std::path::Path;

use super::block::BlockDiagonal;
use super::telescoping::{LevelFactors, TelescopingFactorization};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const FORMAT_VERSION: u32 = 1;
const HSS_MAGIC: [u8; 4] = *b"HSSF";
const MAT_MAGIC: [u8; 4] = *b"DMAT";
/// Guards against absurd headers allocating before the truncation check.
const MAX_HEADER_LEVELS: u32 = 40;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_block(out: &mut Vec<u8>, m: &DenseMatrix) {
    for x in m.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidParameter(format!("{what} {v} does not fit in u32")))
}

pub fn encode_factorization(t: &TelescopingFactorization) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(&HSS_MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u32(&mut out, to_u32(t.num_levels(), "level count")?);
    put_u32(&mut out, to_u32(t.rank(), "rank")?);
    for lf in t.levels().iter().rev() {
        for part in [&lf.u, &lf.v, &lf.d] {
            part.blocks().iter().for_each(|b| put_block(&mut out, b));
        }
    }
    put_block(&mut out, t.root());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated { needed: self.pos.saturating_add(n), available: self.bytes.len() }),
        }
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        let found = [got[0], got[1], got[2], got[3]];
        if found != expected {
            return Err(Error::BadMagic { expected, found });
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DenseMatrix> {
        let len = rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).ok_or(Error::Truncated {
            needed: usize::MAX,
            available: self.bytes.len(),
        })?;
        let raw = self.take(len)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        DenseMatrix::new(rows, cols, data)
    }

    fn finish(self) -> Result<()> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            extra => Err(Error::TrailingBytes { extra }),
        }
    }
}

pub fn decode_factorization(bytes: &[u8]) -> Result<TelescopingFactorization> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(HSS_MAGIC)?;
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion { found: version, supported: FORMAT_VERSION });
    }
    let levels = r.u32()?;
    let k = r.u32()? as usize;
    if levels > MAX_HEADER_LEVELS || k == 0 {
        return Err(Error::InvalidParameter(format!("implausible header: L = {levels}, k = {k}")));
    }
    let mut decoded = Vec::with_capacity(levels as usize);
    for level in (1..=levels as usize).rev() {
        let mut read_part = |rows: usize, cols: usize| -> Result<BlockDiagonal> {
            let blocks = (0..1usize << level).map(|_| r.matrix(rows, cols)).collect::<Result<_>>()?;
            BlockDiagonal::new(blocks)
        };
        let u = read_part(2 * k, k)?;
        let v = read_part(2 * k, k)?;
        let d = read_part(2 * k, 2 * k)?;
        decoded.push(LevelFactors::new(u, v, d)?);
    }
    let root = r.matrix(2 * k, 2 * k)?;
    r.finish()?;
    decoded.reverse();
    TelescopingFactorization::new(k, decoded, root)
}

pub fn encode_matrix(m: &DenseMatrix) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(12 + 8 * m.as_slice().len());
    out.extend_from_slice(&MAT_MAGIC);
    put_u32(&mut out, to_u32(m.rows(), "row count")?);
    put_u32(&mut out, to_u32(m.cols(), "column count")?);
    put_block(&mut out, m);
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<DenseMatrix> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(MAT_MAGIC)?;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let m = r.matrix(rows, cols)?;
    r.finish()?;
    Ok(m)
}

pub fn write_factorization(path: impl AsRef<Path>, t: &TelescopingFactorization) -> Result<()> {
    Ok(fs::write(path, encode_factorization(t)?)?)
}

pub fn read_factorization(path: impl AsRef<Path>) -> Result<TelescopingFactorization> {
    decode_factorization(&fs::read(path)?)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    Ok(fs::write(path, encode_matrix(m)?)?)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    decode_matrix(&fs::read(path)?)
}
