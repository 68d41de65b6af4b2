//! Bit-exact binary persistence of fields.
//!
//! Layout, all little-endian: 8-byte magic `CHOQFLD1`, `u32` dim, `u32` n,
//! `f64` L, `f64` alpha, `f64` p, `f64` q, then `n^dim` `f64` values in
//! row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{Grid, Params};

pub const MAGIC: &[u8; 8] = b"CHOQFLD1";
pub const HEADER_LEN: usize = 8 + 4 + 4 + 4 * 8;

pub fn encode_snapshot(u: &Field, params: &Params) -> Vec<u8> {
    let g = u.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    for v in [g.length(), params.alpha, params.p, params.q] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in u.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<(Field, Params)> {
    let corrupt = |msg: String| Error::CorruptSnapshot(msg);
    if bytes.len() < HEADER_LEN {
        return Err(corrupt(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if &bytes[..8] != MAGIC {
        return Err(corrupt(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&bytes[..8])
        )));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (dim, n) = (u32_at(8), u32_at(12));
    let (length, alpha, p, q) = (f64_at(16), f64_at(24), f64_at(32), f64_at(40));
    let grid = Grid::new(dim, n, length).map_err(|e| corrupt(format!("header: {e}")))?;
    let params = Params::new(dim, alpha, p, q).map_err(|e| corrupt(format!("header: {e}")))?;
    let expected = HEADER_LEN + 8 * grid.len();
    if bytes.len() != expected {
        return Err(corrupt(format!(
            "payload holds {} bytes, header implies {}",
            bytes.len() - HEADER_LEN,
            expected - HEADER_LEN
        )));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let field = Field::from_vec(grid, data).map_err(|e| corrupt(e.to_string()))?;
    Ok((field, params))
}

pub fn write_snapshot(u: &Field, params: &Params, path: &Path) -> Result<()> {
    params.check_grid(u.grid())?;
    fs::write(path, encode_snapshot(u, params))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(Field, Params)> {
    decode_snapshot(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (Field, Params) {
        let g = Grid::new(3, 4, 6.5).unwrap();
        let f = Field::from_fn(g, |x| x[0].sin() * 1e-300 + x[1] * x[2] - 0.1);
        (f, Params::new(3, 1.25, 2.0, 2.5).unwrap())
    }

    #[test]
    fn file_length_matches_layout() {
        let (f, params) = sample();
        let bytes = encode_snapshot(&f, &params);
        assert_eq!(bytes.len(), 8 + 8 + 4 * 8 + 8 * 64);
        assert_eq!(&bytes[..8], b"CHOQFLD1");
    }

    #[test]
    fn bad_magic_and_truncation() {
        let (f, params) = sample();
        let mut bytes = encode_snapshot(&f, &params);
        let good = bytes.clone();
        bytes[..8].copy_from_slice(b"XXXXXXXX");
        assert!(matches!(
            decode_snapshot(&bytes),
            Err(Error::CorruptSnapshot(_))
        ));
        assert!(matches!(
            decode_snapshot(&good[..good.len() - 8]),
            Err(Error::CorruptSnapshot(_))
        ));
        assert!(matches!(
            decode_snapshot(&good[..20]),
            Err(Error::CorruptSnapshot(_))
        ));
    }

    #[test]
    fn header_larger_than_payload() {
        // header claims n = 32, payload carries 31³ values
        let g = Grid::new(3, 31, 1.0).unwrap();
        let params = Params::new(3, 2.0, 2.0, 2.0).unwrap();
        let mut bytes = encode_snapshot(&Field::zeros(g), &params);
        bytes[12..16].copy_from_slice(&32u32.to_le_bytes());
        assert!(matches!(
            decode_snapshot(&bytes),
            Err(Error::CorruptSnapshot(_))
        ));
    }
}
