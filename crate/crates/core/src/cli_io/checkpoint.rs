//! Binary field checkpoints.
//!
//! Layout (little-endian): `b"SNLS"`, format version `u32`, `n_points` `u64`,
//! `length` `f64`, `time` `f64`, then `n_points` pairs of `f64` (re, im).

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Result, SnlsError};
use crate::spectral::{ComplexField, Grid};

pub const MAGIC: [u8; 4] = *b"SNLS";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub time: f64,
    pub field: ComplexField,
}

pub fn encode_checkpoint(field: &ComplexField, time: f64) -> Vec<u8> {
    let grid = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * grid.n_points());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.n_points() as u64).to_le_bytes());
    out.extend_from_slice(&grid.length().to_le_bytes());
    out.extend_from_slice(&time.to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

fn read_u64(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte slice"))
}

fn read_f64(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte slice"))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < HEADER_LEN {
        return Err(SnlsError::Format(format!(
            "checkpoint truncated: {} bytes, header needs {HEADER_LEN}",
            bytes.len()
        )));
    }
    if bytes[..4] != MAGIC {
        return Err(SnlsError::Format("bad checkpoint magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4-byte slice"));
    if version != FORMAT_VERSION {
        return Err(SnlsError::Format(format!(
            "unsupported checkpoint version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let n = read_u64(bytes, 8);
    let length = read_f64(bytes, 16);
    let time = read_f64(bytes, 24);
    let expected = usize::try_from(n)
        .ok()
        .and_then(|n| n.checked_mul(16))
        .and_then(|p| p.checked_add(HEADER_LEN))
        .ok_or_else(|| SnlsError::Format(format!("absurd point count {n}")))?;
    if bytes.len() != expected {
        return Err(SnlsError::Format(format!(
            "payload length {} does not match n_points = {n}",
            bytes.len() - HEADER_LEN
        )));
    }
    let grid = Grid::new(n as usize, length).map_err(|e| SnlsError::Format(format!("bad grid header: {e}")))?;
    let values = (0..n as usize)
        .map(|j| {
            let at = HEADER_LEN + 16 * j;
            Complex64::new(read_f64(bytes, at), read_f64(bytes, at + 8))
        })
        .collect();
    let field = ComplexField::new(&grid, values).map_err(|e| SnlsError::Format(e.to_string()))?;
    Ok(Checkpoint { time, field })
}

pub fn write_checkpoint(path: &Path, field: &ComplexField, time: f64) -> Result<()> {
    fs::write(path, encode_checkpoint(field, time))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = Grid::new(16, 2.0).unwrap();
        let f = ComplexField::from_fn(&g, |x| Complex64::new(x, -x)).unwrap();
        let b = encode_checkpoint(&f, 0.5);
        assert_eq!(b.len(), HEADER_LEN + 16 * 16);
        assert_eq!(&b[..4], b"SNLS");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(read_u64(&b, 8), 16);
        assert_eq!(read_f64(&b, 16), 2.0);
        assert_eq!(read_f64(&b, 24), 0.5);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let g = Grid::new(16, 2.0).unwrap();
        let b = encode_checkpoint(&ComplexField::zeros(&g), 0.0);
        assert!(decode_checkpoint(&b[..10]).is_err());
        assert!(decode_checkpoint(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(decode_checkpoint(&bad), Err(SnlsError::Format(_))));
        let mut bad = b.clone();
        bad[4] = 9;
        assert!(decode_checkpoint(&bad).is_err());
        let mut bad = b;
        bad[HEADER_LEN..HEADER_LEN + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_checkpoint(&bad).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_identical(
            vals in proptest::collection::vec((-1e300f64..1e300, -1e-300f64..1e-300), 32),
            t in -1e6f64..1e6,
        ) {
            let g = Grid::new(32, 7.25).unwrap();
            let f = ComplexField::new(&g, vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap();
            let bytes = encode_checkpoint(&f, t);
            let back = decode_checkpoint(&bytes).unwrap();
            prop_assert_eq!(back.time.to_bits(), t.to_bits());
            prop_assert_eq!(encode_checkpoint(&back.field, back.time), bytes);
        }
    }
}
