//! `DTN1` tensor files: magic `DTN1`, `u32` rank, `u64` extents, then the
//! row-major little-endian `f64` payload.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numkit::Tensor;

pub const MAGIC: &[u8; 4] = b"DTN1";

pub fn write_dtn<W: Write>(w: &mut W, t: &Tensor) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(t.rank() as u32).to_le_bytes())?;
    for &d in t.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for &v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => corrupt(format!("truncated while reading {what}")),
        _ => Error::Io(e),
    })
}

pub fn read_dtn<R: Read>(r: &mut R) -> Result<Tensor> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(corrupt(format!("bad magic {:?}", magic)));
    }
    let mut b4 = [0u8; 4];
    read_exact(r, &mut b4, "rank")?;
    let rank = u32::from_le_bytes(b4) as usize;
    if rank > 16 {
        return Err(corrupt(format!("implausible rank {rank}")));
    }
    let mut dims = Vec::with_capacity(rank);
    let mut b8 = [0u8; 8];
    for _ in 0..rank {
        read_exact(r, &mut b8, "extent")?;
        dims.push(u64::from_le_bytes(b8) as usize);
    }
    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| corrupt("extent product overflows"))?;
    let mut data = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        read_exact(r, &mut b8, "payload")?;
        data.push(f64::from_le_bytes(b8));
    }
    Tensor::new(dims, data)
}

pub fn save_dtn(path: &Path, t: &Tensor) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + t.len() * 8);
    write_dtn(&mut buf, t)?;
    crate::io::write_atomic(path, &buf)
}

pub fn load_dtn(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path)?;
    let mut cursor = bytes.as_slice();
    let t = read_dtn(&mut cursor)?;
    if !cursor.is_empty() {
        return Err(corrupt(format!("{} trailing bytes", cursor.len())));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_bit_exact() {
        let t = Tensor::new(vec![1, 2], vec![1.0, -0.5]).unwrap();
        let mut buf = Vec::new();
        write_dtn(&mut buf, &t).unwrap();
        let mut expected = b"DTN1".to_vec();
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&1u64.to_le_bytes());
        expected.extend_from_slice(&2u64.to_le_bytes());
        expected.extend_from_slice(&1.0f64.to_le_bytes());
        expected.extend_from_slice(&(-0.5f64).to_le_bytes());
        assert_eq!(buf, expected);
    }

    #[test]
    fn truncated_is_corrupt() {
        let t = Tensor::zeros(&[3, 3]);
        let mut buf = Vec::new();
        write_dtn(&mut buf, &t).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_dtn(&mut buf.as_slice()), Err(Error::CorruptCheckpoint(_))));
    }

    proptest! {
        #[test]
        fn roundtrip(dims in prop::collection::vec(1usize..5, 0..4), seed in any::<u64>()) {
            let n: usize = dims.iter().product();
            let data: Vec<f64> = (0..n).map(|i| f64::from_bits(seed.wrapping_mul(i as u64 + 1) >> 2)).collect();
            let t = Tensor::new(dims, data).unwrap();
            let mut buf = Vec::new();
            write_dtn(&mut buf, &t).unwrap();
            let back = read_dtn(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back.dims(), t.dims());
            let same = back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
        }
    }
}
