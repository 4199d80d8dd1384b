//! Binary tensor file format.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic  b"GCTN"      4 bytes
//! version u8          currently 1
//! order   u64         number of modes d
//! extents u64 × d
//! data    f64 × ∏n_l  colexicographic (first-index-fastest) order
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{DenseTensor, TensorError};

pub const MAGIC: [u8; 4] = *b"GCTN";
pub const VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum TensorIoError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes; not a tensor file")]
    BadMagic,
    #[error("unsupported tensor file version {0}")]
    UnsupportedVersion(u8),
    #[error("corrupt tensor file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub fn write_tensor<W: Write>(mut w: W, t: &DenseTensor) -> Result<(), TensorIoError> {
    w.write_all(&MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&(t.order() as u64).to_le_bytes())?;
    for &n in t.shape() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for &v in t.vectorize().iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<DenseTensor, TensorIoError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(TensorIoError::BadMagic);
    }
    let mut version = [0u8; 1];
    r.read_exact(&mut version)?;
    if version[0] != VERSION {
        return Err(TensorIoError::UnsupportedVersion(version[0]));
    }
    let order = read_u64(&mut r)? as usize;
    if order == 0 || order > 64 {
        return Err(TensorIoError::Corrupt(format!("implausible order {order}")));
    }
    let mut shape = Vec::with_capacity(order);
    for _ in 0..order {
        shape.push(read_u64(&mut r)? as usize);
    }
    let len = shape.iter().try_fold(1usize, |acc, &n| {
        acc.checked_mul(n)
            .filter(|&l| l <= (1 << 34))
            .ok_or_else(|| TensorIoError::Corrupt(format!("implausible extents {shape:?}")))
    })?;
    let mut data = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    Ok(DenseTensor::from_colex(shape, data)?)
}

pub fn save_tensor(path: &Path, t: &DenseTensor) -> Result<(), TensorIoError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn load_tensor(path: &Path) -> Result<DenseTensor, TensorIoError> {
    read_tensor(BufReader::new(File::open(path)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, TensorIoError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn round_trip_preserves_bits() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let data: Vec<f64> = (0..24).map(|_| rng.gen_range(-1e6..1e6)).collect();
        let t = DenseTensor::new(vec![2, 3, 4], data).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        let back = read_tensor(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_foreign_files() {
        assert!(matches!(read_tensor(&b"GC"[..]), Err(TensorIoError::Io(_))));
        assert!(matches!(
            read_tensor(&b"XXXX\x01\x00\x00\x00\x00\x00\x00\x00\x00"[..]),
            Err(TensorIoError::BadMagic)
        ));
        let mut buf = Vec::new();
        write_tensor(&mut buf, &DenseTensor::zeros(vec![2]).unwrap()).unwrap();
        buf[4] = 9;
        assert!(matches!(
            read_tensor(buf.as_slice()),
            Err(TensorIoError::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn data_is_stored_first_index_fastest() {
        let t = DenseTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        let payload = &buf[4 + 1 + 8 + 16..];
        let first = f64::from_le_bytes(payload[0..8].try_into().unwrap());
        let second = f64::from_le_bytes(payload[8..16].try_into().unwrap());
        assert_eq!((first, second), (1.0, 3.0));
    }
}
