//! `ARR1` array container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! offset 0   b"ARR1"
//! offset 4   dtype code (u8): 0 = f32, 1 = u8
//! offset 5   rank (u8), 1..=5
//! offset 6   rank x u64 extents
//! ...        row-major payload
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ARR1";
pub const MAX_RANK: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32 = 0,
    U8 = 1,
}

impl DType {
    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(DType::F32),
            1 => Ok(DType::U8),
            c => Err(Error::Format(format!("unknown dtype code {c}"))),
        }
    }

    fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Array {
    F32 { shape: Vec<usize>, data: Vec<f32> },
    U8 { shape: Vec<usize>, data: Vec<u8> },
}

impl Array {
    pub fn f32(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        check_shape(&shape, data.len())?;
        Ok(Array::F32 { shape, data })
    }

    pub fn u8(shape: Vec<usize>, data: Vec<u8>) -> Result<Self> {
        check_shape(&shape, data.len())?;
        Ok(Array::U8 { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            Array::F32 { shape, .. } | Array::U8 { shape, .. } => shape,
        }
    }

    pub fn dtype(&self) -> DType {
        match self {
            Array::F32 { .. } => DType::F32,
            Array::U8 { .. } => DType::U8,
        }
    }

    /// Unwrap as f32, checking the rank when one is given.
    pub fn into_f32(self, rank: Option<usize>) -> Result<(Vec<usize>, Vec<f32>)> {
        match self {
            Array::F32 { shape, data } => {
                check_rank(&shape, rank)?;
                Ok((shape, data))
            }
            Array::U8 { .. } => Err(Error::Type("expected f32 array, found u8".into())),
        }
    }

    pub fn into_u8(self, rank: Option<usize>) -> Result<(Vec<usize>, Vec<u8>)> {
        match self {
            Array::U8 { shape, data } => {
                check_rank(&shape, rank)?;
                Ok((shape, data))
            }
            Array::F32 { .. } => Err(Error::Type("expected u8 array, found f32".into())),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let shape = self.shape();
        let n: usize = shape.iter().product();
        let mut out = Vec::with_capacity(6 + 8 * shape.len() + n * self.dtype().width());
        out.extend_from_slice(MAGIC);
        out.push(self.dtype() as u8);
        out.push(shape.len() as u8);
        for &d in shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match self {
            Array::F32 { data, .. } => {
                for v in data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            Array::U8 { data, .. } => out.extend_from_slice(data),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 6 || &bytes[..4] != MAGIC {
            return Err(Error::Format("missing ARR1 magic".into()));
        }
        let dtype = DType::from_code(bytes[4])?;
        let rank = bytes[5] as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::Format(format!("rank {rank} outside 1..={MAX_RANK}")));
        }
        let header = 6 + 8 * rank;
        if bytes.len() < header {
            return Err(Error::Format("truncated shape header".into()));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut n: usize = 1;
        for i in 0..rank {
            let off = 6 + 8 * i;
            let d = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            let d = usize::try_from(d).map_err(|_| Error::Format("extent overflows usize".into()))?;
            n = n.checked_mul(d).ok_or_else(|| Error::Format("element count overflows".into()))?;
            shape.push(d);
        }
        let payload = &bytes[header..];
        let expected = n.checked_mul(dtype.width()).ok_or_else(|| Error::Format("payload size overflows".into()))?;
        if payload.len() != expected {
            return Err(Error::Format(format!("payload has {} bytes, header implies {expected}", payload.len())));
        }
        Ok(match dtype {
            DType::F32 => {
                Array::F32 { shape, data: payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect() }
            }
            DType::U8 => Array::U8 { shape, data: payload.to_vec() },
        })
    }
}

fn check_shape(shape: &[usize], len: usize) -> Result<()> {
    if shape.is_empty() || shape.len() > MAX_RANK {
        return Err(Error::Format(format!("rank {} outside 1..={MAX_RANK}", shape.len())));
    }
    let n: usize = shape.iter().product();
    if n != len {
        return Err(Error::Type(format!("shape {shape:?} holds {n} elements, data has {len}")));
    }
    Ok(())
}

fn check_rank(shape: &[usize], rank: Option<usize>) -> Result<()> {
    match rank {
        Some(r) if r != shape.len() => Err(Error::Type(format!("expected rank {r}, found shape {shape:?}"))),
        _ => Ok(()),
    }
}

pub fn write_array(path: impl AsRef<Path>, array: &Array) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::load(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&array.to_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn read_array(path: impl AsRef<Path>) -> Result<Array> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::load(path, e))?;
    Array::from_bytes(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Typed convenience: read an f32 array of a given shape.
pub fn read_f32_shaped(path: impl AsRef<Path>, shape: &[usize]) -> Result<Vec<f32>> {
    let path = path.as_ref();
    let (s, data) = read_array(path)?.into_f32(Some(shape.len()))?;
    if s != shape {
        return Err(Error::Type(format!("{}: expected shape {shape:?}, found {s:?}", path.display())));
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trip_2x3() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.arr");
        let a = Array::f32(vec![2, 3], vec![1.0, -2.5, 3.25, f32::MIN_POSITIVE, 0.0, -0.0]).unwrap();
        write_array(&p, &a).unwrap();
        let b = read_array(&p).unwrap();
        assert_eq!(b.shape(), &[2, 3]);
        let (_, d) = b.into_f32(Some(2)).unwrap();
        let (_, e) = a.into_f32(None).unwrap();
        assert!(d.iter().zip(&e).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn rank5_frame_stack_round_trip() {
        let shape = vec![2, 3, 4, 5, 3];
        let data: Vec<u8> = (0..360).map(|i| (i * 7 % 256) as u8).collect();
        let a = Array::u8(shape, data).unwrap();
        assert_eq!(Array::from_bytes(&a.to_bytes()).unwrap(), a);
    }

    #[test]
    fn header_bytes_are_exact() {
        let a = Array::u8(vec![2], vec![9, 8]).unwrap();
        let b = a.to_bytes();
        assert_eq!(&b[..6], b"ARR1\x01\x01");
        assert_eq!(&b[6..14], &2u64.to_le_bytes());
        assert_eq!(&b[14..], &[9, 8]);
    }

    #[test]
    fn truncated_file_is_format_error() {
        let a = Array::f32(vec![4], vec![1.0; 4]).unwrap();
        let bytes = a.to_bytes();
        for cut in [0, 3, 5, 10, bytes.len() - 1] {
            assert!(matches!(Array::from_bytes(&bytes[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Array::from_bytes(&bad), Err(Error::Format(_))));
    }

    #[test]
    fn typed_read_mismatch_is_type_error() {
        let a = Array::u8(vec![2, 2], vec![0; 4]).unwrap();
        assert!(matches!(a.clone().into_f32(None), Err(Error::Type(_))));
        assert!(matches!(a.into_u8(Some(3)), Err(Error::Type(_))));
        assert!(matches!(Array::f32(vec![2, 2], vec![0.0; 3]), Err(Error::Type(_))));
        assert!(Array::f32(vec![1; 6], vec![0.0]).is_err());
    }

    fn arb_array() -> impl Strategy<Value = Array> {
        (proptest::collection::vec(1usize..5, 1..=5), any::<bool>()).prop_flat_map(|(shape, is_f32)| {
            let n: usize = shape.iter().product();
            if is_f32 {
                proptest::collection::vec(any::<f32>(), n).prop_map(move |d| Array::f32(shape.clone(), d).unwrap()).boxed()
            } else {
                proptest::collection::vec(any::<u8>(), n).prop_map(move |d| Array::u8(shape.clone(), d).unwrap()).boxed()
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn round_trip_is_bit_exact(a in arb_array()) {
            let b = Array::from_bytes(&a.to_bytes()).unwrap();
            // compare bits so NaN payloads count too
            prop_assert_eq!(a.to_bytes(), b.to_bytes());
            prop_assert_eq!(a.shape(), b.shape());
        }
    }
}
