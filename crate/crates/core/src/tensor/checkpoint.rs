//! Binary parameter checkpoints.
//!
//! Layout: the magic bytes `SVAE1`, a little-endian `u64` header length, a
//! JSON header `{"meta": {..}, "tensors": [{"name", "shape", "offset"}]}`,
//! then every tensor's data as little-endian `f64` in header order. `offset`
//! is the byte offset of a tensor from the start of the payload.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{ParamSet, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"SVAE1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: Map<String, Value>,
    pub params: ParamSet,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: Map<String, Value>,
    tensors: Vec<Entry>,
}

pub fn write_checkpoint<W: Write>(mut w: W, ckpt: &Checkpoint) -> Result<()> {
    let mut offset = 0;
    let tensors = ckpt
        .params
        .iter()
        .map(|(name, t)| {
            let e = Entry {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                offset: offset * 8,
            };
            offset += t.numel();
            e
        })
        .collect();
    let header = serde_json::to_vec(&Header {
        meta: ckpt.meta.clone(),
        tensors,
    })?;
    let mut buf = Vec::with_capacity(MAGIC.len() + 8 + header.len() + offset * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    for (_, t) in ckpt.params.iter() {
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)
        .map_err(|e| Error::Checkpoint(format!("write failed: {e}")))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::Checkpoint(format!("read failed: {e}")))?;
    if bytes.len() < MAGIC.len() + 8 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Checkpoint("missing SVAE1 magic".into()));
    }
    let mut len = [0u8; 8];
    len.copy_from_slice(&bytes[MAGIC.len()..MAGIC.len() + 8]);
    let header_len = usize::try_from(u64::from_le_bytes(len))
        .map_err(|_| Error::Checkpoint("header length overflows".into()))?;
    let start = MAGIC.len() + 8;
    let payload_start = start
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&bytes[start..payload_start])
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    let payload = &bytes[payload_start..];
    if payload.len() % 8 != 0 {
        return Err(Error::Checkpoint("payload is not a whole number of f64".into()));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();

    let mut params = ParamSet::new();
    for e in header.tensors {
        let n: usize = e.shape.iter().product();
        if e.offset % 8 != 0 {
            return Err(Error::Checkpoint(format!("tensor `{}` is not 8-byte aligned", e.name)));
        }
        let start = e.offset / 8;
        let end = start
            .checked_add(n)
            .filter(|&end| end <= values.len())
            .ok_or_else(|| Error::Checkpoint(format!("tensor `{}` runs past the payload", e.name)))?;
        let t = Tensor::new(e.shape, values[start..end].to_vec())?;
        params
            .insert(e.name, t)
            .map_err(|err| Error::Checkpoint(err.to_string()))?;
    }
    Ok(Checkpoint {
        meta: header.meta,
        params,
    })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(std::io::BufWriter::new(file), ckpt)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut params = ParamSet::new();
        params
            .insert("a", Tensor::matrix(2, 2, vec![1.0, -0.0, f64::MIN_POSITIVE, 1e300]).unwrap())
            .unwrap();
        params.insert("b", Tensor::scalar(0.1 + 0.2)).unwrap();
        params.insert("c", Tensor::zeros(&[0, 3])).unwrap();
        let mut meta = Map::new();
        meta.insert("kind".into(), Value::from("test"));
        meta.insert("d_model".into(), Value::from(8));
        Checkpoint { meta, params }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ckpt = sample();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &ckpt).unwrap();
        assert_eq!(&buf[..5], MAGIC);
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back.meta, ckpt.meta);
        for ((n1, t1), (n2, t2)) in back.params.iter().zip(ckpt.params.iter()) {
            assert_eq!(n1, n2);
            assert_eq!(t1.shape(), t2.shape());
            let bits1: Vec<u64> = t1.data().iter().map(|v| v.to_bits()).collect();
            let bits2: Vec<u64> = t2.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits1, bits2);
        }
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(matches!(read_checkpoint(&b"NOPE1xxxxxxxx"[..]), Err(Error::Checkpoint(_))));
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample()).unwrap();
        buf.truncate(buf.len() - 8);
        assert!(matches!(read_checkpoint(buf.as_slice()), Err(Error::Checkpoint(_))));
    }
}
