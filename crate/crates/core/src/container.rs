//! Binary tensor container shared by model checkpoints and SOM map files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic (7 bytes)
//! u32 header length, UTF-8 header of `key=value` lines
//! repeated: u32 rank, rank x u32 dims, row-major f32 payload
//! u32 CRC-32 of every preceding byte
//! ```

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub const VAE_MAGIC: &[u8; 7] = b"RAVAE\0\x01";
pub const SOM_MAGIC: &[u8; 7] = b"RASOM\0\x01";

#[derive(Debug)]
pub struct ContainerWriter {
    buf: Vec<u8>,
}

impl ContainerWriter {
    pub fn new(magic: &[u8; 7], header: &[(String, String)]) -> Self {
        let text: String = header.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        let mut buf = Vec::with_capacity(1 << 16);
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&(text.len() as u32).to_le_bytes());
        buf.extend_from_slice(text.as_bytes());
        Self { buf }
    }

    pub fn tensor(&mut self, dims: &[usize], data: &[f32]) {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        self.buf.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for &d in dims {
            self.buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        self.buf.reserve(data.len() * 4);
        for v in data {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.buf.extend_from_slice(&crc.to_le_bytes());
        self.buf
    }
}

#[derive(Debug)]
pub struct ContainerReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    header: BTreeMap<String, String>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptFile(msg.into())
}

impl<'a> ContainerReader<'a> {
    /// Parses the magic and header. Call [`verify`](Self::verify) before trusting tensors.
    pub fn open(bytes: &'a [u8], magic: &[u8; 7]) -> Result<Self> {
        if bytes.len() < magic.len() + 4 || &bytes[..magic.len()] != magic {
            return Err(corrupt("bad magic"));
        }
        let mut r = Self {
            bytes,
            pos: magic.len(),
            header: BTreeMap::new(),
        };
        let len = r.u32()? as usize;
        let raw = r.take(len)?;
        let text = std::str::from_utf8(raw).map_err(|_| corrupt("header is not UTF-8"))?;
        for line in text.lines().filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| corrupt(format!("header line without '=': {line}")))?;
            r.header.insert(k.to_string(), v.to_string());
        }
        Ok(r)
    }

    pub fn header(&self) -> &BTreeMap<String, String> {
        &self.header
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.header
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| corrupt(format!("missing header key `{key}`")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| corrupt(format!("bad value for `{key}`: {raw}")))
    }

    /// Checks the trailing CRC against everything before it.
    pub fn verify(&self) -> Result<()> {
        if self.bytes.len() < 4 {
            return Err(corrupt("file too short"));
        }
        let split = self.bytes.len() - 4;
        let stored = u32::from_le_bytes(self.bytes[split..].try_into().unwrap());
        if crc32fast::hash(&self.bytes[..split]) != stored {
            return Err(corrupt("checksum mismatch"));
        }
        Ok(())
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or_else(|| corrupt("length overflow"))?;
        if end > self.bytes.len() {
            return Err(corrupt("unexpected end of file"));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn tensor(&mut self) -> Result<(Vec<usize>, Vec<f32>)> {
        let rank = self.u32()? as usize;
        if rank > 8 {
            return Err(corrupt(format!("implausible tensor rank {rank}")));
        }
        let dims = (0..rank)
            .map(|_| self.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| corrupt("tensor size overflow"))?;
        let raw = self.take(count.checked_mul(4).ok_or_else(|| corrupt("tensor size overflow"))?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((dims, data))
    }

    /// Reads a tensor and checks its shape.
    pub fn tensor_shaped(&mut self, expected: &[usize]) -> Result<Vec<f32>> {
        let (dims, data) = self.tensor()?;
        if dims != expected {
            return Err(corrupt(format!("tensor shape {dims:?}, expected {expected:?}")));
        }
        Ok(data)
    }

    /// Confirms only the checksum remains.
    pub fn finish(self) -> Result<()> {
        if self.pos + 4 != self.bytes.len() {
            return Err(corrupt("trailing bytes after last tensor"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<u8> {
        let mut w = ContainerWriter::new(VAE_MAGIC, &[("a".into(), "1".into()), ("b".into(), "x=y".into())]);
        w.tensor(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, f32::MIN_POSITIVE]);
        w.tensor(&[1], &[-0.0]);
        w.finish()
    }

    #[test]
    fn roundtrip() {
        let bytes = sample();
        let mut r = ContainerReader::open(&bytes, VAE_MAGIC).unwrap();
        r.verify().unwrap();
        assert_eq!(r.get("a").unwrap(), "1");
        assert_eq!(r.get("b").unwrap(), "x=y");
        let (dims, data) = r.tensor().unwrap();
        assert_eq!(dims, vec![2, 3]);
        assert_eq!(data[5], f32::MIN_POSITIVE);
        let neg_zero = r.tensor_shaped(&[1]).unwrap();
        assert_eq!(neg_zero[0].to_bits(), (-0.0f32).to_bits());
        r.finish().unwrap();
    }

    #[test]
    fn wrong_magic() {
        let bytes = sample();
        assert!(matches!(ContainerReader::open(&bytes, SOM_MAGIC), Err(Error::CorruptFile(_))));
    }

    #[test]
    fn flipped_bit_fails_checksum() {
        let mut bytes = sample();
        let n = bytes.len();
        bytes[n - 10] ^= 1;
        let r = ContainerReader::open(&bytes, VAE_MAGIC).unwrap();
        assert!(matches!(r.verify(), Err(Error::CorruptFile(_))));
    }
}
