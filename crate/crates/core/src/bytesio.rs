//! Little-endian byte framing shared by the binary artifact formats.

use std::io::{Read, Write};

pub fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn put_f64_slice(out: &mut Vec<u8>, vs: &[f64]) {
    put_u64(out, vs.len() as u64);
    for &v in vs {
        put_f64(out, v);
    }
}

pub fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    put_u64(out, bytes.len() as u64);
    out.extend_from_slice(bytes);
}

/// Cursor over a byte slice; every read is bounds-checked.
pub struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

#[derive(Debug, thiserror::Error)]
#[error("malformed binary data: {0}")]
pub struct ByteError(pub String);

impl<'a> ByteReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], ByteError> {
        if self.pos + n > self.bytes.len() {
            return Err(ByteError("truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32, ByteError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, ByteError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64, ByteError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64_vec(&mut self) -> Result<Vec<f64>, ByteError> {
        let n = self.u64()? as usize;
        if n > self.bytes.len() / 8 {
            return Err(ByteError(format!("implausible vector length {n}")));
        }
        let mut vs = Vec::with_capacity(n);
        for _ in 0..n {
            vs.push(self.f64()?);
        }
        Ok(vs)
    }

    pub fn byte_vec(&mut self) -> Result<Vec<u8>, ByteError> {
        let n = self.u64()? as usize;
        Ok(self.take(n)?.to_vec())
    }

    pub fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }

    pub fn expect_end(&self) -> Result<(), ByteError> {
        if self.done() {
            Ok(())
        } else {
            Err(ByteError("trailing bytes".into()))
        }
    }
}

/// Reads exactly `n` bytes from a stream.
pub fn read_exact(reader: &mut impl Read, n: usize) -> std::io::Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    reader.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn write_all(writer: &mut impl Write, bytes: &[u8]) -> std::io::Result<()> {
    writer.write_all(bytes)
}
