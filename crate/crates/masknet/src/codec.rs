//! Little-endian byte writer and bounds-checked reader shared by the
//! binary containers.

use crate::error::{AppError, AppResult};

#[derive(Default)]
pub(crate) struct Writer(Vec<u8>);

impl Writer {
    pub fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_bits().to_le_bytes());
    }

    /// Length prefix, then the values.
    pub fn f64_slice(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.f64(x);
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.0
    }
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self { bytes, pos: 0, what }
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub fn bytes(&mut self, n: usize) -> AppResult<&'a [u8]> {
        if self.remaining() < n {
            return Err(AppError::Format(format!(
                "truncated {} file: needed {} more bytes at offset {}, found {}",
                self.what,
                n,
                self.pos,
                self.remaining()
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> AppResult<u8> {
        Ok(self.bytes(1)?[0])
    }

    pub fn u32(&mut self) -> AppResult<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> AppResult<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().expect("8 bytes")))
    }

    pub fn usize(&mut self) -> AppResult<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| AppError::Format(format!("{} field {v} too large", self.what)))
    }

    pub fn f64(&mut self) -> AppResult<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    pub fn f64_vec(&mut self) -> AppResult<Vec<f64>> {
        let n = self.usize()?;
        if n > self.remaining() / 8 {
            return Err(AppError::Format(format!(
                "truncated {} file: length {n} exceeds the remaining {} bytes",
                self.what,
                self.remaining()
            )));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn expect_end(&self) -> AppResult<()> {
        if self.remaining() != 0 {
            return Err(AppError::Format(format!(
                "{} trailing bytes after {} data",
                self.remaining(),
                self.what
            )));
        }
        Ok(())
    }
}
