//! Length-prefixed binary encoding shared by key files, attribute files and
//! protocol messages.
//!
//! Every artifact starts with an ASCII magic string followed by a version
//! byte. The body is a fixed sequence of fields, each written as a 4-byte
//! big-endian length followed by that many bytes. Integers are unsigned
//! big-endian with no leading zero bytes (zero is a single `0x00`).
//! Decoding is strict: non-canonical integers and trailing bytes are errors,
//! so `encode(decode(bytes)) == bytes` whenever decoding succeeds.

use num_bigint::BigUint;
use thiserror::Error;

pub const VERSION: u8 = 0x01;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("truncated input: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0:#04x}")]
    UnsupportedVersion(u8),
    #[error("unexpected type tag {0:#04x}")]
    UnexpectedTag(u8),
    #[error("invalid field `{0}`")]
    InvalidField(&'static str),
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
}

/// Builds an encoding field by field.
#[derive(Debug, Default, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    /// Starts an artifact with `magic` and the current version byte.
    pub fn with_header(magic: &[u8]) -> Self {
        let mut buf = Vec::with_capacity(64);
        buf.extend_from_slice(magic);
        buf.push(VERSION);
        Self { buf }
    }

    /// Starts a bare field sequence (used for nested structures).
    pub fn new() -> Self {
        Self::default()
    }

    pub fn raw_u8(&mut self, byte: u8) -> &mut Self {
        self.buf.push(byte);
        self
    }

    pub fn field(&mut self, bytes: &[u8]) -> &mut Self {
        let len = u32::try_from(bytes.len()).expect("field longer than 4 GiB");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.field(s.as_bytes())
    }

    pub fn uint(&mut self, n: &BigUint) -> &mut Self {
        self.field(&n.to_bytes_be())
    }

    pub fn u64(&mut self, n: u64) -> &mut Self {
        self.field(&n.to_be_bytes())
    }

    pub fn u8(&mut self, n: u8) -> &mut Self {
        self.field(&[n])
    }

    /// Writes a count followed by one field per item.
    pub fn list<T>(&mut self, items: &[T], mut each: impl FnMut(&T) -> Vec<u8>) -> &mut Self {
        let count = u32::try_from(items.len()).expect("list too long");
        self.field(&count.to_be_bytes());
        for item in items {
            let bytes = each(item);
            self.field(&bytes);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buf
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Reads fields back in the order they were written.
#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    /// Consumes `magic` and the version byte.
    pub fn with_header(buf: &'a [u8], magic: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Self::new(buf);
        let got = dec.take(magic.len())?;
        if got != magic {
            return Err(DecodeError::BadMagic);
        }
        let version = dec.raw_u8()?;
        if version != VERSION {
            return Err(DecodeError::UnsupportedVersion(version));
        }
        Ok(dec)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let have = self.buf.len() - self.pos;
        if n > have {
            return Err(DecodeError::Truncated { need: n, have });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn raw_u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn field(&mut self) -> Result<&'a [u8], DecodeError> {
        let len = self.take(4)?;
        let len = u32::from_be_bytes([len[0], len[1], len[2], len[3]]) as usize;
        self.take(len)
    }

    pub fn str(&mut self, name: &'static str) -> Result<String, DecodeError> {
        let bytes = self.field()?;
        String::from_utf8(bytes.to_vec()).map_err(|_| DecodeError::InvalidField(name))
    }

    pub fn uint(&mut self, name: &'static str) -> Result<BigUint, DecodeError> {
        let bytes = self.field()?;
        match bytes {
            [] => Err(DecodeError::InvalidField(name)),
            [0, _, ..] => Err(DecodeError::InvalidField(name)),
            _ => Ok(BigUint::from_bytes_be(bytes)),
        }
    }

    pub fn u64(&mut self, name: &'static str) -> Result<u64, DecodeError> {
        let bytes: [u8; 8] = self
            .field()?
            .try_into()
            .map_err(|_| DecodeError::InvalidField(name))?;
        Ok(u64::from_be_bytes(bytes))
    }

    pub fn u8(&mut self, name: &'static str) -> Result<u8, DecodeError> {
        match self.field()? {
            [b] => Ok(*b),
            _ => Err(DecodeError::InvalidField(name)),
        }
    }

    pub fn list<T>(
        &mut self,
        name: &'static str,
        mut each: impl FnMut(&'a [u8]) -> Result<T, DecodeError>,
    ) -> Result<Vec<T>, DecodeError> {
        let count: [u8; 4] = self
            .field()?
            .try_into()
            .map_err(|_| DecodeError::InvalidField(name))?;
        let count = u32::from_be_bytes(count) as usize;
        // Each item costs at least its 4-byte length, which bounds the allocation.
        let mut out = Vec::with_capacity(count.min((self.buf.len() - self.pos) / 4));
        for _ in 0..count {
            let item = self.field()?;
            out.push(each(item)?);
        }
        Ok(out)
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(DecodeError::TrailingBytes(n)),
        }
    }
}
