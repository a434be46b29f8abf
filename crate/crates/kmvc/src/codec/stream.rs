//! Lazy decoding of encoded blobs.
//!
//! `KeyStream` validates the header and payload length up front, then
//! yields keys one at a time, touching payload bytes only as needed.
//! Merging consumers can stop early and know how little they read.

use crate::hashing::MAX_KEY;

use super::bitpack::BitReader;
use super::{parse_header, CodecError, HEADER_LEN, VERSION_COMPRESSED};

/// Iterator over the keys of an encoded blob, in ascending order.
///
/// Opening checks the whole header and that the payload is exactly the
/// size the header implies. Key-level checks (nonzero deltas, strictly
/// increasing raw keys, domain bounds) happen as the iterator advances.
/// Padding bits past the last key are never inspected. After yielding
/// an error the stream is fused and yields nothing further.
pub struct KeyStream<'a> {
    count: u32,
    version: u8,
    m: u8,
    emitted: u32,
    prev: u64,
    failed: bool,
    reader: Reader<'a>,
}

enum Reader<'a> {
    Packed { bits: BitReader<'a>, width: u32 },
    Raw { payload: &'a [u8], pos: usize },
}

impl<'a> KeyStream<'a> {
    /// Opens a blob of either version.
    pub fn open(blob: &'a [u8]) -> Result<Self, CodecError> {
        Self::open_version(blob, None)
    }

    pub(crate) fn open_version(
        blob: &'a [u8],
        require: Option<u8>,
    ) -> Result<Self, CodecError> {
        let header = parse_header(blob)?;
        if let Some(version) = require {
            if header.version != version {
                return Err(CodecError::BadVersion {
                    found: header.version,
                });
            }
        }
        let count = header.count as usize;
        let expected = if header.version == VERSION_COMPRESSED {
            count.div_ceil(8) * (64 - header.m as usize)
        } else {
            count * 8
        };
        let payload = &blob[HEADER_LEN..];
        if payload.len() < expected {
            return Err(CodecError::Truncated {
                expected: HEADER_LEN + expected,
                actual: blob.len(),
            });
        }
        if payload.len() > expected {
            return Err(CodecError::Corrupt {
                detail: format!(
                    "{} trailing bytes after payload",
                    payload.len() - expected
                ),
            });
        }
        let reader = if header.version == VERSION_COMPRESSED {
            Reader::Packed {
                bits: BitReader::new(payload),
                width: 64 - header.m as u32,
            }
        } else {
            Reader::Raw { payload, pos: 0 }
        };
        Ok(KeyStream {
            count: header.count,
            version: header.version,
            m: header.m,
            emitted: 0,
            prev: 0,
            failed: false,
            reader,
        })
    }

    /// Number of keys the blob declares. Named to stay clear of
    /// `Iterator::count`, which would otherwise shadow it in method
    /// calls.
    pub fn key_count(&self) -> u32 {
        self.count
    }

    /// Version byte from the header.
    pub fn version(&self) -> u8 {
        self.version
    }

    /// Shared leading-zero count from the header (0 for raw blobs).
    pub fn m(&self) -> u8 {
        self.m
    }

    /// Payload bytes pulled so far. Stays short of the full payload
    /// when a consumer stops early.
    pub fn payload_bytes_read(&self) -> usize {
        match &self.reader {
            Reader::Packed { bits, .. } => bits.bytes_consumed(),
            Reader::Raw { pos, .. } => *pos,
        }
    }

    fn next_key(&mut self) -> Result<u64, CodecError> {
        match &mut self.reader {
            Reader::Packed { bits, width } => {
                let delta = bits
                    .read(*width)
                    .expect("payload length checked at open");
                if delta == 0 {
                    return Err(CodecError::Corrupt {
                        detail: format!("zero delta at index {}", self.emitted),
                    });
                }
                // width <= 63 keeps prev + delta below 2^64.
                let key = self.prev + delta;
                if key > MAX_KEY {
                    return Err(CodecError::Corrupt {
                        detail: format!(
                            "key overflows 63 bits at index {}",
                            self.emitted
                        ),
                    });
                }
                self.prev = key;
                Ok(key)
            }
            Reader::Raw { payload, pos } => {
                let bytes: [u8; 8] = payload[*pos..*pos + 8]
                    .try_into()
                    .expect("payload length checked at open");
                *pos += 8;
                let key = u64::from_le_bytes(bytes);
                if key == 0 || key > MAX_KEY {
                    return Err(CodecError::Corrupt {
                        detail: format!(
                            "key {key:#x} at index {} outside 1..=2^63-1",
                            self.emitted
                        ),
                    });
                }
                if key <= self.prev && self.emitted > 0 {
                    return Err(CodecError::Corrupt {
                        detail: format!(
                            "keys not strictly increasing at index {}",
                            self.emitted
                        ),
                    });
                }
                self.prev = key;
                Ok(key)
            }
        }
    }
}

impl Iterator for KeyStream<'_> {
    type Item = Result<u64, CodecError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.emitted == self.count {
            return None;
        }
        let result = self.next_key();
        match result {
            Ok(_) => self.emitted += 1,
            Err(_) => self.failed = true,
        }
        Some(result)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        if self.failed {
            return (0, Some(0));
        }
        let left = (self.count - self.emitted) as usize;
        // An error can end the stream after one more item.
        (0, Some(left))
    }
}
