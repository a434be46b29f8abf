//! Lossless wire format for sorted key sets.
//!
//! The retained keys of a sketch are strictly increasing 63-bit values,
//! so the encoder stores successive differences instead of absolute
//! keys. Differences off the bottom of a near-uniform sample are small:
//! all of them share a run of high zero bits. The codec measures
//!
//! - deltas: d[0] = keys[0], d[j] = keys[j] - keys[j-1] (all nonzero),
//! - m: the leading-zero count of the OR of all deltas,
//!
//! and packs each delta into x = 64 - m bits, eight values per block, so
//! every block is exactly x bytes. The final partial block is padded
//! with zero values; a decoder reads `count` values and ignores padding.
//!
//! Layout (all multi-byte integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "KMVC"
//! 4       1     version: 1 = compressed, 2 = raw
//! 5       1     hash_bits, always 63
//! 6       4     count: number of keys (u32)
//! 10      1     m: shared leading zeros of the deltas
//!               (1..=63 when count > 0, 0 when count == 0, 0 in raw)
//! 11      5     reserved, zero
//! 16      ...   payload: ceil(count/8) * (64 - m) bytes compressed,
//!               or count * 8 bytes of u64 keys raw
//! ```
//!
//! An empty sketch is exactly the 16-byte header. Decoders validate
//! everything: magic, version, hash width, m's range, reserved bytes,
//! payload length, and that reconstructed keys are strictly increasing
//! and inside the key domain.

mod bitpack;
mod merge;
mod stream;

pub use merge::{merge_decoded, merge_streams, MergeOutcome};
pub use stream::KeyStream;

use std::fmt;

use crate::hashing::MAX_KEY;
use bitpack::BitWriter;

pub const MAGIC: [u8; 4] = *b"KMVC";
pub const VERSION_COMPRESSED: u8 = 1;
pub const VERSION_RAW: u8 = 2;
pub const HEADER_LEN: usize = 16;

/// Errors for encoding and decoding blobs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodecError {
    /// Encode input was not strictly increasing at this index.
    NotSorted { index: usize },
    /// Encode input key is zero or has the top bit set.
    OutOfRange { index: usize, value: u64 },
    /// The operation needs at least one delta.
    Empty,
    /// First four bytes are not "KMVC".
    BadMagic { found: [u8; 4] },
    /// Version byte is not one this entry point accepts.
    BadVersion { found: u8 },
    /// Fewer bytes than the header and count demand.
    Truncated { expected: usize, actual: usize },
    /// Structurally invalid contents.
    Corrupt { detail: String },
}

impl fmt::Display for CodecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodecError::NotSorted { index } => {
                write!(f, "keys not strictly increasing at index {index}")
            }
            CodecError::OutOfRange { index, value } => {
                write!(f, "key {value:#x} at index {index} outside 1..=2^63-1")
            }
            CodecError::Empty => write!(f, "empty delta sequence"),
            CodecError::BadMagic { found } => write!(f, "bad magic {found:02x?}"),
            CodecError::BadVersion { found } => write!(f, "unsupported version {found}"),
            CodecError::Truncated { expected, actual } => {
                write!(f, "blob truncated: need {expected} bytes, have {actual}")
            }
            CodecError::Corrupt { detail } => write!(f, "corrupt blob: {detail}"),
        }
    }
}

impl std::error::Error for CodecError {}

fn corrupt(detail: impl Into<String>) -> CodecError {
    CodecError::Corrupt {
        detail: detail.into(),
    }
}

/// Successive differences of a strictly increasing key sequence.
///
/// Construction validates the keys, so a `DeltaSeq` always holds
/// strictly positive deltas whose prefix sums stay inside the key
/// domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaSeq(Vec<u64>);

impl DeltaSeq {
    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Leading zeros shared by every delta: the leading-zero count of
    /// their OR. Always in 1..=63 because deltas are nonzero and below
    /// 2^63.
    pub fn min_leading_zeros(&self) -> Result<u32, CodecError> {
        if self.0.is_empty() {
            return Err(CodecError::Empty);
        }
        let or = self.0.iter().fold(0u64, |acc, &d| acc | d);
        Ok(or.leading_zeros())
    }

    /// Prefix sums: the original keys. Infallible because the
    /// constructor only admits valid key sequences.
    pub fn reconstruct_keys(&self) -> Vec<u64> {
        let mut keys = Vec::with_capacity(self.0.len());
        let mut prev = 0u64;
        for &d in &self.0 {
            prev += d;
            keys.push(prev);
        }
        keys
    }
}

/// Validates `keys` (strictly increasing, inside the key domain) and
/// returns their successive differences.
pub fn compute_deltas(keys: &[u64]) -> Result<DeltaSeq, CodecError> {
    let mut deltas = Vec::with_capacity(keys.len());
    let mut prev = 0u64;
    for (index, &key) in keys.iter().enumerate() {
        if key == 0 || key > MAX_KEY {
            return Err(CodecError::OutOfRange { index, value: key });
        }
        if key <= prev && index > 0 {
            return Err(CodecError::NotSorted { index });
        }
        deltas.push(key - prev);
        prev = key;
    }
    Ok(DeltaSeq(deltas))
}

/// Total blob size for `count` keys compressed under a given `m`.
pub fn compressed_len(count: usize, m: u32) -> usize {
    HEADER_LEN + count.div_ceil(8) * (64 - m as usize)
}

/// Total blob size for `count` keys in the raw format.
pub fn raw_len(count: usize) -> usize {
    HEADER_LEN + count * 8
}

fn write_header(out: &mut Vec<u8>, version: u8, count: u32, m: u8) {
    out.extend_from_slice(&MAGIC);
    out.push(version);
    out.push(crate::hashing::HASH_BITS as u8);
    out.extend_from_slice(&count.to_le_bytes());
    out.push(m);
    out.extend_from_slice(&[0u8; 5]);
}

pub(crate) struct Header {
    pub version: u8,
    pub count: u32,
    pub m: u8,
}

pub(crate) fn parse_header(blob: &[u8]) -> Result<Header, CodecError> {
    if blob.len() < HEADER_LEN {
        return Err(CodecError::Truncated {
            expected: HEADER_LEN,
            actual: blob.len(),
        });
    }
    if blob[0..4] != MAGIC {
        return Err(CodecError::BadMagic {
            found: blob[0..4].try_into().unwrap(),
        });
    }
    let version = blob[4];
    if version != VERSION_COMPRESSED && version != VERSION_RAW {
        return Err(CodecError::BadVersion { found: version });
    }
    if blob[5] != crate::hashing::HASH_BITS as u8 {
        return Err(corrupt(format!("hash_bits {} (expected 63)", blob[5])));
    }
    let count = u32::from_le_bytes(blob[6..10].try_into().unwrap());
    let m = blob[10];
    if blob[11..16] != [0u8; 5] {
        return Err(corrupt("reserved bytes not zero"));
    }
    match version {
        VERSION_COMPRESSED => {
            if count == 0 && m != 0 {
                return Err(corrupt(format!("m = {m} with count = 0")));
            }
            if count > 0 && !(1..=63).contains(&m) {
                return Err(corrupt(format!("m = {m} outside 1..=63")));
            }
        }
        _ => {
            if m != 0 {
                return Err(corrupt(format!("m = {m} in a raw blob")));
            }
        }
    }
    Ok(Header { version, count, m })
}

/// Encodes a strictly increasing key sequence to the compressed format.
///
/// Two passes: measure the deltas' shared leading zeros, then bit-pack
/// every delta into x = 64 - m bits. The payload comes out at exactly
/// `ceil(count/8) * x` bytes.
pub fn encode(keys: &[u64]) -> Result<Vec<u8>, CodecError> {
    assert!(keys.len() <= u32::MAX as usize, "count field is 32 bits");
    let deltas = compute_deltas(keys)?;
    if deltas.is_empty() {
        let mut out = Vec::with_capacity(HEADER_LEN);
        write_header(&mut out, VERSION_COMPRESSED, 0, 0);
        return Ok(out);
    }
    let m = deltas.min_leading_zeros().expect("non-empty");
    let x = 64 - m;
    let total = compressed_len(deltas.len(), m);
    let mut out = Vec::with_capacity(total);
    write_header(&mut out, VERSION_COMPRESSED, deltas.len() as u32, m as u8);

    let mut writer = BitWriter::with_capacity(total - HEADER_LEN);
    for &d in deltas.as_slice() {
        writer.push(d, x);
    }
    let pad = (8 - deltas.len() % 8) % 8;
    for _ in 0..pad {
        writer.push(0, x);
    }
    out.extend_from_slice(&writer.finish());
    debug_assert_eq!(out.len(), total);
    Ok(out)
}

/// Encodes to the raw format: the header plus each key as a u64.
pub fn encode_raw(keys: &[u64]) -> Result<Vec<u8>, CodecError> {
    assert!(keys.len() <= u32::MAX as usize, "count field is 32 bits");
    // Validation only; raw stores the keys themselves.
    compute_deltas(keys)?;
    let mut out = Vec::with_capacity(raw_len(keys.len()));
    write_header(&mut out, VERSION_RAW, keys.len() as u32, 0);
    for &key in keys {
        out.extend_from_slice(&key.to_le_bytes());
    }
    Ok(out)
}

/// Decodes a compressed blob back to its keys.
pub fn decode(blob: &[u8]) -> Result<Vec<u64>, CodecError> {
    collect_keys(KeyStream::open_version(blob, Some(VERSION_COMPRESSED))?)
}

/// Decodes a raw blob back to its keys.
pub fn decode_raw(blob: &[u8]) -> Result<Vec<u64>, CodecError> {
    collect_keys(KeyStream::open_version(blob, Some(VERSION_RAW))?)
}

/// Decodes either format, dispatching on the version byte.
pub fn decode_any(blob: &[u8]) -> Result<Vec<u64>, CodecError> {
    collect_keys(KeyStream::open(blob)?)
}

fn collect_keys(stream: KeyStream<'_>) -> Result<Vec<u64>, CodecError> {
    let mut keys = Vec::with_capacity(stream.key_count() as usize);
    for key in stream {
        keys.push(key?);
    }
    Ok(keys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_example() {
        let deltas = compute_deltas(&[4, 33, 112]).unwrap();
        assert_eq!(deltas.as_slice(), &[4, 29, 79]);
        assert_eq!(deltas.reconstruct_keys(), vec![4, 33, 112]);
        // OR of the deltas is 95, a 7-bit value: 57 shared leading zeros.
        assert_eq!(deltas.min_leading_zeros().unwrap(), 57);
    }

    #[test]
    fn delta_edge_cases() {
        assert_eq!(
            compute_deltas(&[1]).unwrap().min_leading_zeros().unwrap(),
            63
        );
        assert_eq!(
            compute_deltas(&[1 << 62])
                .unwrap()
                .min_leading_zeros()
                .unwrap(),
            1
        );
        assert_eq!(
            compute_deltas(&[]).unwrap().min_leading_zeros(),
            Err(CodecError::Empty)
        );
        // Adjacent keys: delta 1 contributes nothing to the OR's width.
        let tight = compute_deltas(&[5, 6, 7]).unwrap();
        assert_eq!(tight.as_slice(), &[5, 1, 1]);
    }

    #[test]
    fn delta_validation() {
        assert_eq!(
            compute_deltas(&[10, 10]),
            Err(CodecError::NotSorted { index: 1 })
        );
        assert_eq!(
            compute_deltas(&[10, 9]),
            Err(CodecError::NotSorted { index: 1 })
        );
        assert_eq!(
            compute_deltas(&[0, 5]),
            Err(CodecError::OutOfRange { index: 0, value: 0 })
        );
        assert_eq!(
            compute_deltas(&[5, 1 << 63]),
            Err(CodecError::OutOfRange {
                index: 1,
                value: 1 << 63
            })
        );
    }

    #[test]
    fn encode_example_blob() {
        // keys [4, 33, 112]: deltas [4, 29, 79], m = 57, x = 7. The
        // packed word is 4 | 29<<7 | 79<<14 = 1298052 = 0x13ce84, padded
        // to a full 8-value block of 7 bytes.
        let blob = encode(&[4, 33, 112]).unwrap();
        assert_eq!(blob.len(), 16 + 7);
        assert_eq!(&blob[0..4], b"KMVC");
        assert_eq!(blob[4], VERSION_COMPRESSED);
        assert_eq!(blob[5], 63);
        assert_eq!(u32::from_le_bytes(blob[6..10].try_into().unwrap()), 3);
        assert_eq!(blob[10], 57);
        assert_eq!(&blob[11..16], &[0; 5]);
        assert_eq!(&blob[16..], &[0x84, 0xce, 0x13, 0, 0, 0, 0]);
    }

    #[test]
    fn empty_blob_is_a_bare_header() {
        let blob = encode(&[]).unwrap();
        assert_eq!(blob.len(), 16);
        assert_eq!(blob[4], VERSION_COMPRESSED);
        assert_eq!(blob[10], 0);
        assert_eq!(decode(&blob).unwrap(), Vec::<u64>::new());

        let raw = encode_raw(&[]).unwrap();
        assert_eq!(raw.len(), 16);
        assert_eq!(decode_raw(&raw).unwrap(), Vec::<u64>::new());
    }

    #[test]
    fn round_trips_at_block_boundaries() {
        for count in [1usize, 7, 8, 9, 15, 16, 17, 100] {
            let keys: Vec<u64> = (0..count as u64).map(|i| i * i + 3).collect();
            let blob = encode(&keys).unwrap();
            assert_eq!(decode(&blob).unwrap(), keys, "count {count}");
            let raw = encode_raw(&keys).unwrap();
            assert_eq!(decode_raw(&raw).unwrap(), keys, "count {count}");
            assert_eq!(decode_any(&blob).unwrap(), keys);
            assert_eq!(decode_any(&raw).unwrap(), keys);
        }
    }

    #[test]
    fn size_formula_holds() {
        let keys: Vec<u64> = (1..=20u64).map(|i| i * 1000).collect();
        let blob = encode(&keys).unwrap();
        let m = compute_deltas(&keys)
            .unwrap()
            .min_leading_zeros()
            .unwrap();
        assert_eq!(blob.len(), compressed_len(20, m));
        assert_eq!(encode_raw(&keys).unwrap().len(), raw_len(20));
    }

    #[test]
    fn decode_rejects_bad_headers() {
        let good = encode(&[10, 20, 30]).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(
            decode(&bad),
            Err(CodecError::BadMagic { .. })
        ));

        let mut bad = good.clone();
        bad[4] = 9;
        assert_eq!(decode(&bad), Err(CodecError::BadVersion { found: 9 }));

        // A raw blob handed to the compressed-only entry point.
        let raw = encode_raw(&[10, 20, 30]).unwrap();
        assert_eq!(decode(&raw), Err(CodecError::BadVersion { found: 2 }));
        assert_eq!(
            decode_raw(&good),
            Err(CodecError::BadVersion { found: 1 })
        );

        let mut bad = good.clone();
        bad[5] = 64;
        assert!(matches!(decode(&bad), Err(CodecError::Corrupt { .. })));

        let mut bad = good.clone();
        bad[10] = 0; // m = 0 with count > 0
        assert!(matches!(decode(&bad), Err(CodecError::Corrupt { .. })));

        let mut bad = good.clone();
        bad[12] = 1; // reserved byte
        assert!(matches!(decode(&bad), Err(CodecError::Corrupt { .. })));

        assert!(matches!(
            decode(&good[..10]),
            Err(CodecError::Truncated { .. })
        ));
    }

    #[test]
    fn decode_rejects_bad_payloads() {
        let good = encode(&[10, 20, 30]).unwrap();

        // Payload shorter than the count demands.
        let short = &good[..good.len() - 1];
        assert!(matches!(
            decode(short),
            Err(CodecError::Truncated { .. })
        ));

        // Trailing garbage after the payload.
        let mut long = good.clone();
        long.push(0xff);
        assert!(matches!(decode(&long), Err(CodecError::Corrupt { .. })));

        // A zero delta would decode to a repeated key.
        let mut zeroed = good.clone();
        for b in &mut zeroed[16..] {
            *b = 0;
        }
        assert!(matches!(decode(&zeroed), Err(CodecError::Corrupt { .. })));

        // Deltas that sum past the key domain. Bumping the first
        // delta's low byte turns [MAX_KEY - 1, 1] into [MAX_KEY, 1],
        // whose prefix sum lands on 2^63.
        let mut huge = encode(&[MAX_KEY - 1, MAX_KEY]).unwrap();
        huge[16] = 0xff;
        assert!(matches!(decode(&huge), Err(CodecError::Corrupt { .. })));
    }

    #[test]
    fn raw_decode_validates_order_and_domain() {
        let mut blob = encode_raw(&[100, 200]).unwrap();
        blob[16..24].copy_from_slice(&300u64.to_le_bytes()); // now 300, 200
        assert!(matches!(decode_raw(&blob), Err(CodecError::Corrupt { .. })));

        let mut blob = encode_raw(&[100]).unwrap();
        blob[16..24].copy_from_slice(&(1u64 << 63).to_le_bytes());
        assert!(matches!(decode_raw(&blob), Err(CodecError::Corrupt { .. })));

        let mut blob = encode_raw(&[100]).unwrap();
        blob[16..24].copy_from_slice(&0u64.to_le_bytes());
        assert!(matches!(decode_raw(&blob), Err(CodecError::Corrupt { .. })));
    }
}
