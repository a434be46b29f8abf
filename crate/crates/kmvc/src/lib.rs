//! KMV (k-minimum values) distinct-counting sketch with a compact,
//! lossless wire format.
//!
//! A KMV sketch retains the k smallest 63-bit hash keys seen in a stream.
//! Because those keys are close to the k smallest order statistics of a
//! uniform sample, they cluster near the bottom of the hash space and the
//! gaps between consecutive keys are small. The codec in this crate
//! exploits that: it stores successive differences, strips the leading
//! zero bits shared by every difference, and bit-packs what remains. The
//! result sits a few percent above the information-theoretic floor for a
//! sketch of the observed cardinality, and decodes to exactly the input.
//!
//! Module map:
//! - [`hashing`]: item hashing, key domain, synthetic key streams
//! - [`sketch`]: the mergeable sketch and its cardinality estimator
//! - [`codec`]: the wire format, bit packing, streaming decode, merges
//! - [`entropy`]: entropy formulas and oracles that bound compressed size

pub mod codec;
pub mod entropy;
pub mod hashing;
pub mod sketch;

pub use hashing::{HashConfig, HashKey, HASH_BITS};
pub use sketch::{EstimateResult, KmvSketch};
