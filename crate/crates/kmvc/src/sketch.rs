//! The mergeable KMV sketch.
//!
//! A sketch of capacity k retains the k smallest distinct hash keys
//! offered to it. While fewer than k distinct keys have been seen it is an
//! exact distinct counter; once a key has to be dropped it switches
//! permanently to estimation mode, where the k-th smallest key's position
//! in the hash space yields the classic (k - 1) / v estimator with
//! relative standard error about 1 / sqrt(k).
//!
//! Merging keeps the k smallest keys of the union, which is exactly the
//! sketch the concatenated streams would have produced. Merge is
//! commutative and idempotent, and the empty sketch is its identity.

use std::collections::{BinaryHeap, HashSet};
use std::fmt;

use crate::codec::{self, CodecError};
use crate::hashing::{hash_item, HashConfig, HashKey, HASH_BITS};

/// Retention bound plus membership index.
///
/// The heap keeps the current maximum at the root so an incoming key is
/// admitted or rejected with one comparison; the set makes duplicate
/// detection O(1). Updates are O(log k) in the worst case. Keys are only
/// materialized in ascending order when serialization asks for them.
#[derive(Clone, Debug)]
pub struct KmvSketch {
    k: usize,
    config: HashConfig,
    heap: BinaryHeap<u64>,
    members: HashSet<u64>,
    evicted: bool,
}

/// Outcome of [`KmvSketch::estimate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateResult {
    pub estimate: f64,
    pub is_exact: bool,
    pub k: usize,
    pub count: usize,
}

/// Errors from sketch-level operations.
#[derive(Debug)]
pub enum SketchError {
    /// Merge inputs disagree on capacity or hashing parameters.
    ConfigMismatch {
        left: (usize, u64),
        right: (usize, u64),
    },
    /// A deserialized blob holds more keys than the stated capacity.
    CapacityExceeded { count: usize, k: usize },
    /// The underlying blob failed to parse.
    Codec(CodecError),
}

impl fmt::Display for SketchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SketchError::ConfigMismatch { left, right } => write!(
                f,
                "sketch configs differ: (k={}, seed={}) vs (k={}, seed={})",
                left.0, left.1, right.0, right.1
            ),
            SketchError::CapacityExceeded { count, k } => {
                write!(f, "blob holds {count} keys but capacity is {k}")
            }
            SketchError::Codec(e) => write!(f, "codec: {e}"),
        }
    }
}

impl std::error::Error for SketchError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            SketchError::Codec(e) => Some(e),
            _ => None,
        }
    }
}

impl From<CodecError> for SketchError {
    fn from(e: CodecError) -> Self {
        SketchError::Codec(e)
    }
}

impl KmvSketch {
    /// Creates an empty sketch of capacity `k`.
    ///
    /// # Panics
    /// Panics if `k == 0`; a sketch that can retain nothing estimates
    /// nothing.
    pub fn new(k: usize, config: HashConfig) -> KmvSketch {
        assert!(k >= 1, "sketch capacity k must be at least 1");
        KmvSketch {
            k,
            config,
            heap: BinaryHeap::with_capacity(k + 1),
            members: HashSet::with_capacity(k * 2),
            evicted: false,
        }
    }

    /// Convenience constructor for `k = 2^lg_k`.
    pub fn with_lg_k(lg_k: u32, config: HashConfig) -> KmvSketch {
        assert!(lg_k < 32, "lg_k out of range");
        KmvSketch::new(1usize << lg_k, config)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn config(&self) -> HashConfig {
        self.config
    }

    /// Number of keys currently retained.
    pub fn retained(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// True until the first time a distinct key could not be retained.
    /// Once false it stays false; the retained set can never again be
    /// proven complete.
    pub fn is_exact(&self) -> bool {
        !self.evicted
    }

    /// Hashes an item and offers the key to the sketch.
    pub fn update(&mut self, item: &[u8]) {
        self.update_key(hash_item(item, &self.config));
    }

    /// Offers an already-hashed key. Benchmarks and merges feed the
    /// sketch through this path to skip re-hashing.
    pub fn update_key(&mut self, key: HashKey) {
        let v = key.value();
        if self.heap.len() == self.k {
            // Full. The root is the current maximum, so most stream keys
            // are dismissed with a single compare.
            let max = *self.heap.peek().expect("non-empty at capacity");
            if v > max {
                self.evicted = true;
                return;
            }
            if v == max || self.members.contains(&v) {
                return;
            }
            self.heap.pop();
            self.members.remove(&max);
            self.heap.push(v);
            self.members.insert(v);
            self.evicted = true;
        } else {
            if self.members.contains(&v) {
                return;
            }
            self.heap.push(v);
            self.members.insert(v);
        }
    }

    /// Merges two sketches into the sketch of the concatenated streams.
    ///
    /// Inputs must share capacity and hash seed; the result retains the
    /// k smallest keys of the union and is in estimation mode if either
    /// input was, or if the union overflowed.
    pub fn merge(&self, other: &KmvSketch) -> Result<KmvSketch, SketchError> {
        if self.k != other.k || self.config != other.config {
            return Err(SketchError::ConfigMismatch {
                left: (self.k, self.config.seed),
                right: (other.k, other.config.seed),
            });
        }
        let mut out = KmvSketch::new(self.k, self.config);
        out.evicted = self.evicted || other.evicted;
        for &v in self.heap.iter().chain(other.heap.iter()) {
            out.update_key(HashKey::new(v).expect("retained keys are in domain"));
        }
        Ok(out)
    }

    /// Returns a copy with the retained set reduced to at most k keys.
    /// The set is maintained eagerly on every update, so this is a plain
    /// clone; it exists so callers can treat trimming as explicit.
    pub fn trim(&self) -> KmvSketch {
        self.clone()
    }

    /// The retained keys in ascending order.
    pub fn sorted_keys(&self) -> Vec<u64> {
        let mut keys: Vec<u64> = self.heap.iter().copied().collect();
        keys.sort_unstable();
        keys
    }

    /// Distinct-count estimate.
    ///
    /// Exact mode reports the retained count. In estimation mode the
    /// k-th smallest key (the heap root) sits at fraction v of the hash
    /// space and the estimate is (k - 1) / v.
    pub fn estimate(&self) -> EstimateResult {
        let count = self.heap.len();
        if !self.evicted {
            return EstimateResult {
                estimate: count as f64,
                is_exact: true,
                k: self.k,
                count,
            };
        }
        debug_assert_eq!(count, self.k, "eviction implies a full sketch");
        let kth = *self.heap.peek().expect("estimation mode is non-empty") as f64;
        let v = kth / (1u64 << HASH_BITS) as f64;
        EstimateResult {
            estimate: (self.k as f64 - 1.0) / v,
            is_exact: false,
            k: self.k,
            count,
        }
    }

    /// Serializes to the compressed wire format.
    pub fn serialize(&self) -> Vec<u8> {
        codec::encode(&self.sorted_keys()).expect("retained keys are sorted and in domain")
    }

    /// Serializes to the raw (uncompressed) wire format.
    pub fn serialize_raw(&self) -> Vec<u8> {
        codec::encode_raw(&self.sorted_keys()).expect("retained keys are sorted and in domain")
    }

    /// Rebuilds a sketch from either wire format.
    ///
    /// The blob does not carry the capacity, so the caller supplies it;
    /// a blob with more keys than `k` is rejected. A full blob
    /// (`count == k`) is treated as being in estimation mode, since the
    /// wire format cannot distinguish a stream that stopped at exactly k
    /// distinct items from one that overflowed.
    pub fn deserialize(blob: &[u8], k: usize, config: HashConfig) -> Result<KmvSketch, SketchError> {
        let keys = codec::decode_any(blob)?;
        if keys.len() > k {
            return Err(SketchError::CapacityExceeded {
                count: keys.len(),
                k,
            });
        }
        let mut out = KmvSketch::new(k, config);
        for v in &keys {
            out.heap.push(*v);
            out.members.insert(*v);
        }
        out.evicted = keys.len() == k;
        Ok(out)
    }
}
