//! Hashing and key-stream primitives.
//!
//! Items are mapped into the key domain `1 ..= 2^63 - 1` by taking the low
//! 64 bits of a MurmurHash3 x64_128 digest, clearing the top bit, and
//! remapping 0 to 1. Everything downstream (sketch, codec, estimator)
//! assumes keys live in that domain: strictly positive so successive
//! differences of distinct keys never collapse to zero, and below 2^63 so
//! the fraction `key / 2^63` is a valid uniform coordinate.

/// Width of the key domain in bits. Keys satisfy `1 <= key <= 2^63 - 1`.
pub const HASH_BITS: u32 = 63;

/// Largest representable key, `2^63 - 1`.
pub const MAX_KEY: u64 = (1u64 << HASH_BITS) - 1;

/// A hash key in `1 ..= MAX_KEY`.
///
/// The constructor enforces the domain, so any `HashKey` in circulation
/// is valid codec input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HashKey(u64);

impl HashKey {
    /// Wraps a raw value, rejecting 0 and anything with the top bit set.
    pub fn new(value: u64) -> Option<HashKey> {
        if value == 0 || value > MAX_KEY {
            None
        } else {
            Some(HashKey(value))
        }
    }

    /// The raw key value.
    #[inline]
    pub fn value(self) -> u64 {
        self.0
    }

    /// Folds an arbitrary 64-bit word into the key domain: clear the top
    /// bit, then remap the single impossible value 0 to 1.
    #[inline]
    pub fn from_digest(bits: u64) -> HashKey {
        let masked = bits & MAX_KEY;
        HashKey(if masked == 0 { 1 } else { masked })
    }
}

/// Hashing parameters shared by sketches that are meant to be merged.
///
/// Only the seed varies; the 63-bit key width is fixed (see [`HASH_BITS`])
/// and is stamped into every serialized blob.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct HashConfig {
    pub seed: u64,
}

impl HashConfig {
    pub fn new(seed: u64) -> HashConfig {
        HashConfig { seed }
    }
}

/// Hashes an item to a key. Deterministic in `(item, config.seed)`.
pub fn hash_item(item: &[u8], config: &HashConfig) -> HashKey {
    let (h1, _) = murmur3_x64_128(item, config.seed);
    HashKey::from_digest(h1)
}

/// MurmurHash3 x64_128 over `data`, returning `(h1, h2)`.
///
/// This is the reference x64 variant with its standard constants. The
/// seed is widened to 64 bits by loading it into both lanes, which
/// coincides with the canonical function for seeds below 2^32.
pub fn murmur3_x64_128(data: &[u8], seed: u64) -> (u64, u64) {
    const C1: u64 = 0x87c3_7b91_1142_53d5;
    const C2: u64 = 0x4cf5_ad43_2745_937f;

    let mut h1 = seed;
    let mut h2 = seed;

    let mut chunks = data.chunks_exact(16);
    for block in &mut chunks {
        let k1 = u64::from_le_bytes(block[0..8].try_into().unwrap());
        let k2 = u64::from_le_bytes(block[8..16].try_into().unwrap());

        h1 ^= k1.wrapping_mul(C1).rotate_left(31).wrapping_mul(C2);
        h1 = h1
            .rotate_left(27)
            .wrapping_add(h2)
            .wrapping_mul(5)
            .wrapping_add(0x52dc_e729);

        h2 ^= k2.wrapping_mul(C2).rotate_left(33).wrapping_mul(C1);
        h2 = h2
            .rotate_left(31)
            .wrapping_add(h1)
            .wrapping_mul(5)
            .wrapping_add(0x3849_5ab5);
    }

    let tail = chunks.remainder();
    if !tail.is_empty() {
        let mut k1: u64 = 0;
        let mut k2: u64 = 0;
        for (i, &b) in tail.iter().enumerate().rev() {
            if i >= 8 {
                k2 |= (b as u64) << ((i - 8) * 8);
            } else {
                k1 |= (b as u64) << (i * 8);
            }
        }
        if tail.len() > 8 {
            h2 ^= k2.wrapping_mul(C2).rotate_left(33).wrapping_mul(C1);
        }
        h1 ^= k1.wrapping_mul(C1).rotate_left(31).wrapping_mul(C2);
    }

    h1 ^= data.len() as u64;
    h2 ^= data.len() as u64;
    h1 = h1.wrapping_add(h2);
    h2 = h2.wrapping_add(h1);
    h1 = fmix64(h1);
    h2 = fmix64(h2);
    h1 = h1.wrapping_add(h2);
    h2 = h2.wrapping_add(h1);
    (h1, h2)
}

#[inline]
fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

/// One round of the splitmix64 output function. Used to derive
/// independent per-trial seeds from a master seed.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A deterministic stream of `n` distinct keys for benchmarks.
///
/// Key i is `((i + 1) * 11400714819323198485) ^ trial_seed` folded into
/// the key domain. The multiplier is the 64-bit Fibonacci constant
/// `floor(2^64 / phi)`; multiplication by an odd constant and the seed
/// xor are both bijections on 64-bit words, so the full-width values
/// never repeat. Folding to 63 bits can in principle collide two of
/// them, but the chance over any tested n is a few parts per million,
/// and the distinctness tests pin it down for the sizes we care about.
pub fn synthetic_stream(n: u64, trial_seed: u64) -> impl Iterator<Item = HashKey> {
    const FIB: u64 = 11_400_714_819_323_198_485;
    (1..=n).map(move |i| HashKey::from_digest(i.wrapping_mul(FIB) ^ trial_seed))
}
