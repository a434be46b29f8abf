//! Multiway merging of encoded blobs.
//!
//! Every blob stores its keys in ascending order, so a heap of stream
//! fronts yields the union in ascending order. A consumer that wants
//! only the k least distinct keys can therefore stop after k emissions
//! and skip decoding the bulk of every input.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{CodecError, KeyStream};

/// Result of an early-stopping merge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeOutcome {
    /// The k least distinct keys of the union (fewer if the union is
    /// smaller), ascending.
    pub keys: Vec<u64>,
    /// Payload bytes actually pulled across all inputs.
    pub payload_bytes_read: usize,
}

/// Merges encoded blobs, keeping the `k` least distinct keys.
///
/// Inputs may mix compressed and raw blobs. Decoding stops as soon as
/// `k` keys are emitted; `payload_bytes_read` reports how much of the
/// inputs was touched.
pub fn merge_streams(blobs: &[&[u8]], k: usize) -> Result<MergeOutcome, CodecError> {
    let mut streams = blobs
        .iter()
        .map(|blob| KeyStream::open(blob))
        .collect::<Result<Vec<_>, _>>()?;

    let mut heap = BinaryHeap::with_capacity(streams.len());
    for (idx, stream) in streams.iter_mut().enumerate() {
        if let Some(first) = stream.next() {
            heap.push(Reverse((first?, idx)));
        }
    }

    let mut keys = Vec::new();
    while keys.len() < k {
        let Some(Reverse((key, idx))) = heap.pop() else {
            break;
        };
        if keys.last() != Some(&key) {
            keys.push(key);
        }
        if let Some(next) = streams[idx].next() {
            heap.push(Reverse((next?, idx)));
        }
    }

    let payload_bytes_read = streams.iter().map(|s| s.payload_bytes_read()).sum();
    Ok(MergeOutcome {
        keys,
        payload_bytes_read,
    })
}

/// Merges already-decoded ascending key sets, keeping the `k` least
/// distinct keys. The reference path for `merge_streams`.
pub fn merge_decoded(sets: &[&[u64]], k: usize) -> Vec<u64> {
    let mut heap = BinaryHeap::with_capacity(sets.len());
    for (idx, set) in sets.iter().enumerate() {
        if let Some(&first) = set.first() {
            heap.push(Reverse((first, idx, 0usize)));
        }
    }

    let mut keys = Vec::new();
    while keys.len() < k {
        let Some(Reverse((key, idx, pos))) = heap.pop() else {
            break;
        };
        if keys.last() != Some(&key) {
            keys.push(key);
        }
        if let Some(&next) = sets[idx].get(pos + 1) {
            heap.push(Reverse((next, idx, pos + 1)));
        }
    }
    keys
}

#[cfg(test)]
mod tests {
    use super::super::{encode, encode_raw};
    use super::*;

    fn oracle(sets: &[&[u64]], k: usize) -> Vec<u64> {
        let mut all: Vec<u64> = sets.iter().flat_map(|s| s.iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all.truncate(k);
        all
    }

    #[test]
    fn merges_with_overlap() {
        let a: Vec<u64> = vec![2, 5, 9, 14, 30];
        let b: Vec<u64> = vec![1, 5, 10, 14, 31];
        let c: Vec<u64> = vec![3, 4, 5, 100];
        let blobs = [
            encode(&a).unwrap(),
            encode_raw(&b).unwrap(),
            encode(&c).unwrap(),
        ];
        let views: Vec<&[u8]> = blobs.iter().map(|b| b.as_slice()).collect();
        let sets: [&[u64]; 3] = [&a, &b, &c];
        for k in [0, 1, 4, 9, 100] {
            let outcome = merge_streams(&views, k).unwrap();
            assert_eq!(outcome.keys, oracle(&sets, k), "k = {k}");
            assert_eq!(merge_decoded(&sets, k), oracle(&sets, k), "k = {k}");
        }
    }

    #[test]
    fn stops_early() {
        let a: Vec<u64> = (1..=4000u64).map(|i| i * 2).collect();
        let b: Vec<u64> = (1..=4000u64).map(|i| i * 2 + 1).collect();
        let blobs = [encode(&a).unwrap(), encode(&b).unwrap()];
        let full_payload: usize = blobs.iter().map(|b| b.len() - 16).sum();
        let views: Vec<&[u8]> = blobs.iter().map(|b| b.as_slice()).collect();

        let outcome = merge_streams(&views, 16).unwrap();
        assert_eq!(outcome.keys, (2..=17u64).collect::<Vec<_>>());
        assert!(
            outcome.payload_bytes_read * 10 < full_payload,
            "read {} of {} payload bytes",
            outcome.payload_bytes_read,
            full_payload
        );
    }

    #[test]
    fn short_union_ends_before_k() {
        let a: Vec<u64> = vec![7, 8];
        let blobs = [encode(&a).unwrap(), encode(&a).unwrap()];
        let views: Vec<&[u8]> = blobs.iter().map(|b| b.as_slice()).collect();
        let outcome = merge_streams(&views, 10).unwrap();
        assert_eq!(outcome.keys, vec![7, 8]);
    }

    #[test]
    fn empty_inputs_are_fine() {
        let empty = encode(&[]).unwrap();
        let some = encode(&[3, 6]).unwrap();
        let outcome = merge_streams(&[&empty, &some, &empty], 5).unwrap();
        assert_eq!(outcome.keys, vec![3, 6]);
        assert_eq!(merge_streams(&[], 5).unwrap().keys, Vec::<u64>::new());
    }

    #[test]
    fn propagates_stream_errors() {
        // Forge a zero delta in the second blob (see stream tests).
        let mut bad = encode(&[5, 6]).unwrap();
        bad[16] = 5;
        let good = encode(&[1, 2, 3]).unwrap();
        let err = merge_streams(&[&good, &bad], 10);
        assert!(matches!(err, Err(CodecError::Corrupt { .. })));
    }
}
