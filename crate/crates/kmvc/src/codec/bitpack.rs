//! Fixed-width LSB-first bit packing.
//!
//! Values are laid down starting at bit 0 of byte 0, each new value
//! beginning at the next free bit, bytes emitted in little-endian order.
//! A group of 8 values of width x therefore occupies exactly x bytes,
//! which is the block contract the codec's payload format relies on.
//! The accumulator is a u128 so a push of up to 64 bits always fits on
//! top of the at-most-7 buffered bits.

pub(crate) struct BitWriter {
    out: Vec<u8>,
    acc: u128,
    nbits: u32,
}

impl BitWriter {
    pub fn with_capacity(bytes: usize) -> BitWriter {
        BitWriter {
            out: Vec::with_capacity(bytes),
            acc: 0,
            nbits: 0,
        }
    }

    /// Appends the low `width` bits of `value`, 1 <= width <= 64.
    #[inline]
    pub fn push(&mut self, value: u64, width: u32) {
        debug_assert!((1..=64).contains(&width));
        debug_assert!(width == 64 || value >> width == 0, "value wider than width");
        self.acc |= (value as u128) << self.nbits;
        self.nbits += width;
        while self.nbits >= 8 {
            self.out.push(self.acc as u8);
            self.acc >>= 8;
            self.nbits -= 8;
        }
    }

    /// Flushes any buffered bits (zero-padded to a byte) and returns the
    /// packed bytes.
    pub fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            self.out.push(self.acc as u8);
        }
        self.out
    }
}

pub(crate) struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    acc: u128,
    nbits: u32,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> BitReader<'a> {
        BitReader {
            bytes,
            pos: 0,
            acc: 0,
            nbits: 0,
        }
    }

    /// Reads the next `width` bits, pulling bytes only as needed.
    /// Returns None when the input is exhausted mid-value.
    #[inline]
    pub fn read(&mut self, width: u32) -> Option<u64> {
        debug_assert!((1..=64).contains(&width));
        while self.nbits < width {
            if self.pos == self.bytes.len() {
                return None;
            }
            self.acc |= (self.bytes[self.pos] as u128) << self.nbits;
            self.pos += 1;
            self.nbits += 8;
        }
        let v = if width == 64 {
            self.acc as u64
        } else {
            (self.acc as u64) & ((1u64 << width) - 1)
        };
        self.acc >>= width;
        self.nbits -= width;
        Some(v)
    }

    /// Number of input bytes pulled so far. This is what early-stopping
    /// merges report: bytes the merge never needed are never touched.
    #[inline]
    pub fn bytes_consumed(&self) -> usize {
        self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bit-at-a-time reference packer: the independent oracle the fast
    /// writer is checked against.
    fn reference_pack(values: &[u64], width: u32) -> Vec<u8> {
        let mut bits: Vec<bool> = Vec::new();
        for &v in values {
            for b in 0..width {
                bits.push((v >> b) & 1 == 1);
            }
        }
        while bits.len() % 8 != 0 {
            bits.push(false);
        }
        bits.chunks(8)
            .map(|byte| {
                byte.iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &bit)| acc | ((bit as u8) << i))
            })
            .collect()
    }

    #[test]
    fn writer_matches_reference_packer() {
        let cases: &[(&[u64], u32)] = &[
            (&[4, 29, 79], 7),
            (&[1, 0, 1, 1, 0, 1, 0, 0, 1], 1),
            (&[0x7fff_ffff_ffff_ffff, 1, 0x2aaa_aaaa_aaaa_aaaa], 63),
            (&[u64::MAX, 0, 42], 64),
            (&[5; 16], 3),
            (&[], 9),
        ];
        for (values, width) in cases {
            let mut w = BitWriter::with_capacity(16);
            for &v in *values {
                w.push(v, *width);
            }
            assert_eq!(
                w.finish(),
                reference_pack(values, *width),
                "width {width}"
            );
        }
    }

    #[test]
    fn eight_values_occupy_exactly_width_bytes() {
        for width in 1..=63u32 {
            let mut w = BitWriter::with_capacity(64);
            for i in 0..8u64 {
                w.push(i & ((1 << width.min(3)) - 1), width);
            }
            assert_eq!(w.finish().len(), width as usize);
        }
    }

    #[test]
    fn read_inverts_push_across_widths() {
        for width in [1u32, 2, 5, 7, 8, 9, 17, 31, 33, 63, 64] {
            let mask = if width == 64 { u64::MAX } else { (1 << width) - 1 };
            let values: Vec<u64> = (0..25u64)
                .map(|i| i.wrapping_mul(0x9e37_79b9_7f4a_7c15) & mask)
                .collect();
            let mut w = BitWriter::with_capacity(256);
            for &v in &values {
                w.push(v, width);
            }
            let packed = w.finish();
            let mut r = BitReader::new(&packed);
            for &v in &values {
                assert_eq!(r.read(width), Some(v), "width {width}");
            }
        }
    }

    #[test]
    fn reader_reports_exhaustion_and_lazy_consumption() {
        let mut w = BitWriter::with_capacity(8);
        w.push(0x155, 9);
        w.push(0x0aa, 9);
        let packed = w.finish(); // 18 bits -> 3 bytes
        assert_eq!(packed.len(), 3);

        let mut r = BitReader::new(&packed);
        assert_eq!(r.read(9), Some(0x155));
        assert_eq!(r.bytes_consumed(), 2); // 9 bits live in the first 2 bytes
        assert_eq!(r.read(9), Some(0x0aa));
        assert_eq!(r.read(9), None);

        let mut short = BitReader::new(&packed[..1]);
        assert_eq!(short.read(9), None);
    }
}
