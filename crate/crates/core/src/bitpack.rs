//! LSB-first bit packing for the container payload.

use crate::error::{Error, Result};

#[derive(Debug, Default)]
pub struct BitWriter {
    buf: Vec<u8>,
    bits: u64,
}

impl BitWriter {
    pub fn with_capacity_bits(bits: u64) -> Self {
        Self {
            buf: Vec::with_capacity(bits.div_ceil(8) as usize),
            bits: 0,
        }
    }

    /// Append the low `width` bits of `value` (`width` ≤ 32).
    pub fn write(&mut self, value: u32, width: u8) {
        debug_assert!(width <= 32);
        debug_assert!(width == 32 || value >> width == 0);
        let mut value = value as u64;
        let mut remaining = width as u32;
        while remaining > 0 {
            let offset = (self.bits % 8) as u32;
            if offset == 0 {
                self.buf.push(0);
            }
            let take = remaining.min(8 - offset);
            let chunk = (value & ((1u64 << take) - 1)) as u8;
            *self.buf.last_mut().unwrap() |= chunk << offset;
            value >>= take;
            remaining -= take;
            self.bits += take as u64;
        }
    }

    pub fn bit_len(&self) -> u64 {
        self.bits
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug)]
pub struct BitReader<'a> {
    data: &'a [u8],
    pos: u64,
    limit: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self {
            data,
            pos: 0,
            limit: data.len() as u64 * 8,
        }
    }

    pub fn read(&mut self, width: u8) -> Result<u32> {
        if self.pos + width as u64 > self.limit {
            return Err(Error::Truncated {
                expected: (self.pos + width as u64).div_ceil(8),
                actual: self.data.len() as u64,
            });
        }
        let mut out = 0u64;
        let mut done = 0u32;
        let width = width as u32;
        while done < width {
            let byte = self.data[(self.pos / 8) as usize];
            let offset = (self.pos % 8) as u32;
            let take = (width - done).min(8 - offset);
            let chunk = (byte >> offset) as u64 & ((1u64 << take) - 1);
            out |= chunk << done;
            done += take;
            self.pos += take as u64;
        }
        Ok(out as u32)
    }

    pub fn position(&self) -> u64 {
        self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn packs_little_endian_within_bytes() {
        let mut w = BitWriter::default();
        w.write(0x3, 4);
        w.write(0xA, 4);
        w.write(0xFF, 8);
        w.write(0x1, 4);
        assert_eq!(w.bit_len(), 20);
        assert_eq!(w.into_bytes(), vec![0xA3, 0xFF, 0x01]);
    }

    #[test]
    fn reading_past_end_is_truncation() {
        let mut r = BitReader::new(&[0xFF]);
        assert_eq!(r.read(4).unwrap(), 0xF);
        assert!(matches!(r.read(8), Err(Error::Truncated { .. })));
    }

    proptest! {
        #[test]
        fn write_then_read(values in prop::collection::vec((0u32..256, prop::sample::select(vec![1u8, 4, 8])), 0..200)) {
            let mut w = BitWriter::default();
            for &(v, width) in &values {
                w.write(v & ((1 << width) - 1), width);
            }
            let total: u64 = values.iter().map(|&(_, b)| b as u64).sum();
            prop_assert_eq!(w.bit_len(), total);
            let bytes = w.into_bytes();
            prop_assert_eq!(bytes.len() as u64, total.div_ceil(8));
            let mut r = BitReader::new(&bytes);
            for &(v, width) in &values {
                prop_assert_eq!(r.read(width).unwrap(), v & ((1 << width) - 1));
            }
        }
    }
}
