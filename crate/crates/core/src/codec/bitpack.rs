// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Frame-of-reference bit packing over fixed-count mini blocks.
//!
//! Each mini block stores its minimum as a signed 64-bit base and packs
//! `value - base` as unsigned deltas of `bit_width` bits. Deltas are laid
//! out least-significant-bit first inside little-endian 64-bit words, and
//! every block starts on a word boundary. A value is decoded from a 128-bit
//! window over two adjacent words, so any single value can be extracted
//! without touching the rest of the block.

use std::ops::Range;

use super::CodecError;

/// Default number of values per mini block.
pub const DEFAULT_BLOCK_SIZE: usize = 128;

/// No block holds more values than the largest page, which also bounds what
/// an untrusted descriptor can make the decoder allocate.
pub const MAX_BLOCK_VALUES: u32 = 1 << 21;

const WORD_BYTES: usize = 8;

/// Integer width class a column is stored in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum WidthClass {
    W32,
    W64,
}

impl WidthClass {
    pub fn bits(self) -> u8 {
        match self {
            WidthClass::W32 => 32,
            WidthClass::W64 => 64,
        }
    }

    pub fn contains(self, value: i64) -> bool {
        match self {
            WidthClass::W32 => i32::try_from(value).is_ok(),
            WidthClass::W64 => true,
        }
    }

    /// Smallest representable value; the base used by plain (full-width) blocks.
    pub fn min_value(self) -> i64 {
        match self {
            WidthClass::W32 => i32::MIN as i64,
            WidthClass::W64 => i64::MIN,
        }
    }
}

/// Per-block decode metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiniBlockMeta {
    pub base: i64,
    pub bit_width: u8,
    /// Offset of this block's packed words inside the payload.
    pub byte_offset: u32,
    pub value_count: u32,
}

impl MiniBlockMeta {
    /// Serialized size: base (8) + bit width (1) + byte offset (4) + count (4).
    pub const ENCODED_LEN: usize = 17;

    /// Bytes of packed payload this block occupies, padding included.
    pub fn packed_len(&self) -> usize {
        packed_words(self.value_count as usize, self.bit_width) * WORD_BYTES
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.base.to_le_bytes());
        out.push(self.bit_width);
        out.extend_from_slice(&self.byte_offset.to_le_bytes());
        out.extend_from_slice(&self.value_count.to_le_bytes());
    }

    pub fn read_from(buf: &[u8]) -> Result<Self, CodecError> {
        if buf.len() < Self::ENCODED_LEN {
            return Err(CodecError::Truncated {
                needed: Self::ENCODED_LEN,
                available: buf.len(),
            });
        }
        let meta = MiniBlockMeta {
            base: i64::from_le_bytes(buf[0..8].try_into().unwrap()),
            bit_width: buf[8],
            byte_offset: u32::from_le_bytes(buf[9..13].try_into().unwrap()),
            value_count: u32::from_le_bytes(buf[13..17].try_into().unwrap()),
        };
        meta.validate()?;
        Ok(meta)
    }

    fn validate(&self) -> Result<(), CodecError> {
        if self.bit_width > 64 {
            return Err(CodecError::BadBitWidth(self.bit_width));
        }
        if !(self.byte_offset as usize).is_multiple_of(WORD_BYTES) {
            return Err(CodecError::Misaligned(self.byte_offset));
        }
        if self.value_count > MAX_BLOCK_VALUES {
            return Err(CodecError::BlockTooLarge(self.value_count as usize));
        }
        Ok(())
    }
}

/// Output of [`for_compress`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ForEncoded {
    pub metas: Vec<MiniBlockMeta>,
    pub payload: Vec<u8>,
}

fn packed_words(count: usize, bit_width: u8) -> usize {
    (count * bit_width as usize).div_ceil(64)
}

/// Smallest `b` such that `delta < 2^b`.
pub fn bits_needed(max_delta: u64) -> u8 {
    (64 - max_delta.leading_zeros()) as u8
}

fn delta(value: i64, base: i64) -> u64 {
    (value as u64).wrapping_sub(base as u64)
}

fn check_width(values: &[i64], width: WidthClass, offset: usize) -> Result<(), CodecError> {
    match values.iter().position(|&v| !width.contains(v)) {
        Some(i) => Err(CodecError::ValueOutOfRange {
            index: offset + i,
            value: values[i],
            width,
        }),
        None => Ok(()),
    }
}

/// Frame-of-reference compresses `values` into blocks of at most `block_size`.
pub fn for_compress(
    values: &[i64],
    width: WidthClass,
    block_size: usize,
) -> Result<ForEncoded, CodecError> {
    compress_with(values, width, block_size, |block| {
        let min = *block.iter().min().unwrap();
        let max = *block.iter().max().unwrap();
        (min, bits_needed(delta(max, min)))
    })
}

/// Full-width packing with the class minimum as base: the uncompressed layout
/// expressed through the same decoder.
pub fn for_compress_plain(
    values: &[i64],
    width: WidthClass,
    block_size: usize,
) -> Result<ForEncoded, CodecError> {
    compress_with(values, width, block_size, |_| {
        (width.min_value(), width.bits())
    })
}

fn compress_with(
    values: &[i64],
    width: WidthClass,
    block_size: usize,
    params: impl Fn(&[i64]) -> (i64, u8),
) -> Result<ForEncoded, CodecError> {
    if block_size == 0 {
        return Err(CodecError::ZeroBlockSize);
    }
    if block_size > MAX_BLOCK_VALUES as usize {
        return Err(CodecError::BlockTooLarge(block_size));
    }
    check_width(values, width, 0)?;
    let mut out = ForEncoded::default();
    for block in values.chunks(block_size) {
        let (base, bit_width) = params(block);
        let meta = MiniBlockMeta {
            base,
            bit_width,
            byte_offset: out.payload.len() as u32,
            value_count: block.len() as u32,
        };
        pack_block(block, base, bit_width, &mut out.payload);
        out.metas.push(meta);
    }
    Ok(out)
}

fn pack_block(block: &[i64], base: i64, bit_width: u8, payload: &mut Vec<u8>) {
    let words = packed_words(block.len(), bit_width);
    if words == 0 {
        return;
    }
    let mut packed = vec![0u64; words];
    let b = bit_width as usize;
    for (i, &v) in block.iter().enumerate() {
        let d = delta(v, base);
        let bit = i * b;
        let (w, shift) = (bit / 64, bit % 64);
        packed[w] |= d << shift;
        if shift + b > 64 {
            packed[w + 1] |= d >> (64 - shift);
        }
    }
    for word in packed {
        payload.extend_from_slice(&word.to_le_bytes());
    }
}

/// Number of payload bytes a block of `count` values at `bit_width` needs.
pub fn packed_block_len(count: usize, bit_width: u8) -> usize {
    packed_words(count, bit_width) * WORD_BYTES
}

/// Random-access view over one packed mini block.
#[derive(Debug, Clone, Copy)]
pub struct BlockReader<'a> {
    meta: MiniBlockMeta,
    words: &'a [u8],
    mask: u64,
}

impl<'a> BlockReader<'a> {
    pub fn new(meta: &MiniBlockMeta, payload: &'a [u8]) -> Result<Self, CodecError> {
        meta.validate()?;
        let start = meta.byte_offset as usize;
        let needed = start + meta.packed_len();
        if payload.len() < needed {
            return Err(CodecError::Truncated {
                needed,
                available: payload.len(),
            });
        }
        let mask = match meta.bit_width {
            64 => u64::MAX,
            b => (1u64 << b) - 1,
        };
        Ok(BlockReader {
            meta: *meta,
            words: &payload[start..needed],
            mask,
        })
    }

    pub fn len(&self) -> usize {
        self.meta.value_count as usize
    }

    pub fn is_empty(&self) -> bool {
        self.meta.value_count == 0
    }

    fn word(&self, i: usize) -> u64 {
        u64::from_le_bytes(self.words[i * 8..i * 8 + 8].try_into().unwrap())
    }

    /// Decodes value `idx`. Caller guarantees `idx < len()`.
    pub fn get(&self, idx: usize) -> i64 {
        let b = self.meta.bit_width as usize;
        if b == 0 {
            return self.meta.base;
        }
        let bit = idx * b;
        let (w, shift) = (bit / 64, bit % 64);
        let lo = self.word(w) as u128;
        let hi = if shift + b > 64 { self.word(w + 1) as u128 } else { 0 };
        let window = (hi << 64) | lo;
        let d = ((window >> shift) as u64) & self.mask;
        (self.meta.base as u64).wrapping_add(d) as i64
    }
}

/// Decodes a whole mini block.
pub fn for_decompress(
    meta: &MiniBlockMeta,
    payload: &[u8],
    out_width: WidthClass,
) -> Result<Vec<i64>, CodecError> {
    for_decompress_range(meta, payload, out_width, 0..meta.value_count as usize)
}

/// Decodes `range` of a mini block without touching values outside it.
pub fn for_decompress_range(
    meta: &MiniBlockMeta,
    payload: &[u8],
    out_width: WidthClass,
    range: Range<usize>,
) -> Result<Vec<i64>, CodecError> {
    let mut out = Vec::with_capacity(range.len());
    for_decode_into(meta, payload, out_width, range, &mut out)?;
    Ok(out)
}

/// Appends decoded `range` of a mini block to `out`.
pub fn for_decode_into(
    meta: &MiniBlockMeta,
    payload: &[u8],
    out_width: WidthClass,
    range: Range<usize>,
    out: &mut Vec<i64>,
) -> Result<(), CodecError> {
    let reader = BlockReader::new(meta, payload)?;
    if range.start > range.end || range.end > reader.len() {
        return Err(CodecError::RangeOutOfBounds {
            start: range.start,
            end: range.end,
            count: reader.len(),
        });
    }
    let first = out.len();
    out.extend(range.map(|i| reader.get(i)));
    check_width(&out[first..], out_width, 0).map_err(|e| match e {
        CodecError::ValueOutOfRange { value, width, .. } => {
            CodecError::DecodedOutOfRange { value, width }
        }
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Naive packer: one value at a time, bit by bit.
    fn oracle_pack(deltas: &[u64], b: usize) -> Vec<u8> {
        let total_bits = deltas.len() * b;
        let mut words = vec![0u64; total_bits.div_ceil(64)];
        for (i, &d) in deltas.iter().enumerate() {
            for k in 0..b {
                if (d >> k) & 1 == 1 {
                    let bit = i * b + k;
                    words[bit / 64] |= 1u64 << (bit % 64);
                }
            }
        }
        words.iter().flat_map(|w| w.to_le_bytes()).collect()
    }

    #[test]
    fn small_block_matches_oracle_packing() {
        let enc = for_compress(&[100, 101, 103, 100], WidthClass::W32, 128).unwrap();
        assert_eq!(enc.metas.len(), 1);
        let m = enc.metas[0];
        assert_eq!((m.base, m.bit_width, m.byte_offset, m.value_count), (100, 2, 0, 4));
        assert_eq!(enc.payload, oracle_pack(&[0, 1, 3, 0], 2));
        // bits 00 01 11 00, LSB first
        assert_eq!(enc.payload[0], 0b0011_0100);
        assert_eq!(enc.payload.len(), 8);
    }

    #[test]
    fn constant_block_has_zero_width_and_no_payload() {
        let enc = for_compress(&[5, 5, 5], WidthClass::W32, 128).unwrap();
        assert_eq!(enc.metas[0].bit_width, 0);
        assert_eq!(enc.metas[0].base, 5);
        assert!(enc.payload.is_empty());
        assert_eq!(for_decompress(&enc.metas[0], &enc.payload, WidthClass::W32).unwrap(), vec![5, 5, 5]);
    }

    #[test]
    fn wide_64bit_delta() {
        let enc = for_compress(&[0, 1 << 40], WidthClass::W64, 128).unwrap();
        // oracle: smallest b with 2^40 < 2^b
        let b = (0..=64).find(|&b| b == 64 || (1u128 << 40) < (1u128 << b)).unwrap();
        assert_eq!(enc.metas[0].bit_width, b as u8);
        assert_eq!(b, 41);
        assert_eq!(enc.metas[0].base, 0);
    }

    #[test]
    fn decode_examples() {
        let enc = for_compress(&[100, 101, 103, 100], WidthClass::W32, 128).unwrap();
        let m = &enc.metas[0];
        assert_eq!(for_decompress(m, &enc.payload, WidthClass::W32).unwrap(), vec![100, 101, 103, 100]);
        assert_eq!(for_decompress_range(m, &enc.payload, WidthClass::W32, 1..3).unwrap(), vec![101, 103]);
    }

    #[test]
    fn out_of_class_value_names_index() {
        let err = for_compress(&[1, 2, i64::from(i32::MAX) + 1], WidthClass::W32, 128).unwrap_err();
        assert!(matches!(err, CodecError::ValueOutOfRange { index: 2, .. }), "{err}");
    }

    #[test]
    fn zero_block_size_rejected() {
        assert!(matches!(
            for_compress(&[1], WidthClass::W32, 0),
            Err(CodecError::ZeroBlockSize)
        ));
    }

    #[test]
    fn oversized_blocks_rejected() {
        let err = for_compress(&[1], WidthClass::W32, MAX_BLOCK_VALUES as usize + 1).unwrap_err();
        assert!(matches!(err, CodecError::BlockTooLarge(_)));
        let meta = MiniBlockMeta { base: 0, bit_width: 0, byte_offset: 0, value_count: u32::MAX };
        let mut bytes = Vec::new();
        meta.write_to(&mut bytes);
        assert!(matches!(MiniBlockMeta::read_from(&bytes), Err(CodecError::BlockTooLarge(_))));
    }

    #[test]
    fn truncated_payload_rejected() {
        let enc = for_compress(&[1, 9, 300], WidthClass::W32, 128).unwrap();
        let err = for_decompress(&enc.metas[0], &enc.payload[..4], WidthClass::W32).unwrap_err();
        assert!(matches!(err, CodecError::Truncated { .. }));
    }

    #[test]
    fn extremes_roundtrip_at_full_width() {
        let vals = [i64::MIN, i64::MAX, 0, -1];
        let enc = for_compress(&vals, WidthClass::W64, 128).unwrap();
        assert_eq!(enc.metas[0].bit_width, 64);
        assert_eq!(for_decompress(&enc.metas[0], &enc.payload, WidthClass::W64).unwrap(), vals);
        let vals32 = [i32::MIN as i64, i32::MAX as i64];
        let enc = for_compress(&vals32, WidthClass::W32, 128).unwrap();
        assert_eq!(enc.metas[0].bit_width, 32);
        assert_eq!(for_decompress(&enc.metas[0], &enc.payload, WidthClass::W32).unwrap(), vals32);
    }

    #[test]
    fn plain_packing_roundtrips() {
        let vals = [-7, 0, 12, i32::MAX as i64];
        let enc = for_compress_plain(&vals, WidthClass::W32, 3).unwrap();
        assert!(enc.metas.iter().all(|m| m.bit_width == 32));
        let mut out = Vec::new();
        for m in &enc.metas {
            for_decode_into(m, &enc.payload, WidthClass::W32, 0..m.value_count as usize, &mut out).unwrap();
        }
        assert_eq!(out, vals);
    }

    #[test]
    fn decoding_into_narrow_class_rejects_wide_values() {
        let enc = for_compress(&[0, 1 << 40], WidthClass::W64, 128).unwrap();
        assert!(matches!(
            for_decompress(&enc.metas[0], &enc.payload, WidthClass::W32),
            Err(CodecError::DecodedOutOfRange { .. })
        ));
    }
}
