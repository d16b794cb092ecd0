// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Type-specific value codecs.

mod bitpack;
mod fsst;

use std::fmt;

use thiserror::Error;

pub use bitpack::{
    bits_needed, for_compress, for_compress_plain, for_decode_into, for_decompress,
    for_decompress_range, packed_block_len, BlockReader, ForEncoded, MiniBlockMeta, WidthClass,
    MAX_BLOCK_VALUES,
    DEFAULT_BLOCK_SIZE,
};
pub use fsst::{
    fsst_build_table, fsst_decode_into, fsst_decode_record, fsst_decoded_len, fsst_encode,
    Encoder, SymbolTable, BUILD_ROUNDS, ESCAPE_CODE, MAX_SYMBOLS, MAX_SYMBOL_LEN,
    MAX_TABLE_BYTES, SAMPLE_CAP,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("value {value} at index {index} does not fit {width:?}")]
    ValueOutOfRange {
        index: usize,
        value: i64,
        width: WidthClass,
    },
    #[error("decoded value {value} does not fit {width:?}")]
    DecodedOutOfRange { value: i64, width: WidthClass },
    #[error("block size must be positive")]
    ZeroBlockSize,
    #[error("mini block of {0} values exceeds the {max} value limit", max = bitpack::MAX_BLOCK_VALUES)]
    BlockTooLarge(usize),
    #[error("truncated payload: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("bit width {0} exceeds 64")]
    BadBitWidth(u8),
    #[error("mini block offset {0} is not word aligned")]
    Misaligned(u32),
    #[error("decode range {start}..{end} exceeds value count {count}")]
    RangeOutOfBounds {
        start: usize,
        end: usize,
        count: usize,
    },
    #[error("malformed record: trailing escape byte")]
    TrailingEscape,
    #[error("malformed record: code {0} is not in the symbol table")]
    UnknownCode(u8),
    #[error("malformed record: decoded length mismatch")]
    LengthMismatch,
    #[error("malformed symbol table: {0}")]
    BadSymbolTable(&'static str),
}

/// Logical column type; decides the on-page scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "len")]
pub enum ColumnType {
    Int32,
    Int64,
    /// Fixed-point with two fractional digits, stored scaled by 100 in 32 bits.
    Decimal18_2,
    Char(u16),
    Varchar,
    /// Days since 1970-01-01.
    Date,
}

impl ColumnType {
    /// Whether values go through fixed-length pages.
    pub fn is_fixed(self) -> bool {
        match self {
            ColumnType::Char(n) => n <= 2,
            ColumnType::Varchar => false,
            _ => true,
        }
    }

    /// Width class at rest, `None` for variable-length layouts.
    pub fn width_class(self) -> Option<WidthClass> {
        match self {
            ColumnType::Int64 => Some(WidthClass::W64),
            t if t.is_fixed() => Some(WidthClass::W32),
            _ => None,
        }
    }

    /// Bytes per value in the uncompressed fixed layout.
    pub fn fixed_width(self) -> Option<usize> {
        self.width_class().map(|w| w.bits() as usize / 8)
    }

    /// Values carried as byte strings rather than integers.
    pub fn is_bytes(self) -> bool {
        matches!(self, ColumnType::Char(_) | ColumnType::Varchar)
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnType::Int32 => f.write_str("INT32"),
            ColumnType::Int64 => f.write_str("INT64"),
            ColumnType::Decimal18_2 => f.write_str("DECIMAL(18,2)"),
            ColumnType::Char(n) => write!(f, "CHAR({n})"),
            ColumnType::Varchar => f.write_str("VARCHAR"),
            ColumnType::Date => f.write_str("DATE"),
        }
    }
}

/// Packs a CHAR(n <= 2) value big-endian so integer order matches byte order.
/// Shorter inputs are space padded.
pub fn pack_short_char(value: &[u8], n: u16) -> Option<i64> {
    if n == 0 || n > 2 || value.len() > n as usize {
        return None;
    }
    let mut key = 0i64;
    for i in 0..n as usize {
        key = (key << 8) | *value.get(i).unwrap_or(&b' ') as i64;
    }
    Some(key)
}

pub fn unpack_short_char(key: i64, n: u16) -> Vec<u8> {
    (0..n).rev().map(|i| (key >> (8 * i)) as u8).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_char_packing_is_big_endian() {
        assert_eq!(pack_short_char(b"AB", 2), Some(0x4142));
        assert_eq!(pack_short_char(b"AC", 2), Some(0x4143));
        assert_eq!(pack_short_char(b"A", 2), Some(0x4120));
        assert_eq!(pack_short_char(b"N", 1), Some(0x4e));
        assert_eq!(pack_short_char(b"ABC", 2), None);
        assert_eq!(unpack_short_char(0x4142, 2), b"AB");
        assert!(pack_short_char(b"AB", 2) < pack_short_char(b"B", 2));
    }

    #[test]
    fn type_dispatch() {
        assert_eq!(ColumnType::Int64.width_class(), Some(WidthClass::W64));
        assert_eq!(ColumnType::Decimal18_2.width_class(), Some(WidthClass::W32));
        assert_eq!(ColumnType::Char(2).width_class(), Some(WidthClass::W32));
        assert_eq!(ColumnType::Char(3).width_class(), None);
        assert_eq!(ColumnType::Varchar.fixed_width(), None);
        assert_eq!(ColumnType::Date.fixed_width(), Some(4));
    }
}
