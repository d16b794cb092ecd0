// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! On-disk page format.
//!
//! Every page is `header | body | crc32`, all integers little-endian. The
//! header is `page_id:u64 column_id:u32 layout:u8 value_count:u32
//! miniblock_count:u32 first_rid:u64`. The checksum covers header and body.
//! See `docs/FORMAT.md` for the body layouts.

mod fixed;
mod varlen;
mod wire;

use thiserror::Error;

use crate::codec::{CodecError, ColumnType, MiniBlockMeta, DEFAULT_BLOCK_SIZE};

pub use fixed::{
    decode_fixed_into, decode_fixed_page, encode_fixed_page, fixed_rows_per_page,
    fixed_worst_len, FixedPage,
};
pub use varlen::{
    decode_varlen_flat, decode_varlen_page, encode_varlen_page, record_offsets, DecodedStrings,
    RawVarlenSizer, StringBlock, VarlenPage,
};

use wire::{put_u32, put_u64, Cursor};

pub const DEFAULT_PAGE_SIZE: usize = 1 << 20;
pub const MIN_PAGE_SIZE: usize = 64 << 10;
pub const MAX_PAGE_SIZE: usize = 2 << 20;
/// Upper bound on the encoded bytes of one string mini block.
pub const STRING_BLOCK_LIMIT: usize = 9216;

/// Upper bound on values per page accepted by the parser.
pub const MAX_PAGE_VALUES: u32 = MAX_PAGE_SIZE as u32;

pub const HEADER_LEN: usize = 29;
pub const FOOTER_LEN: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PageError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("refusing to encode an empty page")]
    Empty,
    #[error("{0} values need the variable-length page layout")]
    WrongLayout(ColumnType),
    #[error("values do not match column type {0}")]
    TypeMismatch(ColumnType),
    #[error("page of {size} bytes exceeds page size {page_size}; the first {max_prefix} values fit")]
    Overflow {
        size: usize,
        page_size: usize,
        max_prefix: usize,
    },
    #[error("record {index} encodes to {encoded_len} bytes, above the {limit}-byte block limit")]
    OversizedRecord {
        index: usize,
        encoded_len: usize,
        limit: usize,
    },
    #[error("{records} records but {rids} rids")]
    RidCountMismatch { records: usize, rids: usize },
    #[error("rids must be strictly increasing (violated at index {0})")]
    RidsNotIncreasing(usize),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("corrupt page: {0}")]
    Corrupt(String),
    #[error("decode range {start}..{end} exceeds value count {count}")]
    RangeOutOfBounds {
        start: usize,
        end: usize,
        count: usize,
    },
}

impl PageError {
    /// Errors that indicate damaged bytes rather than caller misuse.
    pub fn is_corrupt(&self) -> bool {
        matches!(
            self,
            PageError::ChecksumMismatch { .. } | PageError::Corrupt(_) | PageError::Codec(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compression {
    /// FOR for integers, symbol-table compression for strings.
    TypeSpecific,
    /// Full-width integers and raw strings, for IO-volume comparisons.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PageLayout {
    Fixed = 0,
    Varlen = 1,
    /// Variable-length strings stored without a symbol table.
    VarlenRaw = 2,
}

impl PageLayout {
    fn from_u8(v: u8) -> Result<Self, PageError> {
        match v {
            0 => Ok(PageLayout::Fixed),
            1 => Ok(PageLayout::Varlen),
            2 => Ok(PageLayout::VarlenRaw),
            other => Err(PageError::Corrupt(format!("unknown layout tag {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageHeader {
    pub page_id: u64,
    pub column_id: u32,
    pub layout: PageLayout,
    pub value_count: u32,
    pub miniblock_count: u32,
    pub first_rid: u64,
}

impl PageHeader {
    fn write_to(&self, out: &mut Vec<u8>) {
        put_u64(out, self.page_id);
        put_u32(out, self.column_id);
        out.push(self.layout as u8);
        put_u32(out, self.value_count);
        put_u32(out, self.miniblock_count);
        put_u64(out, self.first_rid);
    }

    fn read_from(cur: &mut Cursor<'_>) -> Result<Self, PageError> {
        let h = PageHeader {
            page_id: cur.u64("header")?,
            column_id: cur.u32("header")?,
            layout: PageLayout::from_u8(cur.u8("header")?)?,
            value_count: cur.u32("header")?,
            miniblock_count: cur.u32("header")?,
            first_rid: cur.u64("header")?,
        };
        if h.value_count > MAX_PAGE_VALUES {
            return Err(PageError::Corrupt(format!("value count {} too large", h.value_count)));
        }
        Ok(h)
    }

    /// Reads only the header of a serialized page.
    pub fn peek(bytes: &[u8]) -> Result<Self, PageError> {
        Self::read_from(&mut Cursor::new(bytes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageOptions {
    pub page_size: usize,
    pub block_size: usize,
    pub string_block_limit: usize,
    pub compression: Compression,
}

impl Default for PageOptions {
    fn default() -> Self {
        PageOptions {
            page_size: DEFAULT_PAGE_SIZE,
            block_size: DEFAULT_BLOCK_SIZE,
            string_block_limit: STRING_BLOCK_LIMIT,
            compression: Compression::TypeSpecific,
        }
    }
}

/// A parsed page of either layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Page {
    Fixed(FixedPage),
    Varlen(VarlenPage),
}

impl Page {
    pub fn header(&self) -> &PageHeader {
        match self {
            Page::Fixed(p) => &p.header,
            Page::Varlen(p) => &p.header,
        }
    }

    /// Parses and checksum-verifies serialized page bytes.
    pub fn parse(bytes: &[u8]) -> Result<Page, PageError> {
        let header = PageHeader::peek(bytes)?;
        match header.layout {
            PageLayout::Fixed => FixedPage::parse(bytes).map(Page::Fixed),
            PageLayout::Varlen | PageLayout::VarlenRaw => {
                VarlenPage::parse(bytes).map(Page::Varlen)
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Page::Fixed(p) => p.to_bytes(),
            Page::Varlen(p) => p.to_bytes(),
        }
    }

    pub fn serialized_len(&self) -> usize {
        match self {
            Page::Fixed(p) => p.serialized_len(),
            Page::Varlen(p) => p.serialized_len(),
        }
    }

    pub fn set_page_id(&mut self, page_id: u64) {
        match self {
            Page::Fixed(p) => p.set_page_id(page_id),
            Page::Varlen(p) => p.set_page_id(page_id),
        }
    }

    pub fn set_column_id(&mut self, column_id: u32) {
        match self {
            Page::Fixed(p) => p.set_column_id(column_id),
            Page::Varlen(p) => p.set_column_id(column_id),
        }
    }
}

fn write_metas(out: &mut Vec<u8>, metas: &[MiniBlockMeta]) {
    for m in metas {
        m.write_to(out);
    }
}

fn read_metas(cur: &mut Cursor<'_>, count: usize) -> Result<Vec<MiniBlockMeta>, PageError> {
    let bytes = cur.take(
        count
            .checked_mul(MiniBlockMeta::ENCODED_LEN)
            .ok_or_else(|| PageError::Corrupt("mini block count overflow".into()))?,
        "mini block directory",
    )?;
    bytes
        .chunks_exact(MiniBlockMeta::ENCODED_LEN)
        .map(|c| MiniBlockMeta::read_from(c).map_err(PageError::from))
        .collect()
}

/// Appends the CRC-32 of everything in `out`.
fn seal(out: &mut Vec<u8>) -> u32 {
    let crc = crc32fast::hash(out);
    put_u32(out, crc);
    crc
}

/// Splits off and verifies the trailing checksum.
fn verify(bytes: &[u8]) -> Result<(&[u8], u32), PageError> {
    if bytes.len() < HEADER_LEN + FOOTER_LEN {
        return Err(PageError::Corrupt(format!("page of {} bytes is too short", bytes.len())));
    }
    let (body, tail) = bytes.split_at(bytes.len() - FOOTER_LEN);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(PageError::ChecksumMismatch { stored, computed });
    }
    Ok((body, stored))
}

/// Largest `n` in `0..=len` with `fits(n)`, given `fits` is monotone decreasing.
fn max_fitting_prefix(len: usize, fits: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, len);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}
