// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Fixed-length pages: a mini-block directory followed by packed payload.

use std::ops::Range;

use super::wire::{put_u32, Cursor};
use super::{
    max_fitting_prefix, read_metas, seal, verify, write_metas, Compression, PageError,
    PageHeader, PageLayout, PageOptions, FOOTER_LEN, HEADER_LEN,
};
use crate::codec::{
    bits_needed, for_compress, for_compress_plain, for_decode_into, pack_short_char,
    packed_block_len, unpack_short_char, ColumnType, MiniBlockMeta, WidthClass,
};
use crate::values::ColumnValues;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedPage {
    pub header: PageHeader,
    pub metas: Vec<MiniBlockMeta>,
    pub payload: Vec<u8>,
    pub footer_checksum: u32,
}

impl FixedPage {
    pub fn serialized_len(&self) -> usize {
        fixed_len(self.metas.len(), self.payload.len())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        self.header.write_to(&mut out);
        write_metas(&mut out, &self.metas);
        put_u32(&mut out, self.payload.len() as u32);
        out.extend_from_slice(&self.payload);
        seal(&mut out);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, PageError> {
        let (body, footer_checksum) = verify(bytes)?;
        let mut cur = Cursor::new(body);
        let header = PageHeader::read_from(&mut cur)?;
        if header.layout != PageLayout::Fixed {
            return Err(PageError::Corrupt("not a fixed-length page".into()));
        }
        let metas = read_metas(&mut cur, header.miniblock_count as usize)?;
        let payload_len = cur.u32("payload length")? as usize;
        let payload = cur.take(payload_len, "payload")?.to_vec();
        if cur.remaining() != 0 {
            return Err(PageError::Corrupt("trailing bytes after payload".into()));
        }
        let page = FixedPage {
            header,
            metas,
            payload,
            footer_checksum,
        };
        page.check_structure()?;
        Ok(page)
    }

    fn check_structure(&self) -> Result<(), PageError> {
        let mut count = 0u64;
        let mut next_offset = 0usize;
        for m in &self.metas {
            if m.byte_offset as usize != next_offset {
                return Err(PageError::Corrupt("mini blocks not densely ordered".into()));
            }
            if m.value_count == 0 {
                return Err(PageError::Corrupt("empty mini block".into()));
            }
            next_offset += m.packed_len();
            count += m.value_count as u64;
        }
        if next_offset != self.payload.len() {
            return Err(PageError::Corrupt("payload length disagrees with directory".into()));
        }
        if count != self.header.value_count as u64 {
            return Err(PageError::Corrupt("value count disagrees with directory".into()));
        }
        Ok(())
    }

    fn reseal(&mut self) {
        let bytes = self.to_bytes();
        self.footer_checksum = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    }

    pub fn set_page_id(&mut self, page_id: u64) {
        self.header.page_id = page_id;
        self.reseal();
    }

    pub fn set_column_id(&mut self, column_id: u32) {
        self.header.column_id = column_id;
        self.reseal();
    }
}

fn fixed_len(blocks: usize, payload: usize) -> usize {
    HEADER_LEN + blocks * MiniBlockMeta::ENCODED_LEN + 4 + payload + FOOTER_LEN
}

/// Size of `n` values packed at the full class width, the largest any
/// encoding of `n` values can be.
pub fn fixed_worst_len(n: usize, width: WidthClass, block_size: usize) -> usize {
    let (full, rem) = (n / block_size, n % block_size);
    let bits = width.bits();
    let mut payload = full * packed_block_len(block_size, bits);
    if rem > 0 {
        payload += packed_block_len(rem, bits);
    }
    fixed_len(full + usize::from(rem > 0), payload)
}

/// Most values per page whose worst-case encoding fits the page size.
pub fn fixed_rows_per_page(width: WidthClass, opts: &PageOptions) -> usize {
    let upper = opts.page_size * 8 / width.bits() as usize;
    max_fitting_prefix(upper, |n| {
        fixed_worst_len(n, width, opts.block_size) <= opts.page_size
    })
}

/// Serialized size of a page holding `values`, computed without packing.
fn encoded_len(values: &[i64], width: WidthClass, opts: &PageOptions) -> usize {
    let mut blocks = 0;
    let mut payload = 0;
    for block in values.chunks(opts.block_size) {
        let b = match opts.compression {
            Compression::Plain => width.bits(),
            Compression::TypeSpecific => {
                let min = *block.iter().min().unwrap();
                let max = *block.iter().max().unwrap();
                bits_needed((max as u64).wrapping_sub(min as u64))
            }
        };
        blocks += 1;
        payload += packed_block_len(block.len(), b);
    }
    fixed_len(blocks, payload)
}

/// Integer keys of `values` under `col_type`'s at-rest representation.
fn to_keys(values: &ColumnValues, col_type: ColumnType) -> Result<Vec<i64>, PageError> {
    match (col_type, values) {
        (ColumnType::Char(n), ColumnValues::Bytes(v)) if n <= 2 => v
            .iter()
            .map(|s| pack_short_char(s, n).ok_or(PageError::TypeMismatch(col_type)))
            .collect(),
        (ColumnType::Char(_), _) => Err(PageError::TypeMismatch(col_type)),
        (_, ColumnValues::Int(v)) => Ok(v.clone()),
        _ => Err(PageError::TypeMismatch(col_type)),
    }
}

/// Encodes fixed-length values; the scheme is chosen by `col_type` alone.
pub fn encode_fixed_page(
    values: &ColumnValues,
    col_type: ColumnType,
    first_rid: u64,
    opts: &PageOptions,
) -> Result<FixedPage, PageError> {
    let width = col_type
        .width_class()
        .ok_or(PageError::WrongLayout(col_type))?;
    if values.is_empty() {
        return Err(PageError::Empty);
    }
    let keys = to_keys(values, col_type)?;
    let size = encoded_len(&keys, width, opts);
    if size > opts.page_size {
        let max_prefix = max_fitting_prefix(keys.len(), |n| {
            encoded_len(&keys[..n], width, opts) <= opts.page_size
        });
        return Err(PageError::Overflow {
            size,
            page_size: opts.page_size,
            max_prefix,
        });
    }
    let enc = match opts.compression {
        Compression::TypeSpecific => for_compress(&keys, width, opts.block_size)?,
        Compression::Plain => for_compress_plain(&keys, width, opts.block_size)?,
    };
    let mut page = FixedPage {
        header: PageHeader {
            page_id: 0,
            column_id: 0,
            layout: PageLayout::Fixed,
            value_count: keys.len() as u32,
            miniblock_count: enc.metas.len() as u32,
            first_rid,
        },
        metas: enc.metas,
        payload: enc.payload,
        footer_checksum: 0,
    };
    page.reseal();
    debug_assert_eq!(page.serialized_len(), size);
    Ok(page)
}

/// Appends the at-rest integer keys of `range` (default: all values).
/// CHAR(n <= 2) comes back as packed keys.
pub fn decode_fixed_into(
    page: &FixedPage,
    col_type: ColumnType,
    range: Option<Range<usize>>,
    out: &mut Vec<i64>,
) -> Result<(), PageError> {
    let width = col_type
        .width_class()
        .ok_or(PageError::WrongLayout(col_type))?;
    let count = page.header.value_count as usize;
    let range = range.unwrap_or(0..count);
    if range.start > range.end || range.end > count {
        return Err(PageError::RangeOutOfBounds {
            start: range.start,
            end: range.end,
            count,
        });
    }
    out.reserve(range.len());
    let mut block_start = 0;
    for m in &page.metas {
        let block_end = block_start + m.value_count as usize;
        let lo = range.start.max(block_start);
        let hi = range.end.min(block_end);
        if lo < hi {
            for_decode_into(m, &page.payload, width, lo - block_start..hi - block_start, out)?;
        }
        if block_end >= range.end {
            break;
        }
        block_start = block_end;
    }
    Ok(())
}

/// Decodes `range` of a fixed page back into typed values.
pub fn decode_fixed_page(
    page: &FixedPage,
    col_type: ColumnType,
    range: Option<Range<usize>>,
) -> Result<ColumnValues, PageError> {
    let mut keys = Vec::new();
    decode_fixed_into(page, col_type, range, &mut keys)?;
    Ok(match col_type {
        ColumnType::Char(n) => {
            ColumnValues::Bytes(keys.into_iter().map(|k| unpack_short_char(k, n)).collect())
        }
        _ => ColumnValues::Int(keys),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::page::Page;

    fn opts() -> PageOptions {
        PageOptions::default()
    }

    #[test]
    fn worst_case_bounds_every_encoding() {
        let o = opts();
        let rows = fixed_rows_per_page(WidthClass::W32, &o);
        // 300,000 INT32 rows still take two pages
        assert!(rows < 300_000 && 2 * rows >= 300_000, "{rows}");
        assert!(fixed_worst_len(rows, WidthClass::W32, 128) <= o.page_size);
        assert!(fixed_worst_len(rows + 1, WidthClass::W32, 128) > o.page_size);
        let vals: Vec<i64> = (0..rows as i64).map(|i| if i % 2 == 0 { i32::MIN as i64 } else { i32::MAX as i64 }).collect();
        for compression in [Compression::Plain, Compression::TypeSpecific] {
            let o = PageOptions { compression, ..o };
            let p = encode_fixed_page(&ColumnValues::Int(vals.clone()), ColumnType::Int32, 0, &o).unwrap();
            assert_eq!(p.serialized_len(), fixed_worst_len(rows, WidthClass::W32, 128));
        }
    }

    #[test]
    fn int32_example() {
        let p = encode_fixed_page(&ColumnValues::Int(vec![1, 2, 3]), ColumnType::Int32, 0, &opts())
            .unwrap();
        assert_eq!(p.metas.len(), 1);
        assert_eq!((p.metas[0].base, p.metas[0].bit_width), (1, 2));
        assert_eq!(
            decode_fixed_page(&p, ColumnType::Int32, None).unwrap(),
            ColumnValues::Int(vec![1, 2, 3])
        );
        assert_eq!(
            decode_fixed_page(&p, ColumnType::Int32, Some(1..2)).unwrap(),
            ColumnValues::Int(vec![2])
        );
    }

    #[test]
    fn short_char_example() {
        let vals = ColumnValues::Bytes(vec![b"AB".to_vec(), b"AC".to_vec()]);
        let p = encode_fixed_page(&vals, ColumnType::Char(2), 0, &opts()).unwrap();
        assert_eq!((p.metas[0].base, p.metas[0].bit_width), (0x4142, 1));
        let mut keys = Vec::new();
        decode_fixed_into(&p, ColumnType::Char(2), None, &mut keys).unwrap();
        assert_eq!(keys, vec![0x4142, 0x4143]);
        assert_eq!(decode_fixed_page(&p, ColumnType::Char(2), None).unwrap(), vals);
    }

    #[test]
    fn empty_and_wrong_layout_refused() {
        assert_eq!(
            encode_fixed_page(&ColumnValues::Int(vec![]), ColumnType::Int32, 0, &opts()),
            Err(PageError::Empty)
        );
        let strs = ColumnValues::Bytes(vec![b"abc".to_vec()]);
        assert_eq!(
            encode_fixed_page(&strs, ColumnType::Char(3), 0, &opts()),
            Err(PageError::WrongLayout(ColumnType::Char(3)))
        );
        assert_eq!(
            encode_fixed_page(&strs, ColumnType::Int32, 0, &opts()),
            Err(PageError::TypeMismatch(ColumnType::Int32))
        );
    }

    #[test]
    fn corrupted_payload_detected() {
        let p = encode_fixed_page(
            &ColumnValues::Int((0..500).map(|i| i * 7919 % 1000).collect()),
            ColumnType::Int32,
            0,
            &opts(),
        )
        .unwrap();
        let mut bytes = p.to_bytes();
        assert_eq!(FixedPage::parse(&bytes).unwrap(), p);
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        let err = Page::parse(&bytes).unwrap_err();
        assert!(err.is_corrupt());
        assert!(matches!(err, PageError::ChecksumMismatch { .. }));
    }

    #[test]
    fn overflow_reports_fitting_prefix() {
        let values: Vec<i64> = (0..40_000).map(|i| (i * 2_654_435_761i64) % i32::MAX as i64).collect();
        let o = PageOptions {
            page_size: 64 << 10,
            ..opts()
        };
        let err = encode_fixed_page(&ColumnValues::Int(values.clone()), ColumnType::Int32, 0, &o)
            .unwrap_err();
        let PageError::Overflow { max_prefix, .. } = err else {
            panic!("{err}")
        };
        let fits = encode_fixed_page(&ColumnValues::Int(values[..max_prefix].to_vec()), ColumnType::Int32, 0, &o)
            .unwrap();
        assert!(fits.serialized_len() <= o.page_size);
        assert!(encode_fixed_page(
            &ColumnValues::Int(values[..max_prefix + 1].to_vec()),
            ColumnType::Int32,
            0,
            &o
        )
        .is_err());
    }

    #[test]
    fn int64_and_int32_paths_agree() {
        let v: Vec<i64> = vec![-5, 17, 3, 3, 1000, -40000];
        let a = encode_fixed_page(&ColumnValues::Int(v.clone()), ColumnType::Int32, 0, &opts()).unwrap();
        let b = encode_fixed_page(&ColumnValues::Int(v.clone()), ColumnType::Int64, 0, &opts()).unwrap();
        assert_eq!(decode_fixed_page(&a, ColumnType::Int32, None).unwrap(), ColumnValues::Int(v.clone()));
        assert_eq!(decode_fixed_page(&b, ColumnType::Int64, None).unwrap(), ColumnValues::Int(v));
    }

    #[test]
    fn int32_rejects_wide_values() {
        let err = encode_fixed_page(&ColumnValues::Int(vec![0, 1 << 33]), ColumnType::Date, 0, &opts())
            .unwrap_err();
        assert!(matches!(err, PageError::Codec(_)));
    }

    #[test]
    fn plain_pages_are_larger_but_equal() {
        let v: Vec<i64> = (0..1000).collect();
        let plain = PageOptions {
            compression: Compression::Plain,
            ..opts()
        };
        let a = encode_fixed_page(&ColumnValues::Int(v.clone()), ColumnType::Int32, 0, &opts()).unwrap();
        let b = encode_fixed_page(&ColumnValues::Int(v.clone()), ColumnType::Int32, 0, &plain).unwrap();
        assert!(a.serialized_len() * 3 < b.serialized_len());
        assert_eq!(decode_fixed_page(&b, ColumnType::Int32, None).unwrap(), ColumnValues::Int(v));
    }

    #[test]
    fn set_page_id_keeps_page_valid() {
        let mut p = encode_fixed_page(&ColumnValues::Int(vec![4, 5]), ColumnType::Int32, 10, &opts()).unwrap();
        p.set_page_id(77);
        let parsed = FixedPage::parse(&p.to_bytes()).unwrap();
        assert_eq!(parsed.header.page_id, 77);
        assert_eq!(parsed.header.first_rid, 10);
        assert_eq!(parsed, p);
    }
}
