// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Variable-length pages: one symbol table, string mini blocks bounded by a
//! byte limit, and the embedded RIDs packed as 64-bit FOR.

use std::ops::Range;

use super::wire::{put_u32, Cursor};
use super::{
    max_fitting_prefix, read_metas, seal, verify, write_metas, Compression, PageError,
    PageHeader, PageLayout, PageOptions, FOOTER_LEN, HEADER_LEN,
};
use crate::codec::{
    bits_needed, for_compress, for_compress_plain, for_decode_into, fsst_build_table,
    fsst_decode_into, fsst_decoded_len, packed_block_len, MiniBlockMeta, SymbolTable,
    WidthClass,
};
use crate::values::StrColumn;

/// Per-block directory entry: byte length, record count, record-length block.
const BLOCK_DIR_LEN: usize = 4 + 4 + MiniBlockMeta::ENCODED_LEN;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StringBlock {
    pub record_count: u32,
    /// FOR block of encoded record lengths, located in the lengths payload.
    pub lengths: MiniBlockMeta,
    /// Encoded records back to back; a record never spans blocks.
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarlenPage {
    pub header: PageHeader,
    pub symbol_table: SymbolTable,
    pub blocks: Vec<StringBlock>,
    pub lengths_payload: Vec<u8>,
    pub rid_metas: Vec<MiniBlockMeta>,
    pub rid_payload: Vec<u8>,
    pub footer_checksum: u32,
}

/// Output of the two-pass decode.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DecodedStrings {
    pub rids: Vec<u64>,
    pub strings: StrColumn,
}

impl VarlenPage {
    pub fn is_raw(&self) -> bool {
        self.header.layout == PageLayout::VarlenRaw
    }

    pub fn serialized_len(&self) -> usize {
        HEADER_LEN
            + self.symbol_table.serialized_len()
            + self.blocks.len() * BLOCK_DIR_LEN
            + 4
            + self.lengths_payload.len()
            + self.blocks.iter().map(|b| b.bytes.len()).sum::<usize>()
            + 4
            + self.rid_metas.len() * MiniBlockMeta::ENCODED_LEN
            + 4
            + self.rid_payload.len()
            + FOOTER_LEN
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        self.header.write_to(&mut out);
        self.symbol_table.serialize(&mut out);
        for b in &self.blocks {
            put_u32(&mut out, b.bytes.len() as u32);
            put_u32(&mut out, b.record_count);
            b.lengths.write_to(&mut out);
        }
        put_u32(&mut out, self.lengths_payload.len() as u32);
        out.extend_from_slice(&self.lengths_payload);
        for b in &self.blocks {
            out.extend_from_slice(&b.bytes);
        }
        put_u32(&mut out, self.rid_metas.len() as u32);
        write_metas(&mut out, &self.rid_metas);
        put_u32(&mut out, self.rid_payload.len() as u32);
        out.extend_from_slice(&self.rid_payload);
        seal(&mut out);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, PageError> {
        let (body, footer_checksum) = verify(bytes)?;
        let mut cur = Cursor::new(body);
        let header = PageHeader::read_from(&mut cur)?;
        if !matches!(header.layout, PageLayout::Varlen | PageLayout::VarlenRaw) {
            return Err(PageError::Corrupt("not a variable-length page".into()));
        }
        let (symbol_table, used) = SymbolTable::deserialize(cur.rest())?;
        cur.skip(used, "symbol table")?;
        let nblocks = header.miniblock_count as usize;
        if nblocks > cur.remaining() / BLOCK_DIR_LEN {
            return Err(PageError::Corrupt("block directory exceeds page".into()));
        }
        let mut dir = Vec::with_capacity(nblocks);
        for _ in 0..nblocks {
            let byte_len = cur.u32("block directory")? as usize;
            let record_count = cur.u32("block directory")?;
            let lengths = MiniBlockMeta::read_from(cur.take(MiniBlockMeta::ENCODED_LEN, "block directory")?)?;
            dir.push((byte_len, record_count, lengths));
        }
        let lp_len = cur.u32("lengths payload length")? as usize;
        let lengths_payload = cur.take(lp_len, "lengths payload")?.to_vec();
        let mut blocks = Vec::with_capacity(nblocks);
        for (byte_len, record_count, lengths) in dir {
            let bytes = cur.take(byte_len, "string block")?.to_vec();
            blocks.push(StringBlock {
                record_count,
                lengths,
                bytes,
            });
        }
        let nrid = cur.u32("rid directory")? as usize;
        let rid_metas = read_metas(&mut cur, nrid)?;
        let rp_len = cur.u32("rid payload length")? as usize;
        let rid_payload = cur.take(rp_len, "rid payload")?.to_vec();
        if cur.remaining() != 0 {
            return Err(PageError::Corrupt("trailing bytes after rid block".into()));
        }
        let page = VarlenPage {
            header,
            symbol_table,
            blocks,
            lengths_payload,
            rid_metas,
            rid_payload,
            footer_checksum,
        };
        page.check_structure()?;
        Ok(page)
    }

    fn check_structure(&self) -> Result<(), PageError> {
        let corrupt = |m: &str| Err(PageError::Corrupt(m.to_string()));
        let rid_total: u64 = self.rid_metas.iter().map(|m| m.value_count as u64).sum();
        if rid_total != self.header.value_count as u64 {
            return corrupt("rid count disagrees with header");
        }
        let mut total = 0u64;
        for b in &self.blocks {
            if b.lengths.value_count != b.record_count {
                return corrupt("record count disagrees with length block");
            }
            total += b.record_count as u64;
            if total > self.header.value_count as u64 {
                return corrupt("record count disagrees with header");
            }
            let lens = self.encoded_lengths(b)?;
            if lens.iter().map(|&l| l as u64).sum::<u64>() != b.bytes.len() as u64 {
                return corrupt("record lengths disagree with block size");
            }
        }
        if total != self.header.value_count as u64 {
            return corrupt("record count disagrees with header");
        }
        let rids = self.rids(0..self.header.value_count as usize)?;
        if rids.windows(2).any(|w| w[0] >= w[1]) {
            return corrupt("rids not strictly increasing");
        }
        if rids.first().is_some_and(|&r| r != self.header.first_rid) {
            return corrupt("first rid disagrees with header");
        }
        Ok(())
    }

    fn encoded_lengths(&self, block: &StringBlock) -> Result<Vec<usize>, PageError> {
        let mut lens = Vec::with_capacity(block.record_count as usize);
        for_decode_into(
            &block.lengths,
            &self.lengths_payload,
            WidthClass::W32,
            0..block.lengths.value_count as usize,
            &mut lens,
        )?;
        lens.into_iter()
            .map(|l| usize::try_from(l).map_err(|_| PageError::Corrupt("negative record length".into())))
            .collect()
    }

    /// Embedded RIDs for record positions `range`.
    pub fn rids(&self, range: Range<usize>) -> Result<Vec<u64>, PageError> {
        let mut out = Vec::with_capacity(range.len());
        let mut start = 0;
        let mut total = 0;
        for m in &self.rid_metas {
            let end = start + m.value_count as usize;
            let (lo, hi) = (range.start.max(start), range.end.min(end));
            if lo < hi {
                let mut vals = Vec::with_capacity(hi - lo);
                for_decode_into(m, &self.rid_payload, WidthClass::W64, lo - start..hi - start, &mut vals)?;
                out.extend(vals.into_iter().map(|v| v as u64));
            }
            total = end;
            start = end;
        }
        if range.end > total || range.start > range.end {
            return Err(PageError::RangeOutOfBounds {
                start: range.start,
                end: range.end,
                count: total,
            });
        }
        Ok(out)
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

/// Exclusive prefix sum: output offset of each record.
pub fn record_offsets(lengths: &[usize]) -> Vec<usize> {
    lengths
        .iter()
        .scan(0, |acc, &l| {
            let o = *acc;
            *acc += l;
            Some(o)
        })
        .collect()
}

/// Greedy partition of encoded records into blocks of at most `limit` bytes.
fn partition(lens: &[usize], limit: usize) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut bytes = 0;
    for (i, &l) in lens.iter().enumerate() {
        if i > start && bytes + l > limit {
            out.push(start..i);
            start = i;
            bytes = 0;
        }
        bytes += l;
    }
    if start < lens.len() {
        out.push(start..lens.len());
    }
    out
}

fn block_bits(lens: &[usize], compression: Compression) -> u8 {
    match compression {
        Compression::Plain => 32,
        Compression::TypeSpecific => {
            let min = *lens.iter().min().unwrap();
            let max = *lens.iter().max().unwrap();
            bits_needed((max - min) as u64)
        }
    }
}

/// Serialized size for records with the given encoded lengths.
fn layout_len(lens: &[usize], rids: &[u64], table_len: usize, opts: &PageOptions) -> usize {
    let blocks = partition(lens, opts.string_block_limit);
    let lengths_payload: usize = blocks
        .iter()
        .map(|r| packed_block_len(r.len(), block_bits(&lens[r.clone()], opts.compression)))
        .sum();
    let data: usize = lens.iter().sum();
    let mut rid_blocks = 0;
    let mut rid_payload = 0;
    for chunk in rids.chunks(opts.block_size) {
        let b = match opts.compression {
            Compression::Plain => 64,
            Compression::TypeSpecific => bits_needed(chunk[chunk.len() - 1] - chunk[0]),
        };
        rid_blocks += 1;
        rid_payload += packed_block_len(chunk.len(), b);
    }
    HEADER_LEN
        + table_len
        + blocks.len() * BLOCK_DIR_LEN
        + 4
        + lengths_payload
        + data
        + 4
        + rid_blocks * MiniBlockMeta::ENCODED_LEN
        + 4
        + rid_payload
        + FOOTER_LEN
}

/// Running size of the raw layout (no symbol table, lengths at 32 bits,
/// RIDs at 64 bits) as records are appended. The raw layout bounds the page
/// the loader writes, since it keeps the smaller of the two encodings.
#[derive(Debug, Clone)]
pub struct RawVarlenSizer {
    limit: usize,
    block_size: usize,
    records: usize,
    data: usize,
    closed_blocks: usize,
    closed_lengths: usize,
    open_bytes: usize,
    open_count: usize,
}

impl RawVarlenSizer {
    pub fn new(opts: &PageOptions) -> Self {
        RawVarlenSizer {
            limit: opts.string_block_limit,
            block_size: opts.block_size,
            records: 0,
            data: 0,
            closed_blocks: 0,
            closed_lengths: 0,
            open_bytes: 0,
            open_count: 0,
        }
    }

    pub fn records(&self) -> usize {
        self.records
    }

    fn total(&self, records: usize, data: usize, blocks: usize, lengths: usize) -> usize {
        HEADER_LEN
            + 1
            + blocks * BLOCK_DIR_LEN
            + 4
            + lengths
            + data
            + 4
            + records.div_ceil(self.block_size) * MiniBlockMeta::ENCODED_LEN
            + 4
            + records * 8
            + FOOTER_LEN
    }

    /// Current serialized size; meaningful once a record has been pushed.
    pub fn size(&self) -> usize {
        let open = usize::from(self.open_count > 0);
        self.total(
            self.records,
            self.data,
            self.closed_blocks + open,
            self.closed_lengths + packed_block_len(self.open_count, 32),
        )
    }

    /// Size after appending a record of `len` bytes.
    pub fn size_with(&self, len: usize) -> usize {
        let mut next = self.clone();
        next.push(len);
        next.size()
    }

    pub fn push(&mut self, len: usize) {
        if self.open_count > 0 && self.open_bytes + len > self.limit {
            self.closed_blocks += 1;
            self.closed_lengths += packed_block_len(self.open_count, 32);
            self.open_bytes = 0;
            self.open_count = 0;
        }
        self.open_bytes += len;
        self.open_count += 1;
        self.records += 1;
        self.data += len;
    }
}

/// Encodes strings and their RIDs into one page.
pub fn encode_varlen_page<R: AsRef<[u8]>>(
    records: &[R],
    rids: &[u64],
    opts: &PageOptions,
) -> Result<VarlenPage, PageError> {
    if records.len() != rids.len() {
        return Err(PageError::RidCountMismatch {
            records: records.len(),
            rids: rids.len(),
        });
    }
    if records.is_empty() {
        return Err(PageError::Empty);
    }
    if let Some(i) = rids.windows(2).position(|w| w[0] >= w[1]) {
        return Err(PageError::RidsNotIncreasing(i + 1));
    }
    let (layout, table, encoded): (_, _, Vec<Vec<u8>>) = match opts.compression {
        Compression::Plain => (
            PageLayout::VarlenRaw,
            SymbolTable::empty(),
            records.iter().map(|r| r.as_ref().to_vec()).collect(),
        ),
        Compression::TypeSpecific => {
            let table = fsst_build_table(records);
            let enc = table.encoder();
            let encoded = records.iter().map(|r| enc.encode(r.as_ref())).collect();
            (PageLayout::Varlen, table, encoded)
        }
    };
    let lens: Vec<usize> = encoded.iter().map(Vec::len).collect();
    if let Some(index) = lens.iter().position(|&l| l > opts.string_block_limit) {
        return Err(PageError::OversizedRecord {
            index,
            encoded_len: lens[index],
            limit: opts.string_block_limit,
        });
    }
    let table_len = table.serialized_len();
    let size = layout_len(&lens, rids, table_len, opts);
    if size > opts.page_size {
        let max_prefix = max_fitting_prefix(records.len(), |n| {
            layout_len(&lens[..n], &rids[..n], table_len, opts) <= opts.page_size
        });
        return Err(PageError::Overflow {
            size,
            page_size: opts.page_size,
            max_prefix,
        });
    }

    let mut lengths_payload = Vec::new();
    let mut blocks = Vec::new();
    for r in partition(&lens, opts.string_block_limit) {
        let block_lens: Vec<i64> = lens[r.clone()].iter().map(|&l| l as i64).collect();
        let enc = match opts.compression {
            Compression::Plain => for_compress_plain(&block_lens, WidthClass::W32, block_lens.len())?,
            Compression::TypeSpecific => for_compress(&block_lens, WidthClass::W32, block_lens.len())?,
        };
        let mut lengths = enc.metas[0];
        lengths.byte_offset = lengths_payload.len() as u32;
        lengths_payload.extend_from_slice(&enc.payload);
        blocks.push(StringBlock {
            record_count: r.len() as u32,
            lengths,
            bytes: encoded[r].concat(),
        });
    }
    let rid_vals: Vec<i64> = rids.iter().map(|&r| r as i64).collect();
    let rid_enc = match opts.compression {
        Compression::Plain => for_compress_plain(&rid_vals, WidthClass::W64, opts.block_size)?,
        Compression::TypeSpecific => for_compress_unsigned(rids, opts.block_size),
    };
    let mut page = VarlenPage {
        header: PageHeader {
            page_id: 0,
            column_id: 0,
            layout,
            value_count: records.len() as u32,
            miniblock_count: blocks.len() as u32,
            first_rid: rids[0],
        },
        symbol_table: table,
        blocks,
        lengths_payload,
        rid_metas: rid_enc.metas,
        rid_payload: rid_enc.payload,
        footer_checksum: 0,
    };
    page.reseal();
    debug_assert_eq!(page.serialized_len(), size);
    Ok(page)
}

/// FOR over increasing unsigned RIDs: the first RID of each block is its base.
fn for_compress_unsigned(rids: &[u64], block_size: usize) -> crate::codec::ForEncoded {
    // Reinterpreting as i64 keeps the bit patterns; the block minimum in
    // unsigned order is the first element, which is what the decoder adds back.
    let mut out = crate::codec::ForEncoded::default();
    for chunk in rids.chunks(block_size) {
        let base = chunk[0];
        let b = bits_needed(chunk[chunk.len() - 1] - base);
        let deltas: Vec<i64> = chunk.iter().map(|&r| (r - base) as i64).collect();
        let mut enc = for_compress_plain_width(&deltas, b);
        let mut meta = enc.metas.remove(0);
        meta.base = base as i64;
        meta.byte_offset = out.payload.len() as u32;
        out.payload.extend_from_slice(&enc.payload);
        out.metas.push(meta);
    }
    out
}

/// Packs non-negative deltas at exactly `bit_width` with base 0.
fn for_compress_plain_width(deltas: &[i64], bit_width: u8) -> crate::codec::ForEncoded {
    // for_compress picks base = min delta = 0 (first element) and the same
    // width, since deltas start at 0 and max delta needs `bit_width` bits.
    let enc = for_compress(deltas, WidthClass::W64, deltas.len().max(1)).expect("deltas fit");
    debug_assert_eq!(enc.metas[0].base, 0);
    debug_assert_eq!(enc.metas[0].bit_width, bit_width);
    enc
}

/// Two-pass decode of record positions `range` (default: all records).
///
/// Pass one sums decoded lengths and derives each record's output offset;
/// pass two decodes every record into its slot of one shared buffer.
pub fn decode_varlen_flat(
    page: &VarlenPage,
    range: Option<Range<usize>>,
) -> Result<DecodedStrings, PageError> {
    let count = page.header.value_count as usize;
    let range = range.unwrap_or(0..count);
    if range.start > range.end || range.end > count {
        return Err(PageError::RangeOutOfBounds {
            start: range.start,
            end: range.end,
            count,
        });
    }
    // Locate encoded slices for the requested records.
    let mut encoded: Vec<&[u8]> = Vec::with_capacity(range.len());
    let mut first = 0;
    for b in &page.blocks {
        let last = first + b.record_count as usize;
        if last > range.start && first < range.end {
            let lens = page.encoded_lengths(b)?;
            let mut pos = 0;
            for (i, l) in lens.into_iter().enumerate() {
                let idx = first + i;
                if idx >= range.start && idx < range.end {
                    encoded.push(&b.bytes[pos..pos + l]);
                }
                pos += l;
            }
        }
        if last >= range.end {
            break;
        }
        first = last;
    }

    let raw = page.is_raw();
    let decoded_lens: Vec<usize> = encoded
        .iter()
        .map(|e| {
            if raw {
                Ok(e.len())
            } else {
                fsst_decoded_len(&page.symbol_table, e)
            }
        })
        .collect::<Result<_, _>>()?;
    let starts = record_offsets(&decoded_lens);
    let total = starts.last().map_or(0, |s| s + decoded_lens[decoded_lens.len() - 1]);
    let mut data = vec![0u8; total];
    for ((e, &start), &len) in encoded.iter().zip(&starts).zip(&decoded_lens) {
        let slot = &mut data[start..start + len];
        if raw {
            slot.copy_from_slice(e);
        } else {
            fsst_decode_into(&page.symbol_table, e, slot)?;
        }
    }
    let mut offsets = starts;
    offsets.push(total);
    Ok(DecodedStrings {
        rids: page.rids(range)?,
        strings: StrColumn::from_parts(offsets, data),
    })
}

/// Decodes every record as `(rid, bytes)` in RID order.
pub fn decode_varlen_page(page: &VarlenPage) -> Result<Vec<(u64, Vec<u8>)>, PageError> {
    let d = decode_varlen_flat(page, None)?;
    Ok(d.rids.into_iter().zip(d.strings.into_vecs()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::page::{Page, STRING_BLOCK_LIMIT};
    use rand::{Rng, SeedableRng};

    fn opts() -> PageOptions {
        PageOptions::default()
    }

    #[test]
    fn repeated_value_compresses() {
        let recs = vec![b"AUTOMOBILE".to_vec(); 100];
        let rids: Vec<u64> = (0..100).collect();
        let p = encode_varlen_page(&recs, &rids, &opts()).unwrap();
        assert_eq!(p.blocks.len(), 1);
        let encoded: usize = p.blocks.iter().map(|b| b.bytes.len()).sum();
        assert!(encoded < 1000, "{encoded}");
        let back = decode_varlen_page(&p).unwrap();
        assert_eq!(back, rids.into_iter().zip(recs).collect::<Vec<_>>());
    }

    #[test]
    fn single_record_page() {
        let p = encode_varlen_page(&[b"x"], &[7], &opts()).unwrap();
        assert_eq!(p.blocks.len(), 1);
        assert_eq!(p.rids(0..1).unwrap(), vec![7]);
        assert_eq!(decode_varlen_page(&p).unwrap(), vec![(7, b"x".to_vec())]);
        let d = decode_varlen_flat(&p, None).unwrap();
        assert_eq!(record_offsets(&[d.strings.get(0).len()]), vec![0]);
    }

    #[test]
    fn offsets_are_exclusive_prefix_sums() {
        assert_eq!(record_offsets(&[4, 2, 5]), vec![0, 4, 6]);
        assert_eq!(record_offsets(&[3]), vec![0]);
        assert!(record_offsets(&[]).is_empty());
    }

    #[test]
    fn random_record_exceeds_block_limit() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let rec: Vec<u8> = (0..20 * 1024).map(|_| rng.gen()).collect();
        // escape-only worst case is twice the input, far above the limit
        assert!(rec.len() > STRING_BLOCK_LIMIT);
        let err = encode_varlen_page(&[rec], &[0], &opts()).unwrap_err();
        assert!(matches!(err, PageError::OversizedRecord { index: 0, .. }), "{err}");
    }

    #[test]
    fn blocks_respect_limit_and_records_do_not_span() {
        let recs: Vec<Vec<u8>> = (0..3000)
            .map(|i| format!("record {i} with some filler text {}", i * 31 % 97).into_bytes())
            .collect();
        let rids: Vec<u64> = (1000..4000).collect();
        let p = encode_varlen_page(&recs, &rids, &opts()).unwrap();
        assert!(p.blocks.len() > 1);
        assert!(p.blocks.iter().all(|b| b.bytes.len() <= STRING_BLOCK_LIMIT));
        assert_eq!(p.blocks.iter().map(|b| b.record_count).sum::<u32>(), 3000);
        let parsed = match Page::parse(&p.to_bytes()).unwrap() {
            Page::Varlen(v) => v,
            _ => unreachable!(),
        };
        assert_eq!(parsed, p);
        let d = decode_varlen_flat(&parsed, Some(1500..1503)).unwrap();
        assert_eq!(d.rids, vec![2500, 2501, 2502]);
        assert_eq!(d.strings.into_vecs(), recs[1500..1503].to_vec());
    }

    #[test]
    fn input_validation() {
        assert!(matches!(
            encode_varlen_page(&[b"a", b"b"], &[0], &opts()),
            Err(PageError::RidCountMismatch { .. })
        ));
        assert!(matches!(
            encode_varlen_page(&[b"a", b"b"], &[3, 3], &opts()),
            Err(PageError::RidsNotIncreasing(1))
        ));
        assert_eq!(
            encode_varlen_page::<&[u8]>(&[], &[], &opts()),
            Err(PageError::Empty)
        );
    }

    #[test]
    fn raw_layout_roundtrip() {
        let o = PageOptions {
            compression: Compression::Plain,
            ..opts()
        };
        let recs = vec![b"".to_vec(), vec![0u8, 255, 255], b"plain".to_vec()];
        let p = encode_varlen_page(&recs, &[0, 5, 9], &o).unwrap();
        assert!(p.is_raw());
        assert!(p.symbol_table.is_empty());
        assert_eq!(
            decode_varlen_page(&p).unwrap(),
            vec![(0, recs[0].clone()), (5, recs[1].clone()), (9, recs[2].clone())]
        );
    }

    #[test]
    fn overflow_reports_prefix() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let recs: Vec<Vec<u8>> = (0..4000)
            .map(|i| (0..20 + i % 40).map(|_| rng.gen_range(b'a'..=b'z')).collect())
            .collect();
        let rids: Vec<u64> = (0..4000).collect();
        let o = PageOptions {
            page_size: 64 << 10,
            ..opts()
        };
        let err = encode_varlen_page(&recs, &rids, &o).unwrap_err();
        let PageError::Overflow { max_prefix, .. } = err else {
            panic!("{err}")
        };
        assert!(max_prefix > 0 && max_prefix < recs.len());
    }

    #[test]
    fn raw_sizer_matches_encoder() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let o = PageOptions {
            compression: Compression::Plain,
            ..opts()
        };
        let recs: Vec<Vec<u8>> = (0..700)
            .map(|_| {
                let n = if rng.gen_bool(0.05) { rng.gen_range(3000..9216) } else { rng.gen_range(0..60) };
                vec![b'z'; n]
            })
            .collect();
        let mut sizer = RawVarlenSizer::new(&o);
        for (i, r) in recs.iter().enumerate() {
            let predicted = sizer.size_with(r.len());
            sizer.push(r.len());
            assert_eq!(sizer.size(), predicted);
            if i % 97 == 0 || i == recs.len() - 1 {
                let rids: Vec<u64> = (0..=i as u64).collect();
                let big = PageOptions { page_size: 64 << 20, ..o };
                let p = encode_varlen_page(&recs[..=i], &rids, &big).unwrap();
                assert_eq!(p.serialized_len(), sizer.size(), "prefix {i}");
            }
        }
    }

    #[test]
    fn huge_rids_roundtrip() {
        let rids = [u64::MAX - 2, u64::MAX - 1];
        let p = encode_varlen_page(&[b"a", b"b"], &rids, &opts()).unwrap();
        assert_eq!(p.rids(0..2).unwrap(), rids);
    }
}
