// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Entry points shared by the cargo-fuzz targets under `fuzz/` and the corpus
//! replay test. Each takes arbitrary bytes, must never panic on malformed
//! input, and asserts round-trip properties on anything that parses.

use crate::catalog::{read_offsets, read_rids, read_sizes, read_zone_map, write_rids, write_zone_map};
use crate::codec::{
    for_decompress, for_decompress_range, fsst_decode_record, fsst_decoded_len, ColumnType,
    MiniBlockMeta, SymbolTable, WidthClass,
};
use crate::page::{decode_fixed_page, decode_varlen_page, Page};
use crate::schema::{format_row, parse_row, parse_table, ColumnDef, TableDef};

/// Serialized page bytes.
pub fn page(data: &[u8]) {
    let Ok(page) = Page::parse(data) else { return };
    let bytes = page.to_bytes();
    assert_eq!(bytes.len(), page.serialized_len());
    assert_eq!(Page::parse(&bytes).expect("reserialized page parses"), page);
    match &page {
        Page::Fixed(p) => {
            for t in [ColumnType::Int32, ColumnType::Int64, ColumnType::Char(2)] {
                if let Ok(v) = decode_fixed_page(p, t, None) {
                    assert_eq!(v.len(), p.header.value_count as usize);
                }
            }
        }
        Page::Varlen(p) => {
            if let Ok(v) = decode_varlen_page(p) {
                assert_eq!(v.len(), p.header.value_count as usize);
            }
        }
    }
}

/// A serialized symbol table.
pub fn symbol_table(data: &[u8]) {
    let Ok((table, used)) = SymbolTable::deserialize(data) else { return };
    let mut out = Vec::new();
    table.serialize(&mut out);
    assert_eq!(out, &data[..used]);
    assert_eq!(table.serialized_len(), used);
}

/// A symbol table followed by one encoded record.
pub fn fsst_decode(data: &[u8]) {
    let Ok((table, used)) = SymbolTable::deserialize(data) else { return };
    let encoded = &data[used..];
    let len = fsst_decoded_len(&table, encoded);
    let rec = fsst_decode_record(&table, encoded);
    match (len, rec) {
        (Ok(n), Ok(r)) => assert_eq!(n, r.len()),
        (Err(_), Err(_)) => {}
        (l, r) => panic!("length pass {l:?} disagrees with decode {r:?}"),
    }
}

/// A mini block descriptor followed by its packed payload.
pub fn for_decode(data: &[u8]) {
    let Ok(meta) = MiniBlockMeta::read_from(data) else { return };
    let payload = &data[MiniBlockMeta::ENCODED_LEN..];
    for width in [WidthClass::W32, WidthClass::W64] {
        let Ok(all) = for_decompress(&meta, payload, width) else { continue };
        assert_eq!(all.len(), meta.value_count as usize);
        let (a, b) = (all.len() / 3, all.len() - all.len() / 4);
        let part = for_decompress_range(&meta, payload, width, a..b).expect("sub-range of a good block");
        assert_eq!(part, all[a..b]);
    }
}

/// First byte picks the side-file kind, the rest is its contents.
pub fn side_file(data: &[u8]) {
    let Some((&kind, body)) = data.split_first() else { return };
    match kind % 4 {
        0 => {
            if let Ok(v) = read_offsets(body) {
                assert_eq!(v.len() * 8, body.len());
            }
        }
        1 => {
            if let Ok(v) = read_sizes(body) {
                assert_eq!(v.len() * 4, body.len());
            }
        }
        2 => {
            if let Ok(idx) = read_rids(body) {
                assert_eq!(write_rids(&idx), body);
                let total = idx.cumulative().last().copied().unwrap_or(0);
                for rid in [0, total / 2, total.saturating_sub(1)] {
                    if let Ok(p) = idx.rid_to_page(rid) {
                        assert!(idx.span(p).contains(&rid));
                    }
                }
            }
        }
        _ => {
            if let Ok(zm) = read_zone_map(body) {
                if !zm.pages.is_empty() {
                    assert_eq!(write_zone_map(&zm), body);
                }
            }
        }
    }
}

/// Table text against a fixed definition covering every column type.
pub fn rows(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let def = row_def();
    let Ok(table) = parse_table(text, &def) else { return };
    for i in 0..table.row_count() {
        let row = table.row(i);
        let line = format_row(&row, &def);
        assert_eq!(parse_row(&line, &def, 1).expect("formatted row parses"), row);
    }
}

pub fn row_def() -> TableDef {
    let col = |name: &str, col_type| ColumnDef { name: name.into(), col_type };
    TableDef {
        name: "t".into(),
        columns: vec![
            col("a", ColumnType::Int32),
            col("b", ColumnType::Int64),
            col("c", ColumnType::Decimal18_2),
            col("d", ColumnType::Date),
            col("e", ColumnType::Char(1)),
            col("f", ColumnType::Char(10)),
            col("g", ColumnType::Varchar),
        ],
        cluster_key: "a".into(),
        zone_attrs: Vec::new(),
        references: Vec::new(),
    }
}
