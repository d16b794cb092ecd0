// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

// Fixed inputs whose encoded bytes are checked in under tests/golden.

use std::path::{Path, PathBuf};

use pathfuse_core::codec::ColumnType;
use pathfuse_core::loader::{load, LoadOptions};
use pathfuse_core::page::{encode_fixed_page, encode_varlen_page, Compression, PageOptions};
use pathfuse_core::schema::{ColumnDef, ReferenceDef, Schema, TableDef, TableData, Value};
use pathfuse_core::values::ColumnValues;

/// Also included by the bench crate's acceptance suite, hence the sibling path.
pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden")
}

fn words(i: usize) -> Vec<u8> {
    const W: [&str; 8] = ["quick", "special", "requests", "deposits", "furious", "pending", "ideas", "sleep"];
    let n = 2 + i % 5;
    (0..n).map(|k| W[(i * 7 + k * 3) % 8]).collect::<Vec<_>>().join(" ").into_bytes()
}

fn col(name: &str, t: ColumnType) -> ColumnDef {
    ColumnDef { name: name.into(), col_type: t }
}

fn tiny_db() -> Vec<(String, Vec<u8>)> {
    let schema = Schema {
        tables: vec![
            TableDef {
                name: "dim".into(),
                columns: vec![col("k", ColumnType::Int32), col("g", ColumnType::Int32)],
                cluster_key: "k".into(),
                zone_attrs: vec!["g".into()],
                references: vec![],
            },
            TableDef {
                name: "fact".into(),
                columns: vec![
                    col("d", ColumnType::Date),
                    col("fk", ColumnType::Int32),
                    col("amt", ColumnType::Decimal18_2),
                    col("flag", ColumnType::Char(1)),
                    col("note", ColumnType::Varchar),
                ],
                cluster_key: "d".into(),
                zone_attrs: vec!["d".into()],
                references: vec![ReferenceDef {
                    fk_column: "fk".into(),
                    dim_table: "dim".into(),
                    dim_key: "k".into(),
                    dim_attr: "g".into(),
                }],
            },
        ],
    };
    let mut dim = TableData::empty(&schema.tables[0]);
    for k in 0..50 {
        dim.push_row(vec![Value::Int(k), Value::Int(k / 10)]);
    }
    let mut fact = TableData::empty(&schema.tables[1]);
    for i in 0..6_000i64 {
        let d = 8000 + (i * 37) % 2500;
        fact.push_row(vec![
            Value::Int(d),
            Value::Int((d - 8000) / 50),
            Value::Int((i * 131) % 100_000),
            Value::Bytes(vec![b"AFNR"[(i % 4) as usize]]),
            Value::Bytes(words(i as usize)),
        ]);
    }
    let opts = LoadOptions {
        page: PageOptions { page_size: 64 << 10, ..PageOptions::default() },
        devices: 2,
        workers: 3,
        device_capacity: None,
    };
    let loaded = load(&schema, &[dim, fact], &opts).expect("fixture loads");
    let mut out: Vec<(String, Vec<u8>)> = loaded
        .side_file_blobs()
        .into_iter()
        .map(|(p, b)| (format!("db/{}", p.to_string_lossy().replace('\\', "/")), b))
        .collect();
    for (k, img) in loaded.images.into_iter().enumerate() {
        out.push((format!("db/dev{k}.img"), img));
    }
    out
}

/// `(relative path, bytes)` for every golden artifact.
pub fn fixture() -> Vec<(String, Vec<u8>)> {
    let opts = PageOptions::default();
    let plain = PageOptions { compression: Compression::Plain, ..opts };
    let mut out = Vec::new();

    let ints = ColumnValues::Int((0..1000).map(|i| i * 7 - 300 + (i % 13) * 1000).collect());
    let mut p = encode_fixed_page(&ints, ColumnType::Int32, 0, &opts).unwrap();
    p.set_page_id(5);
    p.set_column_id(2);
    out.push(("int32_for.page".to_string(), p.to_bytes()));
    out.push(("int32_plain.page".to_string(), encode_fixed_page(&ints, ColumnType::Int32, 0, &plain).unwrap().to_bytes()));

    let wide = ColumnValues::Int((0..700i64).map(|i| (i << 40) - (i * i * 977)).collect());
    out.push(("int64_for.page".to_string(), encode_fixed_page(&wide, ColumnType::Int64, 1000, &opts).unwrap().to_bytes()));

    let flags = ColumnValues::Bytes((0..300).map(|i| vec![b"AFNR"[i % 4]]).collect());
    out.push(("char1.page".to_string(), encode_fixed_page(&flags, ColumnType::Char(1), 0, &opts).unwrap().to_bytes()));

    let recs: Vec<Vec<u8>> = (0..400).map(words).collect();
    let rids: Vec<u64> = (0..400).map(|i| 10 + 2 * i).collect();
    out.push(("varlen_fsst.page".to_string(), encode_varlen_page(&recs, &rids, &opts).unwrap().to_bytes()));
    out.push(("varlen_raw.page".to_string(), encode_varlen_page(&recs, &rids, &plain).unwrap().to_bytes()));

    out.extend(tiny_db());
    out
}
