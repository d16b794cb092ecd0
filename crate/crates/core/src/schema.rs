// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Table schemas and the pipe-delimited row format.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::ColumnType;
use crate::values::ColumnValues;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error("table {table} has no column {column}")]
    UnknownColumn { table: String, column: String },
    #[error("duplicate name {0}")]
    Duplicate(String),
    #[error("table {0} has no columns")]
    NoColumns(String),
    #[error("reference on {table}.{column}: {reason}")]
    BadReference {
        table: String,
        column: String,
        reason: String,
    },
    #[error("zone-mapped attribute {table}.{column} has a type that cannot be ordered as an integer")]
    NotZoneMappable { table: String, column: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: cannot parse {text:?} as {col_type}")]
    BadValue {
        line: usize,
        column: String,
        text: String,
        col_type: ColumnType,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    #[serde(rename = "type")]
    pub col_type: ColumnType,
}

/// One-hop join mapping: rows of this table reach `dim_table` through
/// `fk_column = dim_key`, and the page bounds of `dim_attr` are recorded on
/// `fk_column`'s pages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceDef {
    pub fk_column: String,
    pub dim_table: String,
    pub dim_key: String,
    pub dim_attr: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: String,
    pub columns: Vec<ColumnDef>,
    pub cluster_key: String,
    #[serde(default)]
    pub zone_attrs: Vec<String>,
    #[serde(default)]
    pub references: Vec<ReferenceDef>,
}

impl TableDef {
    pub fn column_index(&self, name: &str) -> Result<usize, SchemaError> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| SchemaError::UnknownColumn {
                table: self.name.clone(),
                column: name.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Schema {
    pub tables: Vec<TableDef>,
}

/// Whether a type's values order as 64-bit integer keys.
pub fn is_zone_mappable(t: ColumnType) -> bool {
    !t.is_bytes() || t.is_fixed()
}

impl Schema {
    pub fn table(&self, name: &str) -> Result<&TableDef, SchemaError> {
        self.tables
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| SchemaError::UnknownTable(name.to_string()))
    }

    pub fn table_index(&self, name: &str) -> Result<usize, SchemaError> {
        self.tables
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| SchemaError::UnknownTable(name.to_string()))
    }

    /// Global column id: columns numbered in table order, then column order.
    pub fn column_id(&self, table: &str, column: &str) -> Result<u32, SchemaError> {
        let ti = self.table_index(table)?;
        let before: usize = self.tables[..ti].iter().map(|t| t.columns.len()).sum();
        Ok((before + self.tables[ti].column_index(column)?) as u32)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        let mut names = std::collections::HashSet::new();
        for t in &self.tables {
            if !names.insert(&t.name) {
                return Err(SchemaError::Duplicate(t.name.clone()));
            }
            if t.columns.is_empty() {
                return Err(SchemaError::NoColumns(t.name.clone()));
            }
            let mut cols = std::collections::HashSet::new();
            for c in &t.columns {
                if !cols.insert(&c.name) {
                    return Err(SchemaError::Duplicate(format!("{}.{}", t.name, c.name)));
                }
            }
            t.column_index(&t.cluster_key)?;
            for a in &t.zone_attrs {
                let i = t.column_index(a)?;
                if !is_zone_mappable(t.columns[i].col_type) {
                    return Err(SchemaError::NotZoneMappable {
                        table: t.name.clone(),
                        column: a.clone(),
                    });
                }
            }
            for r in &t.references {
                let bad = |reason: &str| SchemaError::BadReference {
                    table: t.name.clone(),
                    column: r.fk_column.clone(),
                    reason: reason.to_string(),
                };
                let fk = t.columns[t.column_index(&r.fk_column)?].col_type;
                let dim = self.table(&r.dim_table)?;
                let key = dim.columns[dim.column_index(&r.dim_key)?].col_type;
                let attr = dim.columns[dim.column_index(&r.dim_attr)?].col_type;
                if fk.is_bytes() || key.is_bytes() {
                    return Err(bad("join keys must be integers"));
                }
                if !is_zone_mappable(attr) {
                    return Err(bad("dimension attribute cannot be ordered as an integer"));
                }
            }
        }
        Ok(())
    }
}

const EPOCH: NaiveDate = match NaiveDate::from_ymd_opt(1970, 1, 1) {
    Some(d) => d,
    None => unreachable!(),
};

/// Days since 1970-01-01 for a `YYYY-MM-DD` date.
pub fn parse_date(text: &str) -> Option<i64> {
    let d = NaiveDate::parse_from_str(text, "%Y-%m-%d").ok()?;
    Some((d - EPOCH).num_days())
}

pub fn format_date(days: i64) -> String {
    let d = EPOCH + chrono::Duration::days(days);
    format!("{:04}-{:02}-{:02}", d.year(), d.month(), d.day())
}

/// Fixed-point text with at most two fractional digits, scaled by 100.
pub fn parse_decimal(text: &str) -> Option<i64> {
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) if digits(f) => (i, f),
        Some(_) => return None,
        None => (body, ""),
    };
    if !digits(int) || frac.len() > 2 {
        return None;
    }
    let mut v: i64 = int.parse::<i64>().ok()?.checked_mul(100)?;
    if !frac.is_empty() {
        let f: i64 = frac.parse().ok()?;
        v = v.checked_add(if frac.len() == 1 { f * 10 } else { f })?;
    }
    Some(if neg { -v } else { v })
}

pub fn format_decimal(v: i64) -> String {
    let sign = if v < 0 { "-" } else { "" };
    let a = v.unsigned_abs();
    format!("{sign}{}.{:02}", a / 100, a % 100)
}

/// A parsed value before it is placed into a column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Bytes(Vec<u8>),
}

pub fn parse_value(text: &str, t: ColumnType) -> Option<Value> {
    match t {
        ColumnType::Int32 => text.parse::<i32>().ok().map(|v| Value::Int(v as i64)),
        ColumnType::Int64 => text.parse::<i64>().ok().map(Value::Int),
        ColumnType::Decimal18_2 => parse_decimal(text)
            .filter(|v| i32::try_from(*v).is_ok())
            .map(Value::Int),
        ColumnType::Date => parse_date(text).map(Value::Int),
        ColumnType::Char(n) => {
            (text.len() <= n as usize).then(|| Value::Bytes(pad_char(text.as_bytes(), n)))
        }
        ColumnType::Varchar => Some(Value::Bytes(text.as_bytes().to_vec())),
    }
}

/// CHAR(n) values are stored space padded to `n` bytes.
pub fn pad_char(v: &[u8], n: u16) -> Vec<u8> {
    let mut out = v.to_vec();
    out.resize((n as usize).max(v.len()), b' ');
    out
}

pub fn format_value(v: &Value, t: ColumnType) -> String {
    match (v, t) {
        (Value::Int(x), ColumnType::Decimal18_2) => format_decimal(*x),
        (Value::Int(x), ColumnType::Date) => format_date(*x),
        (Value::Int(x), _) => x.to_string(),
        (Value::Bytes(b), ColumnType::Char(_)) => {
            String::from_utf8_lossy(b).trim_end_matches(' ').to_string()
        }
        (Value::Bytes(b), _) => String::from_utf8_lossy(b).into_owned(),
    }
}

/// Column-oriented contents of one table, in schema column order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableData {
    pub columns: Vec<ColumnValues>,
}

impl TableData {
    pub fn empty(def: &TableDef) -> Self {
        TableData {
            columns: def
                .columns
                .iter()
                .map(|c| {
                    if c.col_type.is_bytes() {
                        ColumnValues::Bytes(Vec::new())
                    } else {
                        ColumnValues::Int(Vec::new())
                    }
                })
                .collect(),
        }
    }

    pub fn row_count(&self) -> usize {
        self.columns.first().map_or(0, ColumnValues::len)
    }

    pub fn push_row(&mut self, row: Vec<Value>) {
        for (col, v) in self.columns.iter_mut().zip(row) {
            match (col, v) {
                (ColumnValues::Int(c), Value::Int(x)) => c.push(x),
                (ColumnValues::Bytes(c), Value::Bytes(b)) => c.push(b),
                _ => unreachable!("value kind follows the column type"),
            }
        }
    }

    pub fn row(&self, i: usize) -> Vec<Value> {
        self.columns
            .iter()
            .map(|c| match c {
                ColumnValues::Int(v) => Value::Int(v[i]),
                ColumnValues::Bytes(v) => Value::Bytes(v[i].clone()),
            })
            .collect()
    }
}

/// Parses one `|`-separated line. A single trailing `|` is allowed.
pub fn parse_row(line: &str, def: &TableDef, line_no: usize) -> Result<Vec<Value>, SchemaError> {
    let line = line.strip_suffix('|').unwrap_or(line);
    let fields: Vec<&str> = line.split('|').collect();
    if fields.len() != def.columns.len() {
        return Err(SchemaError::FieldCount {
            line: line_no,
            expected: def.columns.len(),
            found: fields.len(),
        });
    }
    fields
        .iter()
        .zip(&def.columns)
        .map(|(f, c)| {
            parse_value(f, c.col_type).ok_or_else(|| SchemaError::BadValue {
                line: line_no,
                column: c.name.clone(),
                text: f.to_string(),
                col_type: c.col_type,
            })
        })
        .collect()
}

/// Parses a whole `.tbl` text; blank lines are skipped.
pub fn parse_table(text: &str, def: &TableDef) -> Result<TableData, SchemaError> {
    let mut data = TableData::empty(def);
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        data.push_row(parse_row(line, def, i + 1)?);
    }
    Ok(data)
}

pub fn format_row(row: &[Value], def: &TableDef) -> String {
    let mut out = String::new();
    for (v, c) in row.iter().zip(&def.columns) {
        out.push_str(&format_value(v, c.col_type));
        out.push('|');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn def() -> TableDef {
        TableDef {
            name: "t".into(),
            columns: vec![
                ColumnDef { name: "k".into(), col_type: ColumnType::Int64 },
                ColumnDef { name: "p".into(), col_type: ColumnType::Decimal18_2 },
                ColumnDef { name: "d".into(), col_type: ColumnType::Date },
                ColumnDef { name: "f".into(), col_type: ColumnType::Char(1) },
                ColumnDef { name: "s".into(), col_type: ColumnType::Varchar },
            ],
            cluster_key: "d".into(),
            zone_attrs: vec!["d".into(), "f".into()],
            references: vec![],
        }
    }

    #[test]
    fn dates() {
        assert_eq!(parse_date("1970-01-01"), Some(0));
        assert_eq!(parse_date("1970-01-02"), Some(1));
        assert_eq!(parse_date("1969-12-31"), Some(-1));
        assert_eq!(parse_date("1995-02-30"), None);
        assert_eq!(format_date(parse_date("1998-12-01").unwrap()), "1998-12-01");
    }

    #[test]
    fn decimals() {
        assert_eq!(parse_decimal("12.34"), Some(1234));
        assert_eq!(parse_decimal("12.3"), Some(1230));
        assert_eq!(parse_decimal("-0.05"), Some(-5));
        assert_eq!(parse_decimal("7"), Some(700));
        for bad in ["", ".5", "1.", "1.234", "1e3", "--1", "a.00"] {
            assert_eq!(parse_decimal(bad), None, "{bad}");
        }
        assert_eq!(format_decimal(-5), "-0.05");
        assert_eq!(format_decimal(123456), "1234.56");
    }

    #[test]
    fn row_roundtrip() {
        let d = def();
        let row = parse_row("42|19.99|1996-03-13|N|hello world|", &d, 1).unwrap();
        assert_eq!(
            row,
            vec![
                Value::Int(42),
                Value::Int(1999),
                Value::Int(parse_date("1996-03-13").unwrap()),
                Value::Bytes(b"N".to_vec()),
                Value::Bytes(b"hello world".to_vec()),
            ]
        );
        assert_eq!(format_row(&row, &d), "42|19.99|1996-03-13|N|hello world|");
        let t = parse_table("1|0.00|1970-01-01|A|x|\n\n2|1.00|1970-01-02||y|\n", &d).unwrap();
        assert_eq!(t.row_count(), 2);
        assert_eq!(t.row(1)[3], Value::Bytes(b" ".to_vec()));
    }

    #[test]
    fn row_errors() {
        let d = def();
        assert!(matches!(parse_row("1|2", &d, 3), Err(SchemaError::FieldCount { line: 3, .. })));
        assert!(matches!(
            parse_row("1|x|1970-01-01|A|s", &d, 1),
            Err(SchemaError::BadValue { .. })
        ));
        assert!(matches!(
            parse_row("1|1|1970-01-01|AB|s", &d, 1),
            Err(SchemaError::BadValue { .. })
        ));
    }

    #[test]
    fn schema_validation_and_ids() {
        let mut s = Schema { tables: vec![def(), def()] };
        assert!(matches!(s.validate(), Err(SchemaError::Duplicate(_))));
        s.tables[1].name = "u".into();
        s.validate().unwrap();
        assert_eq!(s.column_id("u", "d").unwrap(), 7);
        s.tables[1].zone_attrs.push("s".into());
        assert!(matches!(s.validate(), Err(SchemaError::NotZoneMappable { .. })));
        s.tables[1].zone_attrs.pop();
        s.tables[1].references.push(ReferenceDef {
            fk_column: "k".into(),
            dim_table: "t".into(),
            dim_key: "k".into(),
            dim_attr: "s".into(),
        });
        assert!(matches!(s.validate(), Err(SchemaError::BadReference { .. })));
    }
}
