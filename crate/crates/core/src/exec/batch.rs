// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Decoded rows of a page group and the per-row operators.

use std::ops::Range;

use crate::codec::ColumnType;
use crate::page::{decode_fixed_into, decode_varlen_flat, Page, PageError};
use crate::values::StrColumn;

use super::hash::HashTable;
use super::{ExecError, Predicate};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Col {
    Int(Vec<i64>),
    Str(StrColumn),
}

impl Col {
    pub fn empty_for(t: ColumnType) -> Col {
        if t.is_fixed() {
            Col::Int(Vec::new())
        } else {
            Col::Str(StrColumn::new())
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Col::Int(v) => v.len(),
            Col::Str(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn footprint(&self) -> usize {
        match self {
            Col::Int(v) => v.len() * 8,
            Col::Str(s) => s.footprint(),
        }
    }

    fn select(&self, keep: &[bool]) -> Col {
        match self {
            Col::Int(v) => Col::Int(v.iter().zip(keep).filter(|(_, &k)| k).map(|(x, _)| *x).collect()),
            Col::Str(s) => {
                let mut out = StrColumn::new();
                for (i, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
                    out.push(s.get(i));
                }
                Col::Str(out)
            }
        }
    }

    fn slice(&self, r: Range<usize>) -> Col {
        match self {
            Col::Int(v) => Col::Int(v[r].to_vec()),
            Col::Str(s) => {
                let mut out = StrColumn::new();
                out.extend_from(s, r);
                Col::Str(out)
            }
        }
    }

    fn append(&mut self, other: Col) {
        match (self, other) {
            (Col::Int(a), Col::Int(b)) => a.extend(b),
            (Col::Str(a), Col::Str(b)) => {
                let n = b.len();
                a.extend_from(&b, 0..n)
            }
            _ => unreachable!("slot types are fixed by the plan"),
        }
    }
}

/// Appends rows `range` (page-local) of a parsed page to `col`.
pub fn decode_page_rows(page: &Page, t: ColumnType, range: Range<usize>, col: &mut Col) -> Result<(), PageError> {
    match (page, col) {
        (Page::Fixed(p), Col::Int(out)) => decode_fixed_into(p, t, Some(range), out),
        (Page::Varlen(p), Col::Str(out)) => {
            let d = decode_varlen_flat(p, Some(range))?;
            let n = d.strings.len();
            out.extend_from(&d.strings, 0..n);
            Ok(())
        }
        _ => Err(PageError::WrongLayout(t)),
    }
}

/// Columnar rows; slot order is input columns then probe payloads.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Batch {
    cols: Vec<Col>,
    rows: usize,
}

impl Batch {
    pub fn new(cols: Vec<Col>) -> Self {
        let rows = cols.first().map_or(0, Col::len);
        debug_assert!(cols.iter().all(|c| c.len() == rows));
        Batch { cols, rows }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> &[Col] {
        &self.cols
    }

    pub fn int(&self, slot: usize) -> &[i64] {
        match &self.cols[slot] {
            Col::Int(v) => v,
            Col::Str(_) => panic!("slot {slot} holds strings"),
        }
    }

    pub fn str(&self, slot: usize) -> &StrColumn {
        match &self.cols[slot] {
            Col::Str(s) => s,
            Col::Int(_) => panic!("slot {slot} holds integers"),
        }
    }

    pub fn footprint(&self) -> usize {
        self.cols.iter().map(Col::footprint).sum()
    }

    pub fn select(&self, keep: &[bool]) -> Batch {
        let rows = keep.iter().filter(|&&k| k).count();
        Batch {
            cols: self.cols.iter().map(|c| c.select(keep)).collect(),
            rows,
        }
    }

    pub fn slice(&self, r: Range<usize>) -> Batch {
        Batch {
            cols: self.cols.iter().map(|c| c.slice(r.clone())).collect(),
            rows: r.len(),
        }
    }

    /// Concatenates batches with identical slot types.
    pub fn concat(parts: Vec<Batch>) -> Batch {
        let mut it = parts.into_iter();
        let Some(mut out) = it.next() else {
            return Batch::default();
        };
        for b in it {
            out.rows += b.rows;
            for (a, c) in out.cols.iter_mut().zip(b.cols) {
                a.append(c);
            }
        }
        out
    }
}

fn eval(pred: &Predicate, batch: &Batch, row: usize) -> bool {
    match pred {
        Predicate::Cmp { slot, cmp } => cmp.matches(batch.int(*slot)[row]),
        Predicate::StrEq { slot, value } => batch.str(*slot).get(row) == value.as_slice(),
        Predicate::Like { slot, pattern, negated } => pattern.matches(batch.str(*slot).get(row)) != *negated,
    }
}

/// Selection bitmap of a conjunction over the batch rows.
pub fn filter_apply(preds: &[Predicate], batch: &Batch) -> Vec<bool> {
    let mut bits = vec![true; batch.rows()];
    for p in preds {
        for (row, b) in bits.iter_mut().enumerate() {
            if *b {
                *b = eval(p, batch, row);
            }
        }
    }
    bits
}

/// Inner join against a built table: keeps matching rows and appends the payload.
pub fn probe_apply(table: &HashTable, key: usize, batch: &Batch) -> Batch {
    let keys = batch.int(key);
    let mut keep = vec![false; batch.rows()];
    let mut payload: Vec<Vec<i64>> = vec![Vec::new(); table.width()];
    for (row, &k) in keys.iter().enumerate() {
        if let Some(p) = table.probe(k) {
            keep[row] = true;
            for (dst, v) in payload.iter_mut().zip(p) {
                dst.push(v);
            }
        }
    }
    let mut out = batch.select(&keep);
    out.cols.extend(payload.into_iter().map(Col::Int));
    out
}

/// Inserts every row into `table`.
pub fn build_apply(table: &HashTable, key: usize, payload: &[usize], batch: &Batch) -> Result<(), ExecError> {
    let mut tuple = vec![0; payload.len()];
    for row in 0..batch.rows() {
        for (t, &s) in tuple.iter_mut().zip(payload) {
            *t = batch.int(s)[row];
        }
        table.insert(batch.int(key)[row], &tuple)?;
    }
    Ok(())
}
