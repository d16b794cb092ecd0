// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! In-memory column representations.

use std::ops::Range;

/// A typed list of column values as handed to and returned from pages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnValues {
    /// Integers widened to 64 bits (INT32, INT64, DECIMAL, DATE).
    Int(Vec<i64>),
    /// Byte strings (CHAR, VARCHAR).
    Bytes(Vec<Vec<u8>>),
}

impl ColumnValues {
    pub fn len(&self) -> usize {
        match self {
            ColumnValues::Int(v) => v.len(),
            ColumnValues::Bytes(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice(&self, range: Range<usize>) -> ColumnValues {
        match self {
            ColumnValues::Int(v) => ColumnValues::Int(v[range].to_vec()),
            ColumnValues::Bytes(v) => ColumnValues::Bytes(v[range].to_vec()),
        }
    }

    /// Reorders values so that output `i` is input `order[i]`.
    pub fn permute(&self, order: &[usize]) -> ColumnValues {
        match self {
            ColumnValues::Int(v) => ColumnValues::Int(order.iter().map(|&i| v[i]).collect()),
            ColumnValues::Bytes(v) => {
                ColumnValues::Bytes(order.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }

    pub fn as_ints(&self) -> Option<&[i64]> {
        match self {
            ColumnValues::Int(v) => Some(v),
            ColumnValues::Bytes(_) => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&[Vec<u8>]> {
        match self {
            ColumnValues::Int(_) => None,
            ColumnValues::Bytes(v) => Some(v),
        }
    }
}

/// Strings stored back to back with an offsets array (`len() + 1` entries).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrColumn {
    offsets: Vec<usize>,
    data: Vec<u8>,
}

impl Default for StrColumn {
    fn default() -> Self {
        StrColumn {
            offsets: vec![0],
            data: Vec::new(),
        }
    }
}

impl StrColumn {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(offsets: Vec<usize>, data: Vec<u8>) -> Self {
        debug_assert_eq!(offsets.first(), Some(&0));
        debug_assert_eq!(offsets.last(), Some(&data.len()));
        StrColumn { offsets, data }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> &[u8] {
        &self.data[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn push(&mut self, value: &[u8]) {
        self.data.extend_from_slice(value);
        self.offsets.push(self.data.len());
    }

    /// Appends rows `range` of `other`.
    pub fn extend_from(&mut self, other: &StrColumn, range: Range<usize>) {
        let (lo, hi) = (other.offsets[range.start], other.offsets[range.end]);
        let shift = self.data.len();
        self.data.extend_from_slice(&other.data[lo..hi]);
        self.offsets
            .extend(other.offsets[range.start + 1..=range.end].iter().map(|o| o - lo + shift));
    }

    pub fn clear(&mut self) {
        self.offsets.truncate(1);
        self.data.clear();
    }

    pub fn byte_len(&self) -> usize {
        self.data.len()
    }

    /// Bytes held, data plus offsets.
    pub fn footprint(&self) -> usize {
        self.data.len() + self.offsets.len() * std::mem::size_of::<usize>()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn into_vecs(self) -> Vec<Vec<u8>> {
        self.iter().map(<[u8]>::to_vec).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn str_column_extend() {
        let mut a = StrColumn::new();
        for s in ["ab", "", "cde", "f"] {
            a.push(s.as_bytes());
        }
        let mut b = StrColumn::new();
        b.push(b"x");
        b.extend_from(&a, 1..3);
        assert_eq!(b.into_vecs(), vec![b"x".to_vec(), b"".to_vec(), b"cde".to_vec()]);
    }

    #[test]
    fn permute_and_slice() {
        let v = ColumnValues::Int(vec![10, 20, 30]);
        assert_eq!(v.permute(&[2, 0, 1]), ColumnValues::Int(vec![30, 10, 20]));
        assert_eq!(v.slice(1..3), ColumnValues::Int(vec![20, 30]));
    }
}
