// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! RID indexes, zone maps, the page dictionary, and page pruning.

mod sidefile;

use std::ops::Range;

use thiserror::Error;

pub use sidefile::{
    read_offsets, read_rids, read_sizes, read_zone_map, write_offsets, write_rids, write_sizes,
    write_zone_map,
};

/// Attribute ids at or above this value name reference attributes: bounds of
/// a joined dimension column carried on the foreign-key column's pages.
pub const REF_BASE: u32 = 1 << 31;

/// Attributes with more distinct values than this get no zone map.
pub const ZONE_MAP_CARDINALITY_LIMIT: usize = 5000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CatalogError {
    #[error("rid {rid} out of range for {total} rows")]
    RidOutOfRange { rid: u64, total: u64 },
    #[error("row totals differ: {a} vs {b}")]
    TotalMismatch { a: u64, b: u64 },
    #[error("page ordinal {page} out of range for {count} pages")]
    PageOutOfRange { page: usize, count: usize },
    #[error("rid index must be strictly increasing (violated at entry {0})")]
    NotIncreasing(usize),
    #[error("foreign key {0} has no matching dimension row")]
    DanglingKey(i64),
    #[error("malformed side-file: {0}")]
    SideFile(String),
}

/// Attribute id of the reference attribute that mirrors `column`.
pub fn reference_attr(column: u32) -> u32 {
    REF_BASE | column
}

pub fn is_reference_attr(attr: u32) -> bool {
    attr & REF_BASE != 0
}

/// Prefix sums of per-page row counts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RidIndex {
    cumulative: Vec<u64>,
}

impl RidIndex {
    pub fn new(cumulative: Vec<u64>) -> Result<Self, CatalogError> {
        let mut prev = 0;
        for (i, &c) in cumulative.iter().enumerate() {
            if c <= prev {
                return Err(CatalogError::NotIncreasing(i));
            }
            prev = c;
        }
        Ok(RidIndex { cumulative })
    }

    pub fn from_page_counts(counts: &[u64]) -> Result<Self, CatalogError> {
        let cumulative = counts
            .iter()
            .scan(0u64, |acc, &c| {
                *acc += c;
                Some(*acc)
            })
            .collect();
        Self::new(cumulative)
    }

    pub fn cumulative(&self) -> &[u64] {
        &self.cumulative
    }

    pub fn page_count(&self) -> usize {
        self.cumulative.len()
    }

    pub fn total(&self) -> u64 {
        self.cumulative.last().copied().unwrap_or(0)
    }

    /// RID span `[start, end)` of page `i`.
    pub fn span(&self, i: usize) -> Range<u64> {
        let start = if i == 0 { 0 } else { self.cumulative[i - 1] };
        start..self.cumulative[i]
    }

    pub fn rid_to_page(&self, rid: u64) -> Result<usize, CatalogError> {
        rid_to_page(self, rid)
    }
}

/// Smallest page ordinal whose cumulative count exceeds `rid`.
pub fn rid_to_page(index: &RidIndex, rid: u64) -> Result<usize, CatalogError> {
    if rid >= index.total() {
        return Err(CatalogError::RidOutOfRange {
            rid,
            total: index.total(),
        });
    }
    Ok(index.cumulative.partition_point(|&c| c <= rid))
}

/// Pages of `b` covering the RID span of page `page_a` of `a`.
pub fn align_pages(a: &RidIndex, b: &RidIndex, page_a: usize) -> Result<Range<usize>, CatalogError> {
    if a.total() != b.total() {
        return Err(CatalogError::TotalMismatch {
            a: a.total(),
            b: b.total(),
        });
    }
    if page_a >= a.page_count() {
        return Err(CatalogError::PageOutOfRange {
            page: page_a,
            count: a.page_count(),
        });
    }
    Ok(pages_covering(b, a.span(page_a)))
}

/// Minimal contiguous page range of `index` covering a non-empty RID span.
fn pages_covering(index: &RidIndex, span: Range<u64>) -> Range<usize> {
    let first = index.cumulative.partition_point(|&c| c <= span.start);
    let last = index.cumulative.partition_point(|&c| c < span.end);
    first..last + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZoneEntry {
    pub attr: u32,
    pub min: i64,
    pub max: i64,
}

/// Per-page bounds for every mapped attribute of one column.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ZoneMap {
    pub attrs: Vec<u32>,
    /// `pages[p][k]` bounds attribute `attrs[k]` on page `p`.
    pub pages: Vec<Vec<ZoneEntry>>,
}

impl ZoneMap {
    pub fn page_count(&self) -> usize {
        self.pages.len()
    }

    pub fn entry(&self, page: usize, attr: u32) -> Option<&ZoneEntry> {
        self.pages.get(page)?.iter().find(|e| e.attr == attr)
    }

    pub fn has_attr(&self, attr: u32) -> bool {
        self.attrs.contains(&attr)
    }
}

/// Values of one zone-mapped attribute, one per row in RID order.
#[derive(Debug, Clone, Copy)]
pub struct ZoneAttr<'a> {
    pub id: u32,
    pub values: &'a [i64],
}

/// Exact min/max per page for each attribute.
pub fn build_zone_map(attrs: &[ZoneAttr<'_>], pages: &[Range<usize>]) -> ZoneMap {
    if attrs.is_empty() {
        return ZoneMap::default();
    }
    let pages = pages
        .iter()
        .map(|r| {
            attrs
                .iter()
                .filter(|a| !r.is_empty() && r.end <= a.values.len())
                .map(|a| {
                    let vals = &a.values[r.clone()];
                    ZoneEntry {
                        attr: a.id,
                        min: *vals.iter().min().unwrap(),
                        max: *vals.iter().max().unwrap(),
                    }
                })
                .collect()
        })
        .collect();
    ZoneMap {
        attrs: attrs.iter().map(|a| a.id).collect(),
        pages,
    }
}

/// Follows a one-hop join: for each foreign key, the dimension row's attribute.
pub fn map_reference(
    foreign_keys: &[i64],
    dim_keys: &[i64],
    dim_values: &[i64],
) -> Result<Vec<i64>, CatalogError> {
    let lookup: std::collections::HashMap<i64, i64> =
        dim_keys.iter().copied().zip(dim_values.iter().copied()).collect();
    foreign_keys
        .iter()
        .map(|k| lookup.get(k).copied().ok_or(CatalogError::DanglingKey(*k)))
        .collect()
}

/// Whether an attribute's values pass the cardinality gate.
pub fn passes_cardinality_gate(values: &[i64]) -> bool {
    let mut distinct = std::collections::HashSet::new();
    for v in values {
        distinct.insert(*v);
        if distinct.len() > ZONE_MAP_CARDINALITY_LIMIT {
            return false;
        }
    }
    true
}

/// A comparison against constants; bounds are inclusive for `Between`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Lt(i64),
    Le(i64),
    Eq(i64),
    Ge(i64),
    Gt(i64),
    Between(i64, i64),
}

impl Comparison {
    pub fn matches(&self, v: i64) -> bool {
        match *self {
            Comparison::Lt(c) => v < c,
            Comparison::Le(c) => v <= c,
            Comparison::Eq(c) => v == c,
            Comparison::Ge(c) => v >= c,
            Comparison::Gt(c) => v > c,
            Comparison::Between(lo, hi) => lo <= v && v <= hi,
        }
    }

    /// Whether some value in `[min, max]` can satisfy the comparison.
    pub fn may_intersect(&self, min: i64, max: i64) -> bool {
        match *self {
            Comparison::Lt(c) => min < c,
            Comparison::Le(c) => min <= c,
            Comparison::Eq(c) => min <= c && c <= max,
            Comparison::Ge(c) => max >= c,
            Comparison::Gt(c) => max > c,
            Comparison::Between(lo, hi) => lo <= hi && min <= hi && max >= lo,
        }
    }
}

/// A pruning predicate on a zone-mapped attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZonePredicate {
    pub attr: u32,
    pub cmp: Comparison,
}

/// Placement of one column's pages: consecutive global page ids from
/// `first_page_id`, with row counts in `rids`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnPages {
    pub column_id: u32,
    pub first_page_id: u64,
    pub rids: RidIndex,
}

impl ColumnPages {
    pub fn page_count(&self) -> usize {
        self.rids.page_count()
    }

    pub fn page_ids(&self) -> Range<u64> {
        self.first_page_id..self.first_page_id + self.page_count() as u64
    }

    pub fn ordinal(&self, page_id: u64) -> Option<usize> {
        self.page_ids()
            .contains(&page_id)
            .then(|| (page_id - self.first_page_id) as usize)
    }

    pub fn all_pages(&self) -> PrunedPageList {
        PrunedPageList {
            column_id: self.column_id,
            page_ids: self.page_ids().collect(),
        }
    }
}

/// Column to page placement for a database.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dictionary {
    pub columns: Vec<ColumnPages>,
}

impl Dictionary {
    pub fn column(&self, column_id: u32) -> Option<&ColumnPages> {
        self.columns.iter().find(|c| c.column_id == column_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PrunedPageList {
    pub column_id: u32,
    pub page_ids: Vec<u64>,
}

/// Keeps the pages whose bounds can satisfy every applicable predicate.
pub fn prune(zone_map: &ZoneMap, column: &ColumnPages, predicates: &[ZonePredicate]) -> PrunedPageList {
    let page_ids = column
        .page_ids()
        .enumerate()
        .filter(|&(ord, _)| {
            predicates.iter().all(|p| match zone_map.entry(ord, p.attr) {
                Some(e) => p.cmp.may_intersect(e.min, e.max),
                None => true,
            })
        })
        .map(|(_, id)| id)
        .collect();
    PrunedPageList {
        column_id: column.column_id,
        page_ids,
    }
}

/// Sorted, disjoint, non-adjacent RID intervals.
pub type RidSet = Vec<Range<u64>>;

/// RID intervals covered by a page list, merged.
pub fn rid_intervals(list: &PrunedPageList, column: &ColumnPages) -> RidSet {
    let mut out: RidSet = Vec::new();
    for &id in &list.page_ids {
        let Some(ord) = column.ordinal(id) else {
            continue;
        };
        let span = column.rids.span(ord);
        match out.last_mut() {
            Some(last) if last.end >= span.start => last.end = last.end.max(span.end),
            _ => out.push(span),
        }
    }
    out
}

pub fn intersect_rid_sets(a: &[Range<u64>], b: &[Range<u64>]) -> RidSet {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        let lo = a[i].start.max(b[j].start);
        let hi = a[i].end.min(b[j].end);
        if lo < hi {
            out.push(lo..hi);
        }
        if a[i].end < b[j].end {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// RID set common to all lists.
pub fn common_rid_set(lists: &[PrunedPageList], dict: &Dictionary) -> RidSet {
    let mut sets = lists.iter().map(|l| {
        dict.column(l.column_id)
            .map(|c| rid_intervals(l, c))
            .unwrap_or_default()
    });
    let Some(first) = sets.next() else {
        return Vec::new();
    };
    sets.fold(first, |acc, s| intersect_rid_sets(&acc, &s))
}

/// Restricts every list to the pages overlapping the common RID set.
pub fn intersect_page_lists(lists: &[PrunedPageList], dict: &Dictionary) -> Vec<PrunedPageList> {
    let common = common_rid_set(lists, dict);
    lists
        .iter()
        .map(|l| {
            let Some(col) = dict.column(l.column_id) else {
                return PrunedPageList {
                    column_id: l.column_id,
                    page_ids: Vec::new(),
                };
            };
            let mut page_ids: Vec<u64> = common
                .iter()
                .flat_map(|r| pages_covering(&col.rids, r.clone()))
                .map(|ord| col.first_page_id + ord as u64)
                .collect();
            page_ids.dedup();
            PrunedPageList {
                column_id: l.column_id,
                page_ids,
            }
        })
        .collect()
}
