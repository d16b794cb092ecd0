// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Sort-based clustering and two-pass loading.
//!
//! Pass 1 cuts every column into logical pages whose worst-case encoding fits
//! the page size, numbers the pages, and reserves one region per (column,
//! device) sized by those worst cases. Pass 2 compresses pages on a worker
//! pool and writes them densely from the start of their region.

use std::ops::Range;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use thiserror::Error;

use crate::catalog::{
    build_zone_map, map_reference, passes_cardinality_gate, reference_attr, CatalogError,
    RidIndex, ZoneAttr,
};
use crate::codec::{pack_short_char, ColumnType};
use crate::iosim::device_of;
use crate::page::{
    encode_fixed_page, encode_varlen_page, fixed_rows_per_page, fixed_worst_len, Compression,
    Page, PageError, PageOptions, RawVarlenSizer, MAX_PAGE_SIZE, MIN_PAGE_SIZE,
};
use crate::schema::{Schema, SchemaError, TableData};
use crate::store::{
    ColumnManifest, LoadedDatabase, Manifest, Region, SideFiles, TableManifest, FORMAT_VERSION,
};
use crate::values::ColumnValues;

pub const MAX_LOAD_WORKERS: usize = 32;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("page size {0} outside {MIN_PAGE_SIZE}..={MAX_PAGE_SIZE}")]
    PageSize(usize),
    #[error("device count must be positive")]
    NoDevices,
    #[error("expected {expected} tables of data, got {found}")]
    TableCount { expected: usize, found: usize },
    #[error("table {table}: column {column} has {found} rows, expected {expected}")]
    RowCount {
        table: String,
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("table {table}: column {column} values do not match its type")]
    TypeMismatch { table: String, column: String },
    #[error("{table}.{column} row {row}: record of {len} bytes exceeds the {limit}-byte block limit")]
    RecordTooLong {
        table: String,
        column: String,
        row: usize,
        len: usize,
        limit: usize,
    },
    #[error("{table}.{column}: page {page} failed to encode: {source}")]
    Page {
        table: String,
        column: String,
        page: usize,
        source: PageError,
    },
    #[error("device {device} capacity {capacity} exceeded by region of {table}.{column} ending at {end}")]
    DeviceCapacity {
        table: String,
        column: String,
        device: usize,
        end: u64,
        capacity: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    pub page: PageOptions,
    pub devices: usize,
    pub workers: usize,
    /// Bytes per device; `None` means unbounded.
    pub device_capacity: Option<u64>,
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(MAX_LOAD_WORKERS)
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            page: PageOptions::default(),
            devices: 1,
            workers: default_workers(),
            device_capacity: None,
        }
    }
}

/// Stable ascending order of rows by `key`.
pub fn sort_permutation(key: &ColumnValues) -> Vec<usize> {
    let mut order: Vec<usize> = (0..key.len()).collect();
    match key {
        ColumnValues::Int(v) => order.sort_by_key(|&i| v[i]),
        ColumnValues::Bytes(v) => order.sort_by(|&a, &b| v[a].cmp(&v[b])),
    }
    order
}

/// Rows sorted stably by column `key`; RIDs are then the row positions.
pub fn sort_cluster(data: &TableData, key: usize) -> TableData {
    let order = sort_permutation(&data.columns[key]);
    TableData {
        columns: data.columns.iter().map(|c| c.permute(&order)).collect(),
    }
}

/// Pass-1 plan for one column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnPlan {
    pub table: usize,
    pub column: usize,
    pub column_id: u32,
    pub col_type: ColumnType,
    pub first_page_id: u64,
    /// Row range of each logical page.
    pub pages: Vec<Range<usize>>,
    /// Worst-case encoded size of each logical page.
    pub bounds: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionPlan {
    pub columns: Vec<ColumnPlan>,
    /// Regions in (table, column, device) order.
    pub regions: Vec<Region>,
}

/// Splits one column into logical pages with their worst-case sizes.
pub fn plan_pages(
    values: &ColumnValues,
    col_type: ColumnType,
    opts: &PageOptions,
) -> Result<Vec<(Range<usize>, usize)>, usize> {
    let n = values.len();
    let mut out = Vec::new();
    match (col_type.width_class(), values) {
        (Some(width), _) => {
            let per_page = fixed_rows_per_page(width, opts);
            let mut start = 0;
            while start < n {
                let end = (start + per_page).min(n);
                out.push((start..end, fixed_worst_len(end - start, width, opts.block_size)));
                start = end;
            }
        }
        (None, ColumnValues::Bytes(records)) => {
            let mut sizer = RawVarlenSizer::new(opts);
            let mut start = 0;
            for (i, r) in records.iter().enumerate() {
                if r.len() > opts.string_block_limit {
                    return Err(i);
                }
                if sizer.records() > 0 && sizer.size_with(r.len()) > opts.page_size {
                    out.push((start..i, sizer.size()));
                    sizer = RawVarlenSizer::new(opts);
                    start = i;
                }
                sizer.push(r.len());
            }
            if sizer.records() > 0 {
                out.push((start..n, sizer.size()));
            }
        }
        (None, ColumnValues::Int(_)) => unreachable!("checked by validate_data"),
    }
    Ok(out)
}

fn validate_data(schema: &Schema, tables: &[TableData]) -> Result<(), LoadError> {
    if tables.len() != schema.tables.len() {
        return Err(LoadError::TableCount {
            expected: schema.tables.len(),
            found: tables.len(),
        });
    }
    for (def, data) in schema.tables.iter().zip(tables) {
        let rows = data.row_count();
        if data.columns.len() != def.columns.len() {
            return Err(LoadError::TableCount {
                expected: def.columns.len(),
                found: data.columns.len(),
            });
        }
        for (c, v) in def.columns.iter().zip(&data.columns) {
            if v.len() != rows {
                return Err(LoadError::RowCount {
                    table: def.name.clone(),
                    column: c.name.clone(),
                    expected: rows,
                    found: v.len(),
                });
            }
            let ok = match (c.col_type, v) {
                (ColumnType::Char(n), ColumnValues::Bytes(b)) if n <= 2 => {
                    b.iter().all(|x| x.len() <= n as usize)
                }
                (t, ColumnValues::Bytes(_)) => t.is_bytes(),
                (t, ColumnValues::Int(_)) => !t.is_bytes(),
            };
            if !ok {
                return Err(LoadError::TypeMismatch {
                    table: def.name.clone(),
                    column: c.name.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Pass 1: logical pages, page ids, and regions.
pub fn plan_regions(
    schema: &Schema,
    sorted: &[TableData],
    opts: &LoadOptions,
) -> Result<RegionPlan, LoadError> {
    let n_dev = opts.devices;
    let mut columns = Vec::new();
    let mut regions = Vec::new();
    let mut next_page = 0u64;
    let mut device_end = vec![0u64; n_dev];
    let mut column_id = 0u32;
    for (t, (def, data)) in schema.tables.iter().zip(sorted).enumerate() {
        for (c, cdef) in def.columns.iter().enumerate() {
            let planned = plan_pages(&data.columns[c], cdef.col_type, &opts.page).map_err(|row| {
                LoadError::RecordTooLong {
                    table: def.name.clone(),
                    column: cdef.name.clone(),
                    row,
                    len: data.columns[c].as_bytes().map_or(0, |b| b[row].len()),
                    limit: opts.page.string_block_limit,
                }
            })?;
            let (pages, bounds): (Vec<_>, Vec<_>) = planned.into_iter().unzip();
            let mut capacity = vec![0u64; n_dev];
            for (k, b) in bounds.iter().enumerate() {
                capacity[device_of(next_page + k as u64, n_dev)] += *b as u64;
            }
            for (device, cap) in capacity.into_iter().enumerate() {
                let start = device_end[device];
                device_end[device] += cap;
                if let Some(limit) = opts.device_capacity {
                    if device_end[device] > limit {
                        return Err(LoadError::DeviceCapacity {
                            table: def.name.clone(),
                            column: cdef.name.clone(),
                            device,
                            end: device_end[device],
                            capacity: limit,
                        });
                    }
                }
                regions.push(Region {
                    column_id,
                    device,
                    start,
                    capacity: cap,
                    used: 0,
                });
            }
            columns.push(ColumnPlan {
                table: t,
                column: c,
                column_id,
                col_type: cdef.col_type,
                first_page_id: next_page,
                pages,
                bounds,
            });
            next_page += columns.last().unwrap().pages.len() as u64;
            column_id += 1;
        }
    }
    Ok(RegionPlan { columns, regions })
}

/// Encodes one logical page with its final ids.
fn encode_page(
    values: &ColumnValues,
    plan: &ColumnPlan,
    k: usize,
    opts: &PageOptions,
) -> Result<Vec<u8>, PageError> {
    let rows = plan.pages[k].clone();
    let mut page = if plan.col_type.is_fixed() {
        Page::Fixed(encode_fixed_page(
            &values.slice(rows.clone()),
            plan.col_type,
            rows.start as u64,
            opts,
        )?)
    } else {
        let records = &values.as_bytes().expect("checked by validate_data")[rows.clone()];
        let rids: Vec<u64> = (rows.start as u64..rows.end as u64).collect();
        let raw_opts = PageOptions {
            compression: Compression::Plain,
            ..*opts
        };
        // keep the symbol-table encoding only when it is smaller than raw
        let page = match opts.compression {
            Compression::TypeSpecific => match encode_varlen_page(records, &rids, opts) {
                Ok(p) if p.serialized_len() <= plan.bounds[k] => Some(p),
                Ok(_) | Err(PageError::Overflow { .. }) | Err(PageError::OversizedRecord { .. }) => {
                    None
                }
                Err(e) => return Err(e),
            },
            Compression::Plain => None,
        };
        Page::Varlen(match page {
            Some(p) => p,
            None => encode_varlen_page(records, &rids, &raw_opts)?,
        })
    };
    // ids go in before the single serialization that computes the checksum
    match &mut page {
        Page::Fixed(p) => {
            p.header.page_id = plan.first_page_id + k as u64;
            p.header.column_id = plan.column_id;
        }
        Page::Varlen(p) => {
            p.header.page_id = plan.first_page_id + k as u64;
            p.header.column_id = plan.column_id;
        }
    }
    let bytes = page.to_bytes();
    debug_assert!(bytes.len() <= plan.bounds[k]);
    Ok(bytes)
}

/// Zone-map attribute values for column `c` of table `t`.
fn zone_attrs(
    schema: &Schema,
    tables: &[TableData],
    sorted: &[TableData],
    t: usize,
    c: usize,
) -> Result<Vec<(u32, Vec<i64>)>, LoadError> {
    let def = &schema.tables[t];
    let cname = &def.columns[c].name;
    let mut out = Vec::new();
    if def.zone_attrs.contains(cname) {
        let keys = zone_keys(&sorted[t].columns[c], def.columns[c].col_type);
        if passes_cardinality_gate(&keys) {
            out.push((schema.column_id(&def.name, cname)?, keys));
        }
    }
    for r in def.references.iter().filter(|r| &r.fk_column == cname) {
        let di = schema.table_index(&r.dim_table)?;
        let dim = &schema.tables[di];
        let ki = dim.column_index(&r.dim_key)?;
        let ai = dim.column_index(&r.dim_attr)?;
        let dim_keys = zone_keys(&tables[di].columns[ki], dim.columns[ki].col_type);
        let dim_vals = zone_keys(&tables[di].columns[ai], dim.columns[ai].col_type);
        let fks = zone_keys(&sorted[t].columns[c], def.columns[c].col_type);
        let mapped = map_reference(&fks, &dim_keys, &dim_vals)?;
        if passes_cardinality_gate(&mapped) {
            out.push((reference_attr(schema.column_id(&dim.name, &r.dim_attr)?), mapped));
        }
    }
    Ok(out)
}

/// Integer keys of a zone-mappable column.
pub fn zone_keys(values: &ColumnValues, col_type: ColumnType) -> Vec<i64> {
    match (values, col_type) {
        (ColumnValues::Int(v), _) => v.clone(),
        (ColumnValues::Bytes(v), ColumnType::Char(n)) if n <= 2 => v
            .iter()
            .map(|b| pack_short_char(b, n).expect("validated CHAR length"))
            .collect(),
        _ => unreachable!("schema validation restricts zone maps to integer-ordered types"),
    }
}

/// Pass 2: compress, place, and emit side-files and zone maps.
pub fn compress_write(
    schema: &Schema,
    tables: &[TableData],
    sorted: &[TableData],
    plan: RegionPlan,
    opts: &LoadOptions,
) -> Result<LoadedDatabase, LoadError> {
    let tasks: Vec<(usize, usize)> = plan
        .columns
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| (0..c.pages.len()).map(move |k| (ci, k)))
        .collect();
    let results: Vec<OnceLock<Result<Vec<u8>, PageError>>> =
        (0..tasks.len()).map(|_| OnceLock::new()).collect();
    let cursor = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..opts.workers.clamp(1, MAX_LOAD_WORKERS).min(tasks.len().max(1)) {
            s.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                let Some(&(ci, k)) = tasks.get(i) else { break };
                let c = &plan.columns[ci];
                let r = encode_page(&sorted[c.table].columns[c.column], c, k, &opts.page);
                let _ = results[i].set(r);
            });
        }
    });
    // barrier passed: every page is encoded
    let mut pages = results.into_iter().map(|r| r.into_inner().expect("every task ran"));

    let n_dev = opts.devices;
    let mut regions = plan.regions;
    let mut images: Vec<Vec<u8>> = vec![Vec::new(); n_dev];
    let mut side_files = Vec::with_capacity(plan.columns.len());
    let mut table_manifests: Vec<TableManifest> = schema
        .tables
        .iter()
        .zip(sorted)
        .map(|(d, data)| TableManifest {
            name: d.name.clone(),
            rows: data.row_count() as u64,
            columns: Vec::new(),
        })
        .collect();
    for (ci, c) in plan.columns.iter().enumerate() {
        let def = &schema.tables[c.table];
        let col_regions = &mut regions[ci * n_dev..(ci + 1) * n_dev];
        let mut offsets = Vec::with_capacity(c.pages.len());
        let mut sizes = Vec::with_capacity(c.pages.len());
        for k in 0..c.pages.len() {
            let bytes = pages.next().unwrap().map_err(|source| LoadError::Page {
                table: def.name.clone(),
                column: def.columns[c.column].name.clone(),
                page: k,
                source,
            })?;
            let region = &mut col_regions[device_of(c.first_page_id + k as u64, n_dev)];
            let offset = region.start + region.used;
            region.used += bytes.len() as u64;
            assert!(region.used <= region.capacity, "worst-case bound violated");
            let img = &mut images[region.device];
            img.resize(offset as usize, 0);
            img.extend_from_slice(&bytes);
            offsets.push(offset);
            sizes.push(bytes.len() as u32);
        }
        let counts: Vec<u64> = c.pages.iter().map(|r| r.len() as u64).collect();
        let attrs = zone_attrs(schema, tables, sorted, c.table, c.column)?;
        let zone_map = build_zone_map(
            &attrs
                .iter()
                .map(|(id, v)| ZoneAttr { id: *id, values: v })
                .collect::<Vec<_>>(),
            &c.pages,
        );
        table_manifests[c.table].columns.push(ColumnManifest {
            name: def.columns[c.column].name.clone(),
            id: c.column_id,
            col_type: c.col_type,
            first_page_id: c.first_page_id,
            page_count: c.pages.len() as u64,
            zone_attrs: zone_map.attrs.clone(),
            regions: col_regions.to_vec(),
        });
        side_files.push(SideFiles {
            offsets,
            sizes,
            rids: RidIndex::from_page_counts(&counts)?,
            zone_map,
        });
    }
    Ok(LoadedDatabase {
        manifest: Manifest {
            format_version: FORMAT_VERSION,
            page_size: opts.page.page_size,
            block_size: opts.page.block_size,
            compression: opts.page.compression,
            devices: n_dev,
            schema: schema.clone(),
            tables: table_manifests,
        },
        side_files,
        images,
    })
}

/// Validates, clusters, and loads every table of `schema`.
pub fn load(schema: &Schema, tables: &[TableData], opts: &LoadOptions) -> Result<LoadedDatabase, LoadError> {
    schema.validate()?;
    if !(MIN_PAGE_SIZE..=MAX_PAGE_SIZE).contains(&opts.page.page_size) {
        return Err(LoadError::PageSize(opts.page.page_size));
    }
    if opts.devices == 0 {
        return Err(LoadError::NoDevices);
    }
    validate_data(schema, tables)?;
    let sorted: Vec<TableData> = schema
        .tables
        .iter()
        .zip(tables)
        .map(|(def, data)| Ok(sort_cluster(data, def.column_index(&def.cluster_key)?)))
        .collect::<Result<_, SchemaError>>()?;
    let plan = plan_regions(schema, &sorted, opts)?;
    compress_write(schema, tables, &sorted, plan, opts)
}
