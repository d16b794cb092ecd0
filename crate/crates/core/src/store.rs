// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! A loaded database: manifest, side-files, and device images.
//!
//! Directory layout: `catalog.json`, `dev<k>.img` per device, and per column
//! `<table>/<column>.offsets|.sizes|.rids`, plus `.zonemap` for columns that
//! carry zone-mapped attributes.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{
    read_offsets, read_rids, read_sizes, read_zone_map, write_offsets, write_rids, write_sizes,
    write_zone_map, CatalogError, ColumnPages, Dictionary, RidIndex, ZoneMap,
};
use crate::codec::ColumnType;
use crate::iosim::{DeviceArray, IoError, LatencyModel};
use crate::page::{
    decode_fixed_into, decode_varlen_flat, Compression, Page, PageError,
};
use crate::schema::{Schema, SchemaError};
use crate::values::ColumnValues;

pub const MANIFEST_FILE: &str = "catalog.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Device(#[from] IoError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("{path}: {reason}")]
    Inconsistent { path: String, reason: String },
    #[error("page {page_id}: {source}")]
    Page { page_id: u64, source: PageError },
}

/// A reserved extent for one column on one device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub column_id: u32,
    pub device: usize,
    pub start: u64,
    pub capacity: u64,
    /// Bytes written densely from `start`.
    pub used: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnManifest {
    pub name: String,
    pub id: u32,
    #[serde(rename = "type")]
    pub col_type: ColumnType,
    pub first_page_id: u64,
    pub page_count: u64,
    /// Zone-mapped attribute ids stored on this column's pages.
    pub zone_attrs: Vec<u32>,
    pub regions: Vec<Region>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableManifest {
    pub name: String,
    pub rows: u64,
    pub columns: Vec<ColumnManifest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub page_size: usize,
    pub block_size: usize,
    pub compression: Compression,
    pub devices: usize,
    pub schema: Schema,
    pub tables: Vec<TableManifest>,
}

impl Manifest {
    pub fn columns(&self) -> impl Iterator<Item = (usize, &ColumnManifest)> {
        self.tables
            .iter()
            .enumerate()
            .flat_map(|(t, tm)| tm.columns.iter().map(move |c| (t, c)))
    }

    pub fn total_pages(&self) -> u64 {
        self.columns().map(|(_, c)| c.page_count).sum()
    }
}

/// Per-column side-file contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideFiles {
    pub offsets: Vec<u64>,
    pub sizes: Vec<u32>,
    pub rids: RidIndex,
    pub zone_map: ZoneMap,
}

impl SideFiles {
    /// `(extension, bytes)` for each file written for this column.
    pub fn encode(&self) -> Vec<(&'static str, Vec<u8>)> {
        let mut out = vec![
            ("offsets", write_offsets(&self.offsets)),
            ("sizes", write_sizes(&self.sizes)),
            ("rids", write_rids(&self.rids)),
        ];
        if !self.zone_map.attrs.is_empty() {
            out.push(("zonemap", write_zone_map(&self.zone_map)));
        }
        out
    }
}

/// Loader output before it is written anywhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedDatabase {
    pub manifest: Manifest,
    /// Indexed by global column id.
    pub side_files: Vec<SideFiles>,
    pub images: Vec<Vec<u8>>,
}

fn side_path(table: &str, column: &str, ext: &str) -> PathBuf {
    Path::new(table).join(format!("{column}.{ext}"))
}

impl LoadedDatabase {
    /// Every side-file as `(relative path, bytes)`, in column order.
    pub fn side_file_blobs(&self) -> Vec<(PathBuf, Vec<u8>)> {
        let mut out = Vec::new();
        for (t, c) in self.manifest.columns() {
            let table = &self.manifest.tables[t].name;
            for (ext, bytes) in self.side_files[c.id as usize].encode() {
                out.push((side_path(table, &c.name, ext), bytes));
            }
        }
        out
    }

    pub fn side_file_bytes(&self) -> u64 {
        self.side_file_blobs().iter().map(|(_, b)| b.len() as u64).sum()
    }

    pub fn save(&self, dir: &Path) -> Result<(), StoreError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&self.manifest)?)?;
        for (rel, bytes) in self.side_file_blobs() {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, bytes)?;
        }
        for (k, img) in self.images.iter().enumerate() {
            fs::write(dir.join(device_file(k)), img)?;
        }
        Ok(())
    }

    pub fn into_database(self, latency: LatencyModel) -> Result<Database, StoreError> {
        let (offsets, sizes) = page_table(&self.manifest, &self.side_files);
        let devices = DeviceArray::in_memory(self.images, offsets, sizes, latency)?;
        Database::assemble(self.manifest, self.side_files, devices)
    }
}

pub fn device_file(k: usize) -> String {
    format!("dev{k}.img")
}

/// Global page table in page-id order.
fn page_table(manifest: &Manifest, side: &[SideFiles]) -> (Vec<u64>, Vec<u32>) {
    let mut cols: Vec<&ColumnManifest> = manifest.columns().map(|(_, c)| c).collect();
    cols.sort_by_key(|c| c.first_page_id);
    let mut offsets = Vec::new();
    let mut sizes = Vec::new();
    for c in cols {
        offsets.extend_from_slice(&side[c.id as usize].offsets);
        sizes.extend_from_slice(&side[c.id as usize].sizes);
    }
    (offsets, sizes)
}

/// Catalog metadata for one column, held in memory at query time.
#[derive(Debug, Clone)]
pub struct ColumnMeta {
    pub id: u32,
    pub table: usize,
    pub name: String,
    pub col_type: ColumnType,
    pub pages: ColumnPages,
    pub offsets: Vec<u64>,
    pub sizes: Vec<u32>,
    pub zone_map: ZoneMap,
}

#[derive(Debug)]
pub struct Database {
    pub manifest: Manifest,
    /// Indexed by global column id.
    pub columns: Vec<ColumnMeta>,
    pub dictionary: Dictionary,
    pub devices: Arc<DeviceArray>,
}

impl Database {
    fn assemble(
        manifest: Manifest,
        side_files: Vec<SideFiles>,
        devices: DeviceArray,
    ) -> Result<Self, StoreError> {
        let mut columns: Vec<Option<ColumnMeta>> = vec![None; side_files.len()];
        let mut side: Vec<Option<SideFiles>> = side_files.into_iter().map(Some).collect();
        for (t, c) in manifest.columns() {
            let inconsistent = |reason: String| StoreError::Inconsistent {
                path: format!("{}.{}", manifest.tables[t].name, c.name),
                reason,
            };
            let s = side
                .get_mut(c.id as usize)
                .and_then(Option::take)
                .ok_or_else(|| inconsistent("column id without side-files".into()))?;
            let n = c.page_count as usize;
            if s.offsets.len() != n || s.sizes.len() != n || s.rids.page_count() != n {
                return Err(inconsistent("side-file lengths disagree with page count".into()));
            }
            if s.rids.total() != manifest.tables[t].rows {
                return Err(inconsistent("rid index disagrees with row count".into()));
            }
            if !s.zone_map.pages.is_empty() && s.zone_map.page_count() != n {
                return Err(inconsistent("zone map page count disagrees".into()));
            }
            columns[c.id as usize] = Some(ColumnMeta {
                id: c.id,
                table: t,
                name: c.name.clone(),
                col_type: c.col_type,
                pages: ColumnPages {
                    column_id: c.id,
                    first_page_id: c.first_page_id,
                    rids: s.rids,
                },
                offsets: s.offsets,
                sizes: s.sizes,
                zone_map: s.zone_map,
            });
        }
        let columns: Vec<ColumnMeta> = columns
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                c.ok_or_else(|| StoreError::Inconsistent {
                    path: format!("column {i}"),
                    reason: "missing from manifest".into(),
                })
            })
            .collect::<Result<_, _>>()?;
        if devices.page_count() as u64 != manifest.total_pages() {
            return Err(StoreError::Inconsistent {
                path: MANIFEST_FILE.into(),
                reason: "page table size disagrees with manifest".into(),
            });
        }
        let dictionary = Dictionary {
            columns: columns.iter().map(|c| c.pages.clone()).collect(),
        };
        Ok(Database {
            manifest,
            columns,
            dictionary,
            devices: Arc::new(devices),
        })
    }

    /// Opens a database directory written by [`LoadedDatabase::save`].
    pub fn open(dir: &Path, latency: LatencyModel) -> Result<Self, StoreError> {
        let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(StoreError::Version(manifest.format_version));
        }
        manifest.schema.validate()?;
        let ncols = manifest.columns().count();
        let mut side: Vec<Option<SideFiles>> = vec![None; ncols];
        for (t, c) in manifest.columns() {
            let table = &manifest.tables[t].name;
            let read = |ext: &str| fs::read(dir.join(side_path(table, &c.name, ext)));
            let zone_map = if c.zone_attrs.is_empty() {
                ZoneMap::default()
            } else {
                read_zone_map(&read("zonemap")?)?
            };
            let slot = side.get_mut(c.id as usize).ok_or_else(|| StoreError::Inconsistent {
                path: format!("{table}.{}", c.name),
                reason: "column id out of range".into(),
            })?;
            *slot = Some(SideFiles {
                offsets: read_offsets(&read("offsets")?)?,
                sizes: read_sizes(&read("sizes")?)?,
                rids: read_rids(&read("rids")?)?,
                zone_map,
            });
        }
        let side: Vec<SideFiles> = side
            .into_iter()
            .map(|s| {
                s.ok_or_else(|| StoreError::Inconsistent {
                    path: MANIFEST_FILE.into(),
                    reason: "column ids are not dense".into(),
                })
            })
            .collect::<Result<_, _>>()?;
        let (offsets, sizes) = page_table(&manifest, &side);
        let paths: Vec<PathBuf> = (0..manifest.devices).map(|k| dir.join(device_file(k))).collect();
        let devices = DeviceArray::open_files(&paths, offsets, sizes, latency)?;
        Self::assemble(manifest, side, devices)
    }

    pub fn column(&self, table: &str, column: &str) -> Result<&ColumnMeta, SchemaError> {
        let id = self.manifest.schema.column_id(table, column)?;
        Ok(&self.columns[id as usize])
    }

    pub fn table_rows(&self, table: &str) -> Result<u64, SchemaError> {
        let t = self.manifest.schema.table_index(table)?;
        Ok(self.manifest.tables[t].rows)
    }

    /// Decodes a whole column in RID order, bypassing the queue pairs.
    pub fn scan_column(&self, column_id: u32) -> Result<ColumnValues, StoreError> {
        let meta = &self.columns[column_id as usize];
        let mut ints = Vec::new();
        let mut bytes = Vec::new();
        for page_id in meta.pages.page_ids() {
            let raw = self.devices.read_untimed(page_id)?;
            let page_err = |source| StoreError::Page { page_id, source };
            match Page::parse(&raw).map_err(page_err)? {
                Page::Fixed(p) => {
                    let mut keys = Vec::new();
                    decode_fixed_into(&p, meta.col_type, None, &mut keys).map_err(page_err)?;
                    match meta.col_type {
                        ColumnType::Char(n) => bytes.extend(
                            keys.into_iter().map(|k| crate::codec::unpack_short_char(k, n)),
                        ),
                        _ => ints.extend(keys),
                    }
                }
                Page::Varlen(p) => {
                    bytes.extend(decode_varlen_flat(&p, None).map_err(page_err)?.strings.into_vecs())
                }
            }
        }
        Ok(if meta.col_type.is_bytes() {
            ColumnValues::Bytes(bytes)
        } else {
            ColumnValues::Int(ints)
        })
    }
}
