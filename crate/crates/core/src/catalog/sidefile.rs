// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Little-endian side-files: `.offsets` (u64), `.sizes` (u32), `.rids` (u64
//! prefix sums) and `.zonemap` (u32 attribute count, then per page one
//! `attr_id:u32 min:i64 max:i64` triple per attribute).

use super::{CatalogError, RidIndex, ZoneEntry, ZoneMap};

fn fixed_chunks<const N: usize>(bytes: &[u8], what: &str) -> Result<Vec<[u8; N]>, CatalogError> {
    if !bytes.len().is_multiple_of(N) {
        return Err(CatalogError::SideFile(format!(
            "{what} length {} is not a multiple of {N}",
            bytes.len()
        )));
    }
    Ok(bytes.chunks_exact(N).map(|c| c.try_into().unwrap()).collect())
}

pub fn write_offsets(offsets: &[u64]) -> Vec<u8> {
    offsets.iter().flat_map(|o| o.to_le_bytes()).collect()
}

pub fn read_offsets(bytes: &[u8]) -> Result<Vec<u64>, CatalogError> {
    Ok(fixed_chunks::<8>(bytes, "offsets")?.into_iter().map(u64::from_le_bytes).collect())
}

pub fn write_sizes(sizes: &[u32]) -> Vec<u8> {
    sizes.iter().flat_map(|s| s.to_le_bytes()).collect()
}

pub fn read_sizes(bytes: &[u8]) -> Result<Vec<u32>, CatalogError> {
    Ok(fixed_chunks::<4>(bytes, "sizes")?.into_iter().map(u32::from_le_bytes).collect())
}

pub fn write_rids(index: &RidIndex) -> Vec<u8> {
    write_offsets(index.cumulative())
}

pub fn read_rids(bytes: &[u8]) -> Result<RidIndex, CatalogError> {
    RidIndex::new(read_offsets(bytes)?)
}

const TRIPLE_LEN: usize = 4 + 8 + 8;

pub fn write_zone_map(zm: &ZoneMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + zm.pages.len() * zm.attrs.len() * TRIPLE_LEN);
    out.extend_from_slice(&(zm.attrs.len() as u32).to_le_bytes());
    for page in &zm.pages {
        for e in page {
            out.extend_from_slice(&e.attr.to_le_bytes());
            out.extend_from_slice(&e.min.to_le_bytes());
            out.extend_from_slice(&e.max.to_le_bytes());
        }
    }
    out
}

/// Parses a zone map; every page must list the same attributes in order.
pub fn read_zone_map(bytes: &[u8]) -> Result<ZoneMap, CatalogError> {
    let bad = |m: String| Err(CatalogError::SideFile(m));
    if bytes.len() < 4 {
        return bad("zone map shorter than its attribute count".into());
    }
    let nattr = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    let body = &bytes[4..];
    if nattr == 0 {
        if !body.is_empty() {
            return bad("entries present for zero attributes".into());
        }
        return Ok(ZoneMap::default());
    }
    let page_len = match nattr.checked_mul(TRIPLE_LEN) {
        Some(l) if body.len().is_multiple_of(l) => l,
        _ => return bad(format!("zone map body of {} bytes does not fit {nattr} attributes", body.len())),
    };
    let mut attrs: Vec<u32> = Vec::new();
    let mut pages = Vec::with_capacity(body.len() / page_len);
    for (p, chunk) in body.chunks_exact(page_len).enumerate() {
        let entries: Vec<ZoneEntry> = chunk
            .chunks_exact(TRIPLE_LEN)
            .map(|t| ZoneEntry {
                attr: u32::from_le_bytes(t[..4].try_into().unwrap()),
                min: i64::from_le_bytes(t[4..12].try_into().unwrap()),
                max: i64::from_le_bytes(t[12..20].try_into().unwrap()),
            })
            .collect();
        if entries.iter().any(|e| e.min > e.max) {
            return bad(format!("page {p} has min above max"));
        }
        if p == 0 {
            attrs = entries.iter().map(|e| e.attr).collect();
        } else if entries.iter().map(|e| e.attr).ne(attrs.iter().copied()) {
            return bad(format!("page {p} lists different attributes"));
        }
        pages.push(entries);
    }
    if pages.is_empty() {
        // attributes declared but no pages: keep the declared set unknown
        return Ok(ZoneMap::default());
    }
    Ok(ZoneMap { attrs, pages })
}
