// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Replays the checked-in fuzz seeds, plus seeded mutations of each, through
//! the same entry points the cargo-fuzz targets call.

use std::fs;
use std::path::{Path, PathBuf};

use pathfuse_core::catalog::read_zone_map;
use pathfuse_core::codec::SymbolTable;
use pathfuse_core::fuzz_entry;
use pathfuse_core::page::Page;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn mutate(rng: &mut ChaCha8Rng, seed: &[u8]) -> Vec<u8> {
    let mut v = seed.to_vec();
    match rng.gen_range(0..4) {
        0 if !v.is_empty() => {
            let i = rng.gen_range(0..v.len());
            v[i] ^= 1 << rng.gen_range(0..8);
        }
        1 if !v.is_empty() => {
            let i = rng.gen_range(0..v.len());
            v[i] = rng.gen();
        }
        2 => v.truncate(rng.gen_range(0..=v.len())),
        _ => {
            let i = rng.gen_range(0..=v.len());
            v.insert(i, rng.gen());
        }
    }
    v
}

fn replay(target: &str, entry: fn(&[u8]), mutations: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for (_, seed) in seeds(target) {
        entry(&seed);
        for _ in 0..mutations {
            entry(&mutate(&mut rng, &seed));
        }
    }
}

#[test]
fn page_seeds() {
    replay("page", fuzz_entry::page, 200);
    let parsed = seeds("page").iter().filter(|(_, b)| Page::parse(b).is_ok()).count();
    assert!(parsed >= 6, "only {parsed} page seeds parse");
}

#[test]
fn symbol_table_seeds() {
    replay("symbol_table", fuzz_entry::symbol_table, 500);
    assert!(seeds("symbol_table").iter().any(|(_, b)| SymbolTable::deserialize(b).is_ok()));
}

#[test]
fn fsst_decode_seeds() {
    replay("fsst_decode", fuzz_entry::fsst_decode, 500);
}

#[test]
fn for_decode_seeds() {
    replay("for_decode", fuzz_entry::for_decode, 500);
}

#[test]
fn side_file_seeds() {
    replay("side_file", fuzz_entry::side_file, 300);
    let zone_maps = seeds("side_file")
        .into_iter()
        .filter(|(_, b)| b.first() == Some(&3) && read_zone_map(&b[1..]).is_ok())
        .count();
    assert!(zone_maps >= 3);
}

#[test]
fn row_seeds() {
    replay("rows", fuzz_entry::rows, 500);
}
