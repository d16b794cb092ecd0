// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Fixed-capacity open-addressing hash table shared by build workers.

use std::sync::atomic::{AtomicI64, AtomicU8, AtomicUsize, Ordering};

use super::ExecError;

pub const MAX_LOAD_FACTOR: f64 = 0.7;
const HASH_MULTIPLIER: u64 = 0x9E37_79B9_7F4A_7C15;

const EMPTY: u8 = 0;
const CLAIMED: u8 = 1;
const READY: u8 = 2;

/// Multiply-shift hash into `bits` bits.
pub fn hash_key(key: i64, bits: u32) -> usize {
    if bits == 0 {
        return 0;
    }
    ((key as u64).wrapping_mul(HASH_MULTIPLIER) >> (64 - bits)) as usize
}

/// Power-of-two capacity keeping `rows` under the load-factor limit.
pub fn capacity_for(rows: u64) -> usize {
    let want = (rows as f64 / MAX_LOAD_FACTOR).ceil() as usize;
    want.max(2).next_power_of_two()
}

#[derive(Debug)]
pub struct HashTable {
    id: usize,
    bits: u32,
    width: usize,
    limit: usize,
    len: AtomicUsize,
    state: Vec<AtomicU8>,
    keys: Vec<AtomicI64>,
    payload: Vec<AtomicI64>,
}

impl HashTable {
    /// Table `id` for up to `rows` entries with `width` payload values each.
    pub fn with_rows(id: usize, rows: u64, width: usize) -> Self {
        let capacity = capacity_for(rows);
        HashTable {
            id,
            bits: capacity.trailing_zeros(),
            width,
            limit: (capacity as f64 * MAX_LOAD_FACTOR).floor() as usize,
            len: AtomicUsize::new(0),
            state: (0..capacity).map(|_| AtomicU8::new(EMPTY)).collect(),
            keys: (0..capacity).map(|_| AtomicI64::new(0)).collect(),
            payload: (0..capacity * width).map(|_| AtomicI64::new(0)).collect(),
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn capacity(&self) -> usize {
        self.state.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.len.load(Ordering::Acquire)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bytes held by the slots.
    pub fn footprint(&self) -> usize {
        self.capacity() * (1 + 8 + 8 * self.width)
    }

    /// Inserts a unique key. Safe to call from many threads at once.
    pub fn insert(&self, key: i64, payload: &[i64]) -> Result<(), ExecError> {
        debug_assert_eq!(payload.len(), self.width);
        let reserved = self.len.fetch_add(1, Ordering::AcqRel) + 1;
        if reserved > self.limit {
            self.len.fetch_sub(1, Ordering::AcqRel);
            return Err(ExecError::HashTableOverflow {
                table: self.id,
                capacity: self.capacity(),
            });
        }
        let mask = self.capacity() - 1;
        let mut slot = hash_key(key, self.bits);
        loop {
            match self.state[slot].compare_exchange(EMPTY, CLAIMED, Ordering::AcqRel, Ordering::Acquire) {
                Ok(_) => {
                    self.keys[slot].store(key, Ordering::Relaxed);
                    for (i, v) in payload.iter().enumerate() {
                        self.payload[slot * self.width + i].store(*v, Ordering::Relaxed);
                    }
                    self.state[slot].store(READY, Ordering::Release);
                    return Ok(());
                }
                Err(_) => {
                    // another writer owns the slot; wait until its key is visible
                    while self.state[slot].load(Ordering::Acquire) != READY {
                        std::hint::spin_loop();
                    }
                    if self.keys[slot].load(Ordering::Relaxed) == key {
                        self.len.fetch_sub(1, Ordering::AcqRel);
                        return Err(ExecError::DuplicateBuildKey { table: self.id, key });
                    }
                }
            }
            slot = (slot + 1) & mask;
        }
    }

    /// Looks up a key; valid once all inserts have completed.
    pub fn probe(&self, key: i64) -> Option<impl Iterator<Item = i64> + '_> {
        let mask = self.capacity() - 1;
        let mut slot = hash_key(key, self.bits);
        loop {
            match self.state[slot].load(Ordering::Acquire) {
                EMPTY => return None,
                _ if self.keys[slot].load(Ordering::Relaxed) == key => {
                    let base = slot * self.width;
                    return Some(
                        self.payload[base..base + self.width]
                            .iter()
                            .map(|v| v.load(Ordering::Relaxed)),
                    );
                }
                _ => slot = (slot + 1) & mask,
            }
        }
    }
}
