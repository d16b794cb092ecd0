// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Static symbol-table string compression.
//!
//! A table holds up to 255 symbols of 1..=8 bytes. Encoding replaces the
//! longest matching symbol at each position with its one-byte code; bytes
//! with no match are written as the escape code followed by the literal.
//! Records decode independently of each other.

use std::collections::{HashMap, HashSet};

use super::CodecError;

pub const ESCAPE_CODE: u8 = 255;
pub const MAX_SYMBOLS: usize = 255;
pub const MAX_SYMBOL_LEN: usize = 8;
/// Count byte plus 255 (length byte + 8 symbol bytes).
pub const MAX_TABLE_BYTES: usize = 1 + MAX_SYMBOLS * (1 + MAX_SYMBOL_LEN);
/// Sample bytes considered when building a table.
pub const SAMPLE_CAP: usize = 16 * 1024;
pub const BUILD_ROUNDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SymbolTable {
    symbols: Vec<Vec<u8>>,
}

impl SymbolTable {
    pub fn new(symbols: Vec<Vec<u8>>) -> Result<Self, CodecError> {
        if symbols.len() > MAX_SYMBOLS {
            return Err(CodecError::BadSymbolTable("more than 255 symbols"));
        }
        if symbols
            .iter()
            .any(|s| s.is_empty() || s.len() > MAX_SYMBOL_LEN)
        {
            return Err(CodecError::BadSymbolTable("symbol length outside 1..=8"));
        }
        Ok(SymbolTable { symbols })
    }

    pub fn empty() -> Self {
        SymbolTable::default()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Vec<u8>] {
        &self.symbols
    }

    pub fn symbol(&self, code: u8) -> Option<&[u8]> {
        self.symbols.get(code as usize).map(Vec::as_slice)
    }

    pub fn serialized_len(&self) -> usize {
        1 + self.symbols.iter().map(|s| 1 + s.len()).sum::<usize>()
    }

    /// Count byte, then a length byte and the bytes of each symbol.
    pub fn serialize(&self, out: &mut Vec<u8>) {
        out.push(self.symbols.len() as u8);
        for s in &self.symbols {
            out.push(s.len() as u8);
            out.extend_from_slice(s);
        }
    }

    /// Parses a serialized table, returning it and the bytes consumed.
    pub fn deserialize(bytes: &[u8]) -> Result<(Self, usize), CodecError> {
        let (&count, mut rest) = bytes
            .split_first()
            .ok_or(CodecError::BadSymbolTable("missing symbol count"))?;
        if count as usize > MAX_SYMBOLS {
            return Err(CodecError::BadSymbolTable("more than 255 symbols"));
        }
        let mut symbols = Vec::with_capacity(count as usize);
        let mut consumed = 1;
        for _ in 0..count {
            let (&len, tail) = rest
                .split_first()
                .ok_or(CodecError::BadSymbolTable("truncated symbol"))?;
            let len = len as usize;
            if len == 0 || len > MAX_SYMBOL_LEN {
                return Err(CodecError::BadSymbolTable("symbol length outside 1..=8"));
            }
            if tail.len() < len {
                return Err(CodecError::BadSymbolTable("truncated symbol"));
            }
            symbols.push(tail[..len].to_vec());
            rest = &tail[len..];
            consumed += 1 + len;
        }
        Ok((SymbolTable { symbols }, consumed))
    }

    /// Lookup structure for encoding against this table.
    pub fn encoder(&self) -> Encoder<'_> {
        Encoder::new(self)
    }
}

/// Longest-match lookup: candidate codes bucketed by first byte, longest first.
pub struct Encoder<'a> {
    table: &'a SymbolTable,
    by_first: Vec<Vec<u8>>,
}

impl<'a> Encoder<'a> {
    fn new(table: &'a SymbolTable) -> Self {
        let mut by_first = vec![Vec::new(); 256];
        for (code, s) in table.symbols.iter().enumerate() {
            by_first[s[0] as usize].push(code as u8);
        }
        for bucket in &mut by_first {
            // stable: equal-length symbols keep table order
            bucket.sort_by_key(|&c| std::cmp::Reverse(table.symbols[c as usize].len()));
        }
        Encoder { table, by_first }
    }

    /// Code and length of the longest symbol matching at the start of `input`.
    fn longest_match(&self, input: &[u8]) -> Option<(u8, usize)> {
        self.by_first[input[0] as usize].iter().find_map(|&code| {
            let s = &self.table.symbols[code as usize];
            input.starts_with(s).then_some((code, s.len()))
        })
    }

    pub fn encode_into(&self, record: &[u8], out: &mut Vec<u8>) {
        let mut pos = 0;
        while pos < record.len() {
            match self.longest_match(&record[pos..]) {
                Some((code, len)) => {
                    out.push(code);
                    pos += len;
                }
                None => {
                    out.push(ESCAPE_CODE);
                    out.push(record[pos]);
                    pos += 1;
                }
            }
        }
    }

    pub fn encode(&self, record: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(record.len());
        self.encode_into(record, &mut out);
        out
    }

    /// Splits `record` into the byte runs the encoder would emit.
    fn tokens<'r>(&self, record: &'r [u8]) -> Vec<&'r [u8]> {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < record.len() {
            let len = self.longest_match(&record[pos..]).map_or(1, |(_, l)| l);
            out.push(&record[pos..pos + len]);
            pos += len;
        }
        out
    }
}

pub fn fsst_encode(table: &SymbolTable, record: &[u8]) -> Vec<u8> {
    table.encoder().encode(record)
}

/// Length-only pass: decoded size of `encoded` without producing bytes.
pub fn fsst_decoded_len(table: &SymbolTable, encoded: &[u8]) -> Result<usize, CodecError> {
    let mut len = 0;
    let mut i = 0;
    while i < encoded.len() {
        let code = encoded[i];
        if code == ESCAPE_CODE {
            if i + 1 >= encoded.len() {
                return Err(CodecError::TrailingEscape);
            }
            len += 1;
            i += 2;
        } else {
            len += table.symbol(code).ok_or(CodecError::UnknownCode(code))?.len();
            i += 1;
        }
    }
    Ok(len)
}

/// Decodes into `out`, which must be exactly the decoded length.
pub fn fsst_decode_into(
    table: &SymbolTable,
    encoded: &[u8],
    out: &mut [u8],
) -> Result<(), CodecError> {
    let mut pos = 0;
    let mut i = 0;
    let overflow = || CodecError::LengthMismatch;
    while i < encoded.len() {
        let code = encoded[i];
        if code == ESCAPE_CODE {
            let &lit = encoded.get(i + 1).ok_or(CodecError::TrailingEscape)?;
            *out.get_mut(pos).ok_or_else(overflow)? = lit;
            pos += 1;
            i += 2;
        } else {
            let s = table.symbol(code).ok_or(CodecError::UnknownCode(code))?;
            out.get_mut(pos..pos + s.len())
                .ok_or_else(overflow)?
                .copy_from_slice(s);
            pos += s.len();
            i += 1;
        }
    }
    if pos != out.len() {
        return Err(overflow());
    }
    Ok(())
}

pub fn fsst_decode_record(table: &SymbolTable, encoded: &[u8]) -> Result<Vec<u8>, CodecError> {
    let mut out = vec![0; fsst_decoded_len(table, encoded)?];
    fsst_decode_into(table, encoded, &mut out)?;
    Ok(out)
}

/// Picks records spread across the input until `SAMPLE_CAP` bytes are taken.
fn sample<R: AsRef<[u8]>>(records: &[R]) -> Vec<&[u8]> {
    let total: usize = records.iter().map(|r| r.as_ref().len()).sum();
    let stride = total.div_ceil(SAMPLE_CAP).max(1);
    let mut out = Vec::new();
    let mut taken = 0;
    for r in records.iter().step_by(stride) {
        let r = r.as_ref();
        if taken >= SAMPLE_CAP {
            break;
        }
        let take = r.len().min(SAMPLE_CAP - taken);
        out.push(&r[..take]);
        taken += take;
    }
    out
}

/// Builds a symbol table by iterative greedy refinement.
///
/// Each round tokenizes the sample with the current table, proposes every
/// emitted token and every concatenation of two adjacent tokens (up to 8
/// bytes), scores each candidate by occurrence count in the sample times its
/// length, and keeps the best 255. Free slots of the final table are filled
/// with the best symbols dropped in earlier rounds.
pub fn fsst_build_table<R: AsRef<[u8]>>(records: &[R]) -> SymbolTable {
    let sample = sample(records);
    let mut freq: HashMap<&[u8], u64> = HashMap::new();
    for r in &sample {
        for start in 0..r.len() {
            for len in 1..=MAX_SYMBOL_LEN.min(r.len() - start) {
                *freq.entry(&r[start..start + len]).or_default() += 1;
            }
        }
    }
    if freq.is_empty() {
        return SymbolTable::empty();
    }
    let gain = |s: &[u8]| freq.get(s).copied().unwrap_or(0) * s.len() as u64;
    let rank = |cands: HashSet<Vec<u8>>| -> Vec<(u64, Vec<u8>)> {
        let mut ranked: Vec<_> = cands
            .into_iter()
            .map(|s| (gain(&s), s))
            .filter(|(g, _)| *g > 0)
            .collect();
        ranked.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        ranked
    };

    let mut table = SymbolTable::empty();
    let mut dropped: Vec<(u64, Vec<u8>)> = Vec::new();
    for _ in 0..BUILD_ROUNDS {
        let enc = table.encoder();
        let mut cands: HashSet<Vec<u8>> = HashSet::new();
        for r in &sample {
            let toks = enc.tokens(r);
            for (i, t) in toks.iter().enumerate() {
                cands.insert(t.to_vec());
                if let Some(next) = toks.get(i + 1) {
                    if t.len() + next.len() <= MAX_SYMBOL_LEN {
                        cands.insert([*t, *next].concat());
                    }
                }
            }
        }
        let mut ranked = rank(cands);
        let rest = ranked.split_off(ranked.len().min(MAX_SYMBOLS));
        dropped.extend(rest);
        for s in &table.symbols {
            if !ranked.iter().any(|(_, k)| k == s) {
                dropped.push((gain(s), s.clone()));
            }
        }
        table = SymbolTable {
            symbols: ranked.into_iter().map(|(_, s)| s).collect(),
        };
    }

    dropped.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    for (_, s) in dropped {
        if table.symbols.len() == MAX_SYMBOLS {
            break;
        }
        if !table.symbols.contains(&s) {
            table.symbols.push(s);
        }
    }
    table
}
