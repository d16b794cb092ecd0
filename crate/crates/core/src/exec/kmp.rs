// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! `%needle%` LIKE matching with a Knuth-Morris-Pratt automaton.

use super::ExecError;

/// A compiled `%substring%` pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LikePattern {
    needle: Vec<u8>,
    /// `fail[i]`: length of the longest proper border of `needle[..=i]`.
    fail: Vec<usize>,
}

impl LikePattern {
    /// Accepts exactly one contiguous substring wrapped in `%`.
    pub fn parse(pattern: &str) -> Result<Self, ExecError> {
        let inner = pattern
            .strip_prefix('%')
            .and_then(|p| p.strip_suffix('%'))
            .filter(|p| !p.contains('%') && !p.contains('_'))
            .ok_or_else(|| ExecError::UnsupportedPattern(pattern.to_string()))?;
        Ok(Self::new(inner.as_bytes()))
    }

    pub fn new(needle: &[u8]) -> Self {
        LikePattern {
            needle: needle.to_vec(),
            fail: failure_function(needle),
        }
    }

    pub fn needle(&self) -> &[u8] {
        &self.needle
    }

    pub fn matches(&self, hay: &[u8]) -> bool {
        kmp_find(&self.needle, &self.fail, hay).is_some()
    }
}

pub fn failure_function(needle: &[u8]) -> Vec<usize> {
    let mut fail = vec![0; needle.len()];
    let mut k = 0;
    for i in 1..needle.len() {
        while k > 0 && needle[i] != needle[k] {
            k = fail[k - 1];
        }
        if needle[i] == needle[k] {
            k += 1;
        }
        fail[i] = k;
    }
    fail
}

/// Start of the first occurrence of `needle` in `hay`.
pub fn kmp_find(needle: &[u8], fail: &[usize], hay: &[u8]) -> Option<usize> {
    if needle.is_empty() {
        return Some(0);
    }
    let mut k = 0;
    for (i, &b) in hay.iter().enumerate() {
        while k > 0 && b != needle[k] {
            k = fail[k - 1];
        }
        if b == needle[k] {
            k += 1;
            if k == needle.len() {
                return Some(i + 1 - k);
            }
        }
    }
    None
}
