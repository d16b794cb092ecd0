// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Plain `key = value` settings for the latency model, budgets and worker
//! counts. `#` starts a comment.

use std::time::Duration;

use pathfuse_core::exec::ExecOptions;
use pathfuse_core::iosim::LatencyModel;
use pathfuse_core::loader::LoadOptions;
use pathfuse_core::page::{Compression, MAX_PAGE_SIZE, MIN_PAGE_SIZE};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("config line {line}: {msg}")]
pub struct ConfigError {
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub exec: ExecOptions,
    pub latency: LatencyModel,
    pub load: LoadOptions,
    /// Set when the file names `io_workers`; otherwise each query picks its own.
    pub io_workers_set: bool,
}

/// Integer with an optional `K`, `M` or `G` suffix (powers of 1024).
pub fn parse_size(text: &str) -> Option<usize> {
    let t = text.trim();
    let (digits, shift) = match t.as_bytes().last()? {
        b'K' | b'k' => (&t[..t.len() - 1], 10),
        b'M' | b'm' => (&t[..t.len() - 1], 20),
        b'G' | b'g' => (&t[..t.len() - 1], 30),
        _ => (t, 0),
    };
    digits.trim().parse::<usize>().ok()?.checked_mul(1 << shift)
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| ConfigError { line: i + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, found {line:?}")))?;
            cfg.set(key.trim(), value.trim()).map_err(err)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let size = || parse_size(value).ok_or_else(|| format!("{key}: not a size: {value:?}"));
        let count = || match size()? {
            0 => Err(format!("{key} must be at least 1")),
            n => Ok(n),
        };
        let float = || {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| format!("{key}: not a non-negative number: {value:?}"))
        };
        let micros = || {
            Duration::try_from_secs_f64(float()? / 1e6).map_err(|_| format!("{key}: {value} is too large"))
        };
        match key {
            "workers" => self.exec.workers = count()?,
            "io_workers" => {
                self.exec.io_workers = count()?;
                self.io_workers_set = true;
            }
            "queue_depth" => self.exec.queue_depth = count()?,
            "scratch_budget" => self.exec.scratch_budget = size()?,
            "work_mem_budget" => self.exec.work_mem_budget = size()?,
            "prune" => {
                self.exec.prune = value.parse().map_err(|_| format!("prune: expected true or false, found {value:?}"))?
            }
            "latency.service_us" => self.latency.service_time = micros()?,
            "latency.launch_us" => self.latency.launch_overhead = micros()?,
            "latency.bytes_per_sec" => match float()? {
                0.0 => return Err("latency.bytes_per_sec must be positive".into()),
                v => self.latency.bytes_per_sec = v,
            },
            "page_size" => {
                let v = size()?;
                if !(MIN_PAGE_SIZE..=MAX_PAGE_SIZE).contains(&v) {
                    return Err(format!("page_size {v} outside {MIN_PAGE_SIZE}..={MAX_PAGE_SIZE}"));
                }
                self.load.page.page_size = v;
            }
            "devices" => self.load.devices = count()?,
            "load_workers" => self.load.workers = count()?,
            "compression" => {
                self.load.page.compression = match value {
                    "type_specific" => Compression::TypeSpecific,
                    "plain" => Compression::Plain,
                    _ => return Err(format!("compression: expected type_specific or plain, found {value:?}")),
                }
            }
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let cfg = Config::parse(
            "# desk settings\n\
             workers = 3\n\
             io_workers = 2   # per pipeline\n\
             queue_depth = 16\n\
             scratch_budget = 64K\n\
             work_mem_budget = 1G\n\
             prune = false\n\
             latency.service_us = 20\n\
             latency.bytes_per_sec = 1e9\n\
             latency.launch_us = 0\n\
             \n\
             page_size = 256K\n\
             devices = 4\n\
             load_workers = 2\n\
             compression = plain\n",
        )
        .unwrap();
        assert_eq!(cfg.exec.workers, 3);
        assert_eq!(cfg.exec.io_workers, 2);
        assert!(cfg.io_workers_set);
        assert_eq!(cfg.exec.queue_depth, 16);
        assert_eq!(cfg.exec.scratch_budget, 65536);
        assert_eq!(cfg.exec.work_mem_budget, 1 << 30);
        assert!(!cfg.exec.prune);
        assert_eq!(cfg.latency.service_time, Duration::from_micros(20));
        assert_eq!(cfg.latency.bytes_per_sec, 1e9);
        assert_eq!(cfg.latency.launch_overhead, Duration::ZERO);
        assert_eq!(cfg.load.page.page_size, 256 << 10);
        assert_eq!(cfg.load.devices, 4);
        assert_eq!(cfg.load.workers, 2);
        assert_eq!(cfg.load.page.compression, Compression::Plain);
    }

    #[test]
    fn empty_is_default() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
        assert_eq!(Config::parse("# nothing\n\n").unwrap(), Config::default());
    }

    #[test]
    fn errors_carry_line() {
        let e = Config::parse("workers = 2\nbogus = 1\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.msg.contains("bogus"));
        assert_eq!(Config::parse("workers 2").unwrap_err().line, 1);
        assert_eq!(Config::parse("\nworkers = 0").unwrap_err().line, 2);
        assert!(Config::parse("page_size = 4K").is_err());
        assert!(Config::parse("latency.bytes_per_sec = 0").is_err());
        assert!(Config::parse("compression = zstd").is_err());
        assert!(Config::parse("latency.launch_us = 1e300").is_err());
        assert!(Config::parse("latency.service_us = NaN").is_err());
    }

    #[test]
    fn sizes() {
        assert_eq!(parse_size("12"), Some(12));
        assert_eq!(parse_size("2M"), Some(2 << 20));
        assert_eq!(parse_size("1k"), Some(1024));
        assert_eq!(parse_size("x"), None);
        assert_eq!(parse_size(""), None);
        assert_eq!(parse_size("99999999999999999999G"), None);
    }
}
