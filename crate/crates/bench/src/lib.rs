// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Benchmark-shaped data, canned query plans, a brute-force oracle and the
//! benchmark runner behind the `pathfuse` command.

pub mod config;
#[doc(hidden)]
pub mod fuzz_entry;
pub mod gen;
pub mod oracle;
pub mod queries;
pub mod report;

use std::fmt;
use std::str::FromStr;

use pathfuse_core::schema::Schema;
use thiserror::Error;

pub use gen::{generate, Dataset};
pub use queries::{Params, QueryId};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Load(#[from] pathfuse_core::loader::LoadError),
    #[error(transparent)]
    Store(#[from] pathfuse_core::store::StoreError),
    #[error(transparent)]
    Exec(#[from] pathfuse_core::exec::ExecError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Which benchmark family a table set or query belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Tpch,
    Ssb,
}

const TPCH_SCHEMA: &str = include_str!("../schemas/tpch.toml");
const SSB_SCHEMA: &str = include_str!("../schemas/ssb.toml");

/// Parses a TOML schema description.
pub fn parse_schema(text: &str) -> Result<Schema, BenchError> {
    let schema: Schema = toml::from_str(text).map_err(|e| BenchError::Data(format!("schema: {e}")))?;
    schema.validate().map_err(|e| BenchError::Data(format!("schema: {e}")))?;
    Ok(schema)
}

impl Suite {
    pub fn schema(self) -> Schema {
        let text = match self {
            Suite::Tpch => TPCH_SCHEMA,
            Suite::Ssb => SSB_SCHEMA,
        };
        parse_schema(text).expect("bundled schema is valid")
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Tpch => "tpch",
            Suite::Ssb => "ssb",
        })
    }
}

impl FromStr for Suite {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "tpch" => Ok(Suite::Tpch),
            "ssb" => Ok(Suite::Ssb),
            _ => Err(BenchError::Usage(format!("unknown suite {s:?} (tpch|ssb)"))),
        }
    }
}
