// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Fuzz entry points for the text formats owned by this crate.

use crate::config::Config;
use crate::parse_schema;

/// A settings file.
pub fn config(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = Config::parse(text) else { return };
    let padded = format!("# header\n\n{text}\n# trailer\n");
    assert_eq!(Config::parse(&padded).expect("comments are ignored"), cfg);
}

/// A TOML schema.
pub fn schema(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(schema) = parse_schema(text) else { return };
    let again = toml::to_string(&schema).expect("schema serializes");
    assert_eq!(parse_schema(&again).expect("serialized schema parses"), schema);
}
