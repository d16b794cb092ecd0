// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Columnar analytical engine with compressed page storage, zone-map pruning,
//! a simulated queue-pair device array, and pipeline execution in fused and
//! staged modes.

pub mod catalog;
pub mod codec;
pub mod exec;
#[doc(hidden)]
pub mod fuzz_entry;
pub mod iosim;
pub mod loader;
pub mod page;
pub mod schema;
pub mod store;
pub mod values;
