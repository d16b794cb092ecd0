// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! One pass per pipeline: each worker takes a page group through IO,
//! decompression and the operator chain before claiming the next.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::iosim::{configure_queues, QueuePair};
use crate::page::Page;
use crate::store::ColumnMeta;

use super::batch::{decode_page_rows, Batch, Col};
use super::{
    apply_op, build_table, fetch_pages, new_trace, page_groups, parallel_tasks, Aggregator, Bound, ExecError,
    ExecOptions, ExecTrace, HashTable, Mode, Output, PageGroup, PrunedInput,
};

struct Worker {
    pairs: Vec<QueuePair>,
    agg: Option<Aggregator>,
}

/// Decodes the surviving rows of a group, in RID order, one column at a time.
pub(crate) fn decode_group(cols: &[&ColumnMeta], group: &PageGroup, raw: &[Vec<u8>]) -> Result<Batch, ExecError> {
    let mut raw = raw.iter();
    let mut out = Vec::with_capacity(cols.len());
    for (c, ids) in cols.iter().zip(&group.pages) {
        let mut col = Col::empty_for(c.col_type);
        let mut pages = Vec::with_capacity(ids.len());
        for &page_id in ids {
            let bytes = raw.next().expect("one buffer per page");
            let page = Page::parse(bytes).map_err(|source| ExecError::Page { page_id, source })?;
            let ord = c.pages.ordinal(page_id).expect("page belongs to column");
            pages.push((page_id, c.pages.rids.span(ord), page));
        }
        for r in &group.rows {
            for (page_id, span, page) in &pages {
                let (lo, hi) = (r.start.max(span.start), r.end.min(span.end));
                if lo < hi {
                    let local = (lo - span.start) as usize..(hi - span.start) as usize;
                    decode_page_rows(page, c.col_type, local, &mut col)
                        .map_err(|source| ExecError::Page { page_id: *page_id, source })?;
                }
            }
        }
        out.push(col);
    }
    Ok(Batch::new(out))
}

pub(crate) fn run_pipeline_fused(
    db: &crate::store::Database,
    b: &Bound<'_>,
    input: &PrunedInput,
    tables: &HashMap<usize, Arc<HashTable>>,
    opts: &ExecOptions,
) -> Result<(Output, ExecTrace), ExecError> {
    let mut trace = new_trace(b, Mode::Fused, input);
    let groups = page_groups(&b.cols, input);
    trace.page_groups = groups.len() as u64;
    let build = build_table(b, input);
    let stats = db.devices.stats();
    let spills = AtomicU64::new(0);

    db.devices.launch_pass();
    let mut workers: Vec<Worker> = configure_queues(&db.devices, opts.workers, opts.io_workers, opts.queue_depth)
        .groups
        .into_iter()
        .map(|pairs| Worker { pairs, agg: None })
        .collect();
    parallel_tasks(&mut workers, groups.len(), |w, gi| {
        let group = &groups[gi];
        let ids: Vec<u64> = group.pages.iter().flatten().copied().collect();
        let raw = fetch_pages(&mut w.pairs, &ids)?;
        stats.add_barriers(1);
        let mut batch = decode_group(&b.cols, group, &raw)?;
        stats.add_barriers(1);
        let working_set: usize = raw.iter().map(Vec::len).sum::<usize>() + batch.footprint();
        if working_set > opts.scratch_budget {
            spills.fetch_add(1, Ordering::Relaxed);
        }
        drop(raw);
        for op in &b.ops {
            match apply_op(op, batch, tables, build.as_ref(), &mut w.agg)? {
                Some(next) => batch = next,
                None => break,
            }
        }
        Ok(())
    })?;
    stats.add_barriers(1);
    trace.spills = spills.into_inner();

    let out = match build {
        Some(t) => Output::Table(t.id(), t),
        None => {
            let mut total: Option<Aggregator> = None;
            for w in workers {
                if let Some(a) = w.agg {
                    match total.as_mut() {
                        Some(t) => t.merge(a)?,
                        None => total = Some(a),
                    }
                }
            }
            Output::Rows(total.map(Aggregator::finish).unwrap_or_default())
        }
    };
    Ok((out, trace))
}
