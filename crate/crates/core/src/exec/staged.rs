// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Separate passes for IO, decompression and each operator, with every
//! intermediate materialized in full between passes.

use std::collections::HashMap;
use std::sync::Arc;

use crate::iosim::{configure_queues, QueuePair};
use crate::page::Page;

use super::batch::{decode_page_rows, Batch, Col};
use super::{
    apply_op, build_table, fetch_pages, new_trace, parallel_tasks, Aggregator, Bound, ExecError, ExecOptions,
    ExecTrace, HashTable, Mode, Output, PrunedInput, STAGED_CHUNK_ROWS,
};

/// Pages per IO task.
const IO_TASK_PAGES: usize = 8;

struct Budget {
    live: usize,
    limit: usize,
    total: u64,
}

impl Budget {
    fn alloc(&mut self, bytes: usize) -> Result<(), ExecError> {
        self.live += bytes;
        self.total += bytes as u64;
        if self.live > self.limit {
            return Err(ExecError::BudgetExceeded {
                needed: self.live,
                budget: self.limit,
            });
        }
        Ok(())
    }

    fn free(&mut self, bytes: usize) {
        self.live -= bytes;
    }
}

pub(crate) fn run_pipeline_staged(
    db: &crate::store::Database,
    b: &Bound<'_>,
    input: &PrunedInput,
    tables: &HashMap<usize, Arc<HashTable>>,
    opts: &ExecOptions,
) -> Result<(Output, ExecTrace), ExecError> {
    let mut trace = new_trace(b, Mode::Staged, input);
    let build = build_table(b, input);
    let stats = db.devices.stats();
    let mut budget = Budget {
        live: 0,
        limit: opts.work_mem_budget,
        total: 0,
    };
    let mut pairs: Vec<Vec<QueuePair>> =
        configure_queues(&db.devices, opts.workers, opts.io_workers, opts.queue_depth).groups;

    // IO: one pass per column into a staging buffer.
    let mut staged: Vec<Vec<Vec<u8>>> = Vec::with_capacity(b.cols.len());
    for list in &input.lists {
        db.devices.launch_pass();
        let tasks: Vec<&[u64]> = list.page_ids.chunks(IO_TASK_PAGES).collect();
        let bufs: Vec<Vec<Vec<u8>>> = parallel_tasks(&mut pairs, tasks.len(), |p, i| Ok(fetch_pages(p, tasks[i])?))?;
        let bufs: Vec<Vec<u8>> = bufs.into_iter().flatten().collect();
        budget.alloc(bufs.iter().map(Vec::len).sum())?;
        stats.add_barriers(1);
        staged.push(bufs);
    }

    // Decompression: one pass per column into a full column array.
    let mut cols = Vec::with_capacity(b.cols.len());
    let mut units: Vec<()> = vec![(); opts.workers];
    for ((c, list), bufs) in b.cols.iter().zip(&input.lists).zip(staged) {
        db.devices.launch_pass();
        let parts = parallel_tasks(&mut units, list.page_ids.len(), |_, i| {
            let page_id = list.page_ids[i];
            let perr = |source| ExecError::Page { page_id, source };
            let page = Page::parse(&bufs[i]).map_err(perr)?;
            let span = c.pages.rids.span(c.pages.ordinal(page_id).expect("page belongs to column"));
            let mut col = Col::empty_for(c.col_type);
            for r in &input.rids {
                let (lo, hi) = (r.start.max(span.start), r.end.min(span.end));
                if lo < hi {
                    decode_page_rows(&page, c.col_type, (lo - span.start) as usize..(hi - span.start) as usize, &mut col)
                        .map_err(perr)?;
                }
            }
            Ok(Batch::new(vec![col]))
        })?;
        let col = Batch::concat(parts);
        budget.alloc(col.footprint())?;
        budget.free(bufs.iter().map(Vec::len).sum());
        stats.add_barriers(1);
        cols.push(col.cols().first().cloned().unwrap_or_else(|| Col::empty_for(c.col_type)));
    }
    let mut batch = Batch::new(cols);

    // Operators: one pass each over the materialized intermediate.
    let mut workers: Vec<Option<Aggregator>> = vec![None; opts.workers];
    for op in &b.ops {
        db.devices.launch_pass();
        let mut chunks: Vec<std::ops::Range<usize>> = (0..batch.rows())
            .step_by(STAGED_CHUNK_ROWS)
            .map(|s| s..(s + STAGED_CHUNK_ROWS).min(batch.rows()))
            .collect();
        if chunks.is_empty() {
            chunks.push(0..0);
        }
        let outs = parallel_tasks(&mut workers, chunks.len(), |agg, i| {
            apply_op(op, batch.slice(chunks[i].clone()), tables, build.as_ref(), agg)
        })?;
        stats.add_barriers(1);
        let outs: Vec<Batch> = outs.into_iter().flatten().collect();
        if outs.is_empty() {
            break;
        }
        let next = Batch::concat(outs);
        budget.alloc(next.footprint())?;
        budget.free(batch.footprint());
        batch = next;
    }
    trace.intermediate_bytes = budget.total;

    let out = match build {
        Some(t) => Output::Table(t.id(), t),
        None => {
            let mut total: Option<Aggregator> = None;
            for a in workers.into_iter().flatten() {
                match total.as_mut() {
                    Some(t) => t.merge(a)?,
                    None => total = Some(a),
                }
            }
            Output::Rows(total.map(Aggregator::finish).unwrap_or_default())
        }
    };
    Ok((out, trace))
}
