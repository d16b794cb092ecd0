// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Pipeline execution over a loaded [`Database`].
//!
//! A query is a list of pipelines run in order. Each pipeline scans some
//! columns of one table and pushes the rows through an operator chain that
//! ends in a hash build (consumed by later probes) or an aggregate.

pub mod agg;
pub mod batch;
mod fused;
pub mod hash;
pub mod kmp;
mod staged;

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{
    intersect_page_lists, prune, reference_attr, rid_intervals, Comparison, PrunedPageList, RidSet, ZonePredicate,
};
use crate::codec::ColumnType;
use crate::iosim::{IoError, IoRequest, IoStatsSnapshot, QueuePair, DEFAULT_QUEUE_DEPTH};
use crate::page::PageError;
use crate::schema::{is_zone_mappable, pad_char, SchemaError};
use crate::store::{ColumnMeta, Database};

pub use agg::{Agg, AggFunc, Aggregator, Expr};
pub use batch::{filter_apply, Batch, Col};
pub use hash::HashTable;
pub use kmp::LikePattern;

/// Scratch bytes per worker before a page group counts as spilled.
pub const DEFAULT_SCRATCH_BUDGET: usize = 192 << 10;
/// Cap on live intermediates in staged mode.
pub const DEFAULT_WORK_MEM_BUDGET: usize = 1 << 30;
/// Rows per task in staged operator passes.
pub(crate) const STAGED_CHUNK_ROWS: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("plan: {0}")]
    Plan(String),
    #[error("unsupported LIKE pattern {0:?}: only %substring% is implemented")]
    UnsupportedPattern(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("hash table {table} overflowed its {capacity} slots")]
    HashTableOverflow { table: usize, capacity: usize },
    #[error("hash table {table}: duplicate build key {key}")]
    DuplicateBuildKey { table: usize, key: i64 },
    #[error("64-bit arithmetic overflow")]
    ArithmeticOverflow,
    #[error("intermediates need {needed} bytes, work-memory budget is {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
    #[error("page {page_id}: {source}")]
    Page { page_id: u64, source: PageError },
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Fused,
    Staged,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Fused => "fused",
            Mode::Staged => "staged",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fused" => Ok(Mode::Fused),
            "staged" => Ok(Mode::Staged),
            _ => Err(format!("unknown mode {s:?} (fused|staged)")),
        }
    }
}

/// A row predicate on a batch slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    Cmp { slot: usize, cmp: Comparison },
    /// For CHAR(n) columns the constant is padded to `n` at plan resolution.
    StrEq { slot: usize, value: Vec<u8> },
    Like { slot: usize, pattern: LikePattern, negated: bool },
}

impl Predicate {
    pub fn like(slot: usize, pattern: &str, negated: bool) -> Result<Self, ExecError> {
        Ok(Predicate::Like {
            slot,
            pattern: LikePattern::parse(pattern)?,
            negated,
        })
    }

    fn slot(&self) -> usize {
        match self {
            Predicate::Cmp { slot, .. } | Predicate::StrEq { slot, .. } | Predicate::Like { slot, .. } => *slot,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operator {
    /// Conjunction.
    Filter(Vec<Predicate>),
    /// Inner join on a unique build key; appends the table's payload slots.
    HashProbe { table: usize, key: usize },
    HashBuild { table: usize, key: usize, payload: Vec<usize> },
    Aggregate { groups: Vec<usize>, aggs: Vec<Agg> },
}

/// Prune on the reference attribute `table.column` carried by the scanned table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefPrune {
    pub table: String,
    pub column: String,
    pub cmp: Comparison,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelinePlan {
    pub name: String,
    pub table: String,
    /// Input columns; they occupy slots `0..columns.len()`.
    pub columns: Vec<String>,
    pub operators: Vec<Operator>,
    pub ref_prune: Vec<RefPrune>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPlan {
    pub name: String,
    pub pipelines: Vec<PipelinePlan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecOptions {
    pub mode: Mode,
    pub workers: usize,
    pub io_workers: usize,
    pub queue_depth: usize,
    pub scratch_budget: usize,
    pub work_mem_budget: usize,
    /// Off: every page of every input column is scanned.
    pub prune: bool,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            mode: Mode::Fused,
            workers: std::thread::available_parallelism().map_or(4, |n| n.get()),
            io_workers: 1,
            queue_depth: DEFAULT_QUEUE_DEPTH,
            scratch_budget: DEFAULT_SCRATCH_BUDGET,
            work_mem_budget: DEFAULT_WORK_MEM_BUDGET,
            prune: true,
        }
    }
}

/// Rows of group keys then aggregate values, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QueryResult {
    pub rows: Vec<Vec<i64>>,
}

impl fmt::Display for QueryResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(i64::to_string).collect();
            writeln!(f, "{}", cells.join("|"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecTrace {
    pub pipeline: String,
    pub mode: Mode,
    pub pass_launches: u64,
    pub barrier_count: u64,
    pub bytes_read: u64,
    pub requests: u64,
    pub pages_read: u64,
    pub intermediate_bytes: u64,
    pub page_groups: u64,
    pub spills: u64,
    pub rows_scanned: u64,
    pub wall_ms: f64,
}

impl ExecTrace {
    /// The fields that must not depend on worker count.
    pub fn counters(&self) -> [u64; 8] {
        [
            self.pass_launches,
            self.barrier_count,
            self.bytes_read,
            self.requests,
            self.pages_read,
            self.intermediate_bytes,
            self.page_groups,
            self.rows_scanned,
        ]
    }

    /// One `key=value` line.
    pub fn to_kv(&self) -> String {
        format!(
            "pipeline={} mode={} pass_launches={} barrier_count={} bytes_read={} intermediate_bytes={} wall_ms={:.3}",
            self.pipeline,
            self.mode,
            self.pass_launches,
            self.barrier_count,
            self.bytes_read,
            self.intermediate_bytes,
            self.wall_ms
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryTrace {
    pub query: String,
    pub mode: Mode,
    pub pruning_launches: u64,
    pub pipelines: Vec<ExecTrace>,
    pub totals: IoStatsSnapshot,
    pub wall_ms: f64,
}

impl QueryTrace {
    pub fn pass_launches(&self) -> u64 {
        self.totals.pass_launches
    }

    pub fn intermediate_bytes(&self) -> u64 {
        self.pipelines.iter().map(|p| p.intermediate_bytes).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutput {
    pub result: QueryResult,
    pub trace: QueryTrace,
}

/// A pipeline bound to catalog columns.
#[derive(Debug)]
pub(crate) struct Bound<'a> {
    pub name: &'a str,
    pub cols: Vec<&'a ColumnMeta>,
    pub ops: Vec<Operator>,
    pub zone_preds: Vec<ZonePredicate>,
}

/// Pages and rows surviving the pruning pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrunedInput {
    /// One list per input column, in slot order.
    pub lists: Vec<PrunedPageList>,
    pub rids: RidSet,
}

impl PrunedInput {
    pub fn row_count(&self) -> u64 {
        self.rids.iter().map(|r| r.end - r.start).sum()
    }
}

/// Pages of all input columns whose RID spans chain together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageGroup {
    /// Per column, page ids in RID order.
    pub pages: Vec<Vec<u64>>,
    /// Rows of the group that survive pruning.
    pub rows: RidSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SlotKind {
    Int,
    Str,
}

fn bind<'a>(db: &'a Database, plan: &'a PipelinePlan, widths: &mut HashMap<usize, usize>) -> Result<Bound<'a>, ExecError> {
    let perr = |m: String| ExecError::Plan(format!("pipeline {}: {m}", plan.name));
    if plan.columns.is_empty() {
        return Err(perr("no input columns".into()));
    }
    let cols: Vec<&ColumnMeta> = plan
        .columns
        .iter()
        .map(|c| db.column(&plan.table, c))
        .collect::<Result<_, _>>()?;
    let mut kinds: Vec<SlotKind> = cols
        .iter()
        .map(|c| if c.col_type.is_fixed() { SlotKind::Int } else { SlotKind::Str })
        .collect();
    let want = |kinds: &[SlotKind], slot: usize, k: SlotKind| -> Result<(), ExecError> {
        match kinds.get(slot) {
            Some(&got) if got == k => Ok(()),
            Some(_) => Err(perr(format!("slot {slot} has the wrong type"))),
            None => Err(perr(format!("slot {slot} out of range"))),
        }
    };
    let mut ops = plan.operators.clone();
    let mut zone_preds = Vec::new();
    let last = ops.len().checked_sub(1).ok_or_else(|| perr("empty operator chain".into()))?;
    for (i, op) in ops.iter_mut().enumerate() {
        let terminal = matches!(op, Operator::HashBuild { .. } | Operator::Aggregate { .. });
        if terminal != (i == last) {
            return Err(perr("the chain must end in exactly one build or aggregate".into()));
        }
        match op {
            Operator::Filter(preds) => {
                for p in preds.iter_mut() {
                    let slot = p.slot();
                    match p {
                        Predicate::Cmp { cmp, .. } => {
                            want(&kinds, slot, SlotKind::Int)?;
                            if let Some(c) = cols.get(slot).filter(|c| is_zone_mappable(c.col_type)) {
                                zone_preds.push(ZonePredicate { attr: c.id, cmp: *cmp });
                            }
                        }
                        Predicate::StrEq { value, .. } => {
                            want(&kinds, slot, SlotKind::Str)?;
                            if let Some(ColumnType::Char(n)) = cols.get(slot).map(|c| c.col_type) {
                                *value = pad_char(value, n);
                            }
                        }
                        Predicate::Like { .. } => want(&kinds, slot, SlotKind::Str)?,
                    }
                }
            }
            Operator::HashProbe { table, key } => {
                want(&kinds, *key, SlotKind::Int)?;
                let w = *widths
                    .get(table)
                    .ok_or_else(|| perr(format!("probe of hash table {table} before it is built")))?;
                kinds.extend(std::iter::repeat_n(SlotKind::Int, w));
            }
            Operator::HashBuild { table, key, payload } => {
                want(&kinds, *key, SlotKind::Int)?;
                for &s in payload.iter() {
                    want(&kinds, s, SlotKind::Int)?;
                }
                if widths.insert(*table, payload.len()).is_some() {
                    return Err(perr(format!("hash table {table} built twice")));
                }
            }
            Operator::Aggregate { groups, aggs } => {
                let mut slots = groups.clone();
                for a in aggs.iter() {
                    a.expr.slots(&mut slots);
                }
                for s in slots {
                    want(&kinds, s, SlotKind::Int)?;
                }
            }
        }
    }
    for r in &plan.ref_prune {
        let id = db.manifest.schema.column_id(&r.table, &r.column)?;
        zone_preds.push(ZonePredicate {
            attr: reference_attr(id),
            cmp: r.cmp,
        });
    }
    Ok(Bound {
        name: &plan.name,
        cols,
        ops,
        zone_preds,
    })
}

/// Checks a plan against the catalog without running it.
pub fn validate_plan(db: &Database, plan: &QueryPlan) -> Result<(), ExecError> {
    let mut widths = HashMap::new();
    for p in &plan.pipelines {
        bind(db, p, &mut widths)?;
    }
    match plan.pipelines.last().and_then(|p| p.operators.last()) {
        Some(Operator::Aggregate { .. }) => Ok(()),
        _ => Err(ExecError::Plan(format!("query {} must end in an aggregate", plan.name))),
    }
}

fn prune_pipeline(db: &Database, b: &Bound<'_>, enabled: bool) -> PrunedInput {
    let lists: Vec<PrunedPageList> = b
        .cols
        .iter()
        .map(|c| {
            if enabled {
                prune(&c.zone_map, &c.pages, &b.zone_preds)
            } else {
                c.pages.all_pages()
            }
        })
        .collect();
    let lists = intersect_page_lists(&lists, &db.dictionary);
    let mut rids: Option<RidSet> = None;
    for (l, c) in lists.iter().zip(&b.cols) {
        let s = rid_intervals(l, &c.pages);
        rids = Some(match rids {
            None => s,
            Some(acc) => crate::catalog::intersect_rid_sets(&acc, &s),
        });
    }
    PrunedInput {
        lists,
        rids: rids.unwrap_or_default(),
    }
}

/// Pruning for every pipeline of a plan; counted as one pass launch.
pub fn prune_plan(db: &Database, plan: &QueryPlan, enabled: bool) -> Result<Vec<PrunedInput>, ExecError> {
    let mut widths = HashMap::new();
    let bound: Vec<Bound<'_>> = plan
        .pipelines
        .iter()
        .map(|p| bind(db, p, &mut widths))
        .collect::<Result<_, _>>()?;
    Ok(bound.iter().map(|b| prune_pipeline(db, b, enabled)).collect())
}

/// Connected components of overlapping page spans across the input columns.
pub fn page_groups(cols: &[&ColumnMeta], input: &PrunedInput) -> Vec<PageGroup> {
    let mut spans: Vec<(Range<u64>, usize, u64)> = Vec::new();
    for (ci, (c, l)) in cols.iter().zip(&input.lists).enumerate() {
        for &id in &l.page_ids {
            if let Some(ord) = c.pages.ordinal(id) {
                spans.push((c.pages.rids.span(ord), ci, id));
            }
        }
    }
    spans.sort_by_key(|(s, ci, _)| (s.start, *ci));
    let mut groups: Vec<(Range<u64>, PageGroup)> = Vec::new();
    for (span, ci, id) in spans {
        match groups.last_mut() {
            Some((g, pg)) if span.start < g.end => {
                g.end = g.end.max(span.end);
                pg.pages[ci].push(id);
            }
            _ => {
                let mut pages = vec![Vec::new(); cols.len()];
                pages[ci].push(id);
                groups.push((span, PageGroup { pages, rows: Vec::new() }));
            }
        }
    }
    groups
        .into_iter()
        .filter_map(|(span, mut g)| {
            g.rows = crate::catalog::intersect_rid_sets(&[span], &input.rids);
            (!g.rows.is_empty()).then_some(g)
        })
        .collect()
}

/// Reads `ids` spreading requests over `pairs`; results follow `ids` order.
pub(crate) fn fetch_pages(pairs: &mut [QueuePair], ids: &[u64]) -> Result<Vec<Vec<u8>>, IoError> {
    let n = pairs.len();
    let mut out: Vec<Option<Vec<u8>>> = vec![None; ids.len()];
    let mut next: Vec<usize> = (0..n).collect();
    let mut slot_of: Vec<HashMap<u64, usize>> = vec![HashMap::new(); n];
    let mut done = 0;
    while done < ids.len() {
        for (p, pair) in pairs.iter_mut().enumerate() {
            while next[p] < ids.len() && pair.in_flight() < pair.depth() {
                let t = pair.submit(IoRequest { page_id: ids[next[p]] })?;
                slot_of[p].insert(t.0, next[p]);
                next[p] += n;
            }
        }
        let mut progressed = false;
        for (p, pair) in pairs.iter_mut().enumerate() {
            while let Some(c) = pair.poll()? {
                out[slot_of[p].remove(&c.ticket.0).expect("ticket issued here")] = Some(c.bytes);
                done += 1;
                progressed = true;
            }
        }
        if !progressed {
            if let Some((p, pair)) = pairs.iter_mut().enumerate().find(|(_, q)| q.in_flight() > 0) {
                if let Some(c) = pair.wait()? {
                    out[slot_of[p].remove(&c.ticket.0).expect("ticket issued here")] = Some(c.bytes);
                    done += 1;
                }
            }
        }
    }
    Ok(out.into_iter().map(|b| b.expect("every page completed")).collect())
}

/// Result of one pipeline: a built table or the final aggregate.
pub(crate) enum Output {
    Table(usize, HashTable),
    Rows(QueryResult),
}

/// Shared first-error slot for worker pools.
#[derive(Default)]
pub(crate) struct Abort {
    flag: std::sync::atomic::AtomicBool,
    err: std::sync::Mutex<Option<ExecError>>,
}

impl Abort {
    pub fn raised(&self) -> bool {
        self.flag.load(std::sync::atomic::Ordering::Acquire)
    }

    pub fn raise(&self, e: ExecError) {
        let mut slot = self.err.lock().unwrap();
        if slot.is_none() {
            *slot = Some(e);
        }
        self.flag.store(true, std::sync::atomic::Ordering::Release);
    }

    pub fn into_result(self) -> Result<(), ExecError> {
        match self.err.into_inner().unwrap() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// Runs a query: one pruning pass, then each pipeline in plan order.
pub fn run_query(db: &Database, plan: &QueryPlan, opts: &ExecOptions) -> Result<QueryOutput, ExecError> {
    validate_plan(db, plan)?;
    let opts = ExecOptions {
        workers: opts.workers.max(1),
        io_workers: opts.io_workers.max(1),
        queue_depth: opts.queue_depth.max(1),
        ..*opts
    };
    let stats = db.devices.stats();
    let start = Instant::now();
    let before = stats.snapshot();

    db.devices.launch_pass();
    let mut widths = HashMap::new();
    let bound: Vec<Bound<'_>> = plan
        .pipelines
        .iter()
        .map(|p| bind(db, p, &mut widths))
        .collect::<Result<_, _>>()?;
    let pruned: Vec<PrunedInput> = bound.iter().map(|b| prune_pipeline(db, b, opts.prune)).collect();
    let pruning_launches = stats.snapshot().since(&before).pass_launches;

    let mut tables: HashMap<usize, Arc<HashTable>> = HashMap::new();
    let mut traces = Vec::new();
    let mut result = QueryResult::default();
    for (b, input) in bound.iter().zip(&pruned) {
        let t0 = Instant::now();
        let s0 = stats.snapshot();
        let (out, mut trace) = match opts.mode {
            Mode::Fused => fused::run_pipeline_fused(db, b, input, &tables, &opts)?,
            Mode::Staged => staged::run_pipeline_staged(db, b, input, &tables, &opts)?,
        };
        let d = stats.snapshot().since(&s0);
        trace.pass_launches = d.pass_launches;
        trace.barrier_count = d.barrier_count;
        trace.bytes_read = d.bytes_read;
        trace.requests = d.requests_issued;
        trace.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
        traces.push(trace);
        match out {
            Output::Table(id, t) => {
                tables.insert(id, Arc::new(t));
            }
            Output::Rows(r) => result = r,
        }
    }
    Ok(QueryOutput {
        result,
        trace: QueryTrace {
            query: plan.name.clone(),
            mode: opts.mode,
            pruning_launches,
            pipelines: traces,
            totals: stats.snapshot().since(&before),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    })
}

/// Runs tasks `0..n` on one thread per state; results keep task order.
pub(crate) fn parallel_tasks<S, T, F>(states: &mut [S], n: usize, f: F) -> Result<Vec<T>, ExecError>
where
    S: Send,
    T: Send + Sync,
    F: Fn(&mut S, usize) -> Result<T, ExecError> + Sync,
{
    let cursor = std::sync::atomic::AtomicUsize::new(0);
    let abort = Abort::default();
    let slots: Vec<std::sync::OnceLock<T>> = (0..n).map(|_| std::sync::OnceLock::new()).collect();
    std::thread::scope(|s| {
        for st in states.iter_mut() {
            let (cursor, abort, slots, f) = (&cursor, &abort, &slots, &f);
            s.spawn(move || loop {
                if abort.raised() {
                    return;
                }
                let i = cursor.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n {
                    return;
                }
                match f(st, i) {
                    Ok(v) => {
                        let _ = slots[i].set(v);
                    }
                    Err(e) => abort.raise(e),
                }
            });
        }
    });
    abort.into_result()?;
    Ok(slots.into_iter().map(|s| s.into_inner().expect("task ran")).collect())
}

pub(crate) fn new_trace(b: &Bound<'_>, mode: Mode, input: &PrunedInput) -> ExecTrace {
    ExecTrace {
        pipeline: b.name.to_string(),
        mode,
        pass_launches: 0,
        barrier_count: 0,
        bytes_read: 0,
        requests: 0,
        pages_read: input.lists.iter().map(|l| l.page_ids.len() as u64).sum(),
        intermediate_bytes: 0,
        page_groups: 0,
        spills: 0,
        rows_scanned: input.row_count(),
        wall_ms: 0.0,
    }
}

/// Hash table for a build terminal, sized from the pruned row bound.
pub(crate) fn build_table(b: &Bound<'_>, input: &PrunedInput) -> Option<HashTable> {
    match b.ops.last() {
        Some(Operator::HashBuild { table, payload, .. }) => {
            Some(HashTable::with_rows(*table, input.row_count(), payload.len()))
        }
        _ => None,
    }
}

/// Applies the non-terminal operator `op`; `None` means the chain ended.
pub(crate) fn apply_op(
    op: &Operator,
    batch: Batch,
    tables: &HashMap<usize, Arc<HashTable>>,
    build: Option<&HashTable>,
    agg: &mut Option<Aggregator>,
) -> Result<Option<Batch>, ExecError> {
    match op {
        Operator::Filter(preds) => {
            let bits = filter_apply(preds, &batch);
            Ok(Some(if bits.iter().all(|&b| b) { batch } else { batch.select(&bits) }))
        }
        Operator::HashProbe { table, key } => Ok(Some(batch::probe_apply(&tables[table], *key, &batch))),
        Operator::HashBuild { key, payload, .. } => {
            batch::build_apply(build.expect("build table allocated"), *key, payload, &batch)?;
            Ok(None)
        }
        Operator::Aggregate { groups, aggs } => {
            agg.get_or_insert_with(|| Aggregator::new(groups, aggs)).consume(&batch)?;
            Ok(None)
        }
    }
}

#[cfg(test)]
mod tests;
