// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

// Oracles walk rows by index across several columns at once.
#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};

use super::*;
use crate::codec::pack_short_char;
use crate::iosim::LatencyModel;
use crate::loader::{load, LoadOptions};
use crate::page::PageOptions;
use crate::schema::{ColumnDef, ReferenceDef, Schema, TableData, TableDef};
use crate::values::ColumnValues;

fn col(name: &str, t: ColumnType) -> ColumnDef {
    ColumnDef { name: name.into(), col_type: t }
}

fn schema() -> Schema {
    Schema {
        tables: vec![
            TableDef {
                name: "dim".into(),
                columns: vec![col("d_key", ColumnType::Int32), col("d_grp", ColumnType::Char(1))],
                cluster_key: "d_key".into(),
                zone_attrs: vec![],
                references: vec![],
            },
            TableDef {
                name: "fact".into(),
                columns: vec![
                    col("f_date", ColumnType::Date),
                    col("f_dim", ColumnType::Int32),
                    col("f_amount", ColumnType::Decimal18_2),
                    col("f_note", ColumnType::Varchar),
                ],
                cluster_key: "f_date".into(),
                zone_attrs: vec!["f_date".into()],
                references: vec![ReferenceDef {
                    fk_column: "f_dim".into(),
                    dim_table: "dim".into(),
                    dim_key: "d_key".into(),
                    dim_attr: "d_grp".into(),
                }],
            },
        ],
    }
}

fn data(rows: usize) -> Vec<TableData> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let dim = TableData {
        columns: vec![
            ColumnValues::Int((0..200).collect()),
            ColumnValues::Bytes((0..200).map(|i| vec![b'A' + (i / 40) as u8]).collect()),
        ],
    };
    let fact = TableData {
        columns: vec![
            ColumnValues::Int((0..rows).map(|i| 9000 + (i * 2000 / rows) as i64 + rng.gen_range(0..5)).collect()),
            // dim keys drift with the date so reference zone maps can prune
            ColumnValues::Int((0..rows).map(|i| ((i * 200 / rows) as i64 + rng.gen_range(0..3)).min(199)).collect()),
            ColumnValues::Int((0..rows).map(|_| rng.gen_range(-100_000..100_000)).collect()),
            ColumnValues::Bytes(
                (0..rows)
                    .map(|_| {
                        let w = ["plain", "special", "quiet", "bold"][rng.gen_range(0..4)];
                        format!("{} note {}", w, "z".repeat(rng.gen_range(0..40))).into_bytes()
                    })
                    .collect(),
            ),
        ],
    };
    vec![dim, fact]
}

struct Fixture {
    db: Database,
    raw: Vec<TableData>,
}

fn fixture() -> &'static Fixture {
    static F: std::sync::OnceLock<Fixture> = std::sync::OnceLock::new();
    F.get_or_init(|| {
        let schema = schema();
        let raw = data(60_000);
        let opts = LoadOptions {
            page: PageOptions { page_size: 64 << 10, ..PageOptions::default() },
            devices: 2,
            workers: 2,
            device_capacity: None,
        };
        let loaded = load(&schema, &raw, &opts).unwrap();
        // the loader clusters rows; compare against the sorted copy
        let raw = raw
            .iter()
            .zip(&schema.tables)
            .map(|(t, d)| crate::loader::sort_cluster(t, d.column_index(&d.cluster_key).unwrap()))
            .collect();
        Fixture { db: loaded.into_database(LatencyModel::instant()).unwrap(), raw }
    })
}

fn ints(t: &TableData, c: usize) -> &[i64] {
    t.columns[c].as_ints().unwrap()
}

fn scan_plan() -> QueryPlan {
    QueryPlan {
        name: "scan".into(),
        pipelines: vec![PipelinePlan {
            name: "p0".into(),
            table: "fact".into(),
            columns: vec!["f_date".into(), "f_amount".into(), "f_note".into()],
            operators: vec![
                Operator::Filter(vec![
                    Predicate::Cmp { slot: 0, cmp: Comparison::Between(9500, 9800) },
                    Predicate::Cmp { slot: 1, cmp: Comparison::Lt(50_000) },
                    Predicate::like(2, "%special%", true).unwrap(),
                ]),
                Operator::Aggregate {
                    groups: vec![],
                    aggs: vec![Agg::new(AggFunc::Sum, Expr::col(1)), Agg::count()],
                },
            ],
            ref_prune: vec![],
        }],
    }
}

fn scan_oracle(f: &Fixture) -> QueryResult {
    let t = &f.raw[1];
    let notes = t.columns[3].as_bytes().unwrap();
    let (mut sum, mut n) = (0, 0);
    for i in 0..t.row_count() {
        let d = ints(t, 0)[i];
        let a = ints(t, 2)[i];
        let special = notes[i].windows(7).any(|w| w == b"special");
        if (9500..=9800).contains(&d) && a < 50_000 && !special {
            sum += a;
            n += 1;
        }
    }
    QueryResult { rows: if n > 0 { vec![vec![sum, n]] } else { vec![] } }
}

fn join_plan() -> QueryPlan {
    let b = pack_short_char(b"B", 1).unwrap();
    let c = pack_short_char(b"C", 1).unwrap();
    QueryPlan {
        name: "join".into(),
        pipelines: vec![
            PipelinePlan {
                name: "build_dim".into(),
                table: "dim".into(),
                columns: vec!["d_key".into(), "d_grp".into()],
                operators: vec![
                    Operator::Filter(vec![Predicate::Cmp { slot: 1, cmp: Comparison::Between(b, c) }]),
                    Operator::HashBuild { table: 0, key: 0, payload: vec![1] },
                ],
                ref_prune: vec![],
            },
            PipelinePlan {
                name: "probe_fact".into(),
                table: "fact".into(),
                columns: vec!["f_dim".into(), "f_amount".into(), "f_note".into()],
                operators: vec![
                    Operator::HashProbe { table: 0, key: 0 },
                    Operator::Filter(vec![Predicate::like(2, "%quiet%", false).unwrap()]),
                    Operator::Aggregate {
                        groups: vec![3],
                        aggs: vec![
                            Agg::new(AggFunc::Sum, Expr::mul(Expr::col(1), Expr::Const(2))),
                            Agg::new(AggFunc::Min, Expr::col(1)),
                            Agg::new(AggFunc::Max, Expr::col(1)),
                            Agg::new(AggFunc::Avg, Expr::col(1)),
                        ],
                    },
                ],
                ref_prune: vec![RefPrune { table: "dim".into(), column: "d_grp".into(), cmp: Comparison::Between(b, c) }],
            },
        ],
    }
}

fn join_oracle(f: &Fixture) -> QueryResult {
    let dim = &f.raw[0];
    let grp: BTreeMap<i64, u8> = ints(dim, 0)
        .iter()
        .zip(dim.columns[1].as_bytes().unwrap())
        .map(|(&k, g)| (k, g[0]))
        .filter(|(_, g)| (b'B'..=b'C').contains(g))
        .collect();
    let t = &f.raw[1];
    let notes = t.columns[3].as_bytes().unwrap();
    let mut acc: BTreeMap<i64, (i64, i64, i64, i64)> = BTreeMap::new();
    for i in 0..t.row_count() {
        let Some(&g) = grp.get(&ints(t, 1)[i]) else { continue };
        if !notes[i].windows(5).any(|w| w == b"quiet") {
            continue;
        }
        let a = ints(t, 2)[i];
        let e = acc.entry(g as i64).or_insert((0, i64::MAX, i64::MIN, 0));
        e.0 += a;
        e.1 = e.1.min(a);
        e.2 = e.2.max(a);
        e.3 += 1;
    }
    QueryResult {
        rows: acc.into_iter().map(|(g, (s, lo, hi, n))| vec![g, 2 * s, lo, hi, s, n]).collect(),
    }
}

fn opts(mode: Mode, workers: usize) -> ExecOptions {
    ExecOptions { mode, workers, ..ExecOptions::default() }
}

#[test]
fn results_match_oracles_in_both_modes() {
    let f = fixture();
    for mode in [Mode::Fused, Mode::Staged] {
        let out = run_query(&f.db, &scan_plan(), &opts(mode, 3)).unwrap();
        assert_eq!(out.result, scan_oracle(f), "{mode}");
        let out = run_query(&f.db, &join_plan(), &opts(mode, 3)).unwrap();
        assert_eq!(out.result, join_oracle(f), "{mode}");
        assert_eq!(out.result.rows.len(), 2);
    }
}

#[test]
fn launch_accounting() {
    let f = fixture();
    for plan in [scan_plan(), join_plan()] {
        let fused = run_query(&f.db, &plan, &opts(Mode::Fused, 2)).unwrap().trace;
        assert_eq!(fused.pruning_launches, 1);
        assert_eq!(fused.pass_launches(), plan.pipelines.len() as u64 + 1);
        assert!(fused.pipelines.iter().all(|p| p.pass_launches == 1 && p.intermediate_bytes == 0));
        assert!(fused.pipelines.iter().all(|p| p.barrier_count == 2 * p.page_groups + 1));

        let staged = run_query(&f.db, &plan, &opts(Mode::Staged, 2)).unwrap().trace;
        let want: u64 = 1 + plan
            .pipelines
            .iter()
            .map(|p| 2 * p.columns.len() as u64 + p.operators.len() as u64)
            .sum::<u64>();
        assert_eq!(staged.pass_launches(), want);
        assert!(staged.pass_launches() > 3 * plan.pipelines.len() as u64);
        assert!(staged.pass_launches() > fused.pass_launches());
        assert!(staged.pipelines.iter().all(|p| p.barrier_count == p.pass_launches));
        // same pages either way
        for (a, b) in fused.pipelines.iter().zip(&staged.pipelines) {
            assert_eq!(a.bytes_read, b.bytes_read);
            assert_eq!(a.requests, b.requests);
            assert!(b.intermediate_bytes > 0);
        }
    }
}

#[test]
fn staged_materializes_at_least_decoded_columns() {
    let f = fixture();
    let plan = scan_plan();
    let out = run_query(&f.db, &plan, &opts(Mode::Staged, 2)).unwrap();
    let pruned = prune_plan(&f.db, &plan, true).unwrap();
    let rows = pruned[0].row_count() as usize;
    // two integer columns plus the note bytes
    let notes = &f.raw[1].columns[3];
    let min_note_bytes: usize = notes.as_bytes().unwrap().iter().map(Vec::len).min().unwrap() * rows;
    assert!(out.trace.intermediate_bytes() as usize >= 16 * rows + min_note_bytes);
}

#[test]
fn worker_count_independent() {
    let f = fixture();
    for mode in [Mode::Fused, Mode::Staged] {
        for plan in [scan_plan(), join_plan()] {
            let base = run_query(&f.db, &plan, &opts(mode, 1)).unwrap();
            for w in [2, 5] {
                let o = run_query(&f.db, &plan, &opts(mode, w)).unwrap();
                assert_eq!(o.result, base.result);
                assert_eq!(o.trace.totals, base.trace.totals);
                for (a, b) in o.trace.pipelines.iter().zip(&base.trace.pipelines) {
                    assert_eq!(a.counters(), b.counters(), "{mode} {w}");
                    assert_eq!(a.spills, b.spills);
                }
            }
        }
    }
}

#[test]
fn io_workers_do_not_change_results() {
    let f = fixture();
    let base = run_query(&f.db, &join_plan(), &opts(Mode::Fused, 2)).unwrap();
    let o = ExecOptions { io_workers: 3, queue_depth: 2, ..opts(Mode::Fused, 2) };
    let out = run_query(&f.db, &join_plan(), &o).unwrap();
    assert_eq!(out.result, base.result);
    assert_eq!(out.trace.totals, base.trace.totals);
}

#[test]
fn pruning_preserves_results_and_reads_less() {
    let f = fixture();
    for plan in [scan_plan(), join_plan()] {
        let on = run_query(&f.db, &plan, &opts(Mode::Fused, 2)).unwrap();
        let off = run_query(&f.db, &plan, &ExecOptions { prune: false, ..opts(Mode::Fused, 2) }).unwrap();
        assert_eq!(on.result, off.result);
        assert!(on.trace.totals.bytes_read < off.trace.totals.bytes_read, "{}", plan.name);
    }
}

#[test]
fn every_pruned_page_read_once() {
    let f = fixture();
    for plan in [scan_plan(), join_plan()] {
        let pruned = prune_plan(&f.db, &plan, true).unwrap();
        let want: u64 = pruned
            .iter()
            .flat_map(|p| p.lists.iter())
            .flat_map(|l| l.page_ids.iter())
            .map(|&id| f.db.devices.page_size(id).unwrap() as u64)
            .sum();
        let out = run_query(&f.db, &plan, &opts(Mode::Fused, 4)).unwrap();
        assert_eq!(out.trace.totals.bytes_read, want);
    }
}

#[test]
fn page_groups_partition_pages_and_rows() {
    let f = fixture();
    let plan = scan_plan();
    let mut widths = HashMap::new();
    let b = bind(&f.db, &plan.pipelines[0], &mut widths).unwrap();
    let input = prune_pipeline(&f.db, &b, true);
    let groups = page_groups(&b.cols, &input);
    for (ci, l) in input.lists.iter().enumerate() {
        let mut seen: Vec<u64> = groups.iter().flat_map(|g| g.pages[ci].iter().copied()).collect();
        seen.sort_unstable();
        assert_eq!(seen, l.page_ids);
    }
    let rows: Vec<Range<u64>> = groups.iter().flat_map(|g| g.rows.iter().cloned()).collect();
    let mut merged: RidSet = Vec::new();
    for r in rows {
        match merged.last_mut() {
            Some(last) if last.end == r.start => last.end = r.end,
            _ => merged.push(r),
        }
    }
    assert_eq!(merged, input.rids);
}

#[test]
fn staged_budget_exceeded() {
    let f = fixture();
    let o = ExecOptions { work_mem_budget: 1000, ..opts(Mode::Staged, 2) };
    assert!(matches!(run_query(&f.db, &scan_plan(), &o), Err(ExecError::BudgetExceeded { budget: 1000, .. })));
}

#[test]
fn small_scratch_counts_spills() {
    let f = fixture();
    let o = ExecOptions { scratch_budget: 1, ..opts(Mode::Fused, 2) };
    let out = run_query(&f.db, &scan_plan(), &o).unwrap();
    let p = &out.trace.pipelines[0];
    assert_eq!(p.spills, p.page_groups);
    assert_eq!(out.result, scan_oracle(f));
}

#[test]
fn empty_selection_gives_empty_result() {
    let f = fixture();
    let mut plan = scan_plan();
    plan.pipelines[0].operators[0] = Operator::Filter(vec![Predicate::Cmp { slot: 0, cmp: Comparison::Gt(1 << 30) }]);
    for mode in [Mode::Fused, Mode::Staged] {
        let out = run_query(&f.db, &plan, &opts(mode, 2)).unwrap();
        assert!(out.result.rows.is_empty());
        assert_eq!(out.trace.totals.bytes_read, 0);
    }
}

#[test]
fn plan_errors() {
    let f = fixture();
    let mut probe_first = join_plan();
    probe_first.pipelines.remove(0);
    assert!(matches!(validate_plan(&f.db, &probe_first), Err(ExecError::Plan(_))));

    let mut bad_type = scan_plan();
    bad_type.pipelines[0].operators[0] = Operator::Filter(vec![Predicate::Cmp { slot: 2, cmp: Comparison::Eq(1) }]);
    assert!(matches!(validate_plan(&f.db, &bad_type), Err(ExecError::Plan(_))));

    let mut no_terminal = scan_plan();
    no_terminal.pipelines[0].operators.pop();
    assert!(matches!(validate_plan(&f.db, &no_terminal), Err(ExecError::Plan(_))));

    let mut unknown = scan_plan();
    unknown.pipelines[0].columns[0] = "nope".into();
    assert!(matches!(validate_plan(&f.db, &unknown), Err(ExecError::Schema(_))));

    let mut ends_in_build = join_plan();
    ends_in_build.pipelines.pop();
    assert!(matches!(validate_plan(&f.db, &ends_in_build), Err(ExecError::Plan(_))));

    assert!(matches!(Predicate::like(0, "%a%b%", false), Err(ExecError::UnsupportedPattern(_))));
}

#[test]
fn char_equality_pads_constant() {
    let f = fixture();
    let plan = QueryPlan {
        name: "streq".into(),
        pipelines: vec![PipelinePlan {
            name: "p".into(),
            table: "fact".into(),
            columns: vec!["f_note".into()],
            operators: vec![
                Operator::Filter(vec![Predicate::StrEq { slot: 0, value: b"bold note ".to_vec() }]),
                Operator::Aggregate { groups: vec![], aggs: vec![Agg::count()] },
            ],
            ref_prune: vec![],
        }],
    };
    let want = f.raw[1].columns[3].as_bytes().unwrap().iter().filter(|n| n.as_slice() == b"bold note ").count();
    let out = run_query(&f.db, &plan, &opts(Mode::Staged, 2)).unwrap();
    assert_eq!(out.result.rows, vec![vec![want as i64]]);
}
