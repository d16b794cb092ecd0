// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Hand-built physical plans for the canned queries.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use pathfuse_core::catalog::Comparison;
use pathfuse_core::exec::{Agg, AggFunc, Expr, Operator, PipelinePlan, Predicate, QueryPlan, RefPrune};

use crate::gen::epoch_days;
use crate::{BenchError, Suite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryId {
    Q1,
    Q3,
    Q6,
    Q13,
    Ssb11,
    Ssb21,
    Ssb31,
}

impl QueryId {
    pub const ALL: [QueryId; 7] = [
        QueryId::Q1,
        QueryId::Q3,
        QueryId::Q6,
        QueryId::Q13,
        QueryId::Ssb11,
        QueryId::Ssb21,
        QueryId::Ssb31,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QueryId::Q1 => "q1",
            QueryId::Q3 => "q3",
            QueryId::Q6 => "q6",
            QueryId::Q13 => "q13",
            QueryId::Ssb11 => "ssb1.1",
            QueryId::Ssb21 => "ssb2.1",
            QueryId::Ssb31 => "ssb3.1",
        }
    }

    pub fn suite(self) -> Suite {
        match self {
            QueryId::Q1 | QueryId::Q3 | QueryId::Q6 | QueryId::Q13 => Suite::Tpch,
            _ => Suite::Ssb,
        }
    }

    /// IO workers per worker when the config does not say; scans with
    /// little per-row work get a second queue pair.
    pub fn default_io_workers(self) -> usize {
        match self {
            QueryId::Q6 | QueryId::Ssb11 => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QueryId {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        let s = s.to_ascii_lowercase();
        QueryId::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = QueryId::ALL.iter().map(|q| q.name()).collect();
                BenchError::Usage(format!("unknown query {s:?}; known: {}", known.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Params {
    /// Fraction of the ship-date range selected by Q6; `None` is the
    /// standard one-year window.
    pub selectivity: Option<f64>,
}

fn day(y: i32, m: u32, d: u32) -> i64 {
    epoch_days(NaiveDate::from_ymd_opt(y, m, d).expect("valid date"))
}

pub fn q1_ship_cutoff() -> i64 {
    day(1998, 12, 1) - 90
}

pub fn q3_date() -> i64 {
    day(1995, 3, 15)
}

/// Q6 constants: inclusive ship-date bounds, discount bounds, quantity limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Q6Bounds {
    pub ship_lo: i64,
    pub ship_hi: i64,
    pub disc_lo: i64,
    pub disc_hi: i64,
    pub qty_below: i64,
}

pub fn q6_bounds(p: &Params) -> Result<Q6Bounds, BenchError> {
    let (ship_lo, ship_hi) = match p.selectivity {
        None => (day(1994, 1, 1), day(1995, 1, 1) - 1),
        Some(s) if s > 0.0 && s <= 1.0 => {
            // every generated ship date falls in [1992-01-02, 1998-12-01]
            let lo = day(1992, 1, 2);
            let span = (day(1998, 12, 1) - lo + 1) as f64;
            (lo, lo + (s * span).ceil() as i64 - 1)
        }
        Some(s) => return Err(BenchError::Usage(format!("selectivity {s} outside (0, 1]"))),
    };
    Ok(Q6Bounds {
        ship_lo,
        ship_hi,
        disc_lo: 5,
        disc_hi: 7,
        qty_below: 2400,
    })
}

fn pipe(name: &str, table: &str, columns: &[&str], operators: Vec<Operator>) -> PipelinePlan {
    PipelinePlan {
        name: name.into(),
        table: table.into(),
        columns: columns.iter().map(|c| c.to_string()).collect(),
        operators,
        ref_prune: vec![],
    }
}

fn cmp(slot: usize, cmp: Comparison) -> Predicate {
    Predicate::Cmp { slot, cmp }
}

fn str_eq(slot: usize, v: &str) -> Predicate {
    Predicate::StrEq { slot, value: v.as_bytes().to_vec() }
}

fn sum(e: Expr) -> Agg {
    Agg::new(AggFunc::Sum, e)
}

fn c(v: i64) -> Expr {
    Expr::Const(v)
}

fn col(s: usize) -> Expr {
    Expr::col(s)
}

fn ref_prune(table: &str, column: &str, cmp: Comparison) -> RefPrune {
    RefPrune { table: table.into(), column: column.into(), cmp }
}

pub fn plan(id: QueryId, params: &Params) -> Result<QueryPlan, BenchError> {
    if params.selectivity.is_some() && id != QueryId::Q6 {
        return Err(BenchError::Usage(format!("{id} takes no selectivity parameter")));
    }
    let pipelines = match id {
        QueryId::Q1 => vec![pipe(
            "lineitem_agg",
            "lineitem",
            &[
                "l_returnflag",
                "l_linestatus",
                "l_quantity",
                "l_extendedprice",
                "l_discount",
                "l_tax",
                "l_shipdate",
            ],
            vec![
                Operator::Filter(vec![cmp(6, Comparison::Le(q1_ship_cutoff()))]),
                Operator::Aggregate {
                    groups: vec![0, 1],
                    aggs: vec![
                        sum(col(2)),
                        sum(col(3)),
                        sum(Expr::mul(col(3), Expr::sub(c(100), col(4)))),
                        sum(Expr::mul(
                            Expr::mul(col(3), Expr::sub(c(100), col(4))),
                            Expr::add(c(100), col(5)),
                        )),
                        Agg::new(AggFunc::Avg, col(2)),
                        Agg::new(AggFunc::Avg, col(3)),
                        Agg::new(AggFunc::Avg, col(4)),
                        Agg::count(),
                    ],
                },
            ],
        )],
        QueryId::Q3 => {
            let d = q3_date();
            let mut li = pipe(
                "lineitem_probe",
                "lineitem",
                &["l_orderkey", "l_extendedprice", "l_discount", "l_shipdate"],
                vec![
                    Operator::Filter(vec![cmp(3, Comparison::Gt(d))]),
                    Operator::HashProbe { table: 1, key: 0 },
                    Operator::Aggregate {
                        groups: vec![0, 4, 5],
                        aggs: vec![sum(Expr::mul(col(1), Expr::sub(c(100), col(2))))],
                    },
                ],
            );
            li.ref_prune.push(ref_prune("orders", "o_orderdate", Comparison::Lt(d)));
            vec![
                pipe(
                    "customer_build",
                    "customer",
                    &["c_custkey", "c_mktsegment"],
                    vec![
                        Operator::Filter(vec![str_eq(1, "BUILDING")]),
                        Operator::HashBuild { table: 0, key: 0, payload: vec![] },
                    ],
                ),
                pipe(
                    "orders_build",
                    "orders",
                    &["o_orderkey", "o_custkey", "o_orderdate", "o_shippriority"],
                    vec![
                        Operator::Filter(vec![cmp(2, Comparison::Lt(d))]),
                        Operator::HashProbe { table: 0, key: 1 },
                        Operator::HashBuild { table: 1, key: 0, payload: vec![2, 3] },
                    ],
                ),
                li,
            ]
        }
        QueryId::Q6 => {
            let b = q6_bounds(params)?;
            vec![pipe(
                "lineitem_agg",
                "lineitem",
                &["l_shipdate", "l_discount", "l_quantity", "l_extendedprice"],
                vec![
                    Operator::Filter(vec![
                        cmp(0, Comparison::Between(b.ship_lo, b.ship_hi)),
                        cmp(1, Comparison::Between(b.disc_lo, b.disc_hi)),
                        cmp(2, Comparison::Lt(b.qty_below)),
                    ]),
                    Operator::Aggregate { groups: vec![], aggs: vec![sum(Expr::mul(col(3), col(1)))] },
                ],
            )]
        }
        QueryId::Q13 => vec![
            pipe(
                "customer_build",
                "customer",
                &["c_custkey", "c_nationkey"],
                vec![Operator::HashBuild { table: 0, key: 0, payload: vec![1] }],
            ),
            pipe(
                "orders_probe",
                "orders",
                &["o_custkey", "o_totalprice", "o_comment"],
                vec![
                    Operator::Filter(vec![Predicate::like(2, "%special%", true)?]),
                    Operator::HashProbe { table: 0, key: 0 },
                    Operator::Aggregate { groups: vec![3], aggs: vec![Agg::count(), sum(col(1))] },
                ],
            ),
        ],
        QueryId::Ssb11 => {
            let mut lo = pipe(
                "lineorder_probe",
                "lineorder",
                &["lo_orderdate", "lo_discount", "lo_quantity", "lo_extendedprice"],
                vec![
                    Operator::Filter(vec![cmp(1, Comparison::Between(1, 3)), cmp(2, Comparison::Lt(25))]),
                    Operator::HashProbe { table: 0, key: 0 },
                    Operator::Aggregate { groups: vec![], aggs: vec![sum(Expr::mul(col(3), col(1)))] },
                ],
            );
            lo.ref_prune.push(ref_prune("date", "d_year", Comparison::Eq(1993)));
            vec![
                pipe(
                    "date_build",
                    "date",
                    &["d_datekey", "d_year"],
                    vec![
                        Operator::Filter(vec![cmp(1, Comparison::Eq(1993))]),
                        Operator::HashBuild { table: 0, key: 0, payload: vec![] },
                    ],
                ),
                lo,
            ]
        }
        QueryId::Ssb21 => vec![
            pipe(
                "supplier_build",
                "supplier",
                &["s_suppkey", "s_region"],
                vec![
                    Operator::Filter(vec![str_eq(1, "AMERICA")]),
                    Operator::HashBuild { table: 0, key: 0, payload: vec![] },
                ],
            ),
            pipe(
                "part_build",
                "part",
                &["p_partkey", "p_category", "p_brand1"],
                vec![
                    Operator::Filter(vec![str_eq(1, "MFGR#12")]),
                    Operator::HashBuild { table: 1, key: 0, payload: vec![2] },
                ],
            ),
            pipe(
                "date_build",
                "date",
                &["d_datekey", "d_year"],
                vec![Operator::HashBuild { table: 2, key: 0, payload: vec![1] }],
            ),
            pipe(
                "lineorder_probe",
                "lineorder",
                &["lo_suppkey", "lo_partkey", "lo_orderdate", "lo_revenue"],
                vec![
                    Operator::HashProbe { table: 0, key: 0 },
                    Operator::HashProbe { table: 1, key: 1 },
                    Operator::HashProbe { table: 2, key: 2 },
                    Operator::Aggregate { groups: vec![5, 4], aggs: vec![sum(col(3))] },
                ],
            ),
        ],
        QueryId::Ssb31 => {
            let years = Comparison::Between(1992, 1997);
            let mut lo = pipe(
                "lineorder_probe",
                "lineorder",
                &["lo_custkey", "lo_suppkey", "lo_orderdate", "lo_revenue"],
                vec![
                    Operator::HashProbe { table: 0, key: 0 },
                    Operator::HashProbe { table: 1, key: 1 },
                    Operator::HashProbe { table: 2, key: 2 },
                    Operator::Aggregate { groups: vec![4, 5, 6], aggs: vec![sum(col(3))] },
                ],
            );
            lo.ref_prune.push(ref_prune("date", "d_year", years));
            vec![
                pipe(
                    "customer_build",
                    "customer",
                    &["c_custkey", "c_nation", "c_region"],
                    vec![
                        Operator::Filter(vec![str_eq(2, "ASIA")]),
                        Operator::HashBuild { table: 0, key: 0, payload: vec![1] },
                    ],
                ),
                pipe(
                    "supplier_build",
                    "supplier",
                    &["s_suppkey", "s_nation", "s_region"],
                    vec![
                        Operator::Filter(vec![str_eq(2, "ASIA")]),
                        Operator::HashBuild { table: 1, key: 0, payload: vec![1] },
                    ],
                ),
                pipe(
                    "date_build",
                    "date",
                    &["d_datekey", "d_year"],
                    vec![
                        Operator::Filter(vec![cmp(1, years)]),
                        Operator::HashBuild { table: 2, key: 0, payload: vec![1] },
                    ],
                ),
                lo,
            ]
        }
    };
    Ok(QueryPlan { name: id.name().into(), pipelines })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_roundtrip() {
        for q in QueryId::ALL {
            assert_eq!(q.name().parse::<QueryId>().unwrap(), q);
        }
        assert!("q99".parse::<QueryId>().is_err());
        assert_eq!("SSB1.1".parse::<QueryId>().unwrap(), QueryId::Ssb11);
    }

    #[test]
    fn selectivity_only_for_q6() {
        let p = Params { selectivity: Some(0.5) };
        assert!(plan(QueryId::Q6, &p).is_ok());
        assert!(plan(QueryId::Q1, &p).is_err());
        assert!(plan(QueryId::Q6, &Params { selectivity: Some(0.0) }).is_err());
        assert!(plan(QueryId::Q6, &Params { selectivity: Some(1.5) }).is_err());
    }

    #[test]
    fn full_selectivity_covers_every_ship_date() {
        let b = q6_bounds(&Params { selectivity: Some(1.0) }).unwrap();
        assert_eq!(b.ship_lo, day(1992, 1, 2));
        assert_eq!(b.ship_hi, day(1998, 12, 1));
    }

    #[test]
    fn staged_launches_at_least_triple_fused() {
        // staged: one pruning pass plus, per pipeline, 2 passes per column and one per operator
        for q in QueryId::ALL {
            let p = plan(q, &Params::default()).unwrap();
            let fused = p.pipelines.len() + 1;
            let staged: usize = 1 + p.pipelines.iter().map(|x| 2 * x.columns.len() + x.operators.len()).sum::<usize>();
            assert!(staged >= 3 * fused, "{q}: {staged} vs {fused}");
        }
    }
}
