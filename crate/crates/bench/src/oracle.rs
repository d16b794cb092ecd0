// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Brute-force evaluation of the canned queries over raw generated rows.
//! Shares nothing with the engine beyond the input tables.

use std::collections::{BTreeMap, HashMap, HashSet};

use pathfuse_core::codec::pack_short_char;
use pathfuse_core::exec::QueryResult;

use crate::gen::Dataset;
use crate::queries::{q1_ship_cutoff, q3_date, q6_bounds, Params, QueryId};
use crate::BenchError;

fn trimmed(v: &[u8]) -> &[u8] {
    let end = v.iter().rposition(|&b| b != b' ').map_or(0, |i| i + 1);
    &v[..end]
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    hay.windows(needle.len()).any(|w| w == needle)
}

fn rows<K: Ord, I: IntoIterator<Item = i64>>(m: BTreeMap<K, Vec<i64>>, key: impl Fn(K) -> I) -> QueryResult {
    QueryResult {
        rows: m
            .into_iter()
            .map(|(k, v)| key(k).into_iter().chain(v).collect())
            .collect(),
    }
}

pub fn evaluate(id: QueryId, params: &Params, d: &Dataset) -> Result<QueryResult, BenchError> {
    if d.suite != id.suite() {
        return Err(BenchError::Usage(format!("{id} runs on the {} tables", id.suite())));
    }
    Ok(match id {
        QueryId::Q1 => q1(d),
        QueryId::Q3 => q3(d),
        QueryId::Q6 => q6(d, params)?,
        QueryId::Q13 => q13(d),
        QueryId::Ssb11 => ssb11(d),
        QueryId::Ssb21 => ssb21(d),
        QueryId::Ssb31 => ssb31(d),
    })
}

fn q1(d: &Dataset) -> QueryResult {
    let flag = d.bytes("lineitem", "l_returnflag");
    let status = d.bytes("lineitem", "l_linestatus");
    let qty = d.ints("lineitem", "l_quantity");
    let price = d.ints("lineitem", "l_extendedprice");
    let disc = d.ints("lineitem", "l_discount");
    let tax = d.ints("lineitem", "l_tax");
    let ship = d.ints("lineitem", "l_shipdate");
    let cutoff = q1_ship_cutoff();
    // sums of qty, price, disc_price, charge, disc; count
    let mut acc: BTreeMap<(Vec<u8>, Vec<u8>), [i64; 6]> = BTreeMap::new();
    for i in 0..ship.len() {
        if ship[i] > cutoff {
            continue;
        }
        let a = acc.entry((flag[i].clone(), status[i].clone())).or_default();
        let disc_price = price[i] * (100 - disc[i]);
        a[0] += qty[i];
        a[1] += price[i];
        a[2] += disc_price;
        a[3] += disc_price * (100 + tax[i]);
        a[4] += disc[i];
        a[5] += 1;
    }
    let m: BTreeMap<(i64, i64), Vec<i64>> = acc
        .into_iter()
        .map(|((f, s), a)| {
            let key = (pack_short_char(&f, 1).unwrap(), pack_short_char(&s, 1).unwrap());
            (key, vec![a[0], a[1], a[2], a[3], a[0], a[5], a[1], a[5], a[4], a[5], a[5]])
        })
        .collect();
    rows(m, |(a, b)| [a, b])
}

fn q3(d: &Dataset) -> QueryResult {
    let date = q3_date();
    let seg = d.bytes("customer", "c_mktsegment");
    let building: HashSet<i64> = d
        .ints("customer", "c_custkey")
        .iter()
        .zip(seg)
        .filter(|(_, s)| trimmed(s) == b"BUILDING")
        .map(|(k, _)| *k)
        .collect();
    let (ok, oc, od, op) = (
        d.ints("orders", "o_orderkey"),
        d.ints("orders", "o_custkey"),
        d.ints("orders", "o_orderdate"),
        d.ints("orders", "o_shippriority"),
    );
    let mut orders: HashMap<i64, (i64, i64)> = HashMap::new();
    for i in 0..ok.len() {
        if od[i] < date && building.contains(&oc[i]) {
            orders.insert(ok[i], (od[i], op[i]));
        }
    }
    let (lk, lp, ld, ls) = (
        d.ints("lineitem", "l_orderkey"),
        d.ints("lineitem", "l_extendedprice"),
        d.ints("lineitem", "l_discount"),
        d.ints("lineitem", "l_shipdate"),
    );
    let mut acc: BTreeMap<(i64, i64, i64), Vec<i64>> = BTreeMap::new();
    for i in 0..lk.len() {
        if ls[i] <= date {
            continue;
        }
        if let Some(&(odate, prio)) = orders.get(&lk[i]) {
            acc.entry((lk[i], odate, prio)).or_insert_with(|| vec![0])[0] += lp[i] * (100 - ld[i]);
        }
    }
    rows(acc, |(a, b, c)| [a, b, c])
}

fn q6(d: &Dataset, p: &Params) -> Result<QueryResult, BenchError> {
    let b = q6_bounds(p)?;
    let (ship, disc, qty, price) = (
        d.ints("lineitem", "l_shipdate"),
        d.ints("lineitem", "l_discount"),
        d.ints("lineitem", "l_quantity"),
        d.ints("lineitem", "l_extendedprice"),
    );
    let mut total = None;
    for i in 0..ship.len() {
        if (b.ship_lo..=b.ship_hi).contains(&ship[i])
            && (b.disc_lo..=b.disc_hi).contains(&disc[i])
            && qty[i] < b.qty_below
        {
            *total.get_or_insert(0) += price[i] * disc[i];
        }
    }
    Ok(QueryResult { rows: total.map(|t| vec![vec![t]]).unwrap_or_default() })
}

fn q13(d: &Dataset) -> QueryResult {
    let nation: HashMap<i64, i64> = d
        .ints("customer", "c_custkey")
        .iter()
        .copied()
        .zip(d.ints("customer", "c_nationkey").iter().copied())
        .collect();
    let (oc, ot, cm) = (
        d.ints("orders", "o_custkey"),
        d.ints("orders", "o_totalprice"),
        d.bytes("orders", "o_comment"),
    );
    let mut acc: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for i in 0..oc.len() {
        if contains(&cm[i], b"special") {
            continue;
        }
        if let Some(&n) = nation.get(&oc[i]) {
            let a = acc.entry(n).or_insert_with(|| vec![0, 0]);
            a[0] += 1;
            a[1] += ot[i];
        }
    }
    rows(acc, |k| [k])
}

fn keyed(d: &Dataset, table: &str, key: &str, val: &str) -> HashMap<i64, i64> {
    d.ints(table, key).iter().copied().zip(d.ints(table, val).iter().copied()).collect()
}

fn keys_where(d: &Dataset, table: &str, key: &str, col: &str, want: &[u8]) -> HashSet<i64> {
    d.ints(table, key)
        .iter()
        .zip(d.bytes(table, col))
        .filter(|(_, v)| trimmed(v) == want)
        .map(|(k, _)| *k)
        .collect()
}

fn ssb11(d: &Dataset) -> QueryResult {
    let year = keyed(d, "date", "d_datekey", "d_year");
    let (od, disc, qty, price) = (
        d.ints("lineorder", "lo_orderdate"),
        d.ints("lineorder", "lo_discount"),
        d.ints("lineorder", "lo_quantity"),
        d.ints("lineorder", "lo_extendedprice"),
    );
    let mut total = None;
    for i in 0..od.len() {
        if year.get(&od[i]) == Some(&1993) && (1..=3).contains(&disc[i]) && qty[i] < 25 {
            *total.get_or_insert(0) += price[i] * disc[i];
        }
    }
    QueryResult { rows: total.map(|t| vec![vec![t]]).unwrap_or_default() }
}

fn ssb21(d: &Dataset) -> QueryResult {
    let america = keys_where(d, "supplier", "s_suppkey", "s_region", b"AMERICA");
    let brand: HashMap<i64, i64> = d
        .ints("part", "p_partkey")
        .iter()
        .zip(d.bytes("part", "p_category"))
        .zip(d.ints("part", "p_brand1"))
        .filter(|((_, c), _)| trimmed(c) == b"MFGR#12")
        .map(|((k, _), b)| (*k, *b))
        .collect();
    let year = keyed(d, "date", "d_datekey", "d_year");
    let (ls, lp, ld, lr) = (
        d.ints("lineorder", "lo_suppkey"),
        d.ints("lineorder", "lo_partkey"),
        d.ints("lineorder", "lo_orderdate"),
        d.ints("lineorder", "lo_revenue"),
    );
    let mut acc: BTreeMap<(i64, i64), Vec<i64>> = BTreeMap::new();
    for i in 0..ls.len() {
        if !america.contains(&ls[i]) {
            continue;
        }
        let (Some(&b), Some(&y)) = (brand.get(&lp[i]), year.get(&ld[i])) else {
            continue;
        };
        acc.entry((y, b)).or_insert_with(|| vec![0])[0] += lr[i];
    }
    rows(acc, |(a, b)| [a, b])
}

fn ssb31(d: &Dataset) -> QueryResult {
    let asia_nation = |table: &str, key: &str, nation: &str, region: &str| -> HashMap<i64, i64> {
        d.ints(table, key)
            .iter()
            .zip(d.ints(table, nation))
            .zip(d.bytes(table, region))
            .filter(|(_, r)| trimmed(r) == b"ASIA")
            .map(|((k, n), _)| (*k, *n))
            .collect()
    };
    let cust = asia_nation("customer", "c_custkey", "c_nation", "c_region");
    let supp = asia_nation("supplier", "s_suppkey", "s_nation", "s_region");
    let year = keyed(d, "date", "d_datekey", "d_year");
    let (lc, ls, ld, lr) = (
        d.ints("lineorder", "lo_custkey"),
        d.ints("lineorder", "lo_suppkey"),
        d.ints("lineorder", "lo_orderdate"),
        d.ints("lineorder", "lo_revenue"),
    );
    let mut acc: BTreeMap<(i64, i64, i64), Vec<i64>> = BTreeMap::new();
    for i in 0..lc.len() {
        let (Some(&cn), Some(&sn), Some(&y)) = (cust.get(&lc[i]), supp.get(&ls[i]), year.get(&ld[i])) else {
            continue;
        };
        if (1992..=1997).contains(&y) {
            acc.entry((cn, sn, y)).or_insert_with(|| vec![0])[0] += lr[i];
        }
    }
    rows(acc, |(a, b, c)| [a, b, c])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Suite;
    use pathfuse_core::schema::{parse_row, TableData};

    fn tpch_with_lineitem(lines: &[&str]) -> Dataset {
        let schema = Suite::Tpch.schema();
        let mut tables: Vec<TableData> = schema.tables.iter().map(TableData::empty).collect();
        let li = schema.table_index("lineitem").unwrap();
        for (i, l) in lines.iter().enumerate() {
            tables[li].push_row(parse_row(l, &schema.tables[li], i + 1).unwrap());
        }
        Dataset { suite: Suite::Tpch, schema, tables }
    }

    #[test]
    fn q6_three_rows_by_hand() {
        let d = tpch_with_lineitem(&[
            // in range: 1000.00 * 0.06 = 60.00
            "1|1|1|1|10.00|1000.00|0.06|0.01|N|O|1994-03-01|1994-03-01|1994-03-05|NONE|AIR|c|",
            // discount too low
            "1|1|1|2|10.00|2000.00|0.02|0.01|N|O|1994-03-01|1994-03-01|1994-03-05|NONE|AIR|c|",
            // in range: 500.50 * 0.07 = 35.035, kept at four fractional digits
            "2|1|1|1|23.00|500.50|0.07|0.00|N|O|1994-12-31|1994-12-31|1995-01-05|NONE|AIR|c|",
        ]);
        let r = evaluate(QueryId::Q6, &Params::default(), &d).unwrap();
        assert_eq!(r.rows, vec![vec![100_000 * 6 + 50_050 * 7]]);
    }

    #[test]
    fn empty_tables_give_empty_results() {
        let d = tpch_with_lineitem(&[]);
        for q in [QueryId::Q1, QueryId::Q3, QueryId::Q6, QueryId::Q13] {
            assert!(evaluate(q, &Params::default(), &d).unwrap().rows.is_empty(), "{q}");
        }
    }

    #[test]
    fn wrong_suite_is_usage_error() {
        let d = tpch_with_lineitem(&[]);
        assert!(matches!(evaluate(QueryId::Ssb11, &Params::default(), &d), Err(BenchError::Usage(_))));
    }
}
