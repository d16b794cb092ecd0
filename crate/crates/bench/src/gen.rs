// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Deterministic generator for the TPC-H-shaped and SSB-shaped tables.

use std::fs;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use pathfuse_core::schema::{format_row, pad_char, parse_table, Schema, TableData, TableDef};
use pathfuse_core::values::ColumnValues;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{BenchError, Suite};

pub const MIN_SCALE: f64 = 0.001;
pub const MAX_SCALE: f64 = 1.0;

pub const SEGMENTS: [&str; 5] = ["AUTOMOBILE", "BUILDING", "FURNITURE", "MACHINERY", "HOUSEHOLD"];
const PRIORITIES: [&str; 5] = ["1-URGENT", "2-HIGH", "3-MEDIUM", "4-NOT SPECIFIED", "5-LOW"];
const INSTRUCTIONS: [&str; 4] = ["DELIVER IN PERSON", "COLLECT COD", "NONE", "TAKE BACK RETURN"];
const SHIP_MODES: [&str; 7] = ["REG AIR", "AIR", "RAIL", "SHIP", "TRUCK", "MAIL", "FOB"];
pub const REGIONS: [&str; 5] = ["AFRICA", "AMERICA", "ASIA", "EUROPE", "MIDDLE EAST"];
/// Nation name and region index, in key order.
pub const NATIONS: [(&str, usize); 25] = [
    ("ALGERIA", 0),
    ("ARGENTINA", 1),
    ("BRAZIL", 1),
    ("CANADA", 1),
    ("EGYPT", 4),
    ("ETHIOPIA", 0),
    ("FRANCE", 3),
    ("GERMANY", 3),
    ("INDIA", 2),
    ("INDONESIA", 2),
    ("IRAN", 4),
    ("IRAQ", 4),
    ("JAPAN", 2),
    ("JORDAN", 4),
    ("KENYA", 0),
    ("MOROCCO", 0),
    ("MOZAMBIQUE", 0),
    ("PERU", 1),
    ("CHINA", 2),
    ("ROMANIA", 3),
    ("SAUDI ARABIA", 4),
    ("VIETNAM", 2),
    ("RUSSIA", 3),
    ("UNITED KINGDOM", 3),
    ("UNITED STATES", 1),
];
const COLORS: [&str; 16] = [
    "almond", "antique", "aquamarine", "azure", "beige", "bisque", "black", "blanched", "blue", "blush", "brown",
    "burlywood", "burnished", "chartreuse", "chiffon", "chocolate",
];
const TYPE_WORDS: [[&str; 5]; 3] = [
    ["STANDARD", "SMALL", "MEDIUM", "LARGE", "ECONOMY"],
    ["ANODIZED", "BURNISHED", "PLATED", "POLISHED", "BRUSHED"],
    ["TIN", "NICKEL", "BRASS", "STEEL", "COPPER"],
];
const CONTAINERS: [&str; 8] = [
    "SM CASE", "SM BOX", "MED BAG", "MED BOX", "LG CASE", "LG BOX", "JUMBO PKG", "WRAP BAG",
];
const WORDS: [&str; 48] = [
    "special", "requests", "packages", "deposits", "accounts", "carefully", "furiously", "quickly", "blithely",
    "final", "pending", "regular", "express", "ironic", "even", "bold", "silent", "unusual", "slyly", "fluffily",
    "theodolites", "pinto", "beans", "foxes", "ideas", "instructions", "dependencies", "excuses", "platelets",
    "asymptotes", "courts", "dolphins", "sleep", "wake", "are", "haggle", "nag", "use", "boost", "affix", "detect",
    "integrate", "cajole", "among", "about", "above", "across", "after",
];

/// Last day of the order-date range and the status cut-over day.
fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

/// Days since 1970-01-01, the at-rest DATE encoding.
pub fn epoch_days(d: NaiveDate) -> i64 {
    (d - ymd(1970, 1, 1)).num_days()
}

pub fn date_key(d: NaiveDate) -> i64 {
    d.year() as i64 * 10_000 + d.month() as i64 * 100 + d.day() as i64
}

/// Retail price in cents for a part key, TPC-H style.
pub fn retail_price(partkey: i64) -> i64 {
    90_000 + (partkey / 10) % 20_001 + 100 * (partkey % 1000)
}

pub fn scaled(base: f64, sf: f64) -> usize {
    ((base * sf).round() as usize).max(1)
}

/// Generated tables in schema order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub suite: Suite,
    pub schema: Schema,
    pub tables: Vec<TableData>,
}

impl Dataset {
    pub fn table(&self, name: &str) -> &TableData {
        let i = self.schema.table_index(name).expect("table in suite schema");
        &self.tables[i]
    }

    pub fn ints(&self, table: &str, column: &str) -> &[i64] {
        self.column(table, column).as_ints().expect("integer column")
    }

    pub fn bytes(&self, table: &str, column: &str) -> &[Vec<u8>] {
        self.column(table, column).as_bytes().expect("byte column")
    }

    fn column(&self, table: &str, column: &str) -> &ColumnValues {
        let def = self.schema.table(table).expect("table in suite schema");
        &self.table(table).columns[def.column_index(column).expect("column in table")]
    }

    /// Bytes of the pipe-delimited text form.
    pub fn raw_bytes(&self) -> u64 {
        self.schema
            .tables
            .iter()
            .zip(&self.tables)
            .map(|(def, t)| (0..t.row_count()).map(|i| format_row(&t.row(i), def).len() as u64 + 1).sum::<u64>())
            .sum()
    }

    /// Writes `<table>.tbl` files.
    pub fn write_tbl(&self, dir: &Path) -> Result<(), BenchError> {
        fs::create_dir_all(dir)?;
        for (def, t) in self.schema.tables.iter().zip(&self.tables) {
            let mut text = String::new();
            for i in 0..t.row_count() {
                text.push_str(&format_row(&t.row(i), def));
                text.push('\n');
            }
            fs::write(dir.join(format!("{}.tbl", def.name)), text)?;
        }
        Ok(())
    }

    pub fn read_tbl(suite: Suite, dir: &Path) -> Result<Self, BenchError> {
        let schema = suite.schema();
        let tables = schema
            .tables
            .iter()
            .map(|def| {
                let path = dir.join(format!("{}.tbl", def.name));
                let text = fs::read_to_string(&path)?;
                parse_table(&text, def).map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))
            })
            .collect::<Result<_, _>>()?;
        Ok(Dataset { suite, schema, tables })
    }
}

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    /// Each table gets its own stream so row counts elsewhere do not shift it.
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Gen { rng }
    }

    fn int(&mut self, lo: i64, hi: i64) -> i64 {
        self.rng.gen_range(lo..=hi)
    }

    fn pick<'a>(&mut self, from: &[&'a str]) -> &'a str {
        from[self.rng.gen_range(0..from.len())]
    }

    fn text(&mut self, min: usize, max: usize) -> Vec<u8> {
        let len = self.rng.gen_range(min..=max);
        let mut out = Vec::with_capacity(len + 16);
        while out.len() < len {
            if !out.is_empty() {
                out.push(b' ');
            }
            out.extend_from_slice(self.pick(&WORDS).as_bytes());
        }
        out.truncate(len);
        while out.last() == Some(&b' ') {
            out.pop();
        }
        out
    }

    fn alnum(&mut self, min: usize, max: usize) -> Vec<u8> {
        const CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789,";
        let len = self.rng.gen_range(min..=max);
        (0..len).map(|_| CHARS[self.rng.gen_range(0..CHARS.len())]).collect()
    }

    fn phone(&mut self, nation: i64) -> Vec<u8> {
        format!(
            "{}-{}-{}-{}",
            10 + nation,
            self.int(100, 999),
            self.int(100, 999),
            self.int(1000, 9999)
        )
        .into_bytes()
    }
}

/// Column builder matching a table definition.
struct Builder<'a> {
    def: &'a TableDef,
    cols: Vec<ColumnValues>,
}

impl<'a> Builder<'a> {
    fn new(def: &'a TableDef, rows: usize) -> Self {
        let cols = def
            .columns
            .iter()
            .map(|c| {
                if c.col_type.is_bytes() {
                    ColumnValues::Bytes(Vec::with_capacity(rows))
                } else {
                    ColumnValues::Int(Vec::with_capacity(rows))
                }
            })
            .collect();
        Builder { def, cols }
    }

    fn int(&mut self, i: usize, v: i64) {
        match &mut self.cols[i] {
            ColumnValues::Int(c) => c.push(v),
            ColumnValues::Bytes(_) => panic!("{} is a byte column", self.def.columns[i].name),
        }
    }

    /// CHAR values are stored space padded, as the text parser does.
    fn bytes(&mut self, i: usize, v: &[u8]) {
        let v = match self.def.columns[i].col_type {
            pathfuse_core::codec::ColumnType::Char(n) => pad_char(v, n),
            _ => v.to_vec(),
        };
        match &mut self.cols[i] {
            ColumnValues::Bytes(c) => c.push(v),
            ColumnValues::Int(_) => panic!("{} is an integer column", self.def.columns[i].name),
        }
    }

    fn finish(self) -> TableData {
        TableData { columns: self.cols }
    }
}

/// Generates a suite at scale factor `sf` (0.001 to 1).
pub fn generate(suite: Suite, sf: f64, seed: u64) -> Result<Dataset, BenchError> {
    if !(MIN_SCALE..=MAX_SCALE).contains(&sf) {
        return Err(BenchError::Usage(format!("scale factor {sf} outside [{MIN_SCALE}, {MAX_SCALE}]")));
    }
    let schema = suite.schema();
    let tables = match suite {
        Suite::Tpch => tpch(&schema, sf, seed),
        Suite::Ssb => ssb(&schema, sf, seed),
    };
    Ok(Dataset { suite, schema, tables })
}

fn tpch(schema: &Schema, sf: f64, seed: u64) -> Vec<TableData> {
    let n_cust = scaled(150_000.0, sf);
    let n_orders = scaled(1_500_000.0, sf);
    let n_part = scaled(200_000.0, sf) as i64;
    let n_supp = scaled(10_000.0, sf) as i64;
    let start = ymd(1992, 1, 1);
    let last_order = ymd(1998, 8, 2);
    let current = epoch_days(ymd(1995, 6, 17));
    let span = epoch_days(last_order) - epoch_days(start);

    let mut g = Gen::new(seed, 1);
    let mut c = Builder::new(schema.table("customer").unwrap(), n_cust);
    for k in 1..=n_cust as i64 {
        let nation = g.int(0, 24);
        c.int(0, k);
        c.bytes(1, format!("Customer#{k:09}").as_bytes());
        let addr = g.alnum(10, 40);
        c.bytes(2, &addr);
        c.int(3, nation);
        let phone = g.phone(nation);
        c.bytes(4, &phone);
        c.int(5, g.int(-99_999, 999_999));
        let seg = g.pick(&SEGMENTS);
        c.bytes(6, seg.as_bytes());
        let comment = g.text(29, 116);
        c.bytes(7, &comment);
    }

    let mut g = Gen::new(seed, 2);
    let mut o = Builder::new(schema.table("orders").unwrap(), n_orders);
    let mut l = Builder::new(schema.table("lineitem").unwrap(), n_orders * 4);
    for k in 1..=n_orders as i64 {
        // every third customer places no orders
        let mut cust = g.int(1, n_cust as i64);
        if cust % 3 == 0 {
            cust = if cust > 1 { cust - 1 } else { 1 };
        }
        let odate = epoch_days(start) + g.int(0, span);
        let lines = g.int(1, 7);
        let (mut total, mut any_f, mut any_o) = (0i64, false, false);
        for ln in 1..=lines {
            let partkey = g.int(1, n_part);
            let qty = g.int(1, 50);
            let price = qty * retail_price(partkey);
            let disc = g.int(0, 10);
            let tax = g.int(0, 8);
            let ship = odate + g.int(1, 121);
            let commit = odate + g.int(30, 90);
            let receipt = ship + g.int(1, 30);
            let flag: &[u8] = if receipt <= current {
                if g.int(0, 1) == 0 { b"R" } else { b"A" }
            } else {
                b"N"
            };
            let status: &[u8] = if ship > current { b"O" } else { b"F" };
            any_f |= status == b"F";
            any_o |= status == b"O";
            total += price * (100 + tax) / 100 * (100 - disc) / 100;
            l.int(0, k);
            l.int(1, partkey);
            l.int(2, g.int(1, n_supp));
            l.int(3, ln);
            l.int(4, qty * 100);
            l.int(5, price);
            l.int(6, disc);
            l.int(7, tax);
            l.bytes(8, flag);
            l.bytes(9, status);
            l.int(10, ship);
            l.int(11, commit);
            l.int(12, receipt);
            let ins = g.pick(&INSTRUCTIONS);
            l.bytes(13, ins.as_bytes());
            let mode = g.pick(&SHIP_MODES);
            l.bytes(14, mode.as_bytes());
            let comment = g.text(10, 43);
            l.bytes(15, &comment);
        }
        o.int(0, k);
        o.int(1, cust);
        let status: &[u8] = match (any_f, any_o) {
            (true, false) => b"F",
            (false, true) => b"O",
            _ => b"P",
        };
        o.bytes(2, status);
        o.int(3, total);
        o.int(4, odate);
        let prio = g.pick(&PRIORITIES);
        o.bytes(5, prio.as_bytes());
        o.bytes(6, format!("Clerk#{:09}", g.int(1, scaled(1000.0, sf) as i64)).as_bytes());
        o.int(7, 0);
        let comment = g.text(19, 78);
        o.bytes(8, &comment);
    }
    vec![c.finish(), o.finish(), l.finish()]
}

fn ssb(schema: &Schema, sf: f64, seed: u64) -> Vec<TableData> {
    let n_cust = scaled(30_000.0, sf);
    let n_supp = scaled(2_000.0, sf);
    let n_part = scaled(200_000.0, sf);
    let n_orders = scaled(1_500_000.0, sf);

    let first = ymd(1992, 1, 1);
    let days: Vec<NaiveDate> = first.iter_days().take_while(|d| *d <= ymd(1998, 12, 31)).collect();
    let mut d = Builder::new(schema.table("date").unwrap(), days.len());
    for day in &days {
        d.int(0, date_key(*day));
        d.bytes(1, day.format("%B %-d, %Y").to_string().as_bytes());
        d.bytes(2, day.format("%A").to_string().as_bytes());
        d.bytes(3, day.format("%B").to_string().as_bytes());
        d.int(4, day.year() as i64);
        d.int(5, day.year() as i64 * 100 + day.month() as i64);
        d.int(6, day.ordinal0() as i64 / 7 + 1);
    }

    let city = |g: &mut Gen, nation: usize| {
        let mut name: Vec<u8> = NATIONS[nation].0.bytes().take(9).collect();
        name.resize(9, b' ');
        name.push(b'0' + g.int(0, 9) as u8);
        name
    };

    let mut g = Gen::new(seed, 11);
    let mut c = Builder::new(schema.table("customer").unwrap(), n_cust);
    for k in 1..=n_cust as i64 {
        let nation = g.int(0, 24) as usize;
        c.int(0, k);
        c.bytes(1, format!("Customer#{k:09}").as_bytes());
        let addr = g.alnum(10, 25);
        c.bytes(2, &addr);
        let cty = city(&mut g, nation);
        c.bytes(3, &cty);
        c.int(4, nation as i64);
        c.bytes(5, REGIONS[NATIONS[nation].1].as_bytes());
        let phone = g.phone(nation as i64);
        c.bytes(6, &phone);
        let seg = g.pick(&SEGMENTS);
        c.bytes(7, seg.as_bytes());
    }

    let mut g = Gen::new(seed, 12);
    let mut s = Builder::new(schema.table("supplier").unwrap(), n_supp);
    for k in 1..=n_supp as i64 {
        let nation = g.int(0, 24) as usize;
        s.int(0, k);
        s.bytes(1, format!("Supplier#{k:09}").as_bytes());
        let addr = g.alnum(10, 25);
        s.bytes(2, &addr);
        let cty = city(&mut g, nation);
        s.bytes(3, &cty);
        s.int(4, nation as i64);
        s.bytes(5, REGIONS[NATIONS[nation].1].as_bytes());
        let phone = g.phone(nation as i64);
        s.bytes(6, &phone);
    }

    let mut g = Gen::new(seed, 13);
    let mut p = Builder::new(schema.table("part").unwrap(), n_part);
    for k in 1..=n_part as i64 {
        let (m, cat, brand) = (g.int(1, 5), g.int(1, 5), g.int(1, 40));
        p.int(0, k);
        let name = format!("{} {}", g.pick(&COLORS), g.pick(&COLORS));
        p.bytes(1, name.as_bytes());
        p.bytes(2, format!("MFGR#{m}").as_bytes());
        p.bytes(3, format!("MFGR#{m}{cat}").as_bytes());
        p.int(4, m * 1000 + cat * 100 + brand);
        let color = g.pick(&COLORS);
        p.bytes(5, color.as_bytes());
        let ty = format!("{} {} {}", g.pick(&TYPE_WORDS[0]), g.pick(&TYPE_WORDS[1]), g.pick(&TYPE_WORDS[2]));
        p.bytes(6, ty.as_bytes());
        p.int(7, g.int(1, 50));
        let cont = g.pick(&CONTAINERS);
        p.bytes(8, cont.as_bytes());
    }

    let mut g = Gen::new(seed, 14);
    let mut lo = Builder::new(schema.table("lineorder").unwrap(), n_orders * 4);
    let last = days.len() as i64 - 1;
    for k in 1..=n_orders as i64 {
        let day = days[g.int(0, last) as usize];
        let lines = g.int(1, 7);
        let cust = g.int(1, n_cust as i64);
        let prio = g.pick(&PRIORITIES);
        let mut rows = Vec::with_capacity(lines as usize);
        for ln in 1..=lines {
            let partkey = g.int(1, n_part as i64);
            let qty = g.int(1, 50);
            let price = qty * retail_price(partkey) / 100;
            let disc = g.int(0, 10);
            let commit = day + chrono::Days::new(g.int(30, 90) as u64);
            rows.push((ln, partkey, g.int(1, n_supp as i64), qty, price, disc, g.int(0, 8), commit));
        }
        let total: i64 = rows.iter().map(|r| r.4).sum();
        for (ln, partkey, supp, qty, price, disc, tax, commit) in rows {
            lo.int(0, k);
            lo.int(1, ln);
            lo.int(2, cust);
            lo.int(3, partkey);
            lo.int(4, supp);
            lo.int(5, date_key(day));
            lo.bytes(6, prio.as_bytes());
            lo.bytes(7, b"0");
            lo.int(8, qty);
            lo.int(9, price);
            lo.int(10, total);
            lo.int(11, disc);
            lo.int(12, price * (100 - disc) / 100);
            lo.int(13, 6 * retail_price(partkey) / 1000);
            lo.int(14, tax);
            lo.int(15, date_key(commit));
            let mode = g.pick(&SHIP_MODES);
            lo.bytes(16, mode.as_bytes());
        }
    }
    vec![d.finish(), c.finish(), s.finish(), p.finish(), lo.finish()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn row_counts_follow_scale() {
        let d = generate(Suite::Tpch, 0.001, 1).unwrap();
        assert_eq!(d.table("customer").row_count(), 150);
        assert_eq!(d.table("orders").row_count(), 1500);
        // 1..7 lines per order, mean 4
        let n = d.table("lineitem").row_count();
        assert!((5400..=6600).contains(&n), "{n}");
        let s = generate(Suite::Ssb, 0.001, 1).unwrap();
        assert_eq!(s.table("date").row_count(), 2557);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(Suite::Ssb, 0.001, 9).unwrap();
        assert_eq!(a, generate(Suite::Ssb, 0.001, 9).unwrap());
        assert_ne!(a, generate(Suite::Ssb, 0.001, 10).unwrap());
    }

    #[test]
    fn foreign_keys_resolve() {
        let d = generate(Suite::Tpch, 0.001, 3).unwrap();
        let cust: HashSet<i64> = d.ints("customer", "c_custkey").iter().copied().collect();
        assert!(d.ints("orders", "o_custkey").iter().all(|k| cust.contains(k)));
        let orders: HashSet<i64> = d.ints("orders", "o_orderkey").iter().copied().collect();
        assert!(d.ints("lineitem", "l_orderkey").iter().all(|k| orders.contains(k)));

        let s = generate(Suite::Ssb, 0.001, 3).unwrap();
        for (fk, table, key) in [
            ("lo_custkey", "customer", "c_custkey"),
            ("lo_partkey", "part", "p_partkey"),
            ("lo_suppkey", "supplier", "s_suppkey"),
            ("lo_orderdate", "date", "d_datekey"),
        ] {
            let keys: HashSet<i64> = s.ints(table, key).iter().copied().collect();
            assert!(s.ints("lineorder", fk).iter().all(|k| keys.contains(k)), "{fk}");
        }
    }

    #[test]
    fn text_roundtrip() {
        for suite in [Suite::Tpch, Suite::Ssb] {
            let d = generate(suite, 0.001, 4).unwrap();
            let dir = tempfile::tempdir().unwrap();
            d.write_tbl(dir.path()).unwrap();
            assert_eq!(Dataset::read_tbl(suite, dir.path()).unwrap(), d);
        }
    }

    #[test]
    fn scale_bounds() {
        assert!(generate(Suite::Tpch, 0.0001, 1).is_err());
        assert!(generate(Suite::Tpch, 2.0, 1).is_err());
    }

    fn head_rows(d: &Dataset, n: usize) -> String {
        let mut out = String::new();
        for (def, t) in d.schema.tables.iter().zip(&d.tables) {
            out.push_str(&format!("# {}\n", def.name));
            for i in 0..n.min(t.row_count()) {
                out.push_str(&format_row(&t.row(i), def));
                out.push('\n');
            }
        }
        out
    }

    // The generator must give the same bytes on every platform; this pins the
    // leading rows of every table for one seed.
    #[test]
    fn leading_rows_are_pinned() {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/gen_seed1_sf0.001.txt");
        let got = format!("{}{}", head_rows(&generate(Suite::Tpch, 0.001, 1).unwrap(), 3), head_rows(&generate(Suite::Ssb, 0.001, 1).unwrap(), 3));
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            fs::create_dir_all(path.parent().unwrap()).unwrap();
            fs::write(&path, &got).unwrap();
        }
        assert_eq!(got, fs::read_to_string(&path).unwrap());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(8))]

        #[test]
        fn any_seed_is_deterministic_and_resolves(seed in proptest::prelude::any::<u64>(), ssb in proptest::prelude::any::<bool>()) {
            let suite = if ssb { Suite::Ssb } else { Suite::Tpch };
            let d = generate(suite, 0.001, seed).unwrap();
            proptest::prop_assert_eq!(&d, &generate(suite, 0.001, seed).unwrap());
            for t in &d.schema.tables {
                for r in &t.references {
                    let keys: HashSet<i64> = d.ints(&r.dim_table, &r.dim_key).iter().copied().collect();
                    proptest::prop_assert!(d.ints(&t.name, &r.fk_column).iter().all(|k| keys.contains(k)));
                }
            }
        }
    }

    #[test]
    fn schema_shapes_load() {
        for suite in [Suite::Tpch, Suite::Ssb] {
            suite.schema().validate().unwrap();
        }
    }
}
