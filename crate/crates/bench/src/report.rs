// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! The benchmark runner and its two report shapes: tab-separated rows for
//! scripts and a summary table for people.

use std::fmt::Write as _;

use pathfuse_core::exec::{run_query, ExecOptions, Mode, QueryOutput, QueryResult};
use pathfuse_core::iosim::LatencyModel;
use pathfuse_core::loader::{load, LoadOptions};
use pathfuse_core::page::Compression;
use pathfuse_core::store::Database;

use crate::config::Config;
use crate::gen::Dataset;
use crate::queries::{plan, Params, QueryId};
use crate::BenchError;

pub const TSV_HEADER: &str = "query\tmode\tpage_size\tselectivity\trep\twall_ms\tpass_launches\tbarrier_count\tbytes_read\tbytes_read_plain\tio_ratio\tpages_read\tintermediate_bytes\tspills";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub query: QueryId,
    pub modes: Vec<Mode>,
    pub page_sizes: Vec<usize>,
    /// `None` runs the query with its fixed constants.
    pub selectivities: Vec<Option<f64>>,
    pub repetitions: usize,
}

/// One measured run, or the mean of a configuration when `rep` is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub query: QueryId,
    pub mode: Mode,
    pub page_size: usize,
    pub selectivity: Option<f64>,
    pub rep: Option<usize>,
    pub wall_ms: f64,
    pub pass_launches: f64,
    pub barrier_count: f64,
    pub bytes_read: f64,
    pub bytes_read_plain: f64,
    pub pages_read: f64,
    pub intermediate_bytes: f64,
    pub spills: f64,
}

impl RunRow {
    pub fn io_ratio(&self) -> f64 {
        if self.bytes_read_plain == 0.0 {
            1.0
        } else {
            self.bytes_read / self.bytes_read_plain
        }
    }

    pub fn is_mean(&self) -> bool {
        self.rep.is_none()
    }

    pub fn to_tsv(&self) -> String {
        let num = |v: f64| {
            if v.fract() == 0.0 {
                format!("{v:.0}")
            } else {
                format!("{v:.3}")
            }
        };
        [
            self.query.name().to_string(),
            self.mode.to_string(),
            self.page_size.to_string(),
            self.selectivity.map_or("-".into(), |s| format!("{s}")),
            self.rep.map_or("mean".into(), |r| r.to_string()),
            format!("{:.3}", self.wall_ms),
            num(self.pass_launches),
            num(self.barrier_count),
            num(self.bytes_read),
            num(self.bytes_read_plain),
            format!("{:.4}", self.io_ratio()),
            num(self.pages_read),
            num(self.intermediate_bytes),
            num(self.spills),
        ]
        .join("\t")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub rows: Vec<RunRow>,
}

/// Loads `data` into an in-memory device array.
pub fn load_database(
    data: &Dataset,
    load_opts: &LoadOptions,
    latency: LatencyModel,
) -> Result<Database, BenchError> {
    let loaded = load(&data.schema, &data.tables, load_opts)?;
    Ok(loaded.into_database(latency)?)
}

/// Exec options for `id`, filling in the per-query IO worker default.
pub fn exec_options(cfg: &Config, id: QueryId, mode: Mode) -> ExecOptions {
    ExecOptions {
        mode,
        io_workers: if cfg.io_workers_set { cfg.exec.io_workers } else { id.default_io_workers() },
        ..cfg.exec
    }
}

pub fn run_once(db: &Database, id: QueryId, params: &Params, opts: &ExecOptions) -> Result<QueryOutput, BenchError> {
    Ok(run_query(db, &plan(id, params)?, opts)?)
}

fn mean_row(runs: &[RunRow]) -> RunRow {
    let n = runs.len() as f64;
    let avg = |f: fn(&RunRow) -> f64| runs.iter().map(f).sum::<f64>() / n;
    RunRow {
        rep: None,
        wall_ms: avg(|r| r.wall_ms),
        pass_launches: avg(|r| r.pass_launches),
        barrier_count: avg(|r| r.barrier_count),
        bytes_read: avg(|r| r.bytes_read),
        bytes_read_plain: avg(|r| r.bytes_read_plain),
        pages_read: avg(|r| r.pages_read),
        intermediate_bytes: avg(|r| r.intermediate_bytes),
        spills: avg(|r| r.spills),
        ..runs[0].clone()
    }
}

/// Runs every configuration of `spec`. Each repetition starts with fresh
/// queue pairs and no cached pages. Results of all runs must agree.
pub fn bench(data: &Dataset, cfg: &Config, spec: &BenchSpec) -> Result<Report, BenchError> {
    if spec.query.suite() != data.suite {
        return Err(BenchError::Usage(format!("{} runs on the {} tables", spec.query, spec.query.suite())));
    }
    if spec.repetitions == 0 || spec.modes.is_empty() || spec.page_sizes.is_empty() || spec.selectivities.is_empty() {
        return Err(BenchError::Usage("empty benchmark sweep".into()));
    }
    let mut report = Report::default();
    for &page_size in &spec.page_sizes {
        let mut load_opts = cfg.load;
        load_opts.page.page_size = page_size;
        load_opts.page.compression = Compression::TypeSpecific;
        let db = load_database(data, &load_opts, cfg.latency)?;
        load_opts.page.compression = Compression::Plain;
        let plain = load_database(data, &load_opts, LatencyModel::instant())?;

        for sel in &spec.selectivities {
            let params = Params { selectivity: *sel };
            let plain_bytes = run_once(&plain, spec.query, &params, &exec_options(cfg, spec.query, Mode::Fused))?
                .trace
                .totals
                .bytes_read;
            let mut expected: Option<QueryResult> = None;
            // Modes alternate within each repetition so a transient stall
            // lands on both rather than on one mode's whole series.
            let opts: Vec<ExecOptions> = spec.modes.iter().map(|&m| exec_options(cfg, spec.query, m)).collect();
            let mut runs: Vec<Vec<RunRow>> = vec![Vec::with_capacity(spec.repetitions); spec.modes.len()];
            for rep in 0..spec.repetitions {
                for (mi, &mode) in spec.modes.iter().enumerate() {
                    let out = run_once(&db, spec.query, &params, &opts[mi])?;
                    match &expected {
                        None => expected = Some(out.result.clone()),
                        Some(e) if *e != out.result => {
                            return Err(BenchError::Data(format!(
                                "{} {mode} page_size {page_size}: result differs between runs",
                                spec.query
                            )))
                        }
                        Some(_) => {}
                    }
                    let t = &out.trace;
                    runs[mi].push(RunRow {
                        query: spec.query,
                        mode,
                        page_size,
                        selectivity: *sel,
                        rep: Some(rep),
                        wall_ms: t.wall_ms,
                        pass_launches: t.pass_launches() as f64,
                        barrier_count: t.totals.barrier_count as f64,
                        bytes_read: t.totals.bytes_read as f64,
                        bytes_read_plain: plain_bytes as f64,
                        pages_read: t.pipelines.iter().map(|p| p.pages_read).sum::<u64>() as f64,
                        intermediate_bytes: t.intermediate_bytes() as f64,
                        spills: t.pipelines.iter().map(|p| p.spills).sum::<u64>() as f64,
                    });
                }
            }
            for runs in runs {
                let mean = mean_row(&runs);
                report.rows.extend(runs);
                report.rows.push(mean);
            }
        }
    }
    Ok(report)
}

impl Report {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(TSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.to_tsv());
            out.push('\n');
        }
        out
    }

    pub fn means(&self) -> impl Iterator<Item = &RunRow> {
        self.rows.iter().filter(|r| r.is_mean())
    }

    fn mean_of(&self, like: &RunRow, mode: Mode) -> Option<&RunRow> {
        self.means().find(|r| {
            r.mode == mode && r.query == like.query && r.page_size == like.page_size && r.selectivity == like.selectivity
        })
    }

    /// Mean wall time of staged over fused for each configuration that ran both.
    pub fn speedups(&self) -> Vec<f64> {
        self.means()
            .filter(|r| r.mode == Mode::Fused)
            .filter_map(|f| self.mean_of(f, Mode::Staged).map(|s| s.wall_ms / f.wall_ms))
            .collect()
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>9} {:>6} {:>7} {:>11} {:>11} {:>8} {:>10} {:>9}",
            "query", "page", "sel", "mode", "wall_ms", "launches", "speedup", "launch_r", "io_ratio"
        );
        for r in self.means() {
            let fused = self.mean_of(r, Mode::Fused);
            let staged = self.mean_of(r, Mode::Staged);
            let (speedup, launch_ratio) = match (fused, staged) {
                (Some(f), Some(s)) => (
                    format!("{:.2}", s.wall_ms / f.wall_ms),
                    format!("{:.3}", f.pass_launches / s.pass_launches),
                ),
                _ => ("-".into(), "-".into()),
            };
            let _ = writeln!(
                out,
                "{:<8} {:>9} {:>6} {:>7} {:>11.3} {:>11.1} {:>8} {:>10} {:>9.4}",
                r.query.name(),
                r.page_size,
                r.selectivity.map_or("-".into(), |s| format!("{s}")),
                r.mode,
                r.wall_ms,
                r.pass_launches,
                speedup,
                launch_ratio,
                r.io_ratio()
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::generate;
    use crate::Suite;

    #[test]
    fn header_is_stable() {
        assert_eq!(
            TSV_HEADER.split('\t').collect::<Vec<_>>(),
            [
                "query",
                "mode",
                "page_size",
                "selectivity",
                "rep",
                "wall_ms",
                "pass_launches",
                "barrier_count",
                "bytes_read",
                "bytes_read_plain",
                "io_ratio",
                "pages_read",
                "intermediate_bytes",
                "spills"
            ]
        );
    }

    fn quick_config() -> Config {
        let mut cfg = Config { latency: LatencyModel::instant(), ..Config::default() };
        cfg.exec.workers = 2;
        cfg
    }

    #[test]
    fn ten_reps_plus_mean() {
        let data = generate(Suite::Tpch, 0.001, 7).unwrap();
        let spec = BenchSpec {
            query: QueryId::Q6,
            modes: vec![Mode::Fused, Mode::Staged],
            page_sizes: vec![64 << 10],
            selectivities: vec![None, Some(0.5)],
            repetitions: 10,
        };
        let report = bench(&data, &quick_config(), &spec).unwrap();
        assert_eq!(report.rows.len(), 2 * 2 * 11);
        assert_eq!(report.means().count(), 4);
        for chunk in report.rows.chunks(11) {
            assert!(chunk[..10].iter().enumerate().all(|(i, r)| r.rep == Some(i)));
            assert!(chunk[10].is_mean());
            let mean = chunk[..10].iter().map(|r| r.wall_ms).sum::<f64>() / 10.0;
            assert!((chunk[10].wall_ms - mean).abs() < 1e-9);
        }
        let tsv = report.to_tsv();
        assert_eq!(tsv.lines().count(), 1 + 44);
        assert!(tsv.lines().all(|l| l.split('\t').count() == 14));
        assert_eq!(report.speedups().len(), 2);
        assert!(report.to_table().lines().count() == 5);
    }

    #[test]
    fn plain_pages_read_more() {
        let data = generate(Suite::Tpch, 0.001, 7).unwrap();
        let spec = BenchSpec {
            query: QueryId::Q6,
            modes: vec![Mode::Fused],
            page_sizes: vec![64 << 10],
            selectivities: vec![None],
            repetitions: 1,
        };
        let report = bench(&data, &quick_config(), &spec).unwrap();
        assert!(report.rows[0].io_ratio() < 1.0);
    }

    #[test]
    fn wrong_suite_and_empty_sweep() {
        let data = generate(Suite::Tpch, 0.001, 7).unwrap();
        let mut spec = BenchSpec {
            query: QueryId::Ssb11,
            modes: vec![Mode::Fused],
            page_sizes: vec![64 << 10],
            selectivities: vec![None],
            repetitions: 1,
        };
        assert!(matches!(bench(&data, &quick_config(), &spec), Err(BenchError::Usage(_))));
        spec.query = QueryId::Q6;
        spec.repetitions = 0;
        assert!(matches!(bench(&data, &quick_config(), &spec), Err(BenchError::Usage(_))));
    }
}
