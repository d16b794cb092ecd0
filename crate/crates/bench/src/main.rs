// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pathfuse_bench::config::{parse_size, Config};
use pathfuse_bench::report::{bench, exec_options, load_database, run_once, BenchSpec};
use pathfuse_bench::{generate, oracle, Dataset, Params, QueryId, Suite};
use pathfuse_core::exec::Mode;
use pathfuse_core::loader::load;
use pathfuse_core::store::Database;

#[derive(Parser)]
#[command(name = "pathfuse", version, about = "Columnar engine benchmark driver")]
struct Cli {
    /// key = value settings file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Table family to generate or read
    #[arg(long, default_value = "tpch")]
    suite: Suite,
    /// Scale factor for generated data
    #[arg(long, default_value_t = 0.01)]
    sf: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Read `<table>.tbl` files from this directory instead of generating
    #[arg(long)]
    input: Option<PathBuf>,
}

impl DataArgs {
    fn dataset(&self) -> Result<Dataset> {
        Ok(match &self.input {
            Some(dir) => Dataset::read_tbl(self.suite, dir)?,
            None => generate(self.suite, self.sf, self.seed)?,
        })
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Write generated tables as pipe-delimited `.tbl` files
    Generate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sort, compress and write a database directory
    Load {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one canned query against a loaded database
    Query {
        id: QueryId,
        #[arg(long)]
        db: PathBuf,
        #[arg(long, default_value = "fused")]
        mode: Mode,
        #[arg(long)]
        selectivity: Option<f64>,
        /// Scan every page
        #[arg(long)]
        no_prune: bool,
    },
    /// Sweep modes, page sizes and selectivities
    Bench {
        id: QueryId,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',', default_value = "fused,staged")]
        modes: Vec<Mode>,
        #[arg(long, value_delimiter = ',', default_value = "1M")]
        page_sizes: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        selectivities: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        /// Also write the tab-separated rows here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare both modes against the brute-force oracle
    Verify {
        /// Query id, or `all` for every query of the suite
        id: String,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        selectivity: Option<f64>,
    },
}

fn read_config(path: Option<&Path>) -> Result<Config> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Config::parse(&text).with_context(|| p.display().to_string())
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = read_config(cli.config.as_deref())?;
    match cli.cmd {
        Cmd::Generate { data, out } => {
            let d = data.dataset()?;
            d.write_tbl(&out)?;
            for (t, rows) in d.schema.tables.iter().zip(&d.tables) {
                println!("{}\t{}", t.name, rows.row_count());
            }
        }
        Cmd::Load { data, out } => {
            let d = data.dataset()?;
            let loaded = load(&d.schema, &d.tables, &cfg.load)?;
            loaded.save(&out)?;
            println!(
                "pages={} side_file_bytes={} raw_bytes={}",
                loaded.manifest.total_pages(),
                loaded.side_file_bytes(),
                d.raw_bytes()
            );
        }
        Cmd::Query { id, db, mode, selectivity, no_prune } => {
            let db = Database::open(&db, cfg.latency)?;
            let mut opts = exec_options(&cfg, id, mode);
            opts.prune &= !no_prune;
            let out = run_once(&db, id, &Params { selectivity }, &opts)?;
            print!("{}", out.result);
            let t = &out.trace;
            eprintln!(
                "query={} mode={} pruning_launches={} wall_ms={:.3} {}",
                t.query,
                t.mode,
                t.pruning_launches,
                t.wall_ms,
                t.totals.to_kv()
            );
            for p in &t.pipelines {
                eprintln!("  {}", p.to_kv());
            }
        }
        Cmd::Bench { id, data, modes, page_sizes, selectivities, reps, out } => {
            let page_sizes = page_sizes
                .iter()
                .map(|s| parse_size(s).with_context(|| format!("bad page size {s:?}")))
                .collect::<Result<Vec<_>>>()?;
            let selectivities = if selectivities.is_empty() {
                vec![None]
            } else {
                selectivities.into_iter().map(Some).collect()
            };
            let spec = BenchSpec { query: id, modes, page_sizes, selectivities, repetitions: reps };
            let report = bench(&data.dataset()?, &cfg, &spec)?;
            let tsv = report.to_tsv();
            print!("{tsv}");
            println!();
            print!("{}", report.to_table());
            if let Some(path) = out {
                std::fs::write(&path, tsv).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Cmd::Verify { id, data, selectivity } => {
            let ids: Vec<QueryId> = if id == "all" {
                QueryId::ALL.into_iter().filter(|q| q.suite() == data.suite).collect()
            } else {
                vec![id.parse()?]
            };
            let d = data.dataset()?;
            let db = load_database(&d, &cfg.load, cfg.latency)?;
            let params = Params { selectivity };
            let mut all_ok = true;
            for q in ids {
                if q.suite() != d.suite {
                    bail!("{q} runs on the {} tables", q.suite());
                }
                let expected = oracle::evaluate(q, &params, &d)?;
                for mode in [Mode::Fused, Mode::Staged] {
                    let got = run_once(&db, q, &params, &exec_options(&cfg, q, mode))?;
                    let ok = got.result == expected;
                    all_ok &= ok;
                    println!(
                        "{}\t{q}\t{mode}\trows={}\tlaunches={}",
                        if ok { "PASS" } else { "FAIL" },
                        got.result.rows.len(),
                        got.trace.pass_launches()
                    );
                }
            }
            return Ok(all_ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
