//! `jacobilab`: batch runner for the quasi-periodic Jacobi operator
//! laboratory.

mod cache;
mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, ValueEnum};

use cache::{Cache, Lookup, RecordKey, ResultRecord, VERSION_TAG};
use commands::Operation;
use config::{load_config, ExperimentConfig};
use output::Payload;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "jacobilab", version, about = "Numerical experiments on quasi-periodic Jacobi operators")]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    operation: Operation,
    /// JSON experiment config; defaults apply to omitted fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// `csv` writes a table plus JSON sidecar; `json` writes one JSON document.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
    /// Worker threads; defaults to the logical core count.
    #[arg(long)]
    threads: Option<usize>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Recompute even when a cached result exists.
    #[arg(long)]
    no_cache: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    match execute(&cli, &cfg) {
        Ok(payload) if payload.hypothesis_violated => {
            eprintln!("hypotheses of the theorem are violated for this configuration");
            ExitCode::from(2)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: &Cli, cfg: &ExperimentConfig) -> anyhow::Result<Payload> {
    let op = cli.operation;
    let config_hash = cfg.hash();
    let key = RecordKey::new(&config_hash, op.name(), &op.inputs(cfg));
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;

    let cache = if cli.no_cache { None } else { Some(Cache::open(&cfg.out)?) };
    let mut cached = None;
    if let Some(c) = &cache {
        let (status, rec) = c.lookup(&key)?;
        if status == Lookup::Evicted {
            eprintln!("evicted a corrupt cache entry for {}", op.name());
        }
        cached = rec;
    }
    let payload = match cached {
        Some(rec) => {
            eprintln!("{}: cache hit (originally {} ms)", op.name(), rec.wall_time_ms);
            rec.payload
        }
        None => {
            let start = Instant::now();
            let payload = commands::run(op, cfg)?;
            let ms = start.elapsed().as_millis() as u64;
            eprintln!("{}: computed in {ms} ms", op.name());
            if let Some(c) = &cache {
                c.store(&ResultRecord::new(key.clone(), payload.clone(), ms))?;
            }
            payload
        }
    };
    write_outputs(cli, cfg, &key, &payload)?;
    Ok(payload)
}

fn write_outputs(cli: &Cli, cfg: &ExperimentConfig, key: &RecordKey, payload: &Payload) -> anyhow::Result<()> {
    let name = key.operation.as_str();
    let sidecar = |rows: Option<serde_json::Value>| {
        let mut doc = serde_json::json!({
            "operation": name,
            "config_hash": key.config_hash,
            "inputs_digest": key.inputs_digest,
            "version": VERSION_TAG,
            "config": cfg_without_out(cfg),
            "columns": payload.columns,
            "row_count": payload.rows.len(),
            "hypothesis_violated": payload.hypothesis_violated,
            "report": payload.report,
        });
        if let Some(rows) = rows {
            doc["rows"] = rows;
        }
        doc
    };
    let out = &cfg.out;
    match cli.format {
        Format::Csv => {
            write(out, &format!("{name}.csv"), &payload.to_csv(&key.config_hash)?)?;
            write(out, &format!("{name}.json"), &pretty(&sidecar(None))?)?;
        }
        Format::Json => write(out, &format!("{name}.json"), &pretty(&sidecar(Some(payload.rows_json(&key.config_hash))))?)?,
    }
    if cli.svg {
        for (stem, doc) in commands::plots(cli.operation, payload) {
            write(out, &format!("{stem}.svg"), doc.as_bytes())?;
        }
    }
    Ok(())
}

fn cfg_without_out(cfg: &ExperimentConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Some(obj) = v.as_object_mut() {
        obj.remove("out");
    }
    v
}

fn pretty(v: &serde_json::Value) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn write(dir: &Path, file: &str, bytes: &[u8]) -> anyhow::Result<()> {
    let path = dir.join(file);
    std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}
