//! Sweep execution and the on-disk results store.
//!
//! Layout under the output directory:
//!
//! ```text
//! config.toml       resolved configuration
//! completed.txt     append-only ledger of finished task ids
//! shards/<id>.csv   SweepRecord rows of one task
//! coefs/<id>.csv    coefficient vectors of one task (first row is the truth)
//! timing/<id>.csv   wall time per estimator
//! records.csv       merged store, written by `merge_store`
//! ```
//!
//! Wall times live apart from the records so that two runs of the same
//! configuration produce byte-identical shards.

use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::SweepConfig;
use crate::harness::record::{CoefRow, SweepRecord};
use crate::harness::task::{enumerate_tasks, run_task, Task, TaskOutput};

pub const LEDGER: &str = "completed.txt";
pub const CONFIG: &str = "config.toml";
pub const MERGED: &str = "records.csv";

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Overrides the configured worker count.
    pub workers: Option<usize>,
    /// Continue a store that already has completed tasks.
    pub resume: bool,
    /// Stop after this many new tasks (simulates an interruption).
    pub max_tasks: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepSummary {
    pub total: usize,
    pub already_done: usize,
    pub ran: usize,
    pub remaining: usize,
}

pub fn read_ledger(out: &Path) -> Result<HashSet<String>> {
    let path = out.join(LEDGER);
    if !path.exists() {
        return Ok(HashSet::new());
    }
    Ok(fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("shard");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn records_to_csv(records: &[SweepRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if records.is_empty() {
        // header-only output still needs the column names
        w.write_record(record_header())?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Column names of the records CSV.
pub fn record_header() -> Vec<&'static str> {
    vec![
        "task_id", "cov_id", "t", "block_size", "block_value", "banding_scale", "density", "beta_dist", "snr", "np",
        "rep", "seed", "n", "p", "k", "beta_min", "sigma2", "rho_lower", "rho_exact", "rho_used", "full_support",
        "alpha", "log_alpha", "eta", "g_bound", "regime", "estimator", "criterion", "lambda", "k_hat", "score", "rss",
        "sel_acc", "fnr", "fpr", "fn_mag", "fp_mag", "bias", "var", "r2", "error",
    ]
}

pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row.map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn coefs_to_csv(rows: &[CoefRow]) -> Vec<u8> {
    let p = rows.first().map_or(0, |r| r.coefs.len());
    let mut s = String::from("estimator,criterion");
    for j in 0..p {
        s.push_str(&format!(",beta_{j}"));
    }
    s.push('\n');
    for r in rows {
        s.push_str(&r.estimator);
        s.push(',');
        s.push_str(&r.criterion);
        for v in &r.coefs {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s.into_bytes()
}

pub fn read_coefs(out: &Path, task_id: &str) -> Result<Vec<CoefRow>> {
    let path = out.join("coefs").join(format!("{task_id}.csv"));
    let mut rdr = csv::Reader::from_path(&path)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let coefs = rec
            .iter()
            .skip(2)
            .map(|v| {
                v.parse::<f64>().map_err(|e| Error::Malformed {
                    path: path.clone(),
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(CoefRow {
            estimator: rec[0].to_string(),
            criterion: rec[1].to_string(),
            coefs,
        });
    }
    Ok(rows)
}

fn write_task(out: &Path, task: &Task, output: &TaskOutput) -> Result<()> {
    let file = format!("{}.csv", task.id);
    write_atomic(&out.join("coefs").join(&file), &coefs_to_csv(&output.coefs))?;
    let mut timing = String::from("estimator,seconds\n");
    for (e, s) in &output.timing {
        timing.push_str(&format!("{e},{s}\n"));
    }
    write_atomic(&out.join("timing").join(&file), timing.as_bytes())?;
    // the shard goes last: its presence plus the ledger line marks completion
    write_atomic(&out.join("shards").join(&file), &records_to_csv(&output.records)?)
}

pub fn run_sweep(cfg: &SweepConfig, out: &Path, opts: &SweepOptions) -> Result<SweepSummary> {
    cfg.validate()?;
    let tasks = enumerate_tasks(cfg)?;
    for dir in ["shards", "coefs", "timing"] {
        fs::create_dir_all(out.join(dir))?;
    }
    let done = read_ledger(out)?;
    let config_text = cfg.to_toml()?;
    let config_path = out.join(CONFIG);
    if !done.is_empty() {
        if !opts.resume {
            return Err(Error::Config(format!(
                "{} already holds {} completed tasks; resume or choose a new directory",
                out.display(),
                done.len()
            )));
        }
        if config_path.exists() && fs::read_to_string(&config_path)? != config_text {
            return Err(Error::Config("store was created with a different configuration".into()));
        }
    }
    write_atomic(&config_path, config_text.as_bytes())?;

    let mut pending: Vec<&Task> = tasks.iter().filter(|t| !done.contains(&t.id)).collect();
    let already_done = tasks.len() - pending.len();
    if let Some(limit) = opts.max_tasks {
        pending.truncate(limit);
    }
    let workers = opts.workers.unwrap_or(cfg.workers).max(1);
    let ledger = Mutex::new(OpenOptions::new().create(true).append(true).open(out.join(LEDGER))?);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    log::info!("{} tasks total, {already_done} done, running {} on {workers} workers", tasks.len(), pending.len());
    pool.install(|| {
        pending.par_iter().try_for_each(|task| -> Result<()> {
            let output = run_task(task, cfg)?;
            write_task(out, task, &output)?;
            let mut f = ledger.lock().expect("ledger lock poisoned");
            writeln!(f, "{}", task.id)?;
            f.flush()?;
            log::debug!("finished {}", task.id);
            Ok(())
        })
    })?;
    let ran = pending.len();
    Ok(SweepSummary {
        total: tasks.len(),
        already_done,
        ran,
        remaining: tasks.len() - already_done - ran,
    })
}

/// All completed records in task order, with the configuration that made them.
pub fn load_store(out: &Path) -> Result<(SweepConfig, Vec<SweepRecord>)> {
    let cfg = SweepConfig::load(&out.join(CONFIG))?;
    let merged = out.join(MERGED);
    if merged.exists() {
        return Ok((cfg, read_records(&merged)?));
    }
    Ok((cfg.clone(), collect_shards(out, &cfg)?))
}

fn collect_shards(out: &Path, cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    let mut records = Vec::new();
    let mut missing = 0usize;
    for task in enumerate_tasks(cfg)? {
        let shard = out.join("shards").join(format!("{}.csv", task.id));
        if shard.exists() {
            records.extend(read_records(&shard)?);
        } else {
            missing += 1;
        }
    }
    if missing > 0 {
        log::warn!("{missing} tasks have no shard yet");
    }
    Ok(records)
}

/// Concatenates shards in task order into `records.csv`.
pub fn merge_store(out: &Path) -> Result<PathBuf> {
    let cfg = SweepConfig::load(&out.join(CONFIG))?;
    let records = collect_shards(out, &cfg)?;
    let path = out.join(MERGED);
    write_atomic(&path, &records_to_csv(&records)?)?;
    Ok(path)
}
