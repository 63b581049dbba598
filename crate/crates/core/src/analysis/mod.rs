//! Post-hoc analysis of a results store: transition curves, oracle
//! deviation tables and per-figure CSV files.

pub mod sigmoid;
pub mod tables;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::record::SweepRecord;
use crate::harness::store::load_store;
use crate::selection::Criterion;

pub use sigmoid::{fit_sigmoid, SigmoidFit};
pub use tables::{
    bias_variance_rows, fit_curves, mean_sd, oracle_deviation, transition_table, BiasVarianceRow, CurveFit,
    DeviationOptions, DeviationTable, OracleBaseline, TransitionMetric, TransitionRow, SPARSE_DENSITY,
};

pub const FIGURE_IDS: [&str; 7] = [
    "fnr_fpr_scatter",
    "alpha_scatter",
    "transition_curves",
    "oracle_heatmap",
    "magnitude_scatter",
    "bias_variance",
    "eta_scatter",
];

/// Inputs shared by all figures.
#[derive(Debug, Clone, Default)]
pub struct AnalysisInputs {
    pub records: Vec<SweepRecord>,
    pub curves: Vec<CurveFit>,
    pub deviation: Option<DeviationTable>,
    pub bias_variance: Vec<BiasVarianceRow>,
}

impl AnalysisInputs {
    /// Fits curves and the all-density deviation table from `records`.
    pub fn from_records(records: Vec<SweepRecord>) -> Result<Self> {
        let mut curves = fit_curves(&records, TransitionMetric::Fnr);
        curves.extend(fit_curves(&records, TransitionMetric::FnMag));
        curves.extend(fit_curves(&records, TransitionMetric::FpMag));
        let deviation = if records.is_empty() {
            None
        } else {
            Some(oracle_deviation(&records, &DeviationOptions::default())?)
        };
        Ok(AnalysisInputs {
            records,
            curves,
            deviation,
            bias_variance: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: String,
    pub rows: usize,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
    pub grids: BTreeMap<String, Vec<String>>,
    pub alpha_bin_edges: BTreeMap<String, Vec<f64>>,
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<usize> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows.len())
}

#[derive(Serialize)]
struct FnrFpr<'a> {
    estimator: &'a str,
    criterion: &'a str,
    density: f64,
    beta_dist: &'a str,
    log_alpha: f64,
    fnr: f64,
    fpr: f64,
}

#[derive(Serialize)]
struct AlphaPoint<'a> {
    estimator: &'a str,
    criterion: &'a str,
    density: f64,
    beta_dist: &'a str,
    snr: f64,
    np: f64,
    log_alpha: f64,
    fnr: f64,
    sel_acc: f64,
}

#[derive(Serialize)]
struct MagnitudePoint<'a> {
    estimator: &'a str,
    criterion: &'a str,
    density: f64,
    beta_dist: &'a str,
    log_alpha: f64,
    fn_mag: f64,
    fp_mag: f64,
}

#[derive(Serialize)]
struct EtaPoint<'a> {
    task_id: &'a str,
    cov_id: usize,
    density: f64,
    k: usize,
    eta: f64,
    rho_lower: f64,
    rho_exact: Option<f64>,
    rho_used: f64,
    log_alpha: f64,
}

#[derive(Serialize)]
struct CurveRow<'a> {
    metric: &'a str,
    estimator: &'a str,
    criterion: &'a str,
    beta_dist: &'a str,
    density: f64,
    a: f64,
    b: f64,
    c: f64,
    alpha0: f64,
    rss: f64,
    converged: bool,
    n_points: usize,
    no_transition: bool,
}

fn ok_records(records: &[SweepRecord]) -> impl Iterator<Item = &SweepRecord> {
    records.iter().filter(|r| r.ok())
}

/// Writes the CSV for `figure_id` into `dest` and describes it. Rows follow
/// the store's task order, which is sorted by grid keys.
pub fn emit_plot_data(inputs: &AnalysisInputs, figure_id: &str, dest: &Path) -> Result<ManifestEntry> {
    let path = dest.join(format!("{figure_id}.csv"));
    let (header, rows): (Vec<&str>, usize) = match figure_id {
        "fnr_fpr_scatter" => {
            let h = vec!["estimator", "criterion", "density", "beta_dist", "log_alpha", "fnr", "fpr"];
            let rows: Vec<FnrFpr> = ok_records(&inputs.records)
                .map(|r| FnrFpr {
                    estimator: r.estimator.id(),
                    criterion: r.criterion.id(),
                    density: r.density,
                    beta_dist: &r.beta_dist,
                    log_alpha: r.log_alpha,
                    fnr: r.fnr,
                    fpr: r.fpr,
                })
                .collect();
            (h.clone(), write_rows(&path, &h, &rows)?)
        }
        "alpha_scatter" => {
            let h = vec!["estimator", "criterion", "density", "beta_dist", "snr", "np", "log_alpha", "fnr", "sel_acc"];
            let rows: Vec<AlphaPoint> = ok_records(&inputs.records)
                .map(|r| AlphaPoint {
                    estimator: r.estimator.id(),
                    criterion: r.criterion.id(),
                    density: r.density,
                    beta_dist: &r.beta_dist,
                    snr: r.snr,
                    np: r.np,
                    log_alpha: r.log_alpha,
                    fnr: r.fnr,
                    sel_acc: r.sel_acc,
                })
                .collect();
            (h.clone(), write_rows(&path, &h, &rows)?)
        }
        "magnitude_scatter" => {
            let h = vec!["estimator", "criterion", "density", "beta_dist", "log_alpha", "fn_mag", "fp_mag"];
            let rows: Vec<MagnitudePoint> = ok_records(&inputs.records)
                .map(|r| MagnitudePoint {
                    estimator: r.estimator.id(),
                    criterion: r.criterion.id(),
                    density: r.density,
                    beta_dist: &r.beta_dist,
                    log_alpha: r.log_alpha,
                    fn_mag: r.fn_mag,
                    fp_mag: r.fp_mag,
                })
                .collect();
            (h.clone(), write_rows(&path, &h, &rows)?)
        }
        "eta_scatter" => {
            let h = vec!["task_id", "cov_id", "density", "k", "eta", "rho_lower", "rho_exact", "rho_used", "log_alpha"];
            let mut seen = std::collections::HashSet::new();
            let rows: Vec<EtaPoint> = inputs
                .records
                .iter()
                .filter(|r| seen.insert(r.task_id.as_str()))
                .map(|r| EtaPoint {
                    task_id: &r.task_id,
                    cov_id: r.cov_id,
                    density: r.density,
                    k: r.k,
                    eta: r.eta,
                    rho_lower: r.rho_lower,
                    rho_exact: r.rho_exact,
                    rho_used: r.rho_used,
                    log_alpha: r.log_alpha,
                })
                .collect();
            (h.clone(), write_rows(&path, &h, &rows)?)
        }
        "transition_curves" => {
            let h = vec![
                "metric", "estimator", "criterion", "beta_dist", "density", "a", "b", "c", "alpha0", "rss", "converged",
                "n_points", "no_transition",
            ];
            let rows: Vec<CurveRow> = inputs
                .curves
                .iter()
                .map(|c| CurveRow {
                    metric: c.metric.id(),
                    estimator: c.estimator.id(),
                    criterion: c.criterion.id(),
                    beta_dist: &c.beta_dist,
                    density: c.density,
                    a: c.fit.a,
                    b: c.fit.b,
                    c: c.fit.c,
                    alpha0: c.fit.alpha0,
                    rss: c.fit.rss,
                    converged: c.fit.converged,
                    n_points: c.fit.n_points,
                    no_transition: c.fit.no_transition,
                })
                .collect();
            (h.clone(), write_rows(&path, &h, &rows)?)
        }
        "oracle_heatmap" => {
            let h = vec![
                "snr", "np", "estimator", "criterion", "density", "bin", "bin_lo", "bin_hi", "count", "deviation",
            ];
            let cells = inputs.deviation.as_ref().map_or(&[][..], |d| &d.cells[..]);
            (h.clone(), write_rows(&path, &h, cells)?)
        }
        "bias_variance" => {
            let h = vec![
                "cov_id", "density", "beta_dist", "snr", "np", "log_alpha", "estimator", "criterion", "repetitions",
                "bias", "abs_bias", "variance",
            ];
            (h.clone(), write_rows(&path, &h, &inputs.bias_variance)?)
        }
        other => {
            return Err(Error::UnknownId {
                kind: "figure",
                value: other.into(),
                valid: FIGURE_IDS.join(", "),
            })
        }
    };
    Ok(ManifestEntry {
        id: figure_id.to_string(),
        path: path.file_name().expect("file name").to_string_lossy().into_owned(),
        rows,
        columns: header.iter().map(|s| s.to_string()).collect(),
    })
}

#[derive(Serialize)]
struct DeviationCsvRow<'a> {
    slice: &'a str,
    estimator: &'a str,
    criterion: &'a str,
    deviation: f64,
    cells: usize,
    winner: bool,
}

/// Oracle-deviation tables for the all-density and sparse slices, for all
/// signal cases pooled and for each case.
pub fn deviation_tables(records: &[SweepRecord]) -> Result<Vec<(String, DeviationTable)>> {
    let mut cases: Vec<(f64, f64)> = records.iter().map(|r| (r.snr, r.np)).collect();
    cases.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    cases.dedup();
    let mut out = Vec::new();
    let mut scopes: Vec<(String, Option<(f64, f64)>)> = vec![("pooled".into(), None)];
    scopes.extend(cases.iter().map(|&(s, n)| (tables::case_key(s, n), Some((s, n)))));
    for (name, case) in scopes {
        for (slice, max_density) in [("all", None), ("sparse", Some(SPARSE_DENSITY))] {
            let opts = DeviationOptions {
                baseline: OracleBaseline::BestEstimator,
                max_density,
                case,
            };
            let table = oracle_deviation(records, &opts)?;
            if !table.rows.is_empty() {
                out.push((format!("{name}/{slice}"), table));
            }
        }
    }
    Ok(out)
}

/// Runs the full analysis of the store at `out` into `dest`.
pub fn analyze_store(out: &Path, dest: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dest)?;
    let (cfg, records) = load_store(out)?;
    let bias = bias_variance_rows(out, &records)?;
    let mut inputs = AnalysisInputs::from_records(records)?;
    inputs.bias_variance = bias;
    let mut manifest = Manifest::default();
    for id in FIGURE_IDS {
        manifest.files.push(emit_plot_data(&inputs, id, dest)?);
    }

    let trans = transition_table(&inputs.curves);
    let path = dest.join("transition_table.csv");
    let h = [
        "metric", "beta_dist", "criterion", "density", "n_estimators", "mean_alpha0", "sd_alpha0", "single_estimator",
    ];
    let rows = write_rows(&path, &h, &trans)?;
    manifest.files.push(ManifestEntry {
        id: "transition_table".into(),
        path: "transition_table.csv".into(),
        rows,
        columns: h.iter().map(|s| s.to_string()).collect(),
    });

    let tables = deviation_tables(&inputs.records)?;
    let mut dev_rows = Vec::new();
    for (name, t) in &tables {
        for r in &t.rows {
            dev_rows.push(DeviationCsvRow {
                slice: name,
                estimator: r.estimator.id(),
                criterion: r.criterion.id(),
                deviation: r.deviation,
                cells: r.cells,
                winner: r.winner,
            });
        }
        if name.starts_with("pooled/") {
            for (k, e) in &t.bin_edges {
                manifest.alpha_bin_edges.insert(format!("{name}/{k}"), e.clone());
            }
        }
    }
    let h = ["slice", "estimator", "criterion", "deviation", "cells", "winner"];
    let rows = write_rows(&dest.join("oracle_deviation.csv"), &h, &dev_rows)?;
    manifest.files.push(ManifestEntry {
        id: "oracle_deviation".into(),
        path: "oracle_deviation.csv".into(),
        rows,
        columns: h.iter().map(|s| s.to_string()).collect(),
    });

    let g = &mut manifest.grids;
    g.insert("densities".into(), cfg.densities.iter().map(|v| v.to_string()).collect());
    g.insert("beta_distributions".into(), cfg.beta_distributions.clone());
    g.insert("snrs".into(), cfg.snrs.iter().map(|v| v.to_string()).collect());
    g.insert("n_over_p".into(), cfg.n_over_p.iter().map(|v| v.to_string()).collect());
    g.insert("estimators".into(), cfg.estimators.iter().map(|e| e.id().to_string()).collect());
    g.insert("criteria".into(), cfg.all_criteria().iter().map(|c| c.id().to_string()).collect());
    std::fs::write(dest.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Aligned text rendering of every oracle-deviation table.
pub fn render_report(records: &[SweepRecord]) -> Result<String> {
    let mut s = String::new();
    for (name, table) in deviation_tables(records)? {
        let criteria: Vec<Criterion> = {
            let mut c: Vec<Criterion> = table.rows.iter().map(|r| r.criterion).collect();
            c.sort();
            c.dedup();
            c
        };
        let mut estimators: Vec<_> = table.rows.iter().map(|r| r.estimator).collect();
        estimators.sort();
        estimators.dedup();
        writeln!(s, "== {name} (mean oracle deviation, * = best) ==").ok();
        write!(s, "{:<8}", "").ok();
        for c in &criteria {
            write!(s, "{:>10}", c.id()).ok();
        }
        writeln!(s).ok();
        for e in &estimators {
            write!(s, "{:<8}", e.id()).ok();
            for c in &criteria {
                match table.rows.iter().find(|r| r.estimator == *e && r.criterion == *c) {
                    Some(r) => write!(s, "{:>9.4}{}", r.deviation, if r.winner { "*" } else { " " }).ok(),
                    None => write!(s, "{:>10}", "-").ok(),
                };
            }
            writeln!(s).ok();
        }
        writeln!(s).ok();
    }
    Ok(s)
}

/// Path of the default analysis directory of a store.
pub fn default_dest(out: &Path) -> PathBuf {
    out.join("analysis")
}
