//! Aggregate tables over sweep records.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::analysis::sigmoid::{fit_sigmoid, SigmoidFit};
use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::harness::record::SweepRecord;
use crate::harness::store::read_coefs;
use crate::metrics::bias_variance;
use crate::selection::Criterion;

/// Densities at or below this form the sparse slice.
pub const SPARSE_DENSITY: f64 = 0.15;
pub const ALPHA_BINS: usize = 20;

/// Which response a transition curve is fit to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionMetric {
    Fnr,
    FnMag,
    FpMag,
}

impl TransitionMetric {
    pub fn id(&self) -> &'static str {
        match self {
            TransitionMetric::Fnr => "fnr",
            TransitionMetric::FnMag => "fn_mag",
            TransitionMetric::FpMag => "fp_mag",
        }
    }

    fn value(&self, r: &SweepRecord) -> f64 {
        match self {
            TransitionMetric::Fnr => r.fnr,
            TransitionMetric::FnMag => r.fn_mag,
            TransitionMetric::FpMag => r.fp_mag,
        }
    }
}

/// A sigmoid fitted to one (β distribution, criterion, density, estimator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub metric: TransitionMetric,
    pub beta_dist: String,
    pub criterion: Criterion,
    pub density: f64,
    pub estimator: Estimator,
    pub fit: SigmoidFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRow {
    pub metric: TransitionMetric,
    pub beta_dist: String,
    pub criterion: Criterion,
    pub density: f64,
    pub n_estimators: usize,
    pub mean_alpha0: f64,
    /// Sample standard deviation across estimators; 0 for a single one.
    pub sd_alpha0: f64,
    pub single_estimator: bool,
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

type CurveKey = (String, Criterion, u64, Estimator);

/// Fits one curve per (β distribution, criterion, density, estimator).
/// Groups without enough usable points are skipped.
pub fn fit_curves(records: &[SweepRecord], metric: TransitionMetric) -> Vec<CurveFit> {
    let mut groups: BTreeMap<CurveKey, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let y = metric.value(r);
        if !r.ok() || !y.is_finite() || !r.log_alpha.is_finite() {
            continue;
        }
        let g = groups
            .entry((r.beta_dist.clone(), r.criterion, r.density.to_bits(), r.estimator))
            .or_default();
        g.0.push(r.log_alpha);
        g.1.push(y);
    }
    let mut out = Vec::new();
    for ((beta_dist, criterion, density, estimator), (xs, ys)) in groups {
        match fit_sigmoid(&xs, &ys) {
            Ok(fit) => out.push(CurveFit {
                metric,
                beta_dist,
                criterion,
                density: f64::from_bits(density),
                estimator,
                fit,
            }),
            Err(e) => log::debug!("skipping curve {beta_dist}/{criterion}/{estimator}: {e}"),
        }
    }
    out
}

/// Aggregates curve midpoints across estimators per (β distribution,
/// criterion, density). Groups where every curve lacks a transition are
/// omitted.
pub fn transition_table(curves: &[CurveFit]) -> Vec<TransitionRow> {
    let mut groups: BTreeMap<(TransitionMetric, String, Criterion, u64), Vec<f64>> = BTreeMap::new();
    let mut seen: BTreeMap<(TransitionMetric, String, Criterion, u64), usize> = BTreeMap::new();
    for c in curves {
        let key = (c.metric, c.beta_dist.clone(), c.criterion, c.density.to_bits());
        *seen.entry(key.clone()).or_default() += 1;
        if !c.fit.no_transition {
            groups.entry(key).or_default().push(c.fit.alpha0);
        }
    }
    for (key, _) in seen.iter().filter(|(k, _)| !groups.contains_key(*k)) {
        log::warn!("no transition for {}/{}/{} at density {}", key.0.id(), key.1, key.2, f64::from_bits(key.3));
    }
    groups
        .into_iter()
        .map(|((metric, beta_dist, criterion, density), mut a0)| {
            // estimator order does not change the summary
            a0.sort_by(f64::total_cmp);
            let (mean, sd) = mean_sd(&a0);
            TransitionRow {
                metric,
                beta_dist,
                criterion,
                density: f64::from_bits(density),
                n_estimators: a0.len(),
                mean_alpha0: mean,
                sd_alpha0: sd,
                single_estimator: a0.len() == 1,
            }
        })
        .collect()
}

/// The accuracy each deviation is measured against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleBaseline {
    /// Best oracle accuracy over all estimators on the same instance.
    #[default]
    BestEstimator,
    /// The oracle of the same estimator.
    SameEstimator,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviationOptions {
    pub baseline: OracleBaseline,
    /// Keep only densities at or below this value.
    pub max_density: Option<f64>,
    /// Keep only one (snr, n/p) signal case.
    pub case: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub estimator: Estimator,
    pub criterion: Criterion,
    /// Mean over (case, density, log α bin) cells of the mean deviation.
    pub deviation: f64,
    pub cells: usize,
    pub winner: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationCell {
    pub snr: f64,
    pub np: f64,
    pub estimator: Estimator,
    pub criterion: Criterion,
    pub density: f64,
    pub bin: usize,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
    /// NaN for empty cells.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationTable {
    pub rows: Vec<DeviationRow>,
    pub cells: Vec<DeviationCell>,
    /// Bin edges per signal case, keyed "snr{s}_np{r}".
    pub bin_edges: BTreeMap<String, Vec<f64>>,
}

pub fn case_key(snr: f64, np: f64) -> String {
    format!("snr{snr}_np{np}")
}

/// `ALPHA_BINS + 1` equal-width edges over `[lo, hi]`.
pub fn bin_edges(lo: f64, hi: f64) -> Vec<f64> {
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    (0..=ALPHA_BINS).map(|i| lo + (hi - lo) * i as f64 / ALPHA_BINS as f64).collect()
}

/// Bin of `x`; the top edge belongs to the last bin.
pub fn bin_index(edges: &[f64], x: f64) -> usize {
    let n = edges.len() - 1;
    let w = (edges[n] - edges[0]) / n as f64;
    (((x - edges[0]) / w).floor().max(0.0) as usize).min(n - 1)
}

fn case_bins(records: &[&SweepRecord]) -> BTreeMap<String, Vec<f64>> {
    let mut range: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for r in records {
        if !r.log_alpha.is_finite() {
            continue;
        }
        let e = range.entry(case_key(r.snr, r.np)).or_insert((f64::INFINITY, f64::NEG_INFINITY));
        e.0 = e.0.min(r.log_alpha);
        e.1 = e.1.max(r.log_alpha);
    }
    range.into_iter().map(|(k, (lo, hi))| (k, bin_edges(lo, hi))).collect()
}

pub fn oracle_deviation(records: &[SweepRecord], opts: &DeviationOptions) -> Result<DeviationTable> {
    let kept: Vec<&SweepRecord> = records
        .iter()
        .filter(|r| opts.max_density.is_none_or(|d| r.density <= d + 1e-12))
        .filter(|r| opts.case.is_none_or(|(s, n)| r.snr == s && r.np == n))
        .collect();
    // oracle accuracy per (task, estimator)
    let mut oracle: HashMap<(&str, Estimator), f64> = HashMap::new();
    for r in kept.iter().filter(|r| r.criterion == Criterion::Oracle && r.ok()) {
        oracle.insert((r.task_id.as_str(), r.estimator), r.sel_acc);
    }
    let mut best: HashMap<&str, f64> = HashMap::new();
    for ((task, _), &acc) in &oracle {
        let e = best.entry(task).or_insert(f64::NEG_INFINITY);
        *e = e.max(acc);
    }
    let edges = case_bins(&kept);
    let mut densities: Vec<f64> = kept.iter().map(|r| r.density).collect();
    densities.sort_by(f64::total_cmp);
    densities.dedup();

    type CellKey = (String, Estimator, Criterion, u64, usize);
    let mut sums: BTreeMap<CellKey, (f64, usize)> = BTreeMap::new();
    let mut pairs: BTreeMap<(Estimator, Criterion), ()> = BTreeMap::new();
    for r in kept.iter().filter(|r| r.criterion != Criterion::Oracle) {
        pairs.insert((r.estimator, r.criterion), ());
        if !r.ok() || !r.log_alpha.is_finite() {
            continue;
        }
        let base = match opts.baseline {
            OracleBaseline::SameEstimator => oracle.get(&(r.task_id.as_str(), r.estimator)).copied(),
            OracleBaseline::BestEstimator => best.get(r.task_id.as_str()).copied(),
        }
        .ok_or_else(|| Error::MissingBaseline(format!("{} ({})", r.task_id, r.estimator)))?;
        let key = case_key(r.snr, r.np);
        let bin = bin_index(&edges[&key], r.log_alpha);
        let e = sums
            .entry((key, r.estimator, r.criterion, r.density.to_bits(), bin))
            .or_insert((0.0, 0));
        e.0 += base - r.sel_acc;
        e.1 += 1;
    }

    let mut cells = Vec::new();
    let mut per_pair: BTreeMap<(Estimator, Criterion), Vec<f64>> = BTreeMap::new();
    for (case, case_edges) in &edges {
        let (snr, np) = parse_case(case);
        for &(est, crit) in pairs.keys() {
            for &d in &densities {
                for bin in 0..ALPHA_BINS {
                    let (sum, count) = sums
                        .get(&(case.clone(), est, crit, d.to_bits(), bin))
                        .copied()
                        .unwrap_or((0.0, 0));
                    let deviation = if count > 0 { sum / count as f64 } else { f64::NAN };
                    if count > 0 {
                        per_pair.entry((est, crit)).or_default().push(deviation);
                    }
                    cells.push(DeviationCell {
                        snr,
                        np,
                        estimator: est,
                        criterion: crit,
                        density: d,
                        bin,
                        bin_lo: case_edges[bin],
                        bin_hi: case_edges[bin + 1],
                        count,
                        deviation,
                    });
                }
            }
        }
    }
    let mut rows: Vec<DeviationRow> = per_pair
        .into_iter()
        .map(|((estimator, criterion), v)| DeviationRow {
            estimator,
            criterion,
            deviation: v.iter().sum::<f64>() / v.len() as f64,
            cells: v.len(),
            winner: false,
        })
        .collect();
    if let Some(i) = (0..rows.len()).min_by(|&a, &b| rows[a].deviation.total_cmp(&rows[b].deviation)) {
        rows[i].winner = true;
    }
    Ok(DeviationTable {
        rows,
        cells,
        bin_edges: edges,
    })
}

fn parse_case(key: &str) -> (f64, f64) {
    let rest = key.trim_start_matches("snr");
    let (s, n) = rest.split_once("_np").unwrap_or((rest, "nan"));
    (s.parse().unwrap_or(f64::NAN), n.parse().unwrap_or(f64::NAN))
}

/// Across-repetition bias and variance of one design, estimator and criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceRow {
    pub cov_id: usize,
    pub density: f64,
    pub beta_dist: String,
    pub snr: f64,
    pub np: f64,
    pub log_alpha: f64,
    pub estimator: Estimator,
    pub criterion: Criterion,
    pub repetitions: usize,
    pub bias: f64,
    pub abs_bias: f64,
    pub variance: f64,
}

/// Reads coefficient shards and computes bias and variance per design.
/// Designs with fewer than two usable repetitions are skipped.
pub fn bias_variance_rows(out: &Path, records: &[SweepRecord]) -> Result<Vec<BiasVarianceRow>> {
    let mut tasks: BTreeMap<(usize, String, String, String, String), Vec<&SweepRecord>> = BTreeMap::new();
    let mut seen = std::collections::HashSet::new();
    for r in records {
        if seen.insert(r.task_id.as_str()) {
            tasks.entry(r.design_key()).or_default().push(r);
        }
    }
    let mut rows = Vec::new();
    for reps in tasks.values() {
        let mut truth: Option<(DVector<f64>, Vec<usize>)> = None;
        let mut fits: BTreeMap<(String, String), Vec<DVector<f64>>> = BTreeMap::new();
        for r in reps {
            let coefs = match read_coefs(out, &r.task_id) {
                Ok(c) => c,
                Err(e) => {
                    log::warn!("no coefficients for {}: {e}", r.task_id);
                    continue;
                }
            };
            for row in coefs {
                let v = DVector::from_vec(row.coefs);
                if row.estimator == "truth" {
                    if truth.is_none() {
                        let s = crate::solvers::nonzero_support(&v);
                        truth = Some((v, s));
                    }
                } else {
                    fits.entry((row.estimator, row.criterion)).or_default().push(v);
                }
            }
        }
        let Some((beta, support)) = truth else { continue };
        let first = reps[0];
        for ((est, crit), vs) in fits {
            if vs.len() < 2 {
                continue;
            }
            let bv = bias_variance(&vs, &beta, &support)?;
            rows.push(BiasVarianceRow {
                cov_id: first.cov_id,
                density: first.density,
                beta_dist: first.beta_dist.clone(),
                snr: first.snr,
                np: first.np,
                log_alpha: first.log_alpha,
                estimator: Estimator::from_id(&est)?,
                criterion: Criterion::from_id(&crit)?,
                repetitions: bv.repetitions,
                bias: bv.bias,
                abs_bias: bv.abs_bias,
                variance: bv.variance,
            });
        }
    }
    Ok(rows)
}
