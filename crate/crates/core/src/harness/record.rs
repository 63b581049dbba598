//! Rows of the results store.

use serde::{Deserialize, Serialize};

use crate::difficulty::DifficultyReport;
use crate::estimators::Estimator;
use crate::harness::task::Task;
use crate::metrics::FitMetrics;
use crate::selection::{Criterion, FitResult};
use crate::simdesign::ProblemInstance;

/// One (instance, estimator, criterion) result. Metric columns are NaN and
/// `error` is set when the fit failed.
///
/// `bias` is the mean signed error over the true support for this single
/// fit; `var` is always NaN here because variance needs every repetition
/// and is computed by the analysis step from the coefficient shards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub task_id: String,
    pub cov_id: usize,
    pub t: f64,
    pub block_size: usize,
    pub block_value: f64,
    pub banding_scale: f64,
    pub density: f64,
    pub beta_dist: String,
    pub snr: f64,
    pub np: f64,
    pub rep: usize,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub beta_min: f64,
    pub sigma2: f64,
    pub rho_lower: f64,
    pub rho_exact: Option<f64>,
    pub rho_used: f64,
    pub full_support: bool,
    pub alpha: f64,
    pub log_alpha: f64,
    pub eta: f64,
    pub g_bound: Option<f64>,
    pub regime: Option<String>,
    pub estimator: Estimator,
    pub criterion: Criterion,
    pub lambda: Option<f64>,
    pub k_hat: Option<usize>,
    pub score: f64,
    pub rss: f64,
    pub sel_acc: f64,
    pub fnr: f64,
    pub fpr: f64,
    pub fn_mag: f64,
    pub fp_mag: f64,
    pub bias: f64,
    pub var: f64,
    pub r2: f64,
    pub error: Option<String>,
}

impl SweepRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        task: &Task,
        inst: &ProblemInstance,
        report: &DifficultyReport,
        estimator: Estimator,
        criterion: Criterion,
        fit: Option<&FitResult>,
        metrics: Option<&FitMetrics>,
        error: Option<&str>,
    ) -> Self {
        let nan = f64::NAN;
        let m = |f: fn(&FitMetrics) -> f64| metrics.map_or(nan, f);
        SweepRecord {
            task_id: task.id.clone(),
            cov_id: task.cov_index,
            t: task.covariance.t,
            block_size: task.covariance.block_size,
            block_value: task.covariance.block_value,
            banding_scale: task.covariance.banding_scale,
            density: task.density,
            beta_dist: task.beta_dist.clone(),
            snr: task.snr,
            np: task.n_over_p,
            rep: task.rep,
            seed: task.seed,
            n: inst.n(),
            p: inst.p(),
            k: inst.k(),
            beta_min: report.beta_min,
            sigma2: report.sigma2,
            rho_lower: report.rho_lower,
            rho_exact: report.rho_exact,
            rho_used: report.rho_used,
            full_support: report.full_support,
            alpha: report.alpha,
            log_alpha: report.log_alpha,
            eta: report.eta,
            g_bound: report.g_bound,
            regime: report.regime.clone(),
            estimator,
            criterion,
            lambda: fit.and_then(|f| f.lambda),
            k_hat: fit.map(|f| f.k_hat),
            score: fit.map_or(nan, |f| f.score),
            rss: fit.map_or(nan, |f| f.rss),
            sel_acc: m(|x| x.selection_accuracy),
            fnr: m(|x| x.fnr),
            fpr: m(|x| x.fpr),
            fn_mag: m(|x| x.fn_mag_ratio),
            fp_mag: m(|x| x.fp_mag_ratio),
            bias: m(|x| x.bias),
            var: nan,
            r2: m(|x| x.r2),
            error: error.map(str::to_string),
        }
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    /// Design key shared by all repetitions of one instance family.
    pub fn design_key(&self) -> (usize, String, String, String, String) {
        (
            self.cov_id,
            self.density.to_string(),
            self.beta_dist.clone(),
            self.snr.to_string(),
            self.np.to_string(),
        )
    }
}

/// Coefficients of one fit (or the truth, with estimator `truth`).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefRow {
    pub estimator: String,
    pub criterion: String,
    pub coefs: Vec<f64>,
}
