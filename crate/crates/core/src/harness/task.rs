//! Sweep tasks: one synthesized instance, every estimator, every criterion.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::difficulty::{difficulty_report, DifficultyOptions};
use crate::error::Result;
use crate::estimators::{fit_estimator, Estimator};
use crate::harness::config::SweepConfig;
use crate::harness::record::{CoefRow, SweepRecord};
use crate::metrics::fit_metrics;
use crate::selection::{Criterion, FitResult};
use crate::simdesign::{sample_beta, synthesize_from, BetaDistribution, BetaSpec, CovarianceSpec, Design, ProblemInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    /// Position in enumeration order.
    pub index: usize,
    pub id: String,
    pub cov_index: usize,
    pub covariance: CovarianceSpec,
    pub density: f64,
    pub beta_dist: String,
    pub snr: f64,
    pub n_over_p: f64,
    pub rep: usize,
    /// Seed for X and noise.
    pub seed: u64,
    /// Seed for the coefficient vector; shared by all repetitions.
    pub beta_seed: u64,
}

/// First eight bytes of SHA-256 over `parts` joined with `|`.
pub fn stable_seed(parts: &[&str]) -> u64 {
    let digest = Sha256::digest(parts.join("|").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn enumerate_tasks(cfg: &SweepConfig) -> Result<Vec<Task>> {
    cfg.validate()?;
    let base = cfg.seed.to_string();
    let mut tasks = Vec::with_capacity(cfg.task_count());
    for (ci, cov) in cfg.covariances.iter().enumerate() {
        let spec = cov.spec(cfg.p);
        let key = spec.key();
        for &density in &cfg.densities {
            let d = density.to_string();
            for beta_dist in &cfg.beta_distributions {
                let beta_seed = stable_seed(&[&base, "beta", &key, &d, beta_dist]);
                for &snr in &cfg.snrs {
                    let s = snr.to_string();
                    for &np in &cfg.n_over_p {
                        let r = np.to_string();
                        for rep in 0..cfg.repetitions {
                            let rep_s = rep.to_string();
                            tasks.push(Task {
                                index: tasks.len(),
                                id: format!("{key}_k{d}_{beta_dist}_snr{s}_np{r}_rep{rep}"),
                                cov_index: ci,
                                covariance: spec.clone(),
                                density,
                                beta_dist: beta_dist.clone(),
                                snr,
                                n_over_p: np,
                                rep,
                                seed: stable_seed(&[&base, "instance", &key, &d, beta_dist, &s, &r, &rep_s]),
                                beta_seed,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(tasks)
}

impl Task {
    pub fn instance(&self, cfg: &SweepConfig) -> Result<ProblemInstance> {
        Ok(self.instance_with_design(cfg)?.1)
    }

    pub fn instance_with_design(&self, cfg: &SweepConfig) -> Result<(Design, ProblemInstance)> {
        let design = Design::new(&self.covariance)?;
        let beta = BetaSpec {
            p: cfg.p,
            density: self.density,
            distribution: BetaDistribution::from_id(&self.beta_dist, &cfg.beta)?,
            floor: cfg.beta.floor,
            seed: self.beta_seed,
        };
        let (beta_true, support) = sample_beta(&beta)?;
        let inst = synthesize_from(&design, beta_true, support, self.n_over_p, self.snr, self.seed)?;
        Ok((design, inst))
    }

    fn fit_seed(&self, est: Estimator) -> u64 {
        stable_seed(&[&self.seed.to_string(), "fit", est.id()])
    }
}

#[derive(Debug, Clone)]
pub struct TaskOutput {
    pub records: Vec<SweepRecord>,
    pub coefs: Vec<CoefRow>,
    /// Wall time per estimator, in seconds.
    pub timing: Vec<(Estimator, f64)>,
}

fn r2_of(fit: &FitResult, tss: f64) -> f64 {
    1.0 - fit.rss / tss.max(crate::selection::R2_VARIANCE_FLOOR)
}

/// Runs one task. Fit failures become rows with an error code; only a
/// failure to build the instance itself is returned as an error.
pub fn run_task(task: &Task, cfg: &SweepConfig) -> Result<TaskOutput> {
    let (design, inst) = task.instance_with_design(cfg)?;
    let signs: Vec<f64> = inst.support.iter().map(|&i| inst.beta_true[i].signum()).collect();
    let opts = DifficultyOptions {
        exact_max_p: cfg.exact_rho_max_p,
        c1: cfg.c1,
    };
    let report = difficulty_report(&design.sigma, &inst.support, &signs, inst.beta_min(), inst.sigma2, &opts)?;
    let criteria = cfg.all_criteria();
    let ym = inst.y.mean();
    let tss: f64 = inst.y.iter().map(|v| (v - ym).powi(2)).sum();

    let mut records = Vec::new();
    let mut coefs = vec![CoefRow {
        estimator: "truth".into(),
        criterion: String::new(),
        coefs: inst.beta_true.iter().copied().collect(),
    }];
    let mut timing = Vec::new();
    for &est in &cfg.estimators {
        let start = Instant::now();
        let fits = fit_estimator(
            &inst.x,
            &inst.y,
            Some(&inst.support),
            est,
            &criteria,
            &cfg.estimator_settings,
            task.fit_seed(est),
        );
        timing.push((est, start.elapsed().as_secs_f64()));
        let per_criterion: Vec<(Criterion, Result<FitResult>)> = match fits {
            Ok(f) => f,
            Err(e) => {
                log::warn!("{}: {est} failed: {e}", task.id);
                let code = e.code();
                for &crit in &criteria {
                    records.push(SweepRecord::new(task, &inst, &report, est, crit, None, None, Some(code)));
                }
                continue;
            }
        };
        for (crit, res) in per_criterion {
            match res {
                Ok(fit) => {
                    let beta_hat = DVector::from_vec(fit.coefs.clone());
                    let m = fit_metrics(&inst.beta_true, &beta_hat, &inst.support, &fit.support, r2_of(&fit, tss))?;
                    records.push(SweepRecord::new(task, &inst, &report, est, crit, Some(&fit), Some(&m), None));
                    coefs.push(CoefRow {
                        estimator: est.id().into(),
                        criterion: crit.id().into(),
                        coefs: fit.coefs,
                    });
                }
                Err(e) => {
                    log::debug!("{}: {est}/{crit}: {e}", task.id);
                    records.push(SweepRecord::new(task, &inst, &report, est, crit, None, None, Some(e.code())));
                }
            }
        }
    }
    Ok(TaskOutput { records, coefs, timing })
}
