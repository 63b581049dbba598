//! Union-of-Intersections lasso: supports are intersected across bootstrap
//! lasso fits at each regularization strength, then every candidate support
//! is refit by OLS on estimation bootstraps and the per-bootstrap winners are
//! bagged.
//!
//! The per-bootstrap winner is picked with the requested criterion: held-out
//! R² on out-of-bootstrap rows for [`Criterion::Cv`], otherwise the
//! information criterion evaluated on the bootstrap rows.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::selection::{
    argmin_with_ties, full_model_sigma2, held_out_r2, score_stats, Candidate, CandidateStats, Criterion,
    CriterionForm, Score, SelectionContext,
};
use crate::solvers::{fit_path_prepared, lambda_grid, nonzero_support, ols_from_gram, PathFamily, PathOptions, Prepared};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Median,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UoiConfig {
    pub selection_bootstraps: usize,
    pub estimation_bootstraps: usize,
    pub selection_frac: f64,
    pub aggregation: Aggregation,
    pub path: PathOptions,
    pub form: CriterionForm,
    pub seed: u64,
}

impl Default for UoiConfig {
    fn default() -> Self {
        UoiConfig {
            selection_bootstraps: 20,
            estimation_bootstraps: 20,
            selection_frac: 0.9,
            aggregation: Aggregation::Median,
            path: PathOptions::default(),
            form: CriterionForm::Standard,
            seed: 0,
        }
    }
}

impl UoiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.selection_bootstraps < 1 || self.estimation_bootstraps < 1 {
            return Err(Error::InvalidArgument("bootstrap counts must be positive".into()));
        }
        if !(self.selection_frac > 0.0 && self.selection_frac <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "selection_frac {} outside (0, 1]",
                self.selection_frac
            )));
        }
        Ok(())
    }
}

/// Distinct candidate supports, in order of first appearance along the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportFamily {
    pub lambdas: Vec<f64>,
    pub supports: Vec<Vec<usize>>,
}

// Each bootstrap draws from its own stream so results do not depend on the
// order bootstraps are evaluated in.
fn bootstrap_rows(seed: u64, stream: u64, n: usize, m: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..m).map(|_| rng.random_range(0..n)).collect()
}

const ESTIMATION_STREAM: u64 = 1 << 32;

pub fn uoi_supports(x: &DMatrix<f64>, y: &DVector<f64>, cfg: &UoiConfig) -> Result<SupportFamily> {
    cfg.validate()?;
    let n = x.nrows();
    let m = (cfg.selection_frac * n as f64).round() as usize;
    if m < 2 {
        return Err(Error::InvalidArgument(format!("{n} rows too few for selection_frac {}", cfg.selection_frac)));
    }
    let full = Prepared::new(x, y, cfg.path.standardize)?;
    let lambdas = lambda_grid(full.lambda_max(&PathFamily::Lasso), cfg.path.n_lambdas, cfg.path.lambda_min_ratio);
    let p = x.ncols();
    let mut inter: Vec<Vec<bool>> = vec![vec![true; p]; lambdas.len()];
    for b in 0..cfg.selection_bootstraps {
        let rows = bootstrap_rows(cfg.seed, b as u64, n, m);
        let xb = linalg::select_rows(x, &rows);
        let yb = linalg::select_entries(y, &rows);
        let prep = Prepared::new(&xb, &yb, cfg.path.standardize)?;
        let path = fit_path_prepared(&prep, PathFamily::Lasso, Some(&lambdas), &cfg.path)?;
        for (mask, coefs) in inter.iter_mut().zip(&path.coefs) {
            for (j, keep) in mask.iter_mut().enumerate() {
                *keep &= coefs[j] != 0.0;
            }
        }
    }
    let mut supports: Vec<Vec<usize>> = Vec::new();
    for mask in &inter {
        let s: Vec<usize> = (0..p).filter(|&j| mask[j]).collect();
        if !supports.contains(&s) {
            supports.push(s);
        }
    }
    Ok(SupportFamily { lambdas, supports })
}

/// Estimates produced by one pass over the estimation bootstraps.
#[derive(Debug)]
pub struct UoiEstimates {
    /// Aggregated winner per requested criterion.
    pub by_criterion: Vec<(Criterion, Result<Candidate>)>,
    /// Bagged OLS estimate of every candidate support (empty when no
    /// bootstrap could fit it).
    pub per_support: Vec<Option<Candidate>>,
    pub bootstraps_used: Vec<usize>,
}

fn aggregate(values: &mut [f64], how: Aggregation) -> f64 {
    match how {
        Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Aggregation::Median => {
            values.sort_unstable_by(f64::total_cmp);
            let m = values.len();
            if m % 2 == 1 {
                values[m / 2]
            } else {
                0.5 * (values[m / 2 - 1] + values[m / 2])
            }
        }
    }
}

fn aggregate_fits(fits: &[&Candidate], p: usize, how: Aggregation) -> Candidate {
    let mut buf = vec![0.0; fits.len()];
    let coefs = DVector::from_fn(p, |j, _| {
        for (slot, f) in buf.iter_mut().zip(fits) {
            *slot = f.coefs[j];
        }
        aggregate(&mut buf, how)
    });
    for (slot, f) in buf.iter_mut().zip(fits) {
        *slot = f.intercept;
    }
    Candidate {
        lambda: None,
        coefs,
        intercept: aggregate(&mut buf, how),
    }
}

/// Fits every support on every estimation bootstrap and bags the winners of
/// each criterion.
pub fn uoi_estimate_all(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    supports: &[Vec<usize>],
    cfg: &UoiConfig,
    criteria: &[Criterion],
) -> Result<UoiEstimates> {
    cfg.validate()?;
    if supports.is_empty() {
        return Err(Error::NoCandidate("empty support family".into()));
    }
    if criteria.contains(&Criterion::Oracle) {
        return Err(Error::InvalidArgument("the oracle is applied to the bagged supports".into()));
    }
    let (n, p) = x.shape();
    let mut winners: Vec<Vec<Candidate>> = vec![Vec::new(); criteria.len()];
    let mut per_support_fits: Vec<Vec<Candidate>> = vec![Vec::new(); supports.len()];

    for b in 0..cfg.estimation_bootstraps {
        let rows = bootstrap_rows(cfg.seed, ESTIMATION_STREAM + b as u64, n, n);
        let mut drawn = vec![false; n];
        for &r in &rows {
            drawn[r] = true;
        }
        let oob: Vec<usize> = (0..n).filter(|&i| !drawn[i]).collect();
        let xb = linalg::select_rows(x, &rows);
        let yb = linalg::select_entries(y, &rows);
        let x_mean: Vec<f64> = (0..p).map(|j| xb.column(j).mean()).collect();
        let y_mean = yb.mean();
        let mut xc = xb.clone();
        for j in 0..p {
            xc.column_mut(j).add_scalar_mut(-x_mean[j]);
        }
        let yc = yb.add_scalar(-y_mean);
        let gram = xc.tr_mul(&xc);
        let xty = xc.tr_mul(&yc);
        let yty = yc.norm_squared();

        let mut fits: Vec<Option<(Candidate, CandidateStats)>> = Vec::with_capacity(supports.len());
        for (s_idx, s) in supports.iter().enumerate() {
            match ols_from_gram(&gram, &xty, s) {
                Ok(beta) => {
                    let g_beta = &gram * &beta;
                    let energy = beta.dot(&g_beta);
                    let rss = (yty - 2.0 * beta.dot(&xty) + energy).max(0.0);
                    let intercept = y_mean - (0..p).map(|j| beta[j] * x_mean[j]).sum::<f64>();
                    let cand = Candidate {
                        lambda: None,
                        coefs: beta,
                        intercept,
                    };
                    per_support_fits[s_idx].push(cand.clone());
                    let stats = CandidateStats {
                        rss,
                        k_hat: nonzero_support(&cand.coefs).len(),
                        fitted_energy: energy,
                    };
                    fits.push(Some((cand, stats)));
                }
                Err(Error::RankDeficient { .. }) => fits.push(None),
                Err(e) => return Err(e),
            }
        }
        if fits.iter().all(Option::is_none) {
            log::debug!("estimation bootstrap {b} has no usable support");
            continue;
        }
        let k_hats: Vec<usize> = fits.iter().map(|f| f.as_ref().map_or(0, |(_, s)| s.k_hat)).collect();
        let sigma2_hat = if criteria.contains(&Criterion::Eb) {
            full_model_sigma2(&xb, &yb)
        } else {
            1.0
        };
        let ctx = SelectionContext {
            x: &xb,
            y: &yb,
            form: cfg.form,
            sigma2_hat,
            cv_r2: None,
        };
        let x_oob = linalg::select_rows(x, &oob);
        let y_oob = linalg::select_entries(y, &oob);
        for (c_idx, &crit) in criteria.iter().enumerate() {
            let scores: Vec<Score> = fits
                .iter()
                .map(|f| -> Result<Score> {
                    Ok(match f {
                        None => Score {
                            value: f64::INFINITY,
                            degenerate: true,
                        },
                        Some((cand, stats)) => {
                            if crit == Criterion::Cv {
                                if oob.is_empty() {
                                    Score {
                                        value: f64::INFINITY,
                                        degenerate: true,
                                    }
                                } else {
                                    Score {
                                        value: -held_out_r2(&y_oob, &cand.predict(&x_oob)),
                                        degenerate: false,
                                    }
                                }
                            } else {
                                score_stats(stats, crit, &ctx)?
                            }
                        }
                    })
                })
                .collect::<Result<_>>()?;
            if let Some(best) = argmin_with_ties(&scores, &k_hats) {
                winners[c_idx].push(fits[best].as_ref().expect("scored fit").0.clone());
            }
        }
    }

    let by_criterion = criteria
        .iter()
        .zip(&winners)
        .map(|(&crit, w)| {
            let res = if w.is_empty() {
                Err(Error::NoCandidate(format!("every estimation bootstrap skipped under {crit}")))
            } else {
                let refs: Vec<&Candidate> = w.iter().collect();
                Ok(aggregate_fits(&refs, p, cfg.aggregation))
            };
            (crit, res)
        })
        .collect();
    let per_support = per_support_fits
        .iter()
        .map(|fits| {
            if fits.is_empty() {
                None
            } else {
                let refs: Vec<&Candidate> = fits.iter().collect();
                Some(aggregate_fits(&refs, p, cfg.aggregation))
            }
        })
        .collect();
    Ok(UoiEstimates {
        by_criterion,
        per_support,
        bootstraps_used: winners.iter().map(Vec::len).collect(),
    })
}

/// Bagged estimate for a single criterion.
pub fn uoi_estimate(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    supports: &[Vec<usize>],
    cfg: &UoiConfig,
    criterion: Criterion,
) -> Result<Candidate> {
    let mut est = uoi_estimate_all(x, y, supports, cfg, &[criterion])?;
    est.by_criterion.remove(0).1
}
