//! The five benchmarked estimators and the glue that turns one fitted
//! estimator into a [`FitResult`] per selection criterion.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::{
    candidate_stats, cross_validate, oracle_select, score_stats, select, Candidate, Criterion, CriterionForm,
    FitResult, SelectionContext,
};
use crate::solvers::{fit_path_prepared, PathFamily, PathOptions, Prepared};
use crate::uoi::{uoi_estimate_all, uoi_supports, UoiConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Lasso,
    Enet,
    Scad,
    Mcp,
    Uoi,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::Lasso,
        Estimator::Enet,
        Estimator::Scad,
        Estimator::Mcp,
        Estimator::Uoi,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Estimator::Lasso => "lasso",
            Estimator::Enet => "enet",
            Estimator::Scad => "scad",
            Estimator::Mcp => "mcp",
            Estimator::Uoi => "uoi",
        }
    }

    pub fn from_id(s: &str) -> Result<Self> {
        Estimator::ALL
            .iter()
            .copied()
            .find(|e| e.id() == s)
            .ok_or_else(|| Error::UnknownId {
                kind: "estimator",
                value: s.into(),
                valid: "lasso, enet, scad, mcp, uoi".into(),
            })
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorSettings {
    pub path: PathOptions,
    /// One elastic net path per mixing value; candidates are concatenated.
    pub enet_mixings: Vec<f64>,
    pub scad_gamma: f64,
    pub mcp_gamma: f64,
    pub cv_folds: usize,
    pub criterion_form: CriterionForm,
    pub uoi: UoiConfig,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        EstimatorSettings {
            path: PathOptions::default(),
            enet_mixings: vec![0.25, 0.5, 0.75],
            scad_gamma: crate::solvers::penalty::DEFAULT_GAMMA,
            mcp_gamma: crate::solvers::penalty::DEFAULT_GAMMA,
            cv_folds: 5,
            criterion_form: CriterionForm::Standard,
            uoi: UoiConfig::default(),
        }
    }
}

impl EstimatorSettings {
    pub fn families(&self, est: Estimator) -> Vec<PathFamily> {
        match est {
            Estimator::Lasso | Estimator::Uoi => vec![PathFamily::Lasso],
            Estimator::Enet => self.enet_mixings.iter().map(|&mixing| PathFamily::Enet { mixing }).collect(),
            Estimator::Scad => vec![PathFamily::Scad { gamma: self.scad_gamma }],
            Estimator::Mcp => vec![PathFamily::Mcp { gamma: self.mcp_gamma }],
        }
    }
}

/// Candidates along every path of `est`, plus the λ grids used. Passing
/// `grids` pins the grids (as for cross-validation refits).
pub fn path_candidates(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    est: Estimator,
    settings: &EstimatorSettings,
    grids: Option<&[Vec<f64>]>,
) -> Result<(Vec<Candidate>, Vec<Vec<f64>>)> {
    let families = settings.families(est);
    if families.is_empty() {
        return Err(Error::InvalidArgument(format!("{est} has no path configured")));
    }
    let prep = Prepared::new(x, y, settings.path.standardize)?;
    let mut cands = Vec::new();
    let mut used = Vec::with_capacity(families.len());
    for (i, fam) in families.into_iter().enumerate() {
        let grid = grids.map(|g| g[i].as_slice());
        let path = fit_path_prepared(&prep, fam, grid, &settings.path)?;
        if path.converged.iter().any(|c| !c) {
            log::debug!("{est}: {} path points hit max_iter", path.converged.iter().filter(|c| !**c).count());
        }
        for j in 0..path.len() {
            cands.push(Candidate {
                lambda: Some(path.lambdas[j]),
                coefs: path.coefs[j].clone(),
                intercept: path.intercepts[j],
            });
        }
        used.push(path.lambdas);
    }
    Ok((cands, used))
}

/// Fits `est` once and returns one result per requested criterion.
///
/// `truth` is required when [`Criterion::Oracle`] is requested. `seed`
/// drives cross-validation folds and UoI bootstraps.
pub fn fit_estimator(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    truth: Option<&[usize]>,
    est: Estimator,
    criteria: &[Criterion],
    settings: &EstimatorSettings,
    seed: u64,
) -> Result<Vec<(Criterion, Result<FitResult>)>> {
    if criteria.contains(&Criterion::Oracle) && truth.is_none() {
        return Err(Error::MissingBaseline("oracle selection needs the true support".into()));
    }
    match est {
        Estimator::Uoi => fit_uoi(x, y, truth, criteria, settings, seed),
        _ => fit_path_estimator(x, y, truth, est, criteria, settings, seed),
    }
}

fn fit_path_estimator(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    truth: Option<&[usize]>,
    est: Estimator,
    criteria: &[Criterion],
    settings: &EstimatorSettings,
    seed: u64,
) -> Result<Vec<(Criterion, Result<FitResult>)>> {
    let (cands, grids) = path_candidates(x, y, est, settings, None)?;
    let mut ctx = SelectionContext::new(x, y, settings.criterion_form);
    let mut cv_error = None;
    if criteria.contains(&Criterion::Cv) {
        let refit = |xt: &DMatrix<f64>, yt: &DVector<f64>| {
            path_candidates(xt, yt, est, settings, Some(&grids)).map(|(c, _)| c)
        };
        match cross_validate(x, y, settings.cv_folds, seed, refit) {
            Ok(r2) => ctx = ctx.with_cv(r2),
            Err(e) => cv_error = Some(e),
        }
    }
    let id = est.id();
    Ok(criteria
        .iter()
        .map(|&crit| {
            let res = match crit {
                Criterion::Oracle => oracle_select(id, &cands, truth.expect("checked"), x, y),
                Criterion::Cv if cv_error.is_some() => Err(Error::NoCandidate(format!(
                    "cross-validation failed: {}",
                    cv_error.as_ref().expect("checked")
                ))),
                _ => select(id, &cands, crit, &ctx),
            };
            (crit, res)
        })
        .collect())
}

fn fit_uoi(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    truth: Option<&[usize]>,
    criteria: &[Criterion],
    settings: &EstimatorSettings,
    seed: u64,
) -> Result<Vec<(Criterion, Result<FitResult>)>> {
    let cfg = UoiConfig {
        seed,
        path: settings.path.clone(),
        form: settings.criterion_form,
        ..settings.uoi.clone()
    };
    let family = uoi_supports(x, y, &cfg)?;
    let scored: Vec<Criterion> = criteria.iter().copied().filter(|c| *c != Criterion::Oracle).collect();
    let est = uoi_estimate_all(x, y, &family.supports, &cfg, &scored)?;
    let ctx = SelectionContext::new(x, y, settings.criterion_form);
    let mut out = Vec::with_capacity(criteria.len());
    let mut aggregates = Vec::new();
    for (crit, res) in est.by_criterion {
        let res = res.and_then(|cand| {
            let score = if crit == Criterion::Cv {
                f64::NAN
            } else {
                score_stats(&candidate_stats(x, y, &cand), crit, &ctx)?.value
            };
            aggregates.push(cand.clone());
            Ok(FitResult::from_candidate("uoi", crit, None, &cand, score, x, y))
        });
        out.push((crit, res));
    }
    if criteria.contains(&Criterion::Oracle) {
        // the oracle sees every bagged support plus every criterion's
        // aggregate, so it can never do worse than a criterion
        let mut pool: Vec<Candidate> = est.per_support.into_iter().flatten().collect();
        pool.extend(aggregates);
        let res = if pool.is_empty() {
            Err(Error::NoCandidate("no bagged support available".into()))
        } else {
            oracle_select("uoi", &pool, truth.expect("checked"), x, y).map(|mut r| {
                r.index = None;
                r
            })
        };
        out.push((Criterion::Oracle, res));
    }
    // restore the caller's criterion order
    out.sort_by_key(|(c, _)| criteria.iter().position(|k| k == c));
    Ok(out)
}
