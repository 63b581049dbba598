//! Model-selection criteria and selectors over candidate models.
//!
//! Every criterion is oriented so that smaller scores are better; held-out
//! R² from cross-validation is negated. Two scoring forms exist:
//!
//! * [`CriterionForm::Standard`] (default): Gaussian-likelihood AIC/BIC
//!   `n·ln(rss/n) + penalty`, the full Hansen–Yu gMDL, and the George–Foster
//!   conditional-maximum-likelihood empirical Bayes criterion on
//!   `ŷᵀŷ / σ̂²`.
//! * [`CriterionForm::Literal`]: the tabulated expressions evaluated as
//!   printed ([`score_gmdl`], [`score_empirical_bayes`] and the literal
//!   AIC/BIC), kept for compatibility studies.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::support_metrics;
use crate::solvers::nonzero_support;

/// Variance floor used for held-out R² on a constant fold.
pub const R2_VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
    Cv,
    Eb,
    Gmdl,
    Oracle,
}

impl Criterion {
    pub const SCORED: [Criterion; 5] = [
        Criterion::Aic,
        Criterion::Bic,
        Criterion::Cv,
        Criterion::Eb,
        Criterion::Gmdl,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
            Criterion::Cv => "cv",
            Criterion::Eb => "eb",
            Criterion::Gmdl => "gmdl",
            Criterion::Oracle => "oracle",
        }
    }

    pub fn from_id(s: &str) -> Result<Self> {
        match s {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            "cv" => Ok(Criterion::Cv),
            "eb" => Ok(Criterion::Eb),
            "gmdl" => Ok(Criterion::Gmdl),
            "oracle" => Ok(Criterion::Oracle),
            other => Err(Error::UnknownId {
                kind: "criterion",
                value: other.into(),
                valid: "aic, bic, cv, eb, gmdl, oracle".into(),
            }),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionForm {
    #[default]
    Standard,
    Literal,
}

/// A criterion value; `degenerate` marks sentinels (e.g. `rss = 0`) that are
/// never selected while an ordinary candidate exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub degenerate: bool,
}

impl Score {
    fn ok(value: f64) -> Self {
        Score {
            value,
            degenerate: !value.is_finite(),
        }
    }

    fn sentinel() -> Self {
        Score {
            value: f64::NEG_INFINITY,
            degenerate: true,
        }
    }
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

pub fn score_bic(rss: f64, n: usize, k_hat: usize) -> Score {
    if !(rss > 0.0) || k_hat >= n {
        return Score::sentinel();
    }
    let nf = n as f64;
    Score::ok(nf * (rss / nf).ln() + k_hat as f64 * nf.ln())
}

pub fn score_aic(rss: f64, n: usize, k_hat: usize) -> Score {
    if !(rss > 0.0) || k_hat >= n {
        return Score::sentinel();
    }
    let nf = n as f64;
    Score::ok(nf * (rss / nf).ln() + 2.0 * k_hat as f64)
}

/// `2·ln(rss) − ln(n)·k̂`, exactly as tabulated.
pub fn score_bic_literal(rss: f64, n: usize, k_hat: usize) -> Score {
    if !(rss > 0.0) {
        return Score::sentinel();
    }
    Score::ok(2.0 * rss.ln() - (n as f64).ln() * k_hat as f64)
}

/// `2·ln(rss) − 2·k̂`, exactly as tabulated.
pub fn score_aic_literal(rss: f64, k_hat: usize) -> Score {
    if !(rss > 0.0) {
        return Score::sentinel();
    }
    Score::ok(2.0 * rss.ln() - 2.0 * k_hat as f64)
}

/// Tabulated two-branch gMDL:
/// `(k̂/2)·ln((n−k̂)/k̂ · (yᵀy − rss)/rss) + ln n` if `R² > k̂/n`, otherwise
/// `(n/2)·ln(yᵀy/n) + ½·ln n`, with `R² = 1 − rss/yᵀy`.
pub fn score_gmdl(rss: f64, n: usize, k_hat: usize, yty: f64) -> Score {
    if !(rss > 0.0) || k_hat >= n || !(yty > 0.0) {
        return Score::sentinel();
    }
    let nf = n as f64;
    let k = k_hat as f64;
    let r2 = 1.0 - rss / yty;
    if k_hat > 0 && r2 > k / nf {
        Score::ok(0.5 * k * ((nf - k) / k * (yty - rss) / rss).ln() + nf.ln())
    } else {
        Score::ok(0.5 * nf * (yty / nf).ln() + 0.5 * nf.ln())
    }
}

/// Hansen–Yu gMDL: `(n/2)·ln S + (k̂/2)·ln F + ln n` with
/// `S = rss/(n−k̂)`, `F = (yᵀy − rss)/(k̂·S)` when `R² > k̂/n`; the null
/// branch is shared with [`score_gmdl`].
pub fn score_gmdl_hansen_yu(rss: f64, n: usize, k_hat: usize, yty: f64) -> Score {
    if !(rss > 0.0) || k_hat >= n || !(yty > 0.0) {
        return Score::sentinel();
    }
    let nf = n as f64;
    let k = k_hat as f64;
    let r2 = 1.0 - rss / yty;
    if k_hat > 0 && r2 > k / nf {
        let s = rss / (nf - k);
        let f = (yty - rss) / (k * s);
        Score::ok(0.5 * nf * s.ln() + 0.5 * k * f.ln() + nf.ln())
    } else {
        Score::ok(0.5 * nf * (yty / nf).ln() + 0.5 * nf.ln())
    }
}

/// Tabulated empirical Bayes score on a fitted-energy statistic `stat`
/// (`ŷᵀŷ` as printed):
/// `2·ln(rss) − {k̂ + k̂·ln(stat) − k̂ − 2H}` if `stat/k̂ > 1`, else
/// `2·ln(rss) − {stat − 2H}`, where `H = (p−k̂)ln(p−k̂) + k̂·ln k̂` and
/// `0·ln 0 = 0`.
pub fn score_empirical_bayes(rss: f64, k_hat: usize, p: usize, stat: f64) -> Score {
    if !(rss > 0.0) {
        return Score::sentinel();
    }
    let k = k_hat as f64;
    let h = xlogx((p - k_hat.min(p)) as f64) + xlogx(k);
    let penalty = if k_hat > 0 && stat / k > 1.0 {
        k + k * stat.ln() - k - 2.0 * h
    } else {
        stat - 2.0 * h
    };
    Score::ok(2.0 * rss.ln() - penalty)
}

/// George–Foster conditional maximum likelihood criterion, negated so that
/// smaller is better: `−stat + k̂(1 + ln⁺(stat/k̂)) − 2H`, where
/// `stat = ŷᵀŷ/σ̂²`.
pub fn score_eb_cml(k_hat: usize, p: usize, stat: f64) -> Score {
    let k = k_hat as f64;
    let h = xlogx((p - k_hat.min(p)) as f64) + xlogx(k);
    let log_plus = if k_hat > 0 && stat / k > 1.0 {
        (stat / k).ln()
    } else {
        0.0
    };
    Score::ok(-stat + k * (1.0 + log_plus) - 2.0 * h)
}

/// One model offered to a selector.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub lambda: Option<f64>,
    pub coefs: DVector<f64>,
    pub intercept: f64,
}

impl Candidate {
    pub fn support(&self) -> Vec<usize> {
        nonzero_support(&self.coefs)
    }

    /// `X·β + intercept`, touching only the support columns.
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let mut out = DVector::from_element(x.nrows(), self.intercept);
        for j in self.support() {
            out.axpy(self.coefs[j], &x.column(j), 1.0);
        }
        out
    }
}

/// Per-candidate quantities the criteria consume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateStats {
    pub rss: f64,
    pub k_hat: usize,
    /// `ŷᵀŷ` of the centered predictions.
    pub fitted_energy: f64,
}

pub fn candidate_stats(x: &DMatrix<f64>, y: &DVector<f64>, cand: &Candidate) -> CandidateStats {
    let pred = cand.predict(x);
    let rss = (y - &pred).norm_squared();
    let mean = pred.mean();
    CandidateStats {
        rss,
        k_hat: cand.support().len(),
        fitted_energy: pred.iter().map(|v| (v - mean).powi(2)).sum(),
    }
}

/// Data and settings shared by all candidates scored on one problem.
#[derive(Debug, Clone)]
pub struct SelectionContext<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: &'a DVector<f64>,
    pub form: CriterionForm,
    /// Noise variance estimate used by the empirical Bayes statistic.
    pub sigma2_hat: f64,
    /// Mean held-out R² per candidate, required for [`Criterion::Cv`].
    pub cv_r2: Option<Vec<f64>>,
}

impl<'a> SelectionContext<'a> {
    pub fn new(x: &'a DMatrix<f64>, y: &'a DVector<f64>, form: CriterionForm) -> Self {
        SelectionContext {
            x,
            y,
            form,
            sigma2_hat: full_model_sigma2(x, y),
            cv_r2: None,
        }
    }

    pub fn with_cv(mut self, cv_r2: Vec<f64>) -> Self {
        self.cv_r2 = Some(cv_r2);
        self
    }

    fn centered_yty(&self) -> f64 {
        let m = self.y.mean();
        self.y.iter().map(|v| (v - m).powi(2)).sum()
    }
}

/// Residual variance of the full OLS fit with intercept; falls back to the
/// response variance when `n ≤ p + 1` or the design is singular.
pub fn full_model_sigma2(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let (n, p) = x.shape();
    let ym = y.mean();
    let var_y = y.iter().map(|v| (v - ym).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    if n <= p + 1 {
        return var_y;
    }
    let mut xc = x.clone();
    for j in 0..p {
        let m = xc.column(j).mean();
        xc.column_mut(j).add_scalar_mut(-m);
    }
    let yc = y.add_scalar(-ym);
    let all: Vec<usize> = (0..p).collect();
    match crate::solvers::ols(&xc, &yc, &all) {
        Ok(b) => {
            let rss = (&yc - &xc * b).norm_squared();
            let s2 = rss / (n - p - 1) as f64;
            if s2 > 0.0 {
                s2
            } else {
                var_y
            }
        }
        Err(_) => var_y,
    }
}

pub fn score_stats(stats: &CandidateStats, criterion: Criterion, ctx: &SelectionContext<'_>) -> Result<Score> {
    let n = ctx.x.nrows();
    let p = ctx.x.ncols();
    let k = stats.k_hat;
    let rss = stats.rss;
    Ok(match (criterion, ctx.form) {
        (Criterion::Aic, CriterionForm::Standard) => score_aic(rss, n, k),
        (Criterion::Bic, CriterionForm::Standard) => score_bic(rss, n, k),
        (Criterion::Aic, CriterionForm::Literal) => score_aic_literal(rss, k),
        (Criterion::Bic, CriterionForm::Literal) => score_bic_literal(rss, n, k),
        (Criterion::Gmdl, CriterionForm::Standard) => score_gmdl_hansen_yu(rss, n, k, ctx.centered_yty()),
        (Criterion::Gmdl, CriterionForm::Literal) => score_gmdl(rss, n, k, ctx.centered_yty()),
        (Criterion::Eb, CriterionForm::Standard) => {
            if !(rss > 0.0) {
                Score::sentinel()
            } else {
                score_eb_cml(k, p, stats.fitted_energy / ctx.sigma2_hat)
            }
        }
        (Criterion::Eb, CriterionForm::Literal) => score_empirical_bayes(rss, k, p, stats.fitted_energy),
        (Criterion::Cv, _) | (Criterion::Oracle, _) => {
            return Err(Error::InvalidArgument(format!(
                "{criterion} is not a closed-form criterion"
            )))
        }
    })
}

pub fn score_candidates(cands: &[Candidate], criterion: Criterion, ctx: &SelectionContext<'_>) -> Result<Vec<Score>> {
    match criterion {
        Criterion::Cv => {
            let r2 = ctx
                .cv_r2
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("cv selection needs held-out R² scores".into()))?;
            if r2.len() != cands.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} cv scores for {} candidates",
                    r2.len(),
                    cands.len()
                )));
            }
            Ok(r2.iter().map(|&v| Score::ok(-v)).collect())
        }
        Criterion::Oracle => Err(Error::InvalidArgument("use oracle_select for the oracle".into())),
        _ => cands
            .iter()
            .map(|c| score_stats(&candidate_stats(ctx.x, ctx.y, c), criterion, ctx))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub estimator: String,
    pub criterion: Criterion,
    /// Chosen candidate index; `None` for aggregated estimates.
    pub index: Option<usize>,
    pub lambda: Option<f64>,
    pub support: Vec<usize>,
    pub coefs: Vec<f64>,
    pub intercept: f64,
    pub score: f64,
    pub rss: f64,
    pub k_hat: usize,
}

impl FitResult {
    pub fn from_candidate(
        estimator: &str,
        criterion: Criterion,
        index: Option<usize>,
        cand: &Candidate,
        score: f64,
        x: &DMatrix<f64>,
        y: &DVector<f64>,
    ) -> Self {
        let stats = candidate_stats(x, y, cand);
        let support = cand.support();
        FitResult {
            estimator: estimator.to_string(),
            criterion,
            index,
            lambda: cand.lambda,
            k_hat: support.len(),
            support,
            coefs: cand.coefs.iter().copied().collect(),
            intercept: cand.intercept,
            score,
            rss: stats.rss,
        }
    }

    pub fn coef_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.coefs.clone())
    }
}

/// Scores within this relative distance of the minimum count as tied.
/// Path points that are the same model up to solver rounding otherwise
/// compete on their last bits.
pub const SCORE_TIE_TOLERANCE: f64 = 1e-12;

/// Index of the best score: among candidates within
/// [`SCORE_TIE_TOLERANCE`] of the smallest value, the one with smaller k̂,
/// then smaller index. Degenerate scores are skipped.
pub fn argmin_with_ties(scores: &[Score], k_hats: &[usize]) -> Option<usize> {
    let best = scores
        .iter()
        .filter(|s| !s.degenerate)
        .map(|s| s.value)
        .min_by(f64::total_cmp)?;
    let cutoff = best + SCORE_TIE_TOLERANCE * best.abs().max(1.0);
    (0..scores.len())
        .filter(|&i| !scores[i].degenerate && scores[i].value <= cutoff)
        .min_by_key(|&i| (k_hats[i], i))
}

pub fn select(
    estimator: &str,
    cands: &[Candidate],
    criterion: Criterion,
    ctx: &SelectionContext<'_>,
) -> Result<FitResult> {
    if cands.is_empty() {
        return Err(Error::NoCandidate("empty candidate list".into()));
    }
    let scores = score_candidates(cands, criterion, ctx)?;
    let k_hats: Vec<usize> = cands.iter().map(|c| c.support().len()).collect();
    let best = argmin_with_ties(&scores, &k_hats)
        .ok_or_else(|| Error::NoCandidate(format!("all {} candidates degenerate under {criterion}", cands.len())))?;
    Ok(FitResult::from_candidate(
        estimator,
        criterion,
        Some(best),
        &cands[best],
        scores[best].value,
        ctx.x,
        ctx.y,
    ))
}

/// Picks the candidate of maximum selection accuracy against `truth`.
pub fn oracle_select(
    estimator: &str,
    cands: &[Candidate],
    truth: &[usize],
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<FitResult> {
    if cands.is_empty() {
        return Err(Error::NoCandidate("empty candidate list".into()));
    }
    let p = x.ncols();
    let mut best: Option<(usize, f64, usize)> = None;
    for (i, c) in cands.iter().enumerate() {
        let s = c.support();
        let acc = support_metrics(truth, &s, p)?.accuracy;
        let better = match best {
            None => true,
            Some((_, ba, bk)) => acc > ba || (acc == ba && s.len() < bk),
        };
        if better {
            best = Some((i, acc, s.len()));
        }
    }
    let (i, acc, _) = best.expect("nonempty");
    Ok(FitResult::from_candidate(estimator, Criterion::Oracle, Some(i), &cands[i], acc, x, y))
}

/// Deterministic fold assignment: seeded shuffle, then contiguous chunks.
pub fn cv_folds(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || n < folds {
        return Err(Error::InvalidArgument(format!("cannot split {n} rows into {folds} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        let mut fold = idx[start..start + len].to_vec();
        fold.sort_unstable();
        out.push(fold);
        start += len;
    }
    Ok(out)
}

pub fn held_out_r2(y: &DVector<f64>, pred: &DVector<f64>) -> f64 {
    let m = y.mean();
    let tss = y.iter().map(|v| (v - m).powi(2)).sum::<f64>().max(R2_VARIANCE_FLOOR);
    1.0 - (y - pred).norm_squared() / tss
}

/// Mean held-out R² for every candidate of a fixed-grid refitter.
///
/// `refit` is called once per fold on the training rows and must return the
/// same number of candidates as every other fold (one per grid point).
pub fn cross_validate<F>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    folds: usize,
    seed: u64,
    refit: F,
) -> Result<Vec<f64>>
where
    F: Fn(&DMatrix<f64>, &DVector<f64>) -> Result<Vec<Candidate>>,
{
    let n = x.nrows();
    let parts = cv_folds(n, folds, seed)?;
    let mut total: Option<Vec<f64>> = None;
    for test in &parts {
        let mut in_test = vec![false; n];
        for &i in test {
            in_test[i] = true;
        }
        let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
        let x_tr = crate::linalg::select_rows(x, &train);
        let y_tr = crate::linalg::select_entries(y, &train);
        let x_te = crate::linalg::select_rows(x, test);
        let y_te = crate::linalg::select_entries(y, test);
        let cands = refit(&x_tr, &y_tr)?;
        let r2: Vec<f64> = cands.iter().map(|c| held_out_r2(&y_te, &c.predict(&x_te))).collect();
        match total.as_mut() {
            None => total = Some(r2),
            Some(t) => {
                if t.len() != r2.len() {
                    return Err(Error::InvalidArgument("refitter changed the candidate count".into()));
                }
                for (a, b) in t.iter_mut().zip(r2) {
                    *a += b;
                }
            }
        }
    }
    let mut total = total.expect("at least two folds");
    for v in &mut total {
        *v /= folds as f64;
    }
    Ok(total)
}

/// Mean held-out R² of the candidate at `index` (five folds).
pub fn score_cv<F>(x: &DMatrix<f64>, y: &DVector<f64>, refit: F, index: usize, seed: u64) -> Result<f64>
where
    F: Fn(&DMatrix<f64>, &DVector<f64>) -> Result<Vec<Candidate>>,
{
    let all = cross_validate(x, y, 5, seed, refit)?;
    all.get(index)
        .copied()
        .ok_or_else(|| Error::InvalidArgument(format!("candidate index {index} out of range")))
}
