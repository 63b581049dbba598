//! Support-recovery and estimation metrics for a single fit, and bias/variance
//! summaries across repetitions.
//!
//! Undefined quantities (a magnitude ratio with an empty index set, FPR when
//! the true support is everything) are reported as `NaN`, never as zero.

use std::collections::BTreeSet;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportMetrics {
    pub accuracy: f64,
    pub fnr: f64,
    pub fpr: f64,
    /// `|S| = p`: FPR has no denominator and is reported as 0.
    pub fpr_degenerate: bool,
}

pub fn support_metrics(truth: &[usize], estimate: &[usize], p: usize) -> Result<SupportMetrics> {
    if truth.is_empty() {
        return Err(Error::InvalidArgument("true support must be nonempty".into()));
    }
    if truth.iter().chain(estimate).any(|&i| i >= p) {
        return Err(Error::InvalidArgument("support index ≥ p".into()));
    }
    let s: BTreeSet<usize> = truth.iter().copied().collect();
    let sh: BTreeSet<usize> = estimate.iter().copied().collect();
    let false_neg = s.difference(&sh).count();
    let false_pos = sh.difference(&s).count();
    // one division of integers, so the result is the correctly rounded ratio
    let total = s.len() + sh.len();
    let accuracy = (total - false_neg - false_pos) as f64 / total as f64;
    let fnr = false_neg as f64 / s.len() as f64;
    let negatives = p - s.len();
    let (fpr, fpr_degenerate) = if negatives == 0 {
        (0.0, true)
    } else {
        (false_pos as f64 / negatives as f64, false)
    };
    Ok(SupportMetrics {
        accuracy,
        fnr,
        fpr,
        fpr_degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeMetrics {
    /// Mean |β| over missed support elements, relative to the mean over S.
    pub fn_mag_ratio: f64,
    /// Mean |β̂| over false positives, relative to the mean |β| over S.
    pub fp_mag_ratio: f64,
}

pub fn magnitude_metrics(
    beta_true: &DVector<f64>,
    beta_hat: &DVector<f64>,
    truth: &[usize],
    estimate: &[usize],
) -> Result<MagnitudeMetrics> {
    if truth.is_empty() {
        return Err(Error::InvalidArgument("true support must be nonempty".into()));
    }
    let s: BTreeSet<usize> = truth.iter().copied().collect();
    let sh: BTreeSet<usize> = estimate.iter().copied().collect();
    let signal = s.iter().map(|&i| beta_true[i].abs()).sum::<f64>() / s.len() as f64;
    let mean_of = |vals: Vec<f64>| {
        if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64 / signal
        }
    };
    Ok(MagnitudeMetrics {
        fn_mag_ratio: mean_of(s.difference(&sh).map(|&i| beta_true[i].abs()).collect()),
        fp_mag_ratio: mean_of(sh.difference(&s).map(|&i| beta_hat[i].abs()).collect()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub selection_accuracy: f64,
    pub fnr: f64,
    pub fpr: f64,
    pub fn_mag_ratio: f64,
    pub fp_mag_ratio: f64,
    /// Mean signed error over the true support for this single fit.
    pub bias: f64,
    pub r2: f64,
    pub k_hat: usize,
    pub k: usize,
}

pub fn fit_metrics(
    beta_true: &DVector<f64>,
    beta_hat: &DVector<f64>,
    truth: &[usize],
    estimate: &[usize],
    r2: f64,
) -> Result<FitMetrics> {
    let p = beta_true.len();
    let sm = support_metrics(truth, estimate, p)?;
    let mm = magnitude_metrics(beta_true, beta_hat, truth, estimate)?;
    let bias = truth.iter().map(|&i| beta_hat[i] - beta_true[i]).sum::<f64>() / truth.len() as f64;
    Ok(FitMetrics {
        selection_accuracy: sm.accuracy,
        fnr: sm.fnr,
        fpr: sm.fpr,
        fn_mag_ratio: mm.fn_mag_ratio,
        fp_mag_ratio: mm.fp_mag_ratio,
        bias,
        r2,
        k_hat: estimate.len(),
        k: truth.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasVariance {
    /// `E[β̂] − β`, per coordinate.
    pub bias_vector: Vec<f64>,
    /// `E[(β̂ − E[β̂])²]`, per coordinate.
    pub variance_vector: Vec<f64>,
    /// Mean of the bias vector over the true support.
    pub bias: f64,
    /// Mean of |bias| over the true support.
    pub abs_bias: f64,
    /// Mean of the variance vector over the true support.
    pub variance: f64,
    pub repetitions: usize,
}

pub fn bias_variance(fits: &[DVector<f64>], beta_true: &DVector<f64>, truth: &[usize]) -> Result<BiasVariance> {
    let r = fits.len();
    if r < 2 {
        return Err(Error::InvalidArgument(format!("need ≥ 2 repetitions, got {r}")));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("true support must be nonempty".into()));
    }
    let p = beta_true.len();
    if fits.iter().any(|f| f.len() != p) {
        return Err(Error::InvalidArgument("fit length differs from β".into()));
    }
    let rf = r as f64;
    let mean: Vec<f64> = (0..p).map(|j| fits.iter().map(|f| f[j]).sum::<f64>() / rf).collect();
    let bias_vector: Vec<f64> = (0..p).map(|j| mean[j] - beta_true[j]).collect();
    let variance_vector: Vec<f64> = (0..p)
        .map(|j| fits.iter().map(|f| (f[j] - mean[j]).powi(2)).sum::<f64>() / rf)
        .collect();
    let k = truth.len() as f64;
    Ok(BiasVariance {
        bias: truth.iter().map(|&j| bias_vector[j]).sum::<f64>() / k,
        abs_bias: truth.iter().map(|&j| bias_vector[j].abs()).sum::<f64>() / k,
        variance: truth.iter().map(|&j| variance_vector[j]).sum::<f64>() / k,
        bias_vector,
        variance_vector,
        repetitions: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn exact_recovery() {
        let m = support_metrics(&[1, 4], &[4, 1], 6).unwrap();
        assert_eq!((m.accuracy, m.fnr, m.fpr), (1.0, 0.0, 0.0));
    }

    #[test]
    fn empty_estimate() {
        let m = support_metrics(&[0, 1, 2], &[], 10).unwrap();
        assert_eq!((m.accuracy, m.fnr, m.fpr), (0.0, 1.0, 0.0));
    }

    #[test]
    fn hand_fixture() {
        let m = support_metrics(&[0, 1, 2], &[1, 2, 3, 4], 10).unwrap();
        assert_eq!(m.accuracy, 4.0 / 7.0);
        assert_eq!(m.fnr, 1.0 / 3.0);
        assert_eq!(m.fpr, 2.0 / 7.0);
    }

    #[test]
    fn full_support_fpr_flagged() {
        let m = support_metrics(&[0, 1, 2], &[0, 1], 3).unwrap();
        assert!(m.fpr_degenerate);
        assert_eq!(m.fpr, 0.0);
        assert!(support_metrics(&[], &[0], 3).is_err());
    }

    #[test]
    fn magnitude_sentinels_and_ratios() {
        let beta = DVector::from_vec(vec![1.0, 2.0, 3.0, 0.0, 0.0]);
        let m = magnitude_metrics(&beta, &beta, &[0, 1, 2], &[0, 1, 2]).unwrap();
        assert!(m.fn_mag_ratio.is_nan() && m.fp_mag_ratio.is_nan());

        let hat = DVector::from_vec(vec![0.0, 2.0, 3.0, 0.0, 0.0]);
        let m = magnitude_metrics(&beta, &hat, &[0, 1, 2], &[1, 2]).unwrap();
        assert!(m.fn_mag_ratio < 1.0);
        assert!((m.fn_mag_ratio - 0.5).abs() < 1e-15);

        let inflated = DVector::from_vec(vec![1.0, 2.0, 3.0, 12.0, 0.0]);
        let m = magnitude_metrics(&beta, &inflated, &[0, 1, 2], &[0, 1, 2, 3]).unwrap();
        assert!((m.fp_mag_ratio - 6.0).abs() < 1e-15);
    }

    #[test]
    fn bias_variance_trivial_cases() {
        let beta = DVector::from_vec(vec![1.0, 0.0, -2.0]);
        let same = vec![beta.clone(); 4];
        let bv = bias_variance(&same, &beta, &[0, 2]).unwrap();
        assert_eq!(bv.bias, 0.0);
        assert_eq!(bv.variance, 0.0);
        let shifted: Vec<_> = (0..3).map(|_| beta.add_scalar(0.5)).collect();
        let bv = bias_variance(&shifted, &beta, &[0, 2]).unwrap();
        assert_eq!(bv.variance, 0.0);
        assert!((bv.bias - 0.5).abs() < 1e-15);
        assert!(bias_variance(&same[..1], &beta, &[0]).is_err());
    }

    #[test]
    fn monte_carlo_variance() {
        let beta = DVector::from_vec(vec![1.0, 2.0, 0.0, 3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let fits: Vec<_> = (0..1000)
            .map(|_| DVector::from_fn(4, |j, _| beta[j] + noise.sample(&mut rng)))
            .collect();
        let bv = bias_variance(&fits, &beta, &[0, 1, 3]).unwrap();
        assert!((bv.variance - 0.01).abs() < 0.001, "{}", bv.variance);
    }

    proptest! {
        #[test]
        fn accuracy_extremes_and_decomposition(
            truth in proptest::collection::btree_set(0usize..20, 1..10),
            est in proptest::collection::btree_set(0usize..20, 0..12),
        ) {
            let t: Vec<usize> = truth.iter().copied().collect();
            let e: Vec<usize> = est.iter().copied().collect();
            let m = support_metrics(&t, &e, 20).unwrap();
            prop_assert_eq!(m.accuracy == 1.0, truth == est);
            prop_assert_eq!(m.accuracy == 0.0, truth.is_disjoint(&est));
            let missed = truth.difference(&est).count();
            let hit = truth.intersection(&est).count();
            prop_assert_eq!(missed + hit, truth.len());
        }

        #[test]
        fn permutation_invariance(
            truth in proptest::collection::btree_set(0usize..15, 1..8),
            est in proptest::collection::btree_set(0usize..15, 0..8),
            shift in 0usize..15,
        ) {
            let perm = |i: usize| (i * 7 + shift) % 15;
            let t: Vec<usize> = truth.iter().copied().collect();
            let e: Vec<usize> = est.iter().copied().collect();
            let tp: Vec<usize> = t.iter().map(|&i| perm(i)).collect();
            let ep: Vec<usize> = e.iter().map(|&i| perm(i)).collect();
            prop_assert_eq!(support_metrics(&t, &e, 15).unwrap(), support_metrics(&tp, &ep, 15).unwrap());
        }

        #[test]
        fn growing_estimate_monotone(
            truth in proptest::collection::btree_set(0usize..20, 1..10),
            order in Just((0usize..20).collect::<Vec<_>>()).prop_shuffle(),
        ) {
            let t: Vec<usize> = truth.iter().copied().collect();
            let mut est = Vec::new();
            let mut prev = support_metrics(&t, &est, 20).unwrap();
            for &i in &order {
                est.push(i);
                let m = support_metrics(&t, &est, 20).unwrap();
                prop_assert!(m.fpr >= prev.fpr);
                prop_assert!(m.fnr <= prev.fnr);
                prev = m;
            }
        }
    }
}
