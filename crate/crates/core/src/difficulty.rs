//! Support-recovery difficulty: the restricted eigenvalue ρ(Σ, k), its
//! precision-matrix lower bound, the signal-to-difficulty ratio α, the
//! irrepresentable constant η and the sample-size threshold g.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg;

/// Largest number of size-k subsets `rho_exact` will enumerate.
pub const ENUMERATION_GUARD: f64 = 1e6;

/// Half-width of the log α bands used for regime labels.
pub const REGIME_HALF_WIDTH: f64 = 1.25;

/// Characteristic log α of the false-negative transition per β distribution.
pub const REGIME_CENTERS: [(&str, f64); 3] = [
    ("gaussian-transition", -7.5),
    ("inverse-exponential-transition", -10.0),
    ("uniform-transition", -15.0),
];

/// Schur complement of `Σ_{S∪T}` with respect to `Σ_TT`, on `S∖T`.
pub fn gamma_matrix(sigma: &DMatrix<f64>, support: &[usize], other: &[usize]) -> Result<DMatrix<f64>> {
    if support.len() != other.len() {
        return Err(Error::InvalidArgument("S and T must have equal size".into()));
    }
    let p = sigma.nrows();
    if support.iter().chain(other).any(|&j| j >= p) {
        return Err(Error::InvalidArgument("index out of range".into()));
    }
    let diff: Vec<usize> = support.iter().copied().filter(|j| !other.contains(j)).collect();
    if diff.is_empty() {
        return Err(Error::InvalidArgument("T must differ from S".into()));
    }
    let s_tt = linalg::submatrix(sigma, other, other);
    let inv_tt = linalg::spd_inverse(&s_tt).map_err(|_| Error::Singular("Σ_TT".into()))?;
    let s_dd = linalg::submatrix(sigma, &diff, &diff);
    let s_dt = linalg::submatrix(sigma, &diff, other);
    Ok(s_dd - &s_dt * inv_tt * s_dt.transpose())
}

pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Visits every sorted k-subset of `0..p` in lexicographic order.
pub fn for_each_subset<F: FnMut(&[usize])>(p: usize, k: usize, mut visit: F) {
    if k > p {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < p - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return;
            }
        }
    }
}

fn check_support(p: usize, support: &[usize]) -> Result<()> {
    if support.is_empty() {
        return Err(Error::InvalidArgument("support must be nonempty".into()));
    }
    if support.iter().any(|&j| j >= p) {
        return Err(Error::InvalidArgument("support index out of range".into()));
    }
    let mut s = support.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.len() != support.len() {
        return Err(Error::InvalidArgument("support has duplicate indices".into()));
    }
    Ok(())
}

/// ρ(Σ, k) by enumerating every `T ≠ S` with `|T| = |S|`.
///
/// When `|S| = p` no alternative support exists and `λ_min(Σ)` is returned;
/// callers detect this case through `k == p`.
pub fn rho_exact(sigma: &DMatrix<f64>, support: &[usize]) -> Result<f64> {
    let p = sigma.nrows();
    check_support(p, support)?;
    let k = support.len();
    linalg::spd_inverse(sigma)?;
    if k == p {
        return Ok(linalg::min_eigenvalue(sigma));
    }
    let count = ln_binomial(p, k).exp();
    if count > ENUMERATION_GUARD {
        return Err(Error::CombinatorialGuard {
            p,
            k,
            count,
            guard: ENUMERATION_GUARD,
        });
    }
    let mut sorted = support.to_vec();
    sorted.sort_unstable();
    let mut best = f64::INFINITY;
    let mut failure = None;
    for_each_subset(p, k, |t| {
        if failure.is_some() || t == sorted.as_slice() {
            return;
        }
        match gamma_matrix(sigma, &sorted, t) {
            Ok(g) => best = best.min(linalg::min_eigenvalue(&g)),
            Err(e) => failure = Some(e),
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(best),
    }
}

/// Upper bound on λ_max of every k×k principal submatrix of `precision`,
/// from Brauer ovals on row-sorted magnitudes.
pub fn principal_eigen_bound(precision: &DMatrix<f64>, k: usize) -> f64 {
    let p = precision.nrows();
    let mut top = Vec::with_capacity(p);
    let mut rest = Vec::with_capacity(p);
    for i in 0..p {
        let mut row: Vec<f64> = precision.row(i).iter().map(|v| v.abs()).collect();
        row.sort_unstable_by(|a, b| b.total_cmp(a));
        top.push(row[0]);
        rest.push(row[1..].iter().take(k).sum::<f64>());
    }
    if p == 1 {
        return top[0];
    }
    let mut bound = f64::NEG_INFINITY;
    for i in 0..p {
        for j in i + 1..p {
            let d = top[i] - top[j];
            let v = (rest[i] * rest[j] + 0.25 * d * d).sqrt() + 0.5 * (top[i] + top[j]);
            bound = bound.max(v);
        }
    }
    bound
}

/// Lower bound on ρ(Σ, k): reciprocal of [`principal_eigen_bound`] applied
/// to Σ⁻¹. For `k = p` this is `λ_min(Σ)`, matching [`rho_exact`].
pub fn rho_lower(sigma: &DMatrix<f64>, k: usize) -> Result<f64> {
    let p = sigma.nrows();
    if k == 0 || k > p {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={p}")));
    }
    let precision = linalg::spd_inverse(sigma)?;
    if k == p {
        return Ok(linalg::min_eigenvalue(sigma));
    }
    Ok(1.0 / principal_eigen_bound(&precision, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alpha {
    pub alpha: f64,
    pub log_alpha: f64,
}

pub fn alpha(beta_min: f64, sigma2: f64, rho: f64) -> Result<Alpha> {
    if !(beta_min > 0.0 && sigma2 > 0.0 && rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha needs positive inputs, got β_min={beta_min}, σ²={sigma2}, ρ={rho}"
        )));
    }
    let a = beta_min * beta_min * rho / sigma2;
    Ok(Alpha {
        alpha: a,
        log_alpha: a.ln(),
    })
}

/// `1 − ‖Σ_{S̄,S} Σ_SS⁻¹ sign(β_S)‖_∞`; NaN when S covers every feature.
pub fn irrepresentable_eta(sigma: &DMatrix<f64>, support: &[usize], signs: &[f64]) -> Result<f64> {
    let p = sigma.nrows();
    check_support(p, support)?;
    if signs.len() != support.len() {
        return Err(Error::InvalidArgument("one sign per support index".into()));
    }
    let rest: Vec<usize> = (0..p).filter(|j| !support.contains(j)).collect();
    if rest.is_empty() {
        return Ok(f64::NAN);
    }
    let s_ss = linalg::submatrix(sigma, support, support);
    let chol = s_ss.cholesky().ok_or_else(|| Error::Singular("Σ_SS".into()))?;
    let w = chol.solve(&DVector::from_column_slice(signs));
    let cross = linalg::submatrix(sigma, &rest, support);
    Ok(1.0 - (cross * w).amax())
}

/// `(c₁ + 2048)·max{ln C(p−k, k), ln(p−k)/α}`.
pub fn sample_size_threshold(c1: f64, p: usize, k: usize, alpha: f64) -> Result<f64> {
    if k == 0 || k >= p {
        return Err(Error::InvalidArgument(format!("g needs 0 < k < p, got k={k}, p={p}")));
    }
    if !(c1 > 0.0 && alpha > 0.0) {
        return Err(Error::InvalidArgument("g needs c₁ > 0 and α > 0".into()));
    }
    let comb = ln_binomial(p - k, k);
    let ratio = ((p - k) as f64).ln() / alpha;
    Ok((c1 + 2048.0) * comb.max(ratio))
}

/// Regime label for a log α value, if it falls in a characteristic band.
pub fn regime_label(log_alpha: f64) -> Option<&'static str> {
    REGIME_CENTERS
        .iter()
        .find(|(_, c)| log_alpha >= c - REGIME_HALF_WIDTH && log_alpha < c + REGIME_HALF_WIDTH)
        .map(|(name, _)| *name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyReport {
    pub k: usize,
    pub p: usize,
    pub beta_min: f64,
    pub sigma2: f64,
    pub rho_lower: f64,
    pub rho_exact: Option<f64>,
    /// The ρ that α was computed from (exact when available).
    pub rho_used: f64,
    /// True when `k = p` and ρ falls back to `λ_min(Σ)`.
    pub full_support: bool,
    pub alpha: f64,
    pub log_alpha: f64,
    pub eta: f64,
    pub g_bound: Option<f64>,
    pub regime: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyOptions {
    /// Exact ρ is attempted only up to this dimension.
    pub exact_max_p: usize,
    pub c1: f64,
}

impl Default for DifficultyOptions {
    fn default() -> Self {
        DifficultyOptions {
            exact_max_p: 16,
            c1: 1.0,
        }
    }
}

pub fn difficulty_report(
    sigma: &DMatrix<f64>,
    support: &[usize],
    signs: &[f64],
    beta_min: f64,
    sigma2: f64,
    opts: &DifficultyOptions,
) -> Result<DifficultyReport> {
    let p = sigma.nrows();
    check_support(p, support)?;
    let k = support.len();
    let lower = rho_lower(sigma, k)?;
    let exact = if p <= opts.exact_max_p {
        match rho_exact(sigma, support) {
            Ok(v) => Some(v),
            Err(Error::CombinatorialGuard { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let rho_used = exact.unwrap_or(lower);
    let a = alpha(beta_min, sigma2, rho_used)?;
    let g_bound = if k < p {
        Some(sample_size_threshold(opts.c1, p, k, a.alpha)?)
    } else {
        None
    };
    Ok(DifficultyReport {
        k,
        p,
        beta_min,
        sigma2,
        rho_lower: lower,
        rho_exact: exact,
        rho_used,
        full_support: k == p,
        alpha: a.alpha,
        log_alpha: a.log_alpha,
        eta: irrepresentable_eta(sigma, support, signs)?,
        g_bound,
        regime: regime_label(a.log_alpha).map(str::to_string),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simdesign::{build_covariance, CovarianceSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn banded(p: usize, scale: f64) -> DMatrix<f64> {
        build_covariance(&CovarianceSpec::banded(p, scale)).unwrap()
    }

    /// Independent ρ: λ_min of Γ taken as the inverse of the S∖T block of
    /// `(Σ_{S∪T})⁻¹`.
    fn rho_via_precision(sigma: &DMatrix<f64>, support: &[usize]) -> f64 {
        let p = sigma.nrows();
        let k = support.len();
        let mut best = f64::INFINITY;
        for_each_subset(p, k, |t| {
            if t == support {
                return;
            }
            let mut union: Vec<usize> = support.iter().chain(t).copied().collect();
            union.sort_unstable();
            union.dedup();
            let inv = linalg::spd_inverse(&linalg::submatrix(sigma, &union, &union)).unwrap();
            let pos: Vec<usize> = (0..union.len()).filter(|&i| !t.contains(&union[i])).collect();
            let block = linalg::submatrix(&inv, &pos, &pos);
            best = best.min(1.0 / linalg::max_eigenvalue(&block));
        });
        best
    }

    fn random_pd(p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(p, p, |_, _| rng.random::<f64>() - 0.5);
        let m = &a * a.transpose() + DMatrix::identity(p, p) * 0.05 * p as f64;
        let d = DVector::from_fn(p, |i, _| 1.0 / m[(i, i)].sqrt());
        DMatrix::from_fn(p, p, |i, j| m[(i, j)] * d[i] * d[j])
    }

    #[test]
    fn subsets_are_enumerated_once() {
        let mut n = 0;
        for_each_subset(6, 3, |_| n += 1);
        assert_eq!(n, 20);
        let mut all = Vec::new();
        for_each_subset(3, 3, |s| all.push(s.to_vec()));
        assert_eq!(all, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn identity_gamma_and_rho() {
        let s = DMatrix::identity(5, 5);
        let g = gamma_matrix(&s, &[0, 1], &[1, 3]).unwrap();
        assert_eq!(g, DMatrix::identity(1, 1));
        assert!((rho_exact(&s, &[0, 2]).unwrap() - 1.0).abs() < 1e-12);
        assert!((rho_lower(&s, 2).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(irrepresentable_eta(&s, &[0, 2], &[1.0, -1.0]).unwrap(), 1.0);
    }

    #[test]
    fn gamma_matches_block_inverse() {
        let s = DMatrix::from_row_slice(4, 4, &[
            1.0, 0.4, 0.2, 0.1, //
            0.4, 1.0, 0.3, 0.2, //
            0.2, 0.3, 1.0, 0.5, //
            0.1, 0.2, 0.5, 1.0,
        ]);
        let g = gamma_matrix(&s, &[0, 1], &[2, 3]).unwrap();
        let inv = linalg::spd_inverse(&s).unwrap();
        let alt = linalg::spd_inverse(&linalg::submatrix(&inv, &[0, 1], &[0, 1])).unwrap();
        assert!((g - alt).amax() < 1e-12);
        let single = gamma_matrix(&s, &[0, 1], &[1, 2]).unwrap();
        assert!(single[(0, 0)] > 0.0);
    }

    #[test]
    fn golden_banded_rho() {
        let s = banded(8, 2.0);
        let cases: [(&[usize], f64); 3] = [
            (&[0], 0.632_120_558_828_557_7),
            (&[0, 4], 0.462_117_157_260_009_8),
            (&[0, 3, 6], 0.462_117_157_260_009_7),
        ];
        for (sup, want) in cases {
            let got = rho_exact(&s, sup).unwrap();
            assert!((got - want).abs() < 1e-10, "{sup:?}: {got}");
            assert!((rho_via_precision(&s, sup) - got).abs() < 1e-10);
            assert!(rho_lower(&s, sup.len()).unwrap() <= got + 1e-10);
        }
    }

    #[test]
    fn rho_nonincreasing_in_k() {
        let s = banded(8, 2.0);
        let r1 = rho_exact(&s, &[0]).unwrap();
        let r2 = rho_exact(&s, &[0, 4]).unwrap();
        let r3 = rho_exact(&s, &[0, 3, 6]).unwrap();
        assert!(r1 >= r2 - 1e-12 && r2 >= r3 - 1e-12);
    }

    #[test]
    fn guard_rejects_large_enumeration() {
        let s = DMatrix::identity(40, 40);
        let sup: Vec<usize> = (0..20).collect();
        assert!(matches!(rho_exact(&s, &sup), Err(Error::CombinatorialGuard { .. })));
    }

    #[test]
    fn lower_bound_valid_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let s = random_pd(12, &mut rng);
            for k in 1..=3 {
                let sup: Vec<usize> = (0..k).map(|i| i * 4).collect();
                let exact = rho_exact(&s, &sup).unwrap();
                let lower = rho_lower(&s, k).unwrap();
                assert!(lower <= exact + 1e-10, "k={k}: {lower} > {exact}");
            }
        }
    }

    #[test]
    fn eigen_bound_dominates_sampled_submatrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let s = random_pd(10, &mut rng);
            let prec = linalg::spd_inverse(&s).unwrap();
            for k in 1..=4 {
                let bound = principal_eigen_bound(&prec, k);
                for _ in 0..20 {
                    let idx = rand::seq::index::sample(&mut rng, 10, k).into_vec();
                    let lmax = linalg::max_eigenvalue(&linalg::submatrix(&prec, &idx, &idx));
                    assert!(lmax <= bound + 1e-10);
                }
            }
        }
    }

    #[test]
    fn gamma_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_pd(7, &mut rng);
        for_each_subset(7, 3, |t| {
            if t != [0, 1, 2] {
                let g = gamma_matrix(&s, &[0, 1, 2], t).unwrap();
                assert!(linalg::min_eigenvalue(&g) >= -1e-10);
            }
        });
    }

    #[test]
    fn full_support_uses_min_eigenvalue() {
        let s = banded(4, 1.0);
        let sup = [0, 1, 2, 3];
        let want = linalg::min_eigenvalue(&s);
        assert_eq!(rho_exact(&s, &sup).unwrap(), want);
        assert_eq!(rho_lower(&s, 4).unwrap(), want);
        let r = difficulty_report(&s, &sup, &[1.0; 4], 1.0, 1.0, &DifficultyOptions::default()).unwrap();
        assert!(r.full_support && r.eta.is_nan() && r.g_bound.is_none());
    }

    #[test]
    fn alpha_examples_and_scaling() {
        assert_eq!(alpha(0.5, 1.0, 1.0).unwrap().alpha, 0.25);
        assert!((alpha(1.0, 0.1, 0.04).unwrap().alpha - 0.4).abs() < 1e-15);
        let base = alpha(0.3, 0.7, 0.2).unwrap().alpha;
        assert_eq!(alpha(0.6, 0.7, 0.2).unwrap().alpha, 4.0 * base);
        assert_eq!(alpha(0.3, 1.4, 0.2).unwrap().alpha, base / 2.0);
        assert!(alpha(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn eta_hand_example() {
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.7, 0.0, 1.0, 0.7, 0.7, 0.7, 1.0]);
        let eta = irrepresentable_eta(&s, &[0, 1], &[1.0, 1.0]).unwrap();
        assert!((eta + 0.4).abs() < 1e-12);
    }

    #[test]
    fn eta_permutation_invariant() {
        let s = banded(5, 1.5);
        let a = irrepresentable_eta(&s, &[1, 3], &[1.0, -1.0]).unwrap();
        let b = irrepresentable_eta(&s, &[3, 1], &[-1.0, 1.0]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn g_golden_and_limits() {
        assert!((ln_binomial(475, 25) - 95.436_538_313_560_6).abs() < 1e-8);
        let g = sample_size_threshold(1.0, 500, 25, 0.01).unwrap();
        assert!((g - 1_262_863.203_346_7).abs() < 1e-4, "{g}");
        let sat = sample_size_threshold(1.0, 500, 25, 1e12).unwrap();
        assert!((sat - 195_549.467_004_486).abs() < 1e-5);
        assert!(sample_size_threshold(1.0, 10, 10, 1.0).is_err());
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let v = sample_size_threshold(1.0, 100, 10, 1e-3 * 1.5f64.powi(i)).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn regime_labels() {
        assert_eq!(regime_label(-7.5), Some("gaussian-transition"));
        assert_eq!(regime_label(-10.2), Some("inverse-exponential-transition"));
        assert_eq!(regime_label(-14.0), Some("uniform-transition"));
        assert_eq!(regime_label(-2.0), None);
    }

    #[test]
    fn eta_and_rho_comove_on_banded_family() {
        // k = 1 with S at the center; wider bands shrink both quantities.
        let mut pairs = Vec::new();
        for i in 0..10 {
            let s = banded(9, 0.3 + 0.4 * i as f64);
            let eta = irrepresentable_eta(&s, &[4], &[1.0]).unwrap();
            pairs.push((eta, rho_exact(&s, &[4]).unwrap()));
        }
        let n = pairs.len();
        let concordant = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| (pairs[i].0 - pairs[j].0) * (pairs[i].1 - pairs[j].1) > 0.0)
            .count();
        assert_eq!(concordant, n * (n - 1) / 2);
    }

    proptest! {
        #[test]
        fn rho_lower_below_exact_on_banded(scale in 0.2f64..4.0, k in 1usize..4) {
            let s = banded(8, scale);
            let sup: Vec<usize> = (0..k).map(|i| i * 3).collect();
            prop_assert!(rho_lower(&s, k).unwrap() <= rho_exact(&s, &sup).unwrap() + 1e-10);
        }
    }
}
