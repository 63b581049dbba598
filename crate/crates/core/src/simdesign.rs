//! Synthetic regression problems with structured feature covariance.
//!
//! Covariances interpolate between a block-diagonal matrix and an
//! exponentially banded one:
//!
//! ```text
//! Σ = t · B(m, δ) + (1 − t) · Λ(L),   Λ(L)ᵢⱼ = exp(−|i − j| / L)
//! ```
//!
//! where `B(m, δ)` has unit diagonal and `δ` on the off-diagonal entries of
//! each `m × m` diagonal block (the final block is truncated when `m` does
//! not divide `p`).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance on the minimum eigenvalue when certifying positive definiteness.
pub const PD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub p: usize,
    /// Interpolation weight on the block term.
    pub t: f64,
    pub block_size: usize,
    pub block_value: f64,
    pub banding_scale: f64,
}

impl CovarianceSpec {
    pub fn identity(p: usize) -> Self {
        CovarianceSpec {
            p,
            t: 1.0,
            block_size: 1,
            block_value: 0.0,
            banding_scale: 1.0,
        }
    }

    pub fn banded(p: usize, banding_scale: f64) -> Self {
        CovarianceSpec {
            p,
            t: 0.0,
            block_size: 1,
            block_value: 0.0,
            banding_scale,
        }
    }

    pub fn block(p: usize, block_size: usize, block_value: f64) -> Self {
        CovarianceSpec {
            p,
            t: 1.0,
            block_size,
            block_value,
            banding_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidArgument("covariance p must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.t) {
            return Err(Error::InvalidArgument(format!("t = {} outside [0, 1]", self.t)));
        }
        if self.block_size == 0 {
            return Err(Error::InvalidArgument("block size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.block_value) {
            return Err(Error::InvalidArgument(format!(
                "block value δ = {} outside [0, 1)",
                self.block_value
            )));
        }
        if !(self.banding_scale > 0.0 && self.banding_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "banding scale L = {} must be positive",
                self.banding_scale
            )));
        }
        Ok(())
    }

    /// Stable textual key used for seeding and file naming.
    pub fn key(&self) -> String {
        format!(
            "p{}-t{}-m{}-d{}-L{}",
            self.p, self.t, self.block_size, self.block_value, self.banding_scale
        )
    }
}

/// Builds `Σ` and certifies it is positive definite.
pub fn build_covariance(spec: &CovarianceSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let p = spec.p;
    let t = spec.t;
    let m = spec.block_size;
    let sigma = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            return 1.0;
        }
        let band = (-(i.abs_diff(j) as f64) / spec.banding_scale).exp();
        let block = if i / m == j / m { spec.block_value } else { 0.0 };
        t * block + (1.0 - t) * band
    });
    let min_eigenvalue = linalg::min_eigenvalue(&sigma);
    if min_eigenvalue <= PD_TOLERANCE {
        return Err(Error::NotPositiveDefinite { min_eigenvalue });
    }
    Ok(sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BetaDistribution {
    /// Sharply peaked Gaussian, truncated below at the floor.
    NarrowGaussian { mean: f64, sd: f64 },
    /// Uniform on `[floor, high]`.
    Uniform { high: f64 },
    /// Exponential mass piled up against `high`: `β = high − E`, with `E`
    /// exponential of the given rate truncated to `[0, high − floor]`.
    InverseExponential { rate: f64, high: f64 },
}

impl BetaDistribution {
    pub const IDS: [&'static str; 3] = ["narrow-gaussian", "uniform", "inverse-exponential"];

    pub fn id(&self) -> &'static str {
        match self {
            BetaDistribution::NarrowGaussian { .. } => "narrow-gaussian",
            BetaDistribution::Uniform { .. } => "uniform",
            BetaDistribution::InverseExponential { .. } => "inverse-exponential",
        }
    }

    /// Distribution with the default parameters for a given id.
    pub fn from_id(id: &str, params: &BetaParams) -> Result<Self> {
        match id {
            "narrow-gaussian" => Ok(BetaDistribution::NarrowGaussian {
                mean: params.gaussian_mean,
                sd: params.gaussian_sd,
            }),
            "uniform" => Ok(BetaDistribution::Uniform {
                high: params.high,
            }),
            "inverse-exponential" => Ok(BetaDistribution::InverseExponential {
                rate: params.inverse_exponential_rate,
                high: params.high,
            }),
            other => Err(Error::UnknownId {
                kind: "beta distribution",
                value: other.to_string(),
                valid: Self::IDS.join(", "),
            }),
        }
    }

    fn draw<R: Rng>(&self, floor: f64, rng: &mut R) -> f64 {
        match *self {
            BetaDistribution::NarrowGaussian { mean, sd } => {
                let v: f64 = Normal::new(mean, sd).expect("validated sd").sample(rng);
                v.max(floor)
            }
            BetaDistribution::Uniform { high } => floor + (high - floor) * rng.random::<f64>(),
            BetaDistribution::InverseExponential { rate, high } => {
                // inverse CDF of the exponential truncated to [0, width]
                let width = high - floor;
                let u: f64 = rng.random();
                let e = -(1.0 - u * (1.0 - (-rate * width).exp())).ln() / rate;
                (high - e).max(floor)
            }
        }
    }

    pub fn validate(&self, floor: f64) -> Result<()> {
        let ok = match *self {
            BetaDistribution::NarrowGaussian { mean, sd } => mean.is_finite() && sd > 0.0,
            BetaDistribution::Uniform { high } => high > floor,
            BetaDistribution::InverseExponential { rate, high } => rate > 0.0 && high > floor,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad parameters for {self:?}")))
        }
    }
}

/// Shared parameters for the three coefficient distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BetaParams {
    pub floor: f64,
    pub high: f64,
    pub gaussian_mean: f64,
    pub gaussian_sd: f64,
    pub inverse_exponential_rate: f64,
}

impl Default for BetaParams {
    fn default() -> Self {
        BetaParams {
            floor: 0.1,
            high: 10.0,
            gaussian_mean: 5.0,
            gaussian_sd: 0.25,
            inverse_exponential_rate: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSpec {
    pub p: usize,
    pub density: f64,
    pub distribution: BetaDistribution,
    pub floor: f64,
    pub seed: u64,
}

impl BetaSpec {
    pub fn support_size(&self) -> Result<usize> {
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "density {} outside (0, 1]",
                self.density
            )));
        }
        let expected = self.density * self.p as f64;
        if expected < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "density {} · p {} < 1 gives an empty support",
                self.density, self.p
            )));
        }
        Ok((expected.round() as usize).clamp(1, self.p))
    }
}

/// Draws a support uniformly without replacement and positive magnitudes
/// from the configured distribution. The support is returned sorted.
pub fn sample_beta(spec: &BetaSpec) -> Result<(DVector<f64>, Vec<usize>)> {
    if !(spec.floor > 0.0) {
        return Err(Error::InvalidArgument("beta floor must be positive".into()));
    }
    spec.distribution.validate(spec.floor)?;
    let k = spec.support_size()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut support = rand::seq::index::sample(&mut rng, spec.p, k).into_vec();
    support.sort_unstable();
    let mut beta = DVector::zeros(spec.p);
    for &i in &support {
        beta[i] = spec.distribution.draw(spec.floor, &mut rng);
    }
    Ok((beta, support))
}

/// A covariance together with the Cholesky factor used to sample from it.
#[derive(Debug, Clone)]
pub struct Design {
    pub spec: CovarianceSpec,
    pub sigma: DMatrix<f64>,
    chol_lower: DMatrix<f64>,
}

impl Design {
    pub fn new(spec: &CovarianceSpec) -> Result<Self> {
        let sigma = build_covariance(spec)?;
        let chol_lower = sigma
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite {
                min_eigenvalue: linalg::min_eigenvalue(&sigma),
            })?
            .l();
        Ok(Design {
            spec: spec.clone(),
            sigma,
            chol_lower,
        })
    }

    /// `n` i.i.d. rows from `N(0, Σ)`.
    pub fn sample_rows<R: Rng>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let p = self.spec.p;
        let mut z = DMatrix::<f64>::zeros(n, p);
        for i in 0..n {
            for j in 0..p {
                z[(i, j)] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        z * self.chol_lower.transpose()
    }
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub beta_true: DVector<f64>,
    pub support: Vec<usize>,
    pub noise: DVector<f64>,
    pub sigma2: f64,
    pub snr: f64,
    pub covariance: CovarianceSpec,
    pub seed: u64,
}

impl ProblemInstance {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn k(&self) -> usize {
        self.support.len()
    }

    pub fn beta_min(&self) -> f64 {
        self.support
            .iter()
            .map(|&i| self.beta_true[i].abs())
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn sample_size(p: usize, n_over_p: f64) -> Result<usize> {
    if !(n_over_p > 0.0 && n_over_p.is_finite()) {
        return Err(Error::InvalidArgument(format!("n/p = {n_over_p} must be positive")));
    }
    let n = (n_over_p * p as f64).round() as usize;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("n = {n} < 2")));
    }
    Ok(n)
}

/// Noise variance giving the requested per-sample SNR: `σ² = βᵀΣβ / snr`.
pub fn noise_variance(sigma: &DMatrix<f64>, beta: &DVector<f64>, snr: f64) -> Result<f64> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::InvalidArgument(format!("snr = {snr} must be positive")));
    }
    let signal = (beta.transpose() * sigma * beta)[(0, 0)];
    Ok(signal / snr)
}

pub fn synthesize(
    cov: &CovarianceSpec,
    beta: &BetaSpec,
    n_over_p: f64,
    snr: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    if beta.p != cov.p {
        return Err(Error::InvalidArgument(format!(
            "beta p = {} but covariance p = {}",
            beta.p, cov.p
        )));
    }
    let design = Design::new(cov)?;
    let (beta_true, support) = sample_beta(beta)?;
    synthesize_from(&design, beta_true, support, n_over_p, snr, seed)
}

/// Draws `X` and `ε` for a fixed design and coefficient vector.
pub fn synthesize_from(
    design: &Design,
    beta_true: DVector<f64>,
    support: Vec<usize>,
    n_over_p: f64,
    snr: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    let p = design.spec.p;
    let n = sample_size(p, n_over_p)?;
    let sigma2 = noise_variance(&design.sigma, &beta_true, snr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = design.sample_rows(n, &mut rng);
    let sd = sigma2.sqrt();
    let noise = DVector::from_fn(n, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
    let y = &x * &beta_true + &noise;
    Ok(ProblemInstance {
        x,
        y,
        beta_true,
        support,
        noise,
        sigma2,
        snr,
        covariance: design.spec.clone(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> BetaParams {
        BetaParams::default()
    }

    #[test]
    fn pure_banded_entry() {
        let s = build_covariance(&CovarianceSpec::banded(2, 1.0)).unwrap();
        assert!((s[(0, 1)] - 0.367_879_441_171_442_3).abs() < 1e-15);
    }

    #[test]
    fn pure_block_limit() {
        let s = build_covariance(&CovarianceSpec::block(4, 2, 0.5)).unwrap();
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.5, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.5, 0.0, 0.0, 0.5, 1.0,
            ],
        );
        assert_eq!(s, expected);
    }

    #[test]
    fn truncated_final_block() {
        let s = build_covariance(&CovarianceSpec::block(5, 2, 0.3)).unwrap();
        assert_eq!(s[(4, 3)], 0.0);
        assert_eq!(s[(2, 3)], 0.3);
    }

    #[test]
    fn interpolated_min_eigenvalue_matches_dense_oracle() {
        let spec = CovarianceSpec {
            p: 8,
            t: 0.5,
            block_size: 4,
            block_value: 0.25,
            banding_scale: 2.0,
        };
        let s = build_covariance(&spec).unwrap();
        // numpy.linalg.eigvalsh on the same matrix
        assert!((linalg::min_eigenvalue(&s) - 0.507_554_788_365_081).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_spec() {
        let mut spec = CovarianceSpec::banded(4, 1.0);
        spec.t = 1.5;
        assert!(build_covariance(&spec).is_err());
        let spec = CovarianceSpec::block(4, 2, 1.0);
        assert!(build_covariance(&spec).is_err());
    }

    #[test]
    fn full_density_support() {
        let spec = BetaSpec {
            p: 10,
            density: 1.0,
            distribution: BetaDistribution::from_id("uniform", &params()).unwrap(),
            floor: 0.1,
            seed: 3,
        };
        let (beta, s) = sample_beta(&spec).unwrap();
        assert_eq!(s.len(), 10);
        assert!(beta.iter().all(|&b| b >= 0.1));
    }

    #[test]
    fn sparsest_density_rounds_half_up() {
        let spec = BetaSpec {
            p: 500,
            density: 0.025,
            distribution: BetaDistribution::from_id("narrow-gaussian", &params()).unwrap(),
            floor: 0.1,
            seed: 1,
        };
        assert_eq!(spec.support_size().unwrap(), 13);
        let (beta, s) = sample_beta(&spec).unwrap();
        assert_eq!(s.len(), 13);
        let nz: Vec<usize> = (0..500).filter(|&i| beta[i] != 0.0).collect();
        assert_eq!(nz, s);
    }

    #[test]
    fn empty_support_is_an_error() {
        let spec = BetaSpec {
            p: 10,
            density: 0.05,
            distribution: BetaDistribution::from_id("uniform", &params()).unwrap(),
            floor: 0.1,
            seed: 1,
        };
        assert!(sample_beta(&spec).is_err());
    }

    #[test]
    fn monte_carlo_floor_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for id in BetaDistribution::IDS {
            let d = BetaDistribution::from_id(id, &params()).unwrap();
            let min = (0..100_000)
                .map(|_| d.draw(0.1, &mut rng))
                .fold(f64::INFINITY, f64::min);
            assert!(min >= 0.1, "{id}: {min}");
        }
    }

    #[test]
    fn characteristic_beta_min_ordering() {
        // uniform < inverse-exponential < narrow-gaussian in typical β_min
        let mean_min = |id: &str| {
            let d = BetaDistribution::from_id(id, &params()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let reps = 2000;
            (0..reps)
                .map(|_| (0..16).map(|_| d.draw(0.1, &mut rng)).fold(f64::INFINITY, f64::min))
                .sum::<f64>()
                / reps as f64
        };
        let u = mean_min("uniform");
        let ie = mean_min("inverse-exponential");
        let g = mean_min("narrow-gaussian");
        assert!(u < ie && ie < g, "{u} {ie} {g}");
    }

    #[test]
    fn noise_variance_identity_unit_vector() {
        let s = DMatrix::identity(3, 3);
        let mut b = DVector::zeros(3);
        b[0] = 1.0;
        assert!((noise_variance(&s, &b, 10.0).unwrap() - 0.1).abs() < 1e-15);
        assert!(noise_variance(&s, &b, 0.0).is_err());
    }

    #[test]
    fn sample_size_from_ratio() {
        assert_eq!(sample_size(500, 16.0).unwrap(), 8000);
        assert!(sample_size(1, 1.0).is_err());
    }

    #[test]
    fn reconstruction_and_support_invariants() {
        let cov = CovarianceSpec::banded(12, 2.0);
        let beta = BetaSpec {
            p: 12,
            density: 0.25,
            distribution: BetaDistribution::from_id("uniform", &params()).unwrap(),
            floor: 0.1,
            seed: 9,
        };
        let inst = synthesize(&cov, &beta, 4.0, 5.0, 77).unwrap();
        let resid = &inst.y - &inst.x * &inst.beta_true - &inst.noise;
        assert!(resid.amax() < 1e-12);
        let nz: Vec<usize> = (0..12).filter(|&i| inst.beta_true[i] != 0.0).collect();
        assert_eq!(nz, inst.support);
        assert_eq!(inst.k(), 3);
        assert_eq!(inst.n(), 48);
    }

    #[test]
    fn empirical_snr_matches_target() {
        let cov = CovarianceSpec::banded(50, 3.0);
        let beta = BetaSpec {
            p: 50,
            density: 0.2,
            distribution: BetaDistribution::from_id("narrow-gaussian", &params()).unwrap(),
            floor: 0.1,
            seed: 4,
        };
        let snr = 5.0;
        let design = Design::new(&cov).unwrap();
        let (b, s) = sample_beta(&beta).unwrap();
        let mean = (0..100u64)
            .map(|seed| {
                let inst = synthesize_from(&design, b.clone(), s.clone(), 2.0, snr, seed).unwrap();
                (&inst.x * &inst.beta_true).norm_squared() / (inst.n() as f64 * inst.sigma2)
            })
            .sum::<f64>()
            / 100.0;
        assert!((mean - snr).abs() / snr < 0.05, "{mean}");
    }

    #[test]
    fn sample_covariance_converges() {
        let spec = CovarianceSpec {
            p: 3,
            t: 0.5,
            block_size: 2,
            block_value: 0.6,
            banding_scale: 1.5,
        };
        let design = Design::new(&spec).unwrap();
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = design.sample_rows(n, &mut rng);
        let emp = x.transpose() * &x / n as f64;
        for i in 0..3 {
            for j in 0..3 {
                let s = &design.sigma;
                let se = ((s[(i, i)] * s[(j, j)] + s[(i, j)].powi(2)) / n as f64).sqrt();
                assert!((emp[(i, j)] - s[(i, j)]).abs() < 3.0 * se, "({i},{j})");
            }
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cov = CovarianceSpec::block(10, 5, 0.4);
        let beta = BetaSpec {
            p: 10,
            density: 0.3,
            distribution: BetaDistribution::from_id("inverse-exponential", &params()).unwrap(),
            floor: 0.1,
            seed: 2,
        };
        let a = synthesize(&cov, &beta, 2.0, 1.0, 5).unwrap();
        let b = synthesize(&cov, &beta, 2.0, 1.0, 5).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert_eq!(a.beta_true, b.beta_true);
    }

    proptest! {
        #[test]
        fn covariance_symmetric_unit_diagonal(
            p in 1usize..12, t in 0.0f64..=1.0, m in 1usize..6,
            delta in 0.0f64..0.95, l in 0.2f64..8.0,
        ) {
            let spec = CovarianceSpec { p, t, block_size: m, block_value: delta, banding_scale: l };
            let s = build_covariance(&spec).unwrap();
            prop_assert_eq!(&s, &s.transpose());
            for i in 0..p {
                prop_assert_eq!(s[(i, i)], 1.0);
            }
        }

        #[test]
        fn banding_monotone(l in 0.2f64..8.0, dl in 0.01f64..3.0) {
            let a = build_covariance(&CovarianceSpec::banded(6, l)).unwrap();
            let b = build_covariance(&CovarianceSpec::banded(6, l + dl)).unwrap();
            for d in 1..5 {
                prop_assert!(a[(0, d + 1)] < a[(0, d)]);
                prop_assert!(b[(0, d)] > a[(0, d)]);
            }
        }
    }
}
