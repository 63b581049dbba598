//! Sweep configuration, loaded from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Estimator, EstimatorSettings};
use crate::selection::Criterion;
use crate::simdesign::{BetaDistribution, BetaParams, CovarianceSpec};

/// One covariance design; the dimension comes from [`SweepConfig::p`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEntry {
    #[serde(default)]
    pub t: f64,
    #[serde(default = "one")]
    pub block_size: usize,
    #[serde(default)]
    pub block_value: f64,
    #[serde(default = "one_f")]
    pub banding_scale: f64,
}

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

impl CovarianceEntry {
    pub fn spec(&self, p: usize) -> CovarianceSpec {
        CovarianceSpec {
            p,
            t: self.t,
            block_size: self.block_size,
            block_value: self.block_value,
            banding_scale: self.banding_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub seed: u64,
    pub p: usize,
    pub repetitions: usize,
    pub densities: Vec<f64>,
    pub beta_distributions: Vec<String>,
    pub snrs: Vec<f64>,
    pub n_over_p: Vec<f64>,
    pub estimators: Vec<Estimator>,
    /// Scored criteria; the oracle is always added.
    pub criteria: Vec<Criterion>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Exact ρ is computed only for `p` up to this value.
    #[serde(default = "default_exact_rho_max_p")]
    pub exact_rho_max_p: usize,
    #[serde(default = "default_c1")]
    pub c1: f64,
    #[serde(default)]
    pub beta: BetaParams,
    #[serde(default)]
    pub estimator_settings: EstimatorSettings,
    pub covariances: Vec<CovarianceEntry>,
}

fn default_workers() -> usize {
    1
}

fn default_exact_rho_max_p() -> usize {
    16
}

fn default_c1() -> f64 {
    1.0
}

impl SweepConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SweepConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::Config(format!("{name} grid is empty")))
            } else {
                Ok(())
            }
        };
        empty("covariances", self.covariances.len())?;
        empty("densities", self.densities.len())?;
        empty("beta_distributions", self.beta_distributions.len())?;
        empty("snrs", self.snrs.len())?;
        empty("n_over_p", self.n_over_p.len())?;
        empty("estimators", self.estimators.len())?;
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        if self.criteria.contains(&Criterion::Oracle) {
            return Err(Error::Config("the oracle is always run; drop it from criteria".into()));
        }
        for c in &self.covariances {
            crate::simdesign::build_covariance(&c.spec(self.p))?;
        }
        for b in &self.beta_distributions {
            BetaDistribution::from_id(b, &self.beta)?.validate(self.beta.floor)?;
        }
        for &d in &self.densities {
            if !(d > 0.0 && d <= 1.0) || d * (self.p as f64) < 1.0 {
                return Err(Error::Config(format!("density {d} gives an empty support at p = {}", self.p)));
            }
        }
        if self.snrs.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("snr values must be positive".into()));
        }
        for &r in &self.n_over_p {
            crate::simdesign::sample_size(self.p, r)?;
        }
        self.estimator_settings.uoi.validate()?;
        Ok(())
    }

    /// Criteria in record order: the configured ones, then the oracle.
    pub fn all_criteria(&self) -> Vec<Criterion> {
        let mut c = self.criteria.clone();
        c.push(Criterion::Oracle);
        c
    }

    pub fn task_count(&self) -> usize {
        self.covariances.len()
            * self.densities.len()
            * self.beta_distributions.len()
            * self.snrs.len()
            * self.n_over_p.len()
            * self.repetitions
    }
}
