//! Pathwise coordinate descent on the Gram matrix.
//!
//! Minimizes `(1/2n)‖ỹ − X̃β‖² + Σⱼ P(βⱼ)` where `X̃` is the centered (and
//! optionally scaled) design and `ỹ` the centered response. The solver keeps
//! the gradient `c − Gβ` up to date so one coordinate update costs `O(p)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::penalty::{penalty_value_unchecked, PenaltyKind, PenaltySpec, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::linalg;

/// Columns whose sample variance falls below this are held at zero.
const MIN_COLUMN_VARIANCE: f64 = 1e-24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathOptions {
    pub n_lambdas: usize,
    pub lambda_min_ratio: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub standardize: bool,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            n_lambdas: 100,
            lambda_min_ratio: 1e-3,
            tol: 1e-7,
            max_iter: 10_000,
            standardize: true,
        }
    }
}

/// Penalty family with the extra parameters needed to map a path λ onto a
/// concrete [`PenaltySpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum PathFamily {
    Lasso,
    /// `λ₁ = λ·a`, `λ₂ = λ·(1 − a)/2`.
    Enet { mixing: f64 },
    Scad { gamma: f64 },
    Mcp { gamma: f64 },
}

impl PathFamily {
    pub fn scad() -> Self {
        PathFamily::Scad {
            gamma: DEFAULT_GAMMA,
        }
    }

    pub fn mcp() -> Self {
        PathFamily::Mcp {
            gamma: DEFAULT_GAMMA,
        }
    }

    pub fn penalty_at(&self, lambda: f64) -> PenaltySpec {
        match *self {
            PathFamily::Lasso => PenaltySpec::lasso(lambda),
            PathFamily::Enet { mixing } => {
                PenaltySpec::enet(lambda * mixing, lambda * (1.0 - mixing) / 2.0)
            }
            PathFamily::Scad { gamma } => PenaltySpec::scad(lambda, gamma),
            PathFamily::Mcp { gamma } => PenaltySpec::mcp(lambda, gamma),
        }
    }

    pub fn kind(&self) -> PenaltyKind {
        self.penalty_at(1.0).kind
    }

    fn validate(&self) -> Result<()> {
        if let PathFamily::Enet { mixing } = *self {
            if !(mixing > 0.0 && mixing <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "elastic net mixing {mixing} outside (0, 1]"
                )));
            }
        }
        self.penalty_at(1.0).validate()
    }

    /// Scale turning `max|c|` into the smallest λ at which β = 0 solves.
    fn l1_share(&self) -> f64 {
        match *self {
            PathFamily::Enet { mixing } => mixing,
            _ => 1.0,
        }
    }
}

/// Centered/scaled sufficient statistics of a regression problem.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub n: usize,
    pub gram: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub yty: f64,
    pub x_mean: DVector<f64>,
    pub x_scale: DVector<f64>,
    pub y_mean: f64,
    active_cols: Vec<bool>,
}

impl Prepared {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>, standardize: bool) -> Result<Self> {
        let (n, p) = x.shape();
        if n < 2 || p == 0 {
            return Err(Error::InvalidArgument(format!("need n ≥ 2 and p ≥ 1, got {n}×{p}")));
        }
        if y.len() != n {
            return Err(Error::InvalidArgument(format!(
                "y has {} rows but X has {n}",
                y.len()
            )));
        }
        if !linalg::is_finite_matrix(x) {
            return Err(Error::NonFinite("X"));
        }
        if !linalg::is_finite_vector(y) {
            return Err(Error::NonFinite("y"));
        }
        let nf = n as f64;
        let y_mean = y.mean();
        let yc = y.add_scalar(-y_mean);
        let x_mean = DVector::from_fn(p, |j, _| x.column(j).mean());
        let mut xc = x.clone();
        for j in 0..p {
            let m = x_mean[j];
            xc.column_mut(j).add_scalar_mut(-m);
        }
        let mut x_scale = DVector::from_element(p, 1.0);
        let mut active_cols = vec![true; p];
        for j in 0..p {
            let var = xc.column(j).norm_squared() / nf;
            if var < MIN_COLUMN_VARIANCE {
                active_cols[j] = false;
            } else if standardize {
                let s = var.sqrt();
                x_scale[j] = s;
                xc.column_mut(j).scale_mut(1.0 / s);
            }
        }
        let gram = xc.tr_mul(&xc) / nf;
        let xty = xc.tr_mul(&yc) / nf;
        Ok(Prepared {
            n,
            gram,
            xty,
            yty: yc.norm_squared() / nf,
            x_mean,
            x_scale,
            y_mean,
            active_cols,
        })
    }

    pub fn p(&self) -> usize {
        self.xty.len()
    }

    /// Smallest λ for which the zero vector is optimal.
    pub fn lambda_max(&self, family: &PathFamily) -> f64 {
        let m = self
            .xty
            .iter()
            .zip(&self.active_cols)
            .filter(|(_, &a)| a)
            .map(|(v, _)| v.abs())
            .fold(0.0, f64::max);
        m / family.l1_share()
    }

    /// Penalized objective on the internal scale.
    pub fn objective(&self, pen: &PenaltySpec, beta: &DVector<f64>) -> f64 {
        let quad = 0.5 * self.yty - self.xty.dot(beta) + 0.5 * beta.dot(&(&self.gram * beta));
        quad + beta.iter().map(|&b| penalty_value_unchecked(pen, b)).sum::<f64>()
    }

    /// Maps internal coefficients to the original scale, with intercept.
    pub fn unstandardize(&self, beta: &DVector<f64>) -> (DVector<f64>, f64) {
        let coefs = beta.component_div(&self.x_scale);
        let intercept = self.y_mean - self.x_mean.dot(&coefs);
        (coefs, intercept)
    }
}

/// Coordinate descent state carried along a path for warm starts.
#[derive(Debug, Clone)]
pub struct CoordinateDescent<'a> {
    prep: &'a Prepared,
    pub beta: DVector<f64>,
    grad: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStatus {
    pub converged: bool,
    pub sweeps: usize,
}

impl<'a> CoordinateDescent<'a> {
    pub fn new(prep: &'a Prepared) -> Self {
        CoordinateDescent {
            prep,
            beta: DVector::zeros(prep.p()),
            grad: prep.xty.clone(),
        }
    }

    fn update(&mut self, j: usize, pen: &PenaltySpec) -> f64 {
        let v = self.prep.gram[(j, j)];
        let old = self.beta[j];
        let u = self.grad[j] + v * old;
        let new = pen.coordinate_minimizer(u, v);
        let delta = new - old;
        if delta != 0.0 {
            self.beta[j] = new;
            self.grad.axpy(-delta, &self.prep.gram.column(j), 1.0);
        }
        delta.abs()
    }

    fn sweep(&mut self, pen: &PenaltySpec, cols: &[usize]) -> f64 {
        let mut max_delta: f64 = 0.0;
        for &j in cols {
            max_delta = max_delta.max(self.update(j, pen));
        }
        max_delta
    }

    /// Runs sweeps until the largest coordinate change in a full sweep is
    /// below `tol`. Between full sweeps, iterates on the current active set.
    /// When `trace` is given, the objective after every sweep is appended.
    pub fn solve(
        &mut self,
        pen: &PenaltySpec,
        tol: f64,
        max_iter: usize,
        mut trace: Option<&mut Vec<f64>>,
    ) -> SolveStatus {
        let all: Vec<usize> = (0..self.prep.p())
            .filter(|&j| self.prep.active_cols[j])
            .collect();
        let mut sweeps = 0;
        while sweeps < max_iter {
            let d = self.sweep(pen, &all);
            sweeps += 1;
            if let Some(t) = trace.as_deref_mut() {
                t.push(self.prep.objective(pen, &self.beta));
            }
            if d < tol {
                return SolveStatus {
                    converged: true,
                    sweeps,
                };
            }
            let active: Vec<usize> = all.iter().copied().filter(|&j| self.beta[j] != 0.0).collect();
            while sweeps < max_iter {
                let d = self.sweep(pen, &active);
                sweeps += 1;
                if let Some(t) = trace.as_deref_mut() {
                    t.push(self.prep.objective(pen, &self.beta));
                }
                if d < tol {
                    break;
                }
            }
        }
        SolveStatus {
            converged: false,
            sweeps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegPath {
    pub family: PathFamily,
    pub lambdas: Vec<f64>,
    /// Coefficients on the original scale, one vector per λ.
    pub coefs: Vec<DVector<f64>>,
    pub intercepts: Vec<f64>,
    pub converged: Vec<bool>,
    pub sweeps: Vec<usize>,
}

impl RegPath {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn support(&self, idx: usize) -> Vec<usize> {
        nonzero_support(&self.coefs[idx])
    }

    /// CSV with one row per λ: `lambda,intercept,converged,beta_0,…`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let p = self.coefs.first().map_or(0, |c| c.len());
        let mut header = vec!["lambda".to_string(), "intercept".into(), "converged".into()];
        header.extend((0..p).map(|j| format!("beta_{j}")));
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row = vec![
                format!("{:.16e}", self.lambdas[i]),
                format!("{:.16e}", self.intercepts[i]),
                self.converged[i].to_string(),
            ];
            row.extend(self.coefs[i].iter().map(|v| format!("{v:.16e}")));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn nonzero_support(beta: &DVector<f64>) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, &b)| b != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Log-spaced descending grid from `lambda_max` to `ratio·lambda_max`.
pub fn lambda_grid(lambda_max: f64, n: usize, ratio: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lambda_max];
    }
    let lo = (lambda_max * ratio).ln();
    let hi = lambda_max.ln();
    (0..n)
        .map(|i| (hi + (lo - hi) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn fit_path(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    family: PathFamily,
    lambdas: Option<&[f64]>,
    opts: &PathOptions,
) -> Result<RegPath> {
    let prep = Prepared::new(x, y, opts.standardize)?;
    fit_path_prepared(&prep, family, lambdas, opts)
}

pub fn fit_path_prepared(
    prep: &Prepared,
    family: PathFamily,
    lambdas: Option<&[f64]>,
    opts: &PathOptions,
) -> Result<RegPath> {
    family.validate()?;
    let lambdas: Vec<f64> = match lambdas {
        Some(l) => {
            if l.is_empty() {
                return Err(Error::InvalidArgument("empty λ grid".into()));
            }
            if l.windows(2).any(|w| !(w[0] > w[1])) {
                return Err(Error::InvalidArgument("λ grid must be strictly decreasing".into()));
            }
            if l.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::NonFinite("λ grid"));
            }
            l.to_vec()
        }
        None => {
            if opts.n_lambdas == 0 {
                return Err(Error::InvalidArgument("n_lambdas must be positive".into()));
            }
            lambda_grid(prep.lambda_max(&family), opts.n_lambdas, opts.lambda_min_ratio)
        }
    };
    let mut cd = CoordinateDescent::new(prep);
    let mut path = RegPath {
        family,
        lambdas: Vec::with_capacity(lambdas.len()),
        coefs: Vec::with_capacity(lambdas.len()),
        intercepts: Vec::with_capacity(lambdas.len()),
        converged: Vec::with_capacity(lambdas.len()),
        sweeps: Vec::with_capacity(lambdas.len()),
    };
    for &lam in &lambdas {
        let pen = family.penalty_at(lam);
        let status = cd.solve(&pen, opts.tol, opts.max_iter, None);
        let (coefs, intercept) = prep.unstandardize(&cd.beta);
        path.lambdas.push(lam);
        path.coefs.push(coefs);
        path.intercepts.push(intercept);
        path.converged.push(status.converged);
        path.sweeps.push(status.sweeps);
    }
    Ok(path)
}
