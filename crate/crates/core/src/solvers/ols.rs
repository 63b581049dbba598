use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Restricted Gram matrices with condition number above this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Least squares on the columns in `support` (no intercept); zero elsewhere.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>, support: &[usize]) -> Result<DVector<f64>> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidArgument(format!("y has {} rows, X has {n}", y.len())));
    }
    if support.iter().any(|&j| j >= p) {
        return Err(Error::InvalidArgument("support index out of range".into()));
    }
    if support.len() > n {
        return Err(Error::RankDeficient {
            condition: f64::INFINITY,
        });
    }
    if support.is_empty() {
        return Ok(DVector::zeros(p));
    }
    let xs = DMatrix::from_fn(n, support.len(), |i, j| x[(i, support[j])]);
    let gram = xs.tr_mul(&xs);
    let xty = xs.tr_mul(y);
    let sol = solve_restricted(&gram, &xty)?;
    let mut beta = DVector::zeros(p);
    for (k, &j) in support.iter().enumerate() {
        beta[j] = sol[k];
    }
    Ok(beta)
}

/// Solves `G b = c` for an SPD restricted Gram matrix.
pub fn solve_restricted(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = match gram.clone().cholesky() {
        Some(c) => c,
        None => {
            return Err(Error::RankDeficient {
                condition: linalg::spd_condition(gram),
            })
        }
    };
    // cheap estimate from the factor's diagonal
    let l = chol.l_dirty();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..gram.nrows() {
        let d = l[(i, i)].abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let condition = (hi / lo).powi(2);
    if !(condition < MAX_CONDITION) {
        return Err(Error::RankDeficient { condition });
    }
    Ok(chol.solve(rhs))
}

/// OLS from precomputed `XᵀX` and `Xᵀy` restricted to `support`.
pub fn ols_from_gram(gram: &DMatrix<f64>, xty: &DVector<f64>, support: &[usize]) -> Result<DVector<f64>> {
    let p = xty.len();
    let mut beta = DVector::zeros(p);
    if support.is_empty() {
        return Ok(beta);
    }
    let g = linalg::submatrix(gram, support, support);
    let c = linalg::subvector(xty, support);
    let sol = solve_restricted(&g, &c)?;
    for (k, &j) in support.iter().enumerate() {
        beta[j] = sol[k];
    }
    Ok(beta)
}
