#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, p, |_, _| Distribution::<f64>::sample(&StandardNormal, &mut rng))
}

/// Centered columns with `XᵀX / n = I`.
pub fn orthonormal_design(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut z = gaussian_matrix(n, p, seed);
    for j in 0..p {
        let m = z.column(j).mean();
        z.column_mut(j).add_scalar_mut(-m);
    }
    z.qr().q() * (n as f64).sqrt()
}

pub fn response(x: &DMatrix<f64>, coefs: &[(usize, f64)], noise: f64, seed: u64) -> DVector<f64> {
    let mut beta = DVector::zeros(x.ncols());
    for &(j, b) in coefs {
        beta[j] = b;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = DVector::from_fn(x.nrows(), |_, _| noise * Distribution::<f64>::sample(&StandardNormal, &mut rng));
    x * beta + eps
}

/// A random covariance: `AAᵀ/m + δI` rescaled to unit diagonal.
pub fn random_pd(p: usize, seed: u64) -> DMatrix<f64> {
    let m = p + 2;
    let a = gaussian_matrix(p, m, seed);
    let mut s = &a * a.transpose() / m as f64;
    for i in 0..p {
        s[(i, i)] += 0.05;
    }
    let d: Vec<f64> = (0..p).map(|i| s[(i, i)].sqrt()).collect();
    DMatrix::from_fn(p, p, |i, j| s[(i, j)] / (d[i] * d[j]))
}

/// Every file under `root` with its bytes, sorted by relative path.
pub fn snapshot(root: &std::path::Path, skip_dirs: &[&str]) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &std::path::Path, dir: &std::path::Path, skip: &[&str], out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let rel = path.strip_prefix(base).unwrap().to_string_lossy().into_owned();
            if path.is_dir() {
                if !skip.contains(&rel.as_str()) {
                    walk(base, &path, skip, out);
                }
            } else {
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, skip_dirs, &mut out);
    out.sort();
    out
}

/// Ledger lines sorted, so completion order does not matter.
pub fn sorted_ledger(root: &std::path::Path) -> Vec<String> {
    let mut lines: Vec<String> = std::fs::read_to_string(root.join("completed.txt"))
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect();
    lines.sort();
    lines
}
