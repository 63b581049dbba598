//! Four-parameter logistic fits `c + a / (1 + exp(−b (x − x₀)))` by
//! Levenberg–Marquardt with a few restarts.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 8;
pub const MIN_SPAN: f64 = 2.0;
const CONSTANT_TOLERANCE: f64 = 1e-6;
const PARAM_TOLERANCE: f64 = 1e-8;
const MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Midpoint on the x axis (log α).
    pub alpha0: f64,
    pub rss: f64,
    pub converged: bool,
    pub n_points: usize,
    /// Set when the data show no transition: constant responses, or a
    /// fitted midpoint outside the observed x range.
    pub no_transition: bool,
}

impl SigmoidFit {
    pub fn eval(&self, x: f64) -> f64 {
        logistic(&Vector4::new(self.a, self.b, self.c, self.alpha0), x)
    }
}

// parameter order: a, b, c, x0
fn logistic(th: &Vector4<f64>, x: f64) -> f64 {
    let z = (-th[1] * (x - th[3])).clamp(-700.0, 700.0);
    th[2] + th[0] / (1.0 + z.exp())
}

fn rss(th: &Vector4<f64>, xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter().zip(ys).map(|(&x, &y)| (y - logistic(th, x)).powi(2)).sum()
}

fn jacobian_row(th: &Vector4<f64>, x: f64) -> Vector4<f64> {
    let z = (-th[1] * (x - th[3])).clamp(-700.0, 700.0);
    let s = 1.0 / (1.0 + z.exp());
    let ds = s * (1.0 - s);
    Vector4::new(s, th[0] * ds * (x - th[3]), 1.0, -th[0] * ds * th[1])
}

/// Returns the refined parameters, their residual sum of squares and
/// whether the step-size tolerance was reached.
fn levenberg_marquardt(start: Vector4<f64>, xs: &[f64], ys: &[f64]) -> (Vector4<f64>, f64, bool) {
    let mut th = start;
    let mut cur = rss(&th, xs, ys);
    let mut damping = 1e-3;
    for _ in 0..MAX_ITER {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (&x, &y) in xs.iter().zip(ys) {
            let j = jacobian_row(&th, x);
            jtj += j * j.transpose();
            jtr += j * (y - logistic(&th, x));
        }
        let mut accepted = false;
        while damping < 1e16 {
            let mut lhs = jtj;
            for i in 0..4 {
                lhs[(i, i)] += damping * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = lhs.lu().solve(&jtr) else {
                damping *= 10.0;
                continue;
            };
            let cand = th + step;
            let next = rss(&cand, xs, ys);
            if next.is_finite() && next <= cur {
                let small = step.norm() <= PARAM_TOLERANCE * (th.norm() + PARAM_TOLERANCE);
                th = cand;
                cur = next;
                damping = (damping / 10.0).max(1e-12);
                accepted = true;
                if small {
                    return (th, cur, true);
                }
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: a stationary point
            return (th, cur, true);
        }
    }
    (th, cur, false)
}

fn initial_guess(xs: &[f64], ys: &[f64]) -> Vector4<f64> {
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    let n = pts.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = if cov >= 0.0 { 1.0 } else { -1.0 };
    // midpoint crossing of a running mean (robust to scattered data)
    let mid = 0.5 * (lo + hi);
    let window = (pts.len() / 8).max(1);
    let smooth: Vec<f64> = (0..pts.len())
        .map(|i| {
            let a = i.saturating_sub(window);
            let z = (i + window + 1).min(pts.len());
            pts[a..z].iter().map(|p| p.1).sum::<f64>() / (z - a) as f64
        })
        .collect();
    let mut x0 = mx;
    for i in 1..pts.len() {
        if (smooth[i - 1] - mid) * (smooth[i] - mid) <= 0.0 && smooth[i - 1] != smooth[i] {
            let f = (mid - smooth[i - 1]) / (smooth[i] - smooth[i - 1]);
            x0 = pts[i - 1].0 + f * (pts[i].0 - pts[i - 1].0);
            break;
        }
    }
    Vector4::new(hi - lo, b, lo, x0)
}

pub fn fit_sigmoid(xs: &[f64], ys: &[f64]) -> Result<SigmoidFit> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument("xs and ys differ in length".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sigmoid data"));
    }
    if xs.len() < MIN_POINTS {
        return Err(Error::InvalidArgument(format!("{} points, need {MIN_POINTS}", xs.len())));
    }
    let xmin = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let xmax = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if xmax - xmin < MIN_SPAN {
        return Err(Error::InvalidArgument(format!(
            "x span {:.3} below {MIN_SPAN}",
            xmax - xmin
        )));
    }
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= CONSTANT_TOLERANCE {
        return Ok(SigmoidFit {
            a: 0.0,
            b: 0.0,
            c: 0.5 * (lo + hi),
            alpha0: f64::NAN,
            rss: xs.len() as f64 * (0.5 * (hi - lo)).powi(2),
            converged: true,
            n_points: xs.len(),
            no_transition: true,
        });
    }
    let base = initial_guess(xs, ys);
    let span = xmax - xmin;
    let starts = [
        base,
        Vector4::new(base[0], base[1], base[2], base[3] - 0.25 * span),
        Vector4::new(base[0], base[1], base[2], base[3] + 0.25 * span),
        Vector4::new(base[0], 3.0 * base[1], base[2], base[3]),
        Vector4::new(base[0], base[1] / 3.0, base[2], base[3]),
    ];
    let mut best: Option<(Vector4<f64>, f64, bool)> = None;
    for s in starts {
        let r = levenberg_marquardt(s, xs, ys);
        if best.as_ref().is_none_or(|b| r.1 < b.1) {
            best = Some(r);
        }
    }
    let (th, r, converged) = best.expect("five starts");
    Ok(SigmoidFit {
        a: th[0],
        b: th[1],
        c: th[2],
        alpha0: th[3],
        rss: r,
        converged,
        n_points: xs.len(),
        no_transition: !(th[3] >= xmin && th[3] <= xmax),
    })
}
