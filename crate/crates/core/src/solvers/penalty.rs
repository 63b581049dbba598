use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default concavity for SCAD and MCP.
pub const DEFAULT_GAMMA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Lasso,
    Enet,
    Scad,
    Mcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub lambda: f64,
    /// Ridge weight, elastic net only.
    pub lambda2: f64,
    pub gamma: f64,
}

impl PenaltySpec {
    pub fn lasso(lambda: f64) -> Self {
        PenaltySpec {
            kind: PenaltyKind::Lasso,
            lambda,
            lambda2: 0.0,
            gamma: DEFAULT_GAMMA,
        }
    }

    pub fn enet(lambda1: f64, lambda2: f64) -> Self {
        PenaltySpec {
            kind: PenaltyKind::Enet,
            lambda: lambda1,
            lambda2,
            gamma: DEFAULT_GAMMA,
        }
    }

    pub fn scad(lambda: f64, gamma: f64) -> Self {
        PenaltySpec {
            kind: PenaltyKind::Scad,
            lambda,
            lambda2: 0.0,
            gamma,
        }
    }

    pub fn mcp(lambda: f64, gamma: f64) -> Self {
        PenaltySpec {
            kind: PenaltyKind::Mcp,
            lambda,
            lambda2: 0.0,
            gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("λ = {} must be ≥ 0", self.lambda)));
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return Err(Error::InvalidArgument(format!("λ₂ = {} must be ≥ 0", self.lambda2)));
        }
        match self.kind {
            PenaltyKind::Scad if !(self.gamma > 2.0) => Err(Error::InvalidArgument(format!(
                "SCAD requires γ > 2, got {}",
                self.gamma
            ))),
            PenaltyKind::Mcp if !(self.gamma > 1.0) => Err(Error::InvalidArgument(format!(
                "MCP requires γ > 1, got {}",
                self.gamma
            ))),
            _ => Ok(()),
        }
    }

    /// Minimizer of `(v/2)·b² − u·b + P(b)` for curvature `v > 0`.
    pub(crate) fn coordinate_minimizer(&self, u: f64, v: f64) -> f64 {
        let lam = self.lambda;
        match self.kind {
            PenaltyKind::Lasso => soft_threshold(u, lam) / v,
            PenaltyKind::Enet => soft_threshold(u, lam) / (v + 2.0 * self.lambda2),
            PenaltyKind::Scad => {
                let g = self.gamma;
                if v > 1.0 / (g - 1.0) {
                    let a = u.abs();
                    if a <= lam * (1.0 + v) {
                        soft_threshold(u, lam) / v
                    } else if a <= g * lam * v {
                        soft_threshold(u, g * lam / (g - 1.0)) / (v - 1.0 / (g - 1.0))
                    } else {
                        u / v
                    }
                } else {
                    self.best_candidate(u, v)
                }
            }
            PenaltyKind::Mcp => {
                let g = self.gamma;
                if v > 1.0 / g {
                    if u.abs() <= g * lam * v {
                        soft_threshold(u, lam) / (v - 1.0 / g)
                    } else {
                        u / v
                    }
                } else {
                    self.best_candidate(u, v)
                }
            }
        }
    }

    /// Nonconvex coordinate problem: compare every region's stationary point.
    fn best_candidate(&self, u: f64, v: f64) -> f64 {
        let lam = self.lambda;
        let g = self.gamma;
        let s = u.signum();
        let a = u.abs();
        let mut cands = vec![0.0, u / v];
        cands.push(s * ((a - lam) / v).clamp(0.0, lam));
        match self.kind {
            PenaltyKind::Scad => {
                let denom = v - 1.0 / (g - 1.0);
                if denom.abs() > 1e-15 {
                    let b = (a - g * lam / (g - 1.0)) / denom;
                    cands.push(s * b.clamp(lam, g * lam));
                }
                cands.push(s * lam);
                cands.push(s * g * lam);
            }
            PenaltyKind::Mcp => {
                let denom = v - 1.0 / g;
                if denom.abs() > 1e-15 {
                    cands.push(s * ((a - lam) / denom).clamp(0.0, g * lam));
                }
                cands.push(s * g * lam);
            }
            _ => {}
        }
        let obj = |b: f64| 0.5 * v * b * b - u * b + penalty_value_unchecked(self, b);
        cands
            .into_iter()
            .min_by(|x, y| obj(*x).total_cmp(&obj(*y)))
            .unwrap_or(0.0)
    }
}

/// `sign(z) · max(|z| − t, 0)`.
#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Closed-form penalty `P(b)`.
pub fn penalty_value(spec: &PenaltySpec, b: f64) -> Result<f64> {
    spec.validate()?;
    Ok(penalty_value_unchecked(spec, b))
}

pub(crate) fn penalty_value_unchecked(spec: &PenaltySpec, b: f64) -> f64 {
    let lam = spec.lambda;
    let a = b.abs();
    match spec.kind {
        PenaltyKind::Lasso => lam * a,
        PenaltyKind::Enet => lam * a + spec.lambda2 * b * b,
        PenaltyKind::Scad => {
            let g = spec.gamma;
            if a <= lam {
                lam * a
            } else if a <= g * lam {
                (2.0 * g * lam * a - b * b - lam * lam) / (2.0 * (g - 1.0))
            } else {
                lam * lam * (g + 1.0) / 2.0
            }
        }
        PenaltyKind::Mcp => {
            let g = spec.gamma;
            if a <= g * lam {
                lam * a - b * b / (2.0 * g)
            } else {
                g * lam * lam / 2.0
            }
        }
    }
}
