use serde::{Deserialize, Serialize};

use super::SelectError;

pub const SCAD_A: f64 = 3.7;
pub const MCP_GAMMA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltyKind {
    Lasso,
    Scad { a: f64 },
    Mcp { gamma: f64 },
}

impl PenaltyKind {
    pub fn scad() -> Self {
        PenaltyKind::Scad { a: SCAD_A }
    }

    pub fn mcp() -> Self {
        PenaltyKind::Mcp { gamma: MCP_GAMMA }
    }

    pub fn validate(&self) -> Result<(), SelectError> {
        match *self {
            PenaltyKind::Scad { a } if !(a > 2.0) => Err(SelectError::InvalidPenalty(format!(
                "SCAD a = {a} must exceed 2"
            ))),
            PenaltyKind::Mcp { gamma } if !(gamma > 1.0) => Err(SelectError::InvalidPenalty(
                format!("MCP gamma = {gamma} must exceed 1"),
            )),
            _ => Ok(()),
        }
    }

    /// Penalty value at `|b| = u`.
    pub fn value(&self, u: f64, lambda: f64) -> f64 {
        let u = u.abs();
        match *self {
            PenaltyKind::Lasso => lambda * u,
            PenaltyKind::Scad { a } => {
                if u <= lambda {
                    lambda * u
                } else if u <= a * lambda {
                    (2.0 * a * lambda * u - u * u - lambda * lambda) / (2.0 * (a - 1.0))
                } else {
                    0.5 * (a + 1.0) * lambda * lambda
                }
            }
            PenaltyKind::Mcp { gamma } => {
                if u <= gamma * lambda {
                    lambda * u - u * u / (2.0 * gamma)
                } else {
                    0.5 * gamma * lambda * lambda
                }
            }
        }
    }

    /// Exact minimizer of `v/2 (b - z)^2 + pen(|b|)` over `b`.
    ///
    /// For SCAD and MCP the problem is piecewise quadratic and may be
    /// nonconvex when `v` is small, so every region's clipped stationary
    /// point is compared and the smallest objective wins (ties to smaller
    /// magnitude).
    pub fn threshold(&self, z: f64, v: f64, lambda: f64) -> f64 {
        let az = z.abs();
        let u = match *self {
            PenaltyKind::Lasso => ((v * az - lambda) / v).max(0.0),
            PenaltyKind::Scad { a } => {
                let k = 1.0 / (a - 1.0);
                let mid = if v > k {
                    ((v * az - a * lambda * k) / (v - k)).clamp(lambda, a * lambda)
                } else {
                    lambda
                };
                self.best(
                    &[
                        0.0,
                        lambda,
                        a * lambda,
                        ((v * az - lambda) / v).clamp(0.0, lambda),
                        mid,
                        az.max(a * lambda),
                    ],
                    az,
                    v,
                    lambda,
                )
            }
            PenaltyKind::Mcp { gamma } => {
                let k = 1.0 / gamma;
                let low = if v > k {
                    ((v * az - lambda) / (v - k)).clamp(0.0, gamma * lambda)
                } else {
                    0.0
                };
                self.best(
                    &[0.0, gamma * lambda, low, az.max(gamma * lambda)],
                    az,
                    v,
                    lambda,
                )
            }
        };
        u.copysign(z)
    }

    fn best(&self, cands: &[f64], az: f64, v: f64, lambda: f64) -> f64 {
        let f = |u: f64| 0.5 * v * (u - az).powi(2) + self.value(u, lambda);
        let mut best = (f(0.0), 0.0);
        for &u in cands {
            let fu = f(u);
            if fu < best.0 || (fu == best.0 && u < best.1) {
                best = (fu, u);
            }
        }
        best.1
    }
}

/// Penalty kind plus tuning parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    #[serde(flatten)]
    pub kind: PenaltyKind,
    pub lambda: f64,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, lambda: f64) -> Result<Self, SelectError> {
        kind.validate()?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(SelectError::InvalidPenalty(format!(
                "lambda = {lambda} must be > 0"
            )));
        }
        Ok(Self { kind, lambda })
    }
}
