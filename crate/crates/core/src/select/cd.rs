//! Coordinate descent on a penalized quadratic
//! `½ βᵀHβ − cᵀβ + Σ_j pen(|β_j|)`.
//!
//! `H` is borrowed from a larger matrix through an index list, so nodewise
//! and subset problems can share a single Gram matrix without copying.

use crate::numkit::{cholesky, Matrix};

use super::penalty::PenaltyKind;
use super::SelectError;

pub const MAX_SWEEPS: usize = 10_000;
/// Convergence threshold on the curvature-weighted coordinate change.
pub const CD_TOL: f64 = 1e-10;

/// Smallest curvature accepted on a diagonal entry.
const MIN_CURVATURE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct CoordinateDescent<'a> {
    h: &'a Matrix,
    vars: Vec<usize>,
    c: Vec<f64>,
    kind: PenaltyKind,
    lambda: f64,
    penalized: Vec<bool>,
    beta: Vec<f64>,
    /// `Hβ` restricted to `vars`, kept current after every update.
    hb: Vec<f64>,
    sweeps: usize,
}

impl<'a> CoordinateDescent<'a> {
    pub fn new(
        h: &'a Matrix,
        vars: Vec<usize>,
        c: Vec<f64>,
        kind: PenaltyKind,
        lambda: f64,
    ) -> Self {
        assert_eq!(vars.len(), c.len(), "one linear term per variable");
        let k = vars.len();
        Self {
            h,
            vars,
            c,
            kind,
            lambda,
            penalized: vec![true; k],
            beta: vec![0.0; k],
            hb: vec![0.0; k],
            sweeps: 0,
        }
    }

    /// Marks position `a` (in `vars` order) as unpenalized, e.g. an intercept.
    pub fn unpenalize(&mut self, a: usize) {
        self.penalized[a] = false;
    }

    #[inline]
    fn hget(&self, a: usize, b: usize) -> f64 {
        self.h.get(self.vars[a], self.vars[b])
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn set_lambda(&mut self, lambda: f64) {
        self.lambda = lambda;
    }

    pub fn set_linear(&mut self, c: Vec<f64>) {
        assert_eq!(c.len(), self.c.len());
        self.c = c;
    }

    pub fn set_beta(&mut self, beta: &[f64]) {
        assert_eq!(beta.len(), self.len());
        self.beta.copy_from_slice(beta);
        let k = self.len();
        for a in 0..k {
            self.hb[a] = (0..k)
                .filter(|&b| self.beta[b] != 0.0)
                .map(|b| self.hget(a, b) * self.beta[b])
                .sum();
        }
    }

    /// `½ βᵀHβ − cᵀβ + penalty`.
    pub fn objective(&self) -> f64 {
        let quad: f64 = self
            .beta
            .iter()
            .zip(&self.hb)
            .zip(&self.c)
            .map(|((b, hb), c)| 0.5 * b * hb - c * b)
            .sum();
        quad + self.penalty_value()
    }

    pub fn penalty_value(&self) -> f64 {
        self.beta
            .iter()
            .zip(&self.penalized)
            .filter(|(_, p)| **p)
            .map(|(b, _)| self.kind.value(*b, self.lambda))
            .sum()
    }

    /// Gradient of the smooth part, `Hβ − c`.
    pub fn smooth_gradient(&self) -> Vec<f64> {
        self.hb.iter().zip(&self.c).map(|(h, c)| h - c).collect()
    }

    fn update(&mut self, a: usize) -> f64 {
        let v = self.hget(a, a).max(MIN_CURVATURE);
        let old = self.beta[a];
        let z = old + (self.c[a] - self.hb[a]) / v;
        let new = if self.penalized[a] {
            self.kind.threshold(z, v, self.lambda)
        } else {
            z
        };
        let delta = new - old;
        if delta != 0.0 {
            self.beta[a] = new;
            let row = self.vars[a];
            for (b, hb) in self.hb.iter_mut().enumerate() {
                *hb += delta * self.h.get(row, self.vars[b]);
            }
        }
        v * delta.abs()
    }

    /// One pass over every coordinate; returns the largest weighted change.
    pub fn sweep(&mut self) -> f64 {
        self.sweeps += 1;
        (0..self.len()).fold(0.0, |m, a| m.max(self.update(a)))
    }

    fn sweep_active(&mut self) -> f64 {
        self.sweeps += 1;
        let mut m: f64 = 0.0;
        for a in 0..self.len() {
            if self.beta[a] != 0.0 || !self.penalized[a] {
                m = m.max(self.update(a));
            }
        }
        m
    }

    /// Lasso only: solves the stationarity equations on the current active
    /// set and sign pattern directly. The result is kept only if the signs
    /// agree and every inactive coordinate satisfies its KKT bound, in which
    /// case it is the exact minimizer.
    fn polish_lasso(&mut self) -> bool {
        let act: Vec<usize> = (0..self.len())
            .filter(|&a| self.beta[a] != 0.0 || !self.penalized[a])
            .collect();
        let m = act.len();
        let mut sol = Vec::new();
        if m > 0 {
            let sub = Matrix::from_fn(m, m, |r, c| self.hget(act[r], act[c]));
            let Ok(factor) = cholesky(&sub) else {
                return false;
            };
            let rhs: Vec<f64> = act
                .iter()
                .map(|&a| {
                    let s = if self.penalized[a] {
                        self.beta[a].signum()
                    } else {
                        0.0
                    };
                    self.c[a] - self.lambda * s
                })
                .collect();
            let Ok(x) = factor.solve(&rhs) else {
                return false;
            };
            sol = x;
        }
        for (&a, v) in act.iter().zip(&sol) {
            if self.penalized[a] && v.signum() != self.beta[a].signum() {
                return false;
            }
        }
        let hb: Vec<f64> = (0..self.len())
            .map(|r| {
                act.iter()
                    .zip(&sol)
                    .map(|(&a, v)| self.hget(r, a) * v)
                    .sum()
            })
            .collect();
        let slack = self.lambda * (1.0 + 1e-12);
        for a in 0..self.len() {
            if !act.contains(&a) && (self.c[a] - hb[a]).abs() > slack {
                return false;
            }
        }
        self.beta.iter_mut().for_each(|b| *b = 0.0);
        for (&a, v) in act.iter().zip(&sol) {
            self.beta[a] = *v;
        }
        self.hb = hb;
        true
    }

    /// Active-set iterations bracketed by full sweeps until a full sweep
    /// changes nothing beyond `tol`.
    pub fn solve(&mut self, tol: f64) -> Result<(), SelectError> {
        let start = self.sweeps;
        let lasso = self.kind == PenaltyKind::Lasso;
        // the lasso only needs the active set and signs from the sweeps;
        // the target tightens each time the direct solve is rejected
        let mut inner_tol = if lasso { tol.max(1e-3) } else { tol };
        loop {
            if self.sweep() <= tol {
                return Ok(());
            }
            loop {
                if self.sweeps - start >= MAX_SWEEPS {
                    return Err(SelectError::NoConvergence {
                        sweeps: self.sweeps - start,
                    });
                }
                if self.sweep_active() <= inner_tol {
                    break;
                }
            }
            if lasso {
                if self.polish_lasso() {
                    return Ok(());
                }
                inner_tol = (inner_tol * 1e-2).max(tol);
            }
        }
    }
}
