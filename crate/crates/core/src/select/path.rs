//! Regularization paths with BIC tuning.

use crate::glm::Likelihood;
use crate::numkit::Matrix;

use super::cd::{CoordinateDescent, CD_TOL, MAX_SWEEPS};
use super::penalty::PenaltyKind;
use super::SelectError;

pub const N_LAMBDA: usize = 100;
pub const LAMBDA_RATIO: f64 = 1e-3;
/// Paths stop once the fit explains this fraction of the null deviance.
pub const DEV_RATIO_STOP: f64 = 0.999;
/// Default patience: a path may stop once this many consecutive points fail
/// to improve the criterion, i.e. after λ has halved past the current
/// minimum. Variable selection runs without it, because under a nonconvex
/// penalty correlated signals can enter well after the first plateau.
pub const BIC_PATIENCE: usize = 10;
const MAX_OUTER: usize = 100;
const OUTER_TOL: f64 = 1e-6;

/// Solution at the BIC-selected point of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFit {
    pub lambdas: Vec<f64>,
    pub bic: Vec<f64>,
    pub chosen: Option<usize>,
    /// Coefficients in the order of the problem's variables.
    pub beta: Vec<f64>,
    pub intercept: f64,
}

impl PathFit {
    fn empty(k: usize) -> Self {
        Self {
            lambdas: Vec::new(),
            bic: Vec::new(),
            chosen: None,
            beta: vec![0.0; k],
            intercept: 0.0,
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        self.chosen.map(|i| self.lambdas[i])
    }
}

pub fn lambda_grid(lambda_max: f64) -> Vec<f64> {
    (0..N_LAMBDA)
        .map(|i| lambda_max * LAMBDA_RATIO.powf(i as f64 / (N_LAMBDA - 1) as f64))
        .collect()
}

fn nnz(beta: &[f64]) -> usize {
    beta.iter().filter(|b| **b != 0.0).count()
}

/// Centered least squares in quadratic form: `h` holds `X_cᵀX_c/n` for a
/// superset of variables, `c = X_cᵀy_c/n` and `yy = y_cᵀy_c/n`.
#[derive(Debug, Clone)]
pub struct QuadProblem<'a> {
    pub h: &'a Matrix,
    pub vars: Vec<usize>,
    pub c: Vec<f64>,
    pub yy: f64,
    pub n: usize,
}

impl QuadProblem<'_> {
    /// `RSS/n` implied by coefficients `beta`.
    pub fn rss_over_n(&self, beta: &[f64]) -> f64 {
        let mut quad = 0.0;
        for (a, &ba) in beta.iter().enumerate() {
            if ba == 0.0 {
                continue;
            }
            let row = self.vars[a];
            let hb: f64 = beta
                .iter()
                .enumerate()
                .filter(|(_, b)| **b != 0.0)
                .map(|(b, bb)| self.h.get(row, self.vars[b]) * bb)
                .sum();
            quad += ba * (hb - 2.0 * self.c[a]);
        }
        (self.yy + quad).max(0.0)
    }
}

/// Weight of the model-size term in the extended BIC. With `γ = 1` the
/// criterion stays consistent when the candidate pool is large relative to
/// `n`, which plain BIC does not once candidates were chosen for their
/// largest sample correlations.
pub const EBIC_GAMMA: f64 = 1.0;

/// Criterion used to pick a point on a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tuning {
    Bic,
    /// BIC plus `2γ·ln C(pool, k)` for a support of size `k` drawn from
    /// `pool` candidates.
    ExtendedBic {
        gamma: f64,
        pool: usize,
    },
}

impl Tuning {
    fn extra(&self, k: usize) -> f64 {
        match *self {
            Tuning::Bic => 0.0,
            Tuning::ExtendedBic { gamma, pool } => {
                let ln_choose: f64 = (0..k.min(pool))
                    .map(|i| ((pool - i) as f64 / (i + 1) as f64).ln())
                    .sum();
                2.0 * gamma * ln_choose
            }
        }
    }
}

pub fn gaussian_path(q: &QuadProblem, kind: PenaltyKind) -> Result<PathFit, SelectError> {
    gaussian_path_tuned(q, kind, Tuning::Bic, Some(BIC_PATIENCE))
}

pub fn gaussian_path_tuned(
    q: &QuadProblem,
    kind: PenaltyKind,
    tuning: Tuning,
    patience: Option<usize>,
) -> Result<PathFit, SelectError> {
    let k = q.vars.len();
    let lambda_max = q.c.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if k == 0 || lambda_max <= 0.0 || q.yy <= 0.0 {
        return Ok(PathFit::empty(k));
    }
    let n = q.n as f64;
    let mut cd = CoordinateDescent::new(q.h, q.vars.clone(), q.c.clone(), kind, lambda_max);
    let mut fit = PathFit::empty(k);
    let mut best = f64::INFINITY;
    for (i, lambda) in lambda_grid(lambda_max).into_iter().enumerate() {
        cd.set_lambda(lambda);
        if let Err(e) = cd.solve(CD_TOL) {
            if i == 0 {
                return Err(e);
            }
            log::debug!("lasso path truncated at step {i}: {e}");
            break;
        }
        let beta = cd.beta();
        let support = nnz(beta);
        let rss = q.rss_over_n(beta);
        let bic =
            n * rss.max(f64::MIN_POSITIVE).ln() + support as f64 * n.ln() + tuning.extra(support);
        fit.lambdas.push(lambda);
        fit.bic.push(bic);
        if bic < best {
            best = bic;
            fit.chosen = Some(i);
            fit.beta = beta.to_vec();
        }
        let stale = matches!((fit.chosen, patience), (Some(c), Some(w)) if i - c >= w);
        if stale || 1.0 - rss / q.yy >= DEV_RATIO_STOP || support + 1 >= q.n {
            break;
        }
    }
    Ok(fit)
}

/// Penalized GLM problem on a set of feature columns.
pub struct GlmProblem<'a> {
    pub lik: &'a Likelihood<'a>,
    pub cols: Vec<&'a [f64]>,
}

impl GlmProblem<'_> {
    fn offset(&self) -> usize {
        usize::from(self.lik.has_intercept())
    }

    fn penalized_objective(&self, theta: &[f64], kind: PenaltyKind, lambda: f64) -> f64 {
        let n = self.lik.n() as f64;
        let off = self.offset();
        self.lik.value(&self.cols, theta) / n
            + theta[off..]
                .iter()
                .map(|b| kind.value(*b, lambda))
                .sum::<f64>()
    }

    fn null_theta(&self) -> Vec<f64> {
        let mut theta = vec![0.0; self.lik.n_params(self.cols.len())];
        if self.lik.has_intercept() {
            // one unpenalized Newton solve on the intercept alone
            for _ in 0..50 {
                let ev = self.lik.eval(&[], &theta[..1], true);
                let h = ev.hess.as_ref().map(|m| m.get(0, 0)).unwrap_or(0.0);
                if h <= 0.0 {
                    break;
                }
                let step = ev.grad[0] / h;
                theta[0] -= step;
                if step.abs() < 1e-14 {
                    break;
                }
            }
        }
        theta
    }

    /// Proximal Newton at one lambda starting from `theta`.
    pub fn fit_at(
        &self,
        kind: PenaltyKind,
        lambda: f64,
        theta: &mut Vec<f64>,
        sweeps: &mut usize,
    ) -> Result<(), SelectError> {
        let n = self.lik.n() as f64;
        let m = theta.len();
        let off = self.offset();
        let vars: Vec<usize> = (0..m).collect();
        for _ in 0..MAX_OUTER {
            let ev = self.lik.eval(&self.cols, theta, true);
            let mut h = ev.hess.expect("hessian requested");
            let data: Vec<f64> = h.as_slice().iter().map(|v| v / n).collect();
            h = Matrix::new(m, m, data)
                .map_err(|_| SelectError::NoConvergence { sweeps: *sweeps })?;
            let hth = h.mul_vec(theta).expect("square");
            let c: Vec<f64> = hth.iter().zip(&ev.grad).map(|(a, g)| a - g / n).collect();
            let mut cd = CoordinateDescent::new(&h, vars.clone(), c, kind, lambda);
            if off == 1 {
                cd.unpenalize(0);
            }
            cd.set_beta(theta);
            let res = cd.solve(CD_TOL);
            *sweeps += cd.sweeps();
            res?;
            if *sweeps > MAX_SWEEPS {
                return Err(SelectError::NoConvergence { sweeps: *sweeps });
            }
            let target = cd.beta().to_vec();
            let f0 = self.penalized_objective(theta, kind, lambda);
            let mut t = 1.0;
            let mut accepted = None;
            while t > 1e-10 {
                let cand: Vec<f64> = theta
                    .iter()
                    .zip(&target)
                    .map(|(a, b)| a + t * (b - a))
                    .collect();
                let f = self.penalized_objective(&cand, kind, lambda);
                if f.is_finite() && f <= f0 + 1e-12 * f0.abs().max(1.0) {
                    accepted = Some(cand);
                    break;
                }
                t *= 0.5;
            }
            let Some(next) = accepted else {
                return Ok(());
            };
            let change = next
                .iter()
                .zip(theta.iter())
                .fold(0.0f64, |mx, (a, b)| mx.max((a - b).abs()));
            *theta = next;
            if let Some(mu) = self
                .lik
                .fitted_probabilities(&self.lik.eta(&self.cols, theta))
            {
                if mu.iter().any(|p| *p < 1e-10 || *p > 1.0 - 1e-10) {
                    return Err(SelectError::Separation);
                }
            }
            if change < OUTER_TOL {
                return Ok(());
            }
        }
        Err(SelectError::NoConvergence { sweeps: *sweeps })
    }

    pub fn path(&self, kind: PenaltyKind) -> Result<PathFit, SelectError> {
        self.path_tuned(kind, Tuning::Bic, Some(BIC_PATIENCE))
    }

    pub fn path_tuned(
        &self,
        kind: PenaltyKind,
        tuning: Tuning,
        patience: Option<usize>,
    ) -> Result<PathFit, SelectError> {
        let k = self.cols.len();
        let off = self.offset();
        let n = self.lik.n() as f64;
        let mut theta = self.null_theta();
        let null_ev = self.lik.eval(&self.cols, &theta, false);
        let null_dev = 2.0 * null_ev.value;
        let lambda_max = null_ev.grad[off..]
            .iter()
            .fold(0.0f64, |m, g| m.max(g.abs() / n));
        let mut fit = PathFit::empty(k);
        fit.intercept = if off == 1 { theta[0] } else { 0.0 };
        if k == 0 || lambda_max <= 0.0 || null_dev <= 0.0 {
            return Ok(fit);
        }
        let mut best = f64::INFINITY;
        for (i, lambda) in lambda_grid(lambda_max).into_iter().enumerate() {
            let mut sweeps = 0;
            let mut trial = theta.clone();
            if let Err(e) = self.fit_at(kind, lambda, &mut trial, &mut sweeps) {
                if i == 0 {
                    return Err(e);
                }
                log::debug!("penalized path truncated at step {i}: {e}");
                break;
            }
            theta = trial;
            let beta = &theta[off..];
            let support = nnz(beta);
            let dev = 2.0 * self.lik.value(&self.cols, &theta);
            let bic = dev + support as f64 * n.ln() + tuning.extra(support);
            fit.lambdas.push(lambda);
            fit.bic.push(bic);
            if bic < best {
                best = bic;
                fit.chosen = Some(i);
                fit.beta = beta.to_vec();
                fit.intercept = if off == 1 { theta[0] } else { 0.0 };
            }
            let stale = matches!((fit.chosen, patience), (Some(c), Some(w)) if i - c >= w);
            if stale || 1.0 - dev / null_dev >= DEV_RATIO_STOP || support + 1 >= self.lik.n() {
                break;
            }
        }
        Ok(fit)
    }
}
