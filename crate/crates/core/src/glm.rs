//! Negative log-likelihoods for the three response families and an
//! unpenalized Newton fitter.
//!
//! Everything here is on the sum scale: values, gradients and Hessians are
//! summed over observations, not averaged. The parameter vector starts with
//! the intercept for the Gaussian and logistic families; the Cox partial
//! likelihood has no intercept.

use thiserror::Error;

use crate::datagen::Response;
use crate::numkit::{cholesky, Matrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GlmError {
    #[error("fitted probabilities numerically 0 or 1 (separation)")]
    Separation,
    #[error("Newton iteration did not converge after {iterations} steps")]
    NoConvergence { iterations: usize },
    #[error("information matrix is singular")]
    Singular,
}

pub const MAX_NEWTON_STEPS: usize = 100;

/// Fitted probabilities closer than this to 0 or 1 signal separation.
const PINNED: f64 = 10.0 * f64::EPSILON;

#[derive(Debug, Clone)]
enum Kind<'a> {
    Gaussian(&'a [f64]),
    Binomial(&'a [f64]),
    Cox {
        event: &'a [bool],
        /// Observation indices by descending time.
        order: Vec<usize>,
        /// Runs of `order` sharing a time value.
        groups: Vec<(usize, usize)>,
    },
}

#[derive(Debug, Clone)]
pub struct Likelihood<'a> {
    n: usize,
    kind: Kind<'a>,
}

/// Value, gradient and (optionally) Hessian of the negative log-likelihood.
#[derive(Debug, Clone)]
pub struct Eval {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Option<Matrix>,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'a> Likelihood<'a> {
    pub fn new(resp: &'a Response) -> Self {
        let n = resp.len();
        let kind = match resp {
            Response::Gaussian { y } => Kind::Gaussian(y),
            Response::Binomial { y } => Kind::Binomial(y),
            Response::Cox { time, event } => {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| time[b].total_cmp(&time[a]).then(a.cmp(&b)));
                let mut groups = Vec::new();
                let mut start = 0;
                for k in 1..=n {
                    if k == n || time[order[k]] != time[order[start]] {
                        groups.push((start, k));
                        start = k;
                    }
                }
                Kind::Cox {
                    event,
                    order,
                    groups,
                }
            }
        };
        Self { n, kind }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_intercept(&self) -> bool {
        !matches!(self.kind, Kind::Cox { .. })
    }

    pub fn is_binomial(&self) -> bool {
        matches!(self.kind, Kind::Binomial(_))
    }

    /// Number of parameters for a design with `k` feature columns.
    pub fn n_params(&self, k: usize) -> usize {
        k + usize::from(self.has_intercept())
    }

    pub fn eta(&self, cols: &[&[f64]], theta: &[f64]) -> Vec<f64> {
        let off = usize::from(self.has_intercept());
        let b0 = if off == 1 { theta[0] } else { 0.0 };
        let mut eta = vec![b0; self.n];
        for (c, b) in cols.iter().zip(&theta[off..]) {
            if *b != 0.0 {
                eta.iter_mut().zip(c.iter()).for_each(|(e, x)| *e += b * x);
            }
        }
        eta
    }

    pub fn value(&self, cols: &[&[f64]], theta: &[f64]) -> f64 {
        self.value_eta(&self.eta(cols, theta))
    }

    pub fn value_eta(&self, eta: &[f64]) -> f64 {
        match &self.kind {
            Kind::Gaussian(y) => 0.5 * y.iter().zip(eta).map(|(y, e)| (y - e).powi(2)).sum::<f64>(),
            Kind::Binomial(y) => y.iter().zip(eta).map(|(y, e)| softplus(*e) - y * e).sum(),
            Kind::Cox {
                event,
                order,
                groups,
            } => {
                let m = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut s0 = 0.0;
                let mut value = 0.0;
                for &(a, b) in groups {
                    for &i in &order[a..b] {
                        s0 += (eta[i] - m).exp();
                    }
                    let log_s0 = s0.ln() + m;
                    for &i in &order[a..b] {
                        if event[i] {
                            value += log_s0 - eta[i];
                        }
                    }
                }
                value
            }
        }
    }

    /// Fitted probabilities for the logistic family.
    pub fn fitted_probabilities(&self, eta: &[f64]) -> Option<Vec<f64>> {
        match self.kind {
            Kind::Binomial(_) => Some(eta.iter().map(|e| logistic(*e)).collect()),
            _ => None,
        }
    }

    pub fn eval(&self, cols: &[&[f64]], theta: &[f64], want_hess: bool) -> Eval {
        let eta = self.eta(cols, theta);
        let off = usize::from(self.has_intercept());
        let k = cols.len() + off;
        let mut grad = vec![0.0; k];
        let mut hess = if want_hess {
            Some(vec![0.0; k * k])
        } else {
            None
        };
        let mut xi = vec![0.0; k];
        let fill_row = |i: usize, xi: &mut [f64]| {
            if off == 1 {
                xi[0] = 1.0;
            }
            for (slot, c) in xi[off..].iter_mut().zip(cols) {
                *slot = c[i];
            }
        };
        let value = match &self.kind {
            Kind::Gaussian(_) | Kind::Binomial(_) => {
                let mut value = 0.0;
                for i in 0..self.n {
                    let (v, d1, d2) = match &self.kind {
                        Kind::Gaussian(y) => {
                            let r = y[i] - eta[i];
                            (0.5 * r * r, -r, 1.0)
                        }
                        Kind::Binomial(y) => {
                            let mu = logistic(eta[i]);
                            (softplus(eta[i]) - y[i] * eta[i], mu - y[i], mu * (1.0 - mu))
                        }
                        Kind::Cox { .. } => unreachable!(),
                    };
                    value += v;
                    fill_row(i, &mut xi);
                    for (g, x) in grad.iter_mut().zip(&xi) {
                        *g += d1 * x;
                    }
                    if let Some(h) = hess.as_mut() {
                        for a in 0..k {
                            let w = d2 * xi[a];
                            for b in 0..=a {
                                h[a * k + b] += w * xi[b];
                            }
                        }
                    }
                }
                value
            }
            Kind::Cox {
                event,
                order,
                groups,
            } => {
                let m = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut s0 = 0.0;
                let mut s1 = vec![0.0; k];
                let mut s2 = if want_hess {
                    vec![0.0; k * k]
                } else {
                    Vec::new()
                };
                let mut value = 0.0;
                for &(a, b) in groups {
                    for &i in &order[a..b] {
                        let w = (eta[i] - m).exp();
                        s0 += w;
                        fill_row(i, &mut xi);
                        for (s, x) in s1.iter_mut().zip(&xi) {
                            *s += w * x;
                        }
                        if want_hess {
                            for r in 0..k {
                                let wx = w * xi[r];
                                for c in 0..=r {
                                    s2[r * k + c] += wx * xi[c];
                                }
                            }
                        }
                    }
                    let log_s0 = s0.ln() + m;
                    for &i in &order[a..b] {
                        if !event[i] {
                            continue;
                        }
                        value += log_s0 - eta[i];
                        for r in 0..k {
                            grad[r] += s1[r] / s0 - cols[r][i];
                        }
                        if let Some(h) = hess.as_mut() {
                            for r in 0..k {
                                let mr = s1[r] / s0;
                                for c in 0..=r {
                                    h[r * k + c] += s2[r * k + c] / s0 - mr * s1[c] / s0;
                                }
                            }
                        }
                    }
                }
                value
            }
        };
        let hess = hess.map(|mut h| {
            for a in 0..k {
                for b in 0..a {
                    h[b * k + a] = h[a * k + b];
                }
            }
            Matrix::new(k, k, h).unwrap_or_else(|_| Matrix::from_fn(k, k, |_, _| f64::NAN))
        });
        Eval { value, grad, hess }
    }
}

/// Unpenalized maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct MleFit {
    pub theta: Vec<f64>,
    /// Observed information (Hessian of the negative log-likelihood) at `theta`.
    pub information: Matrix,
    /// Sup-norm of the score at `theta`.
    pub grad_sup: f64,
    pub iterations: usize,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn pinned(lik: &Likelihood, eta: &[f64]) -> bool {
    lik.fitted_probabilities(eta)
        .is_some_and(|mu| mu.iter().any(|m| *m < PINNED || *m > 1.0 - PINNED))
}

/// Newton-Raphson with step-halving, started from zero (or from the
/// intercept-only solution for the logistic family).
pub fn fit_mle(lik: &Likelihood, cols: &[&[f64]]) -> Result<MleFit, GlmError> {
    let k = lik.n_params(cols.len());
    let mut theta = vec![0.0; k];
    if let Kind::Binomial(y) = lik.kind {
        let ybar = y.iter().sum::<f64>() / y.len() as f64;
        if ybar <= 0.0 || ybar >= 1.0 {
            return Err(GlmError::Separation);
        }
        theta[0] = (ybar / (1.0 - ybar)).ln();
    }
    let mut cur = lik.eval(cols, &theta, true);
    for it in 1..=MAX_NEWTON_STEPS {
        let hess = cur.hess.as_ref().expect("hessian requested");
        let factor = cholesky(hess).map_err(|_| {
            if pinned(lik, &lik.eta(cols, &theta)) {
                GlmError::Separation
            } else {
                GlmError::Singular
            }
        })?;
        let step = factor.solve(&cur.grad).map_err(|_| GlmError::Singular)?;
        let mut t = 1.0;
        let mut next = None;
        while t > 1e-10 {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, d)| a - t * d).collect();
            let v = lik.value(cols, &cand);
            if v.is_finite() && v <= cur.value + 1e-12 * cur.value.abs().max(1.0) {
                next = Some(cand);
                break;
            }
            t *= 0.5;
        }
        let Some(cand) = next else {
            // no further decrease possible: accept if already stationary
            if sup(&cur.grad) <= 1e-6 {
                break;
            }
            return Err(GlmError::NoConvergence { iterations: it });
        };
        let change = sup(&cand
            .iter()
            .zip(&theta)
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>());
        theta = cand;
        cur = lik.eval(cols, &theta, true);
        if pinned(lik, &lik.eta(cols, &theta)) {
            return Err(GlmError::Separation);
        }
        if sup(&cur.grad) <= 1e-9 || change <= 1e-12 * (1.0 + sup(&theta)) {
            return finish(theta, cur, it);
        }
        if it == MAX_NEWTON_STEPS {
            return Err(GlmError::NoConvergence { iterations: it });
        }
    }
    finish(theta, cur, MAX_NEWTON_STEPS)
}

fn finish(theta: Vec<f64>, cur: Eval, iterations: usize) -> Result<MleFit, GlmError> {
    let grad_sup = sup(&cur.grad);
    if grad_sup > 1e-6 {
        return Err(GlmError::NoConvergence { iterations });
    }
    Ok(MleFit {
        theta,
        information: cur.hess.expect("hessian requested"),
        grad_sup,
        iterations,
    })
}
