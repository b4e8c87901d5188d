//! Low-dimensional regressions on `D_j` and the inference drawn from them.

use serde::{Deserialize, Serialize};

use super::MnrError;
use crate::datagen::{Dataset, Family, Response};
use crate::glm::{fit_mle, GlmError, Likelihood};
use crate::numkit::{cholesky, Dist, Matrix};

/// Inference for one coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRecord {
    #[serde(with = "crate::index1::one")]
    pub feature: usize,
    pub beta_hat: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    /// Student-t degrees of freedom; `None` for the normal approximation.
    pub df: Option<usize>,
    #[serde(with = "crate::index1::vec")]
    pub subset: Vec<usize>,
    /// Sup-norm of the score at the MLE (likelihood fits only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_sup: Option<f64>,
    /// True when `D_j` had to be cut down to the size limit.
    #[serde(default)]
    pub trimmed: bool,
}

impl InferenceRecord {
    pub fn width(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

/// Reference distribution for a Wald or t statistic.
pub(crate) fn reference(df: Option<usize>) -> Dist {
    match df {
        Some(d) => Dist::StudentT(d as f64),
        None => Dist::StdNormal,
    }
}

/// Two-sided critical value at confidence `level`.
pub(crate) fn critical(df: Option<usize>, level: f64) -> f64 {
    reference(df)
        .quantile(0.5 + 0.5 * level)
        .expect("level validated in (0, 1)")
}

/// Coefficients and covariance from one subset fit.
#[derive(Debug, Clone)]
pub(crate) struct SubsetFit {
    pub subset: Vec<usize>,
    pub coef: Vec<f64>,
    /// Estimated covariance of `coef`.
    pub cov: Matrix,
    pub df: Option<usize>,
    pub score_sup: Option<f64>,
}

impl SubsetFit {
    pub fn position(&self, j: usize) -> Option<usize> {
        self.subset.iter().position(|&k| k == j)
    }

    pub fn record(&self, j: usize, level: f64) -> InferenceRecord {
        let a = self.position(j).expect("feature in subset");
        let beta_hat = self.coef[a];
        let se = self.cov.get(a, a).max(0.0).sqrt();
        let q = critical(self.df, level);
        let stat = beta_hat / se;
        let p_value = if se > 0.0 {
            reference(self.df).two_sided_p(stat).clamp(0.0, 1.0)
        } else if beta_hat == 0.0 {
            1.0
        } else {
            0.0
        };
        InferenceRecord {
            feature: j,
            beta_hat,
            se,
            ci_low: beta_hat - q * se,
            ci_high: beta_hat + q * se,
            p_value,
            df: self.df,
            subset: self.subset.clone(),
            score_sup: self.score_sup,
            trimmed: false,
        }
    }
}

/// Largest admissible `|D|` for a family.
pub fn subset_limit(family: Family, n: usize) -> usize {
    match family {
        Family::Gaussian => n.saturating_sub(2),
        Family::Binomial | Family::Cox => n / 4,
    }
}

fn check_subset(ds: &Dataset, subset: &[usize]) -> Result<Vec<usize>, MnrError> {
    let mut s = subset.to_vec();
    s.sort_unstable();
    s.dedup();
    if let Some(&bad) = s.iter().find(|&&k| k >= ds.p()) {
        return Err(MnrError::InvalidConfig(format!(
            "feature {} outside 1..={}",
            bad + 1,
            ds.p()
        )));
    }
    let limit = subset_limit(ds.family(), ds.n());
    if s.len() > limit || s.is_empty() {
        return Err(MnrError::SubsetTooLarge {
            size: s.len(),
            limit,
        });
    }
    Ok(s)
}

pub(crate) fn fit_subset(ds: &Dataset, subset: &[usize]) -> Result<SubsetFit, MnrError> {
    let subset = check_subset(ds, subset)?;
    match ds.response() {
        Response::Gaussian { y } => ols(ds, y, subset),
        _ => glm(ds, subset),
    }
}

fn ols(ds: &Dataset, y: &[f64], subset: Vec<usize>) -> Result<SubsetFit, MnrError> {
    let n = ds.n();
    let k = subset.len();
    let m = k + 1;
    let x = ds.x();
    let mut g = vec![0.0; m * m];
    let mut xty = vec![0.0; m];
    let mut row = vec![0.0; m];
    for i in 0..n {
        row[0] = 1.0;
        let xi = x.row(i);
        for (slot, &j) in row[1..].iter_mut().zip(&subset) {
            *slot = xi[j];
        }
        for a in 0..m {
            xty[a] += row[a] * y[i];
            for b in 0..=a {
                g[a * m + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            g[b * m + a] = g[a * m + b];
        }
    }
    let g = Matrix::new(m, m, g).map_err(|_| MnrError::SingularDesign)?;
    let factor = cholesky(&g).map_err(|_| MnrError::SingularDesign)?;
    let theta = factor.solve(&xty).map_err(|_| MnrError::SingularDesign)?;
    let rss: f64 = (0..n)
        .map(|i| {
            let xi = x.row(i);
            let fit = theta[0]
                + subset
                    .iter()
                    .zip(&theta[1..])
                    .map(|(&j, b)| xi[j] * b)
                    .sum::<f64>();
            (y[i] - fit).powi(2)
        })
        .sum();
    let df = n - k - 1;
    let sigma2 = rss / df as f64;
    let inv = factor.inverse();
    let cov = Matrix::from_fn(k, k, |a, b| sigma2 * inv.get(a + 1, b + 1));
    Ok(SubsetFit {
        subset,
        coef: theta[1..].to_vec(),
        cov,
        df: Some(df),
        score_sup: None,
    })
}

fn glm(ds: &Dataset, subset: Vec<usize>) -> Result<SubsetFit, MnrError> {
    let cols: Vec<Vec<f64>> = subset.iter().map(|&j| ds.x().column(j)).collect();
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let lik = Likelihood::new(ds.response());
    let fit = fit_mle(&lik, &refs).map_err(|e| match e {
        GlmError::Separation => MnrError::Separation,
        GlmError::NoConvergence { iterations } => MnrError::NoConvergence { iterations },
        GlmError::Singular => MnrError::SingularDesign,
    })?;
    let off = usize::from(lik.has_intercept());
    let factor = cholesky(&fit.information).map_err(|_| MnrError::SingularDesign)?;
    let inv = factor.inverse();
    let k = subset.len();
    Ok(SubsetFit {
        subset,
        coef: fit.theta[off..].to_vec(),
        cov: Matrix::from_fn(k, k, |a, b| inv.get(a + off, b + off)),
        df: None,
        score_sup: Some(fit.grad_sup),
    })
}

pub(crate) fn validate_level(level: f64) -> Result<(), MnrError> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(MnrError::InvalidConfig(format!(
            "level {level} outside (0, 1)"
        )))
    }
}

fn marginal(
    ds: &Dataset,
    j: usize,
    subset: &[usize],
    level: f64,
) -> Result<InferenceRecord, MnrError> {
    validate_level(level)?;
    if !subset.contains(&j) {
        return Err(MnrError::InvalidConfig(format!(
            "feature {} not in its subset",
            j + 1
        )));
    }
    Ok(fit_subset(ds, subset)?.record(j, level))
}

/// OLS of `y` on an intercept and `X_D` with Student-t inference for `β_j`.
pub fn subset_ols_infer(
    ds: &Dataset,
    j: usize,
    subset: &[usize],
    level: f64,
) -> Result<InferenceRecord, MnrError> {
    if ds.family() != Family::Gaussian {
        return Err(MnrError::WrongFamily(ds.family()));
    }
    marginal(ds, j, subset, level)
}

/// Logistic or Cox maximum likelihood on `X_D` with Wald inference for `β_j`.
pub fn subset_glm_infer(
    ds: &Dataset,
    j: usize,
    subset: &[usize],
    level: f64,
) -> Result<InferenceRecord, MnrError> {
    if ds.family() == Family::Gaussian {
        return Err(MnrError::WrongFamily(ds.family()));
    }
    marginal(ds, j, subset, level)
}

/// Dispatches on the family.
pub fn subset_infer(
    ds: &Dataset,
    j: usize,
    subset: &[usize],
    level: f64,
) -> Result<InferenceRecord, MnrError> {
    marginal(ds, j, subset, level)
}
