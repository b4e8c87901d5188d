//! Desparsified lasso, the comparator for MNR on linear models.
//!
//! The lasso fit is corrected coordinate by coordinate with the residual
//! `Z_j` of a nodewise lasso of `X_j` on the other features:
//! `β̂_bc,j = β̂_j + Z_jᵀ(y − Xβ̂) / Z_jᵀX_j`.
//! Everything is computed from the centered Gram matrix, so no `n × p`
//! residual matrix is formed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{DataError, Dataset, Family, Response};
use crate::mnr::{adjust_pvalues, z_score, Adjustment, InferenceRecord, CSV_COLUMNS};
use crate::numkit::{Dist, Matrix};
use crate::select::{centered, gaussian_path, gram, PenaltyKind, QuadProblem, SelectError};

/// `|Z_jᵀX_j| / n` at or below this marks feature `j` as degenerate.
pub const DEGENERATE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("desparsified lasso needs a gaussian response, got {0}")]
    WrongFamily(Family),
    #[error("level {0} outside (0, 1)")]
    InvalidLevel(f64),
    #[error("need n >= 3 and p >= 2 (n = {n}, p = {p})")]
    TooSmall { n: usize, p: usize },
    #[error("projection for feature {feature} is degenerate (|Z'X_j| ~ 0)")]
    DegenerateProjection { feature: usize },
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Output of [`desparsified_lasso`]. Interval fields are `None` for flagged
/// features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasedResult {
    pub level: f64,
    pub names: Vec<String>,
    pub beta_lasso: Vec<f64>,
    pub beta_bc: Vec<f64>,
    /// Row `j` of the estimated precision matrix, as `(feature, value)`
    /// pairs: `1/τ̂_j²` at `j` and `−γ̂_jk/τ̂_j²` elsewhere.
    #[serde(with = "crate::index1::nested_pairs")]
    pub theta_hat_rows: Vec<Vec<(usize, f64)>>,
    pub se: Vec<Option<f64>>,
    pub ci_low: Vec<Option<f64>>,
    pub ci_high: Vec<Option<f64>>,
    pub p_value: Vec<Option<f64>>,
    pub sigma_hat2: f64,
    #[serde(with = "crate::index1::vec")]
    pub lasso_support: Vec<usize>,
    /// Features whose projection was degenerate.
    #[serde(with = "crate::index1::vec")]
    pub flagged: Vec<usize>,
}

impl DebiasedResult {
    pub fn p(&self) -> usize {
        self.beta_bc.len()
    }

    pub fn width(&self, j: usize) -> Option<f64> {
        Some(self.ci_high[j]? - self.ci_low[j]?)
    }

    /// Whether the interval for `j` contains `value`; `None` if flagged.
    pub fn covers(&self, j: usize, value: f64) -> Option<bool> {
        Some(self.ci_low[j]? <= value && value <= self.ci_high[j]?)
    }

    /// Unflagged features as inference records (normal reference, the
    /// "subset" being every feature).
    pub fn records(&self) -> Vec<InferenceRecord> {
        let all: Vec<usize> = (0..self.p()).collect();
        (0..self.p())
            .filter_map(|j| {
                Some(InferenceRecord {
                    feature: j,
                    beta_hat: self.beta_bc[j],
                    se: self.se[j]?,
                    ci_low: self.ci_low[j]?,
                    ci_high: self.ci_high[j]?,
                    p_value: self.p_value[j]?,
                    df: None,
                    subset: all.clone(),
                    score_sup: None,
                    trimmed: false,
                })
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// CSV with the same columns as the MNR report.
    pub fn to_csv(&self) -> String {
        let records = self.records();
        let p: Vec<f64> = records.iter().map(|r| r.p_value).collect();
        let holm = adjust_pvalues(&p, Adjustment::Holm).expect("p-values in [0, 1]");
        let bh = adjust_pvalues(&p, Adjustment::Bh).expect("p-values in [0, 1]");
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS).expect("in-memory write");
        for (i, r) in records.iter().enumerate() {
            w.write_record([
                self.names[r.feature].clone(),
                r.beta_hat.to_string(),
                r.se.to_string(),
                r.ci_low.to_string(),
                r.ci_high.to_string(),
                r.p_value.to_string(),
                holm[i].to_string(),
                bh[i].to_string(),
                z_score(r.p_value).to_string(),
                "inf".to_string(),
                r.subset.len().to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

struct NodeProjection {
    gamma: Vec<(usize, f64)>,
    /// `Z_jᵀX_j / n`.
    zx: f64,
    /// `Z_jᵀZ_j / n`.
    zz: f64,
    /// `Z_jᵀr / n` for the lasso residual `r`.
    zr: f64,
}

fn project(h: &Matrix, g: &[f64], j: usize, n: usize) -> Result<NodeProjection, SelectError> {
    let p = h.rows();
    let vars: Vec<usize> = (0..p).filter(|&k| k != j).collect();
    let q = QuadProblem {
        h,
        c: vars.iter().map(|&k| h.get(k, j)).collect(),
        vars: vars.clone(),
        yy: h.get(j, j),
        n,
    };
    let fit = gaussian_path(&q, PenaltyKind::Lasso)?;
    let gamma: Vec<(usize, f64)> = vars
        .into_iter()
        .zip(fit.beta)
        .filter(|(_, b)| *b != 0.0)
        .collect();
    let hg = |row: usize| gamma.iter().map(|&(k, b)| h.get(row, k) * b).sum::<f64>();
    let zx = h.get(j, j) - hg(j);
    let quad: f64 = gamma.iter().map(|&(k, b)| b * hg(k)).sum();
    let zz = (h.get(j, j) - 2.0 * hg(j) + quad).max(0.0);
    let zr = g[j] - gamma.iter().map(|&(k, b)| g[k] * b).sum::<f64>();
    Ok(NodeProjection { gamma, zx, zz, zr })
}

/// Desparsified lasso with BIC-tuned lasso and nodewise fits over all
/// features, `σ̂² = RSS/(n − |supp β̂|)` and normal-quantile intervals.
pub fn desparsified_lasso(ds: &Dataset, level: f64) -> Result<DebiasedResult, BaselineError> {
    let Response::Gaussian { y } = ds.response() else {
        return Err(BaselineError::WrongFamily(ds.family()));
    };
    if !(level > 0.0 && level < 1.0) {
        return Err(BaselineError::InvalidLevel(level));
    }
    let (n, p) = (ds.n(), ds.p());
    if n < 3 || p < 2 {
        return Err(BaselineError::TooSmall { n, p });
    }
    let xc: Vec<Vec<f64>> = ds.columns().iter().map(|c| centered(c)).collect();
    let yc = centered(y);
    let h = gram(&xc);
    let nf = n as f64;
    let c: Vec<f64> = xc.iter().map(|x| crate::numkit::dot(x, &yc) / nf).collect();
    let q = QuadProblem {
        h: &h,
        vars: (0..p).collect(),
        c: c.clone(),
        yy: crate::numkit::dot(&yc, &yc) / nf,
        n,
    };
    let fit = gaussian_path(&q, PenaltyKind::Lasso)?;
    let beta = fit.beta;
    let support: Vec<usize> = (0..p).filter(|&k| beta[k] != 0.0).collect();
    let rss = q.rss_over_n(&beta) * nf;
    let dof = n.saturating_sub(support.len()).max(1);
    let sigma_hat2 = rss / dof as f64;
    // X_cᵀr / n for the lasso residual r
    let g: Vec<f64> = (0..p)
        .map(|a| c[a] - support.iter().map(|&k| h.get(a, k) * beta[k]).sum::<f64>())
        .collect();

    let nodes: Vec<Result<NodeProjection, SelectError>> = (0..p)
        .into_par_iter()
        .map(|j| project(&h, &g, j, n))
        .collect();
    let z = Dist::StdNormal
        .quantile(0.5 + 0.5 * level)
        .expect("level in (0, 1)");
    let mut out = DebiasedResult {
        level,
        names: ds.names().to_vec(),
        beta_lasso: beta.clone(),
        beta_bc: beta.clone(),
        theta_hat_rows: Vec::with_capacity(p),
        se: vec![None; p],
        ci_low: vec![None; p],
        ci_high: vec![None; p],
        p_value: vec![None; p],
        sigma_hat2,
        lasso_support: support,
        flagged: Vec::new(),
    };
    for (j, node) in nodes.into_iter().enumerate() {
        let node = node?;
        if node.zx.abs() <= DEGENERATE_TOL {
            log::warn!("{}", BaselineError::DegenerateProjection { feature: j + 1 });
            out.flagged.push(j);
            out.theta_hat_rows.push(Vec::new());
            continue;
        }
        let tau2 = node.zx;
        let mut row = vec![(j, 1.0 / tau2)];
        row.extend(node.gamma.iter().map(|&(k, b)| (k, -b / tau2)));
        row.sort_by_key(|e| e.0);
        out.theta_hat_rows.push(row);

        let b = beta[j] + node.zr / node.zx;
        let se = sigma_hat2.sqrt() * node.zz.sqrt() / (node.zx.abs() * nf.sqrt());
        out.beta_bc[j] = b;
        out.se[j] = Some(se);
        out.ci_low[j] = Some(b - z * se);
        out.ci_high[j] = Some(b + z * se);
        out.p_value[j] = Some(if se > 0.0 {
            Dist::StdNormal.two_sided_p(b / se).clamp(0.0, 1.0)
        } else if b == 0.0 {
            1.0
        } else {
            0.0
        });
    }
    Ok(out)
}
