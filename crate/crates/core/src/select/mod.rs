//! Variable screening and penalized selection of the reduced active set.

mod cd;
mod isis;
mod path;
mod penalty;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{DataError, Dataset, Response};
use crate::glm::Likelihood;
use crate::numkit::Matrix;

pub use cd::{CoordinateDescent, CD_TOL, MAX_SWEEPS};
use isis::quad_conditional;
pub use isis::ISIS_MAX_ROUNDS;
pub use path::{
    gaussian_path, gaussian_path_tuned, lambda_grid, GlmProblem, PathFit, QuadProblem, Tuning,
    BIC_PATIENCE, EBIC_GAMMA, N_LAMBDA,
};
pub use penalty::{PenaltyKind, PenaltySpec, MCP_GAMMA, SCAD_A};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectError {
    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),
    #[error("invalid cap: {0}")]
    InvalidCap(String),
    #[error("coordinate descent did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("penalized fit separated the classes")]
    Separation,
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectMethod {
    Sis,
    Lasso,
    Scad,
    Mcp,
    SisThenLasso,
    SisThenScad,
    SisThenMcp,
}

impl SelectMethod {
    pub fn penalty(&self) -> Option<PenaltyKind> {
        match self {
            SelectMethod::Sis => None,
            SelectMethod::Lasso | SelectMethod::SisThenLasso => Some(PenaltyKind::Lasso),
            SelectMethod::Scad | SelectMethod::SisThenScad => Some(PenaltyKind::scad()),
            SelectMethod::Mcp | SelectMethod::SisThenMcp => Some(PenaltyKind::mcp()),
        }
    }

    pub fn screens_first(&self) -> bool {
        matches!(
            self,
            SelectMethod::SisThenLasso | SelectMethod::SisThenScad | SelectMethod::SisThenMcp
        )
    }
}

impl std::str::FromStr for SelectMethod {
    type Err = SelectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
            .map_err(|_| SelectError::InvalidPenalty(format!("unknown selection method '{s}'")))
    }
}

/// Size limits for screening and for the selected model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub screen_cap: usize,
    pub model_cap: usize,
}

/// `⌊n / ln n⌋`, the default screening size.
pub fn default_screen_cap(n: usize) -> usize {
    ((n as f64 / (n as f64).ln()).floor() as usize).max(1)
}

/// `⌊√n⌋ − 1`, the default model and blanket size.
pub fn default_model_cap(n: usize) -> usize {
    ((n as f64).sqrt().floor() as usize)
        .saturating_sub(1)
        .max(1)
}

/// `⌊√n / ln n⌋`, the cap used by the screening-based variant.
pub fn screening_cap(n: usize) -> usize {
    (((n as f64).sqrt() / (n as f64).ln()).floor() as usize).max(1)
}

impl Caps {
    pub fn full(n: usize) -> Self {
        Self {
            screen_cap: default_screen_cap(n),
            model_cap: default_model_cap(n),
        }
    }

    pub fn screening(n: usize) -> Self {
        let c = screening_cap(n);
        Self {
            screen_cap: c,
            model_cap: c,
        }
    }

    pub fn validate(&self) -> Result<(), SelectError> {
        if self.screen_cap == 0 || self.model_cap == 0 {
            return Err(SelectError::InvalidCap("caps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected features, ascending.
    #[serde(with = "crate::index1::vec")]
    pub active: Vec<usize>,
    pub method: SelectMethod,
    pub lambda_path_used: Vec<f64>,
    pub lambda_selected: Option<f64>,
    /// Coefficients (or screening scores for SIS) of the active features.
    #[serde(with = "crate::index1::pairs")]
    pub coefficients: Vec<(usize, f64)>,
}

impl SelectionResult {
    pub fn contains(&self, j: usize) -> bool {
        self.active.binary_search(&j).is_ok()
    }
}

/// Indices of the `cap` largest scores; ties go to the lower index.
pub fn top_k(scores: &[f64], cap: usize, exclude: Option<usize>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| Some(i) != exclude).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(cap);
    idx
}

pub fn centered(col: &[f64]) -> Vec<f64> {
    let m = col.iter().sum::<f64>() / col.len() as f64;
    col.iter().map(|v| v - m).collect()
}

/// `X_cᵀX_c / n` for centered columns.
pub fn gram(cols: &[Vec<f64>]) -> Matrix {
    let k = cols.len();
    let n = cols.first().map_or(1, Vec::len) as f64;
    let mut h = Matrix::zeros(k.max(1), k.max(1));
    if k == 0 {
        return h;
    }
    for a in 0..k {
        for b in 0..=a {
            let v = crate::numkit::dot(&cols[a], &cols[b]) / n;
            h.set(a, b, v);
            h.set(b, a, v);
        }
    }
    h
}

/// Absolute marginal association of every feature with the response.
pub fn marginal_scores(ds: &Dataset) -> Vec<f64> {
    let cols = ds.columns();
    match ds.response() {
        Response::Gaussian { y } => {
            let yc = centered(y);
            let yn = crate::numkit::dot(&yc, &yc).sqrt();
            cols.iter()
                .map(|c| {
                    let xc = centered(c);
                    let xn = crate::numkit::dot(&xc, &xc).sqrt();
                    if xn == 0.0 || yn == 0.0 {
                        0.0
                    } else {
                        (crate::numkit::dot(&xc, &yc) / (xn * yn)).abs()
                    }
                })
                .collect()
        }
        Response::Binomial { y } => {
            let n = y.len() as f64;
            let ybar = y.iter().sum::<f64>() / n;
            cols.iter()
                .map(|c| {
                    let xc = centered(c);
                    let u: f64 = xc.iter().zip(y.iter()).map(|(x, y)| x * (y - ybar)).sum();
                    let info = ybar * (1.0 - ybar) * crate::numkit::dot(&xc, &xc);
                    if info > 0.0 {
                        u.abs() / info.sqrt()
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        Response::Cox { time, event } => {
            let n = time.len();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| time[b].total_cmp(&time[a]).then(a.cmp(&b)));
            cols.iter()
                .map(|c| {
                    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
                    let (mut u, mut info) = (0.0, 0.0);
                    let mut k = 0;
                    while k < n {
                        let t = time[order[k]];
                        let mut e = k;
                        while e < n && time[order[e]] == t {
                            let x = c[order[e]];
                            s0 += 1.0;
                            s1 += x;
                            s2 += x * x;
                            e += 1;
                        }
                        let mean = s1 / s0;
                        for &i in &order[k..e] {
                            if event[i] {
                                u += c[i] - mean;
                                info += s2 / s0 - mean * mean;
                            }
                        }
                        k = e;
                    }
                    if info > 0.0 {
                        u.abs() / info.sqrt()
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    }
}

/// Sure independence screening: the `cap` features with the largest
/// marginal association (ties to the lower index).
pub fn sis_screen(ds: &Dataset, cap: usize) -> Result<SelectionResult, SelectError> {
    if cap == 0 {
        return Err(SelectError::InvalidCap("screening cap must be >= 1".into()));
    }
    let scores = marginal_scores(ds);
    let mut active = top_k(&scores, cap, None);
    let coefficients = active.iter().map(|&j| (j, scores[j])).collect();
    active.sort_unstable();
    Ok(SelectionResult {
        active,
        method: SelectMethod::Sis,
        lambda_path_used: Vec::new(),
        lambda_selected: None,
        coefficients,
    })
}

/// Penalized fit at a single lambda on all features.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedFit {
    pub intercept: f64,
    pub beta: Vec<f64>,
    pub sweeps: usize,
}

impl PenalizedFit {
    pub fn support(&self) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

pub fn fit_penalized(ds: &Dataset, pen: &PenaltySpec) -> Result<PenalizedFit, SelectError> {
    pen.kind.validate()?;
    let cols = ds.columns();
    let p = cols.len();
    match ds.response() {
        Response::Gaussian { y } => {
            let xc: Vec<Vec<f64>> = cols.iter().map(|c| centered(c)).collect();
            let yc = centered(y);
            let n = y.len() as f64;
            let h = gram(&xc);
            let c: Vec<f64> = xc.iter().map(|x| crate::numkit::dot(x, &yc) / n).collect();
            let mut cd = CoordinateDescent::new(&h, (0..p).collect(), c, pen.kind, pen.lambda);
            cd.solve(CD_TOL)?;
            let beta = cd.beta().to_vec();
            let ybar = y.iter().sum::<f64>() / n;
            let intercept = ybar
                - cols
                    .iter()
                    .zip(&beta)
                    .map(|(c, b)| b * c.iter().sum::<f64>() / n)
                    .sum::<f64>();
            Ok(PenalizedFit {
                intercept,
                beta,
                sweeps: cd.sweeps(),
            })
        }
        resp => {
            let lik = Likelihood::new(resp);
            let prob = GlmProblem {
                lik: &lik,
                cols: cols.iter().map(Vec::as_slice).collect(),
            };
            let mut theta = vec![0.0; lik.n_params(p)];
            let mut sweeps = 0;
            prob.fit_at(pen.kind, pen.lambda, &mut theta, &mut sweeps)?;
            let off = usize::from(lik.has_intercept());
            Ok(PenalizedFit {
                intercept: if off == 1 { theta[0] } else { 0.0 },
                beta: theta[off..].to_vec(),
                sweeps,
            })
        }
    }
}

/// Tuned penalized path on a subset of features of `ds`.
pub fn penalized_path(
    ds: &Dataset,
    vars: &[usize],
    kind: PenaltyKind,
    tuning: Tuning,
) -> Result<PathFit, SelectError> {
    let cols: Vec<Vec<f64>> = vars.iter().map(|&j| ds.x().column(j)).collect();
    match ds.response() {
        Response::Gaussian { y } => {
            let xc: Vec<Vec<f64>> = cols.iter().map(|c| centered(c)).collect();
            let yc = centered(y);
            let n = y.len();
            let h = gram(&xc);
            let q = QuadProblem {
                h: &h,
                vars: (0..vars.len()).collect(),
                c: xc
                    .iter()
                    .map(|x| crate::numkit::dot(x, &yc) / n as f64)
                    .collect(),
                yy: crate::numkit::dot(&yc, &yc) / n as f64,
                n,
            };
            gaussian_path_tuned(&q, kind, tuning, None)
        }
        resp => {
            let lik = Likelihood::new(resp);
            GlmProblem {
                lik: &lik,
                cols: cols.iter().map(Vec::as_slice).collect(),
            }
            .path_tuned(kind, tuning, None)
        }
    }
}

/// Penalized path on a screened set followed by conditional re-screening
/// rounds; see [`ISIS_MAX_ROUNDS`].
fn screened_path(
    ds: &Dataset,
    first: Vec<usize>,
    cap: usize,
    kind: PenaltyKind,
    tuning: Tuning,
) -> Result<(Vec<usize>, PathFit), SelectError> {
    let cols = ds.columns();
    match ds.response() {
        Response::Gaussian { y } => {
            let xc: Vec<Vec<f64>> = cols.iter().map(|c| centered(c)).collect();
            let yc = centered(y);
            let n = y.len();
            let h = gram(&xc);
            let c: Vec<f64> = xc
                .iter()
                .map(|x| crate::numkit::dot(x, &yc) / n as f64)
                .collect();
            let yy = crate::numkit::dot(&yc, &yc) / n as f64;
            isis::iterate(
                cap,
                first,
                |vars| {
                    let q = QuadProblem {
                        h: &h,
                        vars: vars.to_vec(),
                        c: vars.iter().map(|&k| c[k]).collect(),
                        yy,
                        n,
                    };
                    gaussian_path_tuned(&q, kind, tuning, None)
                },
                |active| quad_conditional(&h, &c, active, |_| true),
            )
        }
        resp => {
            let lik = Likelihood::new(resp);
            isis::iterate(
                cap,
                first,
                |vars| penalized_path(ds, vars, kind, tuning),
                |active| isis::glm_conditional(&lik, &cols, active),
            )
        }
    }
}

/// Keeps the `cap` largest |coefficients| (ties to the lower index).
pub fn truncate_support(coef: &[(usize, f64)], cap: usize) -> Vec<(usize, f64)> {
    let mut v: Vec<(usize, f64)> = coef.iter().copied().filter(|(_, b)| *b != 0.0).collect();
    v.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    v.truncate(cap);
    v.sort_by_key(|x| x.0);
    v
}

/// Variable selection for the response model. Screening methods run SIS to
/// `screen_cap`, a tuned penalized path on the survivors, and then up to
/// [`ISIS_MAX_ROUNDS`] conditional re-screening rounds. The path point is
/// chosen by the extended BIC over all `p` candidates and the support is cut
/// to `model_cap` by coefficient size.
pub fn select_variables(
    ds: &Dataset,
    method: SelectMethod,
    caps: Caps,
) -> Result<SelectionResult, SelectError> {
    caps.validate()?;
    let Some(kind) = method.penalty() else {
        return sis_screen(ds, caps.model_cap.min(caps.screen_cap));
    };
    let tuning = Tuning::ExtendedBic {
        gamma: EBIC_GAMMA,
        pool: ds.p(),
    };
    let (vars, fit) = if method.screens_first() {
        screened_path(
            ds,
            sis_screen(ds, caps.screen_cap)?.active,
            caps.screen_cap,
            kind,
            tuning,
        )?
    } else {
        let vars: Vec<usize> = (0..ds.p()).collect();
        let fit = penalized_path(ds, &vars, kind, tuning)?;
        (vars, fit)
    };
    let coef: Vec<(usize, f64)> = vars.iter().copied().zip(fit.beta.iter().copied()).collect();
    let kept = truncate_support(&coef, caps.model_cap);
    Ok(SelectionResult {
        active: kept.iter().map(|x| x.0).collect(),
        method,
        lambda_selected: fit.lambda(),
        lambda_path_used: fit.lambdas,
        coefficients: kept,
    })
}
