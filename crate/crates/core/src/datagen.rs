//! Synthetic designs and responses for the simulation studies.
//!
//! Three feature designs are supported: a Toeplitz covariance
//! `Σ_ij = ρ^|i-j|`, a banded AR(2) precision matrix, and equi-correlation.
//! Responses come from a linear, logistic or Cox model. The Cox event time is
//! Weibull with shape 1 and scale `λ0·exp(-xᵀβ)`, so the hazard is
//! `exp(xᵀβ)/λ0` and a larger linear predictor means earlier events.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkit::{cholesky, Matrix, NumError, SpdFactor};
use crate::rng::{derive_seed, purpose, stream};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("column {} is constant", .index + 1)]
    ConstantColumn { index: usize },
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error(transparent)]
    Num(#[from] NumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum CovKind {
    Toeplitz { rho: f64 },
    Ar2Precision,
    Equicorr { rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovSpec {
    #[serde(flatten)]
    pub kind: CovKind,
    pub p: usize,
}

impl CovSpec {
    pub fn new(kind: CovKind, p: usize) -> Result<Self, DataError> {
        let spec = Self { kind, p };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.p == 0 {
            return Err(DataError::InvalidSpec("dimension p must be >= 1".into()));
        }
        match self.kind {
            CovKind::Toeplitz { rho } | CovKind::Equicorr { rho } if !(rho > 0.0 && rho < 1.0) => {
                Err(DataError::InvalidSpec(format!(
                    "rho = {rho} must lie in (0, 1)"
                )))
            }
            _ => Ok(()),
        }
    }

    /// True when [`build_cov`] returns a precision matrix rather than a covariance.
    pub fn is_precision(&self) -> bool {
        matches!(self.kind, CovKind::Ar2Precision)
    }
}

/// Covariance (Toeplitz, equi-correlation) or precision (AR(2)) matrix of a design.
pub fn build_cov(spec: &CovSpec) -> Result<Matrix, DataError> {
    spec.validate()?;
    let p = spec.p;
    let m = match spec.kind {
        CovKind::Toeplitz { rho } => Matrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32)),
        CovKind::Ar2Precision => Matrix::from_fn(p, p, |i, j| match i.abs_diff(j) {
            0 => 1.0,
            1 => 0.5,
            2 => 0.25,
            _ => 0.0,
        }),
        CovKind::Equicorr { rho } => Matrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho }),
    };
    Ok(m)
}

/// Draws rows from `N(0, Σ)` given either `Σ` or `Θ = Σ⁻¹`.
///
/// The matrix is factored once. Column `j` of the standard-normal draws comes
/// from its own stream derived from `(seed, j)`.
#[derive(Debug, Clone)]
pub struct MvnSampler {
    factor: SpdFactor,
    precision: bool,
}

impl MvnSampler {
    pub fn new(matrix: &Matrix, is_precision: bool) -> Result<Self, DataError> {
        Ok(Self {
            factor: cholesky(matrix)?,
            precision: is_precision,
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    pub fn sample(&self, n: usize, seed: u64) -> Matrix {
        let p = self.dim();
        let mut z = vec![0.0; n * p];
        for j in 0..p {
            let mut rng = stream(derive_seed(seed, &[j as u64]));
            for i in 0..n {
                z[i * p + j] = rng.sample(StandardNormal);
            }
        }
        let l = self.factor.lower();
        let mut out = vec![0.0; n * p];
        for (zi, xi) in z.chunks_exact(p).zip(out.chunks_exact_mut(p)) {
            if self.precision {
                // Θ = L Lᵀ: x = L⁻ᵀ z has covariance Θ⁻¹
                xi.copy_from_slice(zi);
                self.factor.backward_in_place(xi);
            } else {
                for (a, x) in xi.iter_mut().enumerate() {
                    *x = l.row(a)[..=a]
                        .iter()
                        .zip(&zi[..=a])
                        .map(|(u, v)| u * v)
                        .sum();
                }
            }
        }
        Matrix::new(n, p, out).expect("finite draws")
    }
}

pub fn sample_mvn(
    matrix: &Matrix,
    is_precision: bool,
    n: usize,
    seed: u64,
) -> Result<Matrix, DataError> {
    if n == 0 {
        return Err(DataError::InvalidSpec("n must be >= 1".into()));
    }
    Ok(MvnSampler::new(matrix, is_precision)?.sample(n, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Binomial,
    Cox,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
            Family::Cox => "cox",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "linear" => Ok(Family::Gaussian),
            "binomial" | "logistic" => Ok(Family::Binomial),
            "cox" | "survival" => Ok(Family::Cox),
            other => Err(DataError::InvalidSpec(format!("unknown family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    Gaussian { sigma2: f64 },
    Binomial,
    Cox { lambda0: f64, lambda_c: f64 },
}

impl FamilySpec {
    pub fn family(&self) -> Family {
        match self {
            FamilySpec::Gaussian { .. } => Family::Gaussian,
            FamilySpec::Binomial => Family::Binomial,
            FamilySpec::Cox { .. } => Family::Cox,
        }
    }
}

/// True regression model used to generate a response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub family: FamilySpec,
    /// Ignored for Cox, which has no intercept.
    pub intercept: f64,
    pub beta: Vec<f64>,
}

impl ModelSpec {
    pub fn new(family: FamilySpec, intercept: f64, beta: Vec<f64>) -> Result<Self, DataError> {
        let m = Self {
            family,
            intercept,
            beta,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.beta.is_empty() {
            return Err(DataError::InvalidSpec(
                "beta must have at least one entry".into(),
            ));
        }
        if self.beta.iter().any(|b| !b.is_finite()) || !self.intercept.is_finite() {
            return Err(DataError::InvalidSpec("coefficients must be finite".into()));
        }
        match self.family {
            FamilySpec::Gaussian { sigma2 } if !(sigma2 > 0.0) => Err(DataError::InvalidSpec(
                format!("sigma2 = {sigma2} must be > 0"),
            )),
            FamilySpec::Cox { lambda0, lambda_c } if !(lambda0 > 0.0 && lambda_c > 0.0) => Err(
                DataError::InvalidSpec("lambda0 and lambda_c must be > 0".into()),
            ),
            _ => Ok(()),
        }
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    /// Indices of the nonzero coefficients (0-based, ascending).
    pub fn active_set(&self) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Parses the `index:value,...` coefficient grammar with 1-based indices.
pub fn parse_beta_spec(spec: &str, p: usize) -> Result<Vec<f64>, DataError> {
    let mut beta = vec![0.0; p];
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (idx, val) = item
            .split_once(':')
            .ok_or_else(|| DataError::InvalidSpec(format!("'{item}' is not index:value")))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| DataError::InvalidSpec(format!("bad index in '{item}'")))?;
        let val: f64 = val
            .trim()
            .parse()
            .map_err(|_| DataError::InvalidSpec(format!("bad value in '{item}'")))?;
        if idx == 0 || idx > p {
            return Err(DataError::InvalidSpec(format!(
                "index {idx} outside 1..={p}"
            )));
        }
        beta[idx - 1] = val;
    }
    Ok(beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Response {
    Gaussian { y: Vec<f64> },
    Binomial { y: Vec<f64> },
    Cox { time: Vec<f64>, event: Vec<bool> },
}

impl Response {
    pub fn family(&self) -> Family {
        match self {
            Response::Gaussian { .. } => Family::Gaussian,
            Response::Binomial { .. } => Family::Binomial,
            Response::Cox { .. } => Family::Cox,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Response::Gaussian { y } | Response::Binomial { y } => y.len(),
            Response::Cox { time, .. } => time.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Design matrix plus response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Matrix,
    response: Response,
    names: Vec<String>,
    standardized: bool,
}

impl Dataset {
    pub fn new(
        x: Matrix,
        response: Response,
        names: Option<Vec<String>>,
    ) -> Result<Self, DataError> {
        let n = x.rows();
        if n < 2 {
            return Err(DataError::InvalidSpec("need at least 2 samples".into()));
        }
        if response.len() != n {
            return Err(DataError::DimensionMismatch {
                expected: n,
                got: response.len(),
            });
        }
        match &response {
            Response::Gaussian { y } => {
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(DataError::InvalidResponse("non-finite response".into()));
                }
            }
            Response::Binomial { y } => {
                if y.iter().any(|v| *v != 0.0 && *v != 1.0) {
                    return Err(DataError::InvalidResponse(
                        "binomial response must be 0/1".into(),
                    ));
                }
            }
            Response::Cox { time, event } => {
                if event.len() != n {
                    return Err(DataError::DimensionMismatch {
                        expected: n,
                        got: event.len(),
                    });
                }
                if time.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                    return Err(DataError::InvalidResponse(
                        "survival times must be > 0".into(),
                    ));
                }
            }
        }
        let names = match names {
            Some(names) if names.len() != x.cols() => {
                return Err(DataError::DimensionMismatch {
                    expected: x.cols(),
                    got: names.len(),
                })
            }
            Some(names) => names,
            None => (1..=x.cols()).map(|j| format!("X{j}")).collect(),
        };
        Ok(Self {
            x,
            response,
            names,
            standardized: false,
        })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn response(&self) -> &Response {
        &self.response
    }

    pub fn family(&self) -> Family {
        self.response.family()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Column-major copy of the design.
    pub fn columns(&self) -> Vec<Vec<f64>> {
        self.x.to_columns()
    }

    pub fn standardize(&self) -> Result<Dataset, DataError> {
        standardize(self)
    }
}

/// Rescales one column to mean 0 and variance 1 (divisor `n - 1`).
pub(crate) fn standardize_column(col: &mut [f64]) -> bool {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return false;
    }
    col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    true
}

fn standardize_matrix(x: &Matrix) -> Result<Matrix, DataError> {
    let mut cols = x.to_columns();
    for (j, c) in cols.iter_mut().enumerate() {
        if !standardize_column(c) {
            return Err(DataError::ConstantColumn { index: j });
        }
    }
    Ok(Matrix::from_columns(&cols)?)
}

/// Column-standardizes the design; the response is left untouched.
pub fn standardize(ds: &Dataset) -> Result<Dataset, DataError> {
    Ok(Dataset {
        x: standardize_matrix(&ds.x)?,
        response: ds.response.clone(),
        names: ds.names.clone(),
        standardized: true,
    })
}

pub fn gen_response(x: &Matrix, model: &ModelSpec, seed: u64) -> Result<Dataset, DataError> {
    model.validate()?;
    if x.cols() != model.p() {
        return Err(DataError::DimensionMismatch {
            expected: model.p(),
            got: x.cols(),
        });
    }
    let eta: Vec<f64> = x.mul_vec(&model.beta)?;
    let mut rng = stream(seed);
    let response = match model.family {
        FamilySpec::Gaussian { sigma2 } => {
            let sd = sigma2.sqrt();
            let y = eta
                .iter()
                .map(|e| {
                    let z: f64 = rng.sample(StandardNormal);
                    model.intercept + e + sd * z
                })
                .collect();
            Response::Gaussian { y }
        }
        FamilySpec::Binomial => {
            let y = eta
                .iter()
                .map(|e| {
                    let prob = 1.0 / (1.0 + (-(model.intercept + e)).exp());
                    if rng.random::<f64>() < prob {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            Response::Binomial { y }
        }
        FamilySpec::Cox { lambda0, lambda_c } => {
            let mut time = Vec::with_capacity(eta.len());
            let mut event = Vec::with_capacity(eta.len());
            for e in &eta {
                let ev: f64 = rng.sample(Exp1);
                let ce: f64 = rng.sample(Exp1);
                let t_event = lambda0 * (-e).exp() * ev;
                let t_cens = lambda_c * ce;
                // guard against exact zeros from extreme linear predictors
                time.push(t_event.min(t_cens).max(f64::MIN_POSITIVE));
                event.push(t_event <= t_cens);
            }
            Response::Cox { time, event }
        }
    };
    Dataset::new(x.clone(), response, None)
}

/// Feature design plus sample size for one simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub cov: CovSpec,
    pub n: usize,
}

/// Prepared generator: the design matrix is factored once and reused.
#[derive(Debug, Clone)]
pub struct Generator {
    sampler: MvnSampler,
    model: ModelSpec,
    n: usize,
}

impl Generator {
    pub fn new(spec: &GeneratorSpec, model: &ModelSpec) -> Result<Self, DataError> {
        model.validate()?;
        if model.p() != spec.cov.p {
            return Err(DataError::DimensionMismatch {
                expected: spec.cov.p,
                got: model.p(),
            });
        }
        if spec.n < 3 {
            return Err(DataError::InvalidSpec("n must be >= 3".into()));
        }
        let m = build_cov(&spec.cov)?;
        Ok(Self {
            sampler: MvnSampler::new(&m, spec.cov.is_precision())?,
            model: model.clone(),
            n: spec.n,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    /// Features are standardized before the response is drawn, so the
    /// generating coefficients are exactly the coefficients of the
    /// standardized design.
    pub fn generate(&self, seed: u64) -> Result<Dataset, DataError> {
        let raw = self
            .sampler
            .sample(self.n, derive_seed(seed, &[purpose::DESIGN]));
        let x = standardize_matrix(&raw)?;
        let ds = gen_response(&x, &self.model, derive_seed(seed, &[purpose::RESPONSE]))?;
        standardize(&ds)
    }
}
