//! Markov neighborhood regression.
//!
//! For each feature `j` the response is regressed on
//! `D_j = {j} ∪ ξ̂_j ∪ Ŝ*`, where `ξ̂_j` is the estimated Markov blanket of
//! `X_j` and `Ŝ*` a selected superset of the true model. Conditioning on the
//! blanket makes `X_j` independent of the remaining features, so the
//! coefficient of `X_j` in this small regression equals its coefficient in the
//! full model, and ordinary low-dimensional inference applies.

mod adjust;
mod report;
mod subset;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blanket::{
    corr_screen_from, gram_and_corr, nodewise_from, BlanketError, BlanketMap, BlanketMethod,
};
use crate::datagen::{DataError, Dataset, Family};
use crate::numkit::Matrix;
use crate::select::{
    default_model_cap, default_screen_cap, screening_cap, select_variables, Caps, SelectError,
    SelectMethod, SelectionResult,
};

pub use adjust::{adjust_pvalues, z_score, Adjustment};
pub use report::{FeatureFailure, MnrReport, CSV_COLUMNS};
pub(crate) use subset::{critical, fit_subset};
pub use subset::{subset_glm_infer, subset_infer, subset_limit, subset_ols_infer, InferenceRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MnrError {
    #[error("subset design matrix is singular")]
    SingularDesign,
    #[error("subset of size {size} exceeds the limit {limit}")]
    SubsetTooLarge { size: usize, limit: usize },
    #[error("fitted probabilities numerically 0 or 1 (separation)")]
    Separation,
    #[error("Newton iteration did not converge after {iterations} steps")]
    NoConvergence { iterations: usize },
    #[error("operation not available for the {0} family")]
    WrongFamily(Family),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Blanket(#[from] BlanketError),
    #[error(transparent)]
    Data(#[from] DataError),
}

impl MnrError {
    /// True for failures of the numerical fit rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            MnrError::SingularDesign
                | MnrError::Separation
                | MnrError::NoConvergence { .. }
                | MnrError::Select(SelectError::NoConvergence { .. } | SelectError::Separation)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Penalized selection plus capped blankets.
    Full,
    /// Screening caps `⌊√n / ln n⌋` for both the model and the blankets.
    Screening,
}

/// Explicit size limits; unset entries fall back to the mode defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blanket_cap: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedCaps {
    pub screen_cap: usize,
    pub model_cap: usize,
    pub blanket_cap: usize,
}

fn default_level() -> f64 {
    0.95
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MnrConfig {
    pub mode: Mode,
    pub selection: SelectMethod,
    pub blanket: BlanketMethod,
    #[serde(default)]
    pub caps: CapOverrides,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Holm threshold for causal mode.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

impl Default for MnrConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Full,
            selection: SelectMethod::SisThenScad,
            blanket: BlanketMethod::Nodewise,
            caps: CapOverrides::default(),
            level: default_level(),
            alpha: default_alpha(),
        }
    }
}

impl MnrConfig {
    /// The screening-based variant: SIS for the model, correlation
    /// screening for the blankets.
    pub fn screening() -> Self {
        Self {
            mode: Mode::Screening,
            selection: SelectMethod::Sis,
            blanket: BlanketMethod::CorrScreen,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), MnrError> {
        subset::validate_level(self.level)?;
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(MnrError::InvalidConfig(format!(
                "alpha {} outside (0, 1]",
                self.alpha
            )));
        }
        let c = self.caps;
        if [c.screen_cap, c.model_cap, c.blanket_cap].contains(&Some(0)) {
            return Err(MnrError::InvalidConfig("caps must be >= 1".into()));
        }
        Ok(())
    }

    pub fn resolve_caps(&self, n: usize) -> ResolvedCaps {
        let (screen, model, blanket) = match self.mode {
            Mode::Full => (
                default_screen_cap(n),
                default_model_cap(n),
                default_model_cap(n),
            ),
            Mode::Screening => {
                let c = screening_cap(n);
                (c, c, c)
            }
        };
        ResolvedCaps {
            screen_cap: self.caps.screen_cap.unwrap_or(screen),
            model_cap: self.caps.model_cap.unwrap_or(model),
            blanket_cap: self.caps.blanket_cap.unwrap_or(blanket),
        }
    }
}

/// Selection and blankets computed once per dataset and shared by every
/// subset regression.
#[derive(Debug, Clone)]
pub struct Neighborhoods {
    pub selection: SelectionResult,
    pub blankets: BlanketMap,
    pub caps: ResolvedCaps,
    corr: Matrix,
}

impl Neighborhoods {
    pub fn build(ds: &Dataset, cfg: &MnrConfig) -> Result<Self, MnrError> {
        cfg.validate()?;
        let caps = cfg.resolve_caps(ds.n());
        let selection = select_variables(
            ds,
            cfg.selection,
            Caps {
                screen_cap: caps.screen_cap,
                model_cap: caps.model_cap,
            },
        )?;
        if ds.n() < 3 {
            return Err(BlanketError::TooFewSamples(ds.n()).into());
        }
        let (h, corr) = gram_and_corr(ds.x());
        let blankets = match cfg.blanket {
            BlanketMethod::Nodewise => nodewise_from(&h, &corr, ds.n(), caps.blanket_cap),
            BlanketMethod::CorrScreen => corr_screen_from(&corr, caps.blanket_cap),
        };
        Ok(Self {
            selection,
            blankets,
            caps,
            corr,
        })
    }

    /// Absolute sample correlation between two features.
    pub fn abs_corr(&self, a: usize, b: usize) -> f64 {
        self.corr.get(a, b)
    }

    /// `D_j`, trimmed to `limit` if needed: `j` first, then the selected
    /// features, then blanket members by decreasing `|corr(X_j, X_k)|`.
    pub fn subset_for(&self, j: usize, limit: usize) -> (Vec<usize>, bool) {
        let mut order = vec![j];
        order.extend(self.selection.active.iter().copied().filter(|&k| k != j));
        let mut rest: Vec<usize> = self
            .blankets
            .neighbors(j)
            .iter()
            .copied()
            .filter(|k| !order.contains(k))
            .collect();
        rest.sort_by(|&a, &b| {
            self.corr
                .get(j, b)
                .total_cmp(&self.corr.get(j, a))
                .then(a.cmp(&b))
        });
        order.extend(rest);
        let trimmed = order.len() > limit;
        order.truncate(limit.max(1));
        order.sort_unstable();
        (order, trimmed)
    }
}

fn prepare(ds: &Dataset) -> Result<std::borrow::Cow<'_, Dataset>, MnrError> {
    if ds.is_standardized() {
        Ok(std::borrow::Cow::Borrowed(ds))
    } else {
        log::debug!("standardizing features before inference");
        Ok(std::borrow::Cow::Owned(ds.standardize()?))
    }
}

fn infer_features(
    ds: &Dataset,
    nb: &Neighborhoods,
    features: &[usize],
    level: f64,
) -> (Vec<InferenceRecord>, Vec<FeatureFailure>) {
    let limit = subset_limit(ds.family(), ds.n());
    let results: Vec<Result<InferenceRecord, FeatureFailure>> = features
        .par_iter()
        .map(|&j| {
            let (subset, trimmed) = nb.subset_for(j, limit);
            fit_subset(ds, &subset)
                .map(|fit| InferenceRecord {
                    trimmed,
                    ..fit.record(j, level)
                })
                .map_err(|e| FeatureFailure {
                    feature: j,
                    numerical: e.is_numerical(),
                    error: e.to_string(),
                })
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => {
                log::warn!("feature {}: {}", f.feature + 1, f.error);
                failures.push(f)
            }
        }
    }
    (records, failures)
}

/// Runs the full pipeline on every feature.
pub fn run_mnr(ds: &Dataset, cfg: &MnrConfig) -> Result<MnrReport, MnrError> {
    let ds = prepare(ds)?;
    let nb = Neighborhoods::build(&ds, cfg)?;
    run_mnr_with(&ds, cfg, nb)
}

/// As [`run_mnr`] with precomputed neighborhoods.
pub fn run_mnr_with(
    ds: &Dataset,
    cfg: &MnrConfig,
    nb: Neighborhoods,
) -> Result<MnrReport, MnrError> {
    cfg.validate()?;
    let features: Vec<usize> = (0..ds.p()).collect();
    let (records, failures) = infer_features(ds, &nb, &features, cfg.level);
    MnrReport::assemble(ds, cfg, nb, records, failures, None)
}

/// Causal discovery: inference only on `Ŝ*`, then Holm at `alpha`. When
/// nothing passes, the feature with the smallest raw p-value is reported and
/// the fallback flag is set. An empty `Ŝ*` leaves nothing to test, so every
/// feature is assessed instead.
pub fn run_causal(ds: &Dataset, cfg: &MnrConfig) -> Result<MnrReport, MnrError> {
    let ds = prepare(ds)?;
    let nb = Neighborhoods::build(&ds, cfg)?;
    let features = if nb.selection.active.is_empty() {
        (0..ds.p()).collect()
    } else {
        nb.selection.active.clone()
    };
    let (records, failures) = infer_features(&ds, &nb, &features, cfg.level);
    MnrReport::assemble(&ds, cfg, nb, records, failures, Some(cfg.alpha))
}

/// Simultaneous inference for a set of coefficients from one subset fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointInferenceRecord {
    #[serde(with = "crate::index1::vec")]
    pub features: Vec<usize>,
    pub beta_hat: Vec<f64>,
    /// Estimated covariance of `√n (β̂_A − β_A)`.
    pub covariance: Matrix,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub level: f64,
    /// Bonferroni level used for each coordinate.
    pub coordinate_level: f64,
    pub df: Option<usize>,
    #[serde(with = "crate::index1::vec")]
    pub subset: Vec<usize>,
}

impl JointInferenceRecord {
    /// True when every coordinate interval covers its value.
    pub fn covers(&self, values: &[f64]) -> bool {
        self.ci_low
            .iter()
            .zip(&self.ci_high)
            .zip(values)
            .all(|((lo, hi), v)| lo <= v && v <= hi)
    }
}

/// Bonferroni intervals for `β_A` from the regression on
/// `M = A ∪ ξ̂_A ∪ Ŝ*`.
pub fn joint_infer(
    ds: &Dataset,
    a: &[usize],
    blankets: &BlanketMap,
    sel: &SelectionResult,
    level: f64,
) -> Result<JointInferenceRecord, MnrError> {
    subset::validate_level(level)?;
    let mut features = a.to_vec();
    features.sort_unstable();
    features.dedup();
    if features.len() < 2 {
        return Err(MnrError::InvalidConfig(
            "joint inference needs at least 2 features".into(),
        ));
    }
    if features.iter().any(|&j| j >= ds.p()) || blankets.p() != ds.p() {
        return Err(MnrError::InvalidConfig("feature index out of range".into()));
    }
    let mut m: Vec<usize> = features.clone();
    for &j in &features {
        m.extend_from_slice(blankets.neighbors(j));
    }
    m.extend_from_slice(&sel.active);
    m.sort_unstable();
    m.dedup();
    let fit = fit_subset(ds, &m)?;
    let pos: Vec<usize> = features
        .iter()
        .map(|&j| fit.position(j).expect("in subset"))
        .collect();
    let n = ds.n() as f64;
    let covariance = Matrix::from_fn(pos.len(), pos.len(), |r, c| n * fit.cov.get(pos[r], pos[c]));
    let coordinate_level = 1.0 - (1.0 - level) / features.len() as f64;
    let q = critical(fit.df, coordinate_level);
    let beta_hat: Vec<f64> = pos.iter().map(|&p| fit.coef[p]).collect();
    let se: Vec<f64> = pos
        .iter()
        .map(|&p| fit.cov.get(p, p).max(0.0).sqrt())
        .collect();
    Ok(JointInferenceRecord {
        ci_low: beta_hat.iter().zip(&se).map(|(b, s)| b - q * s).collect(),
        ci_high: beta_hat.iter().zip(&se).map(|(b, s)| b + q * s).collect(),
        features,
        beta_hat,
        covariance,
        level,
        coordinate_level,
        df: fit.df,
        subset: m,
    })
}
