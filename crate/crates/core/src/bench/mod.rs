//! Replicated simulation experiments.
//!
//! An [`ExperimentConfig`] names a design, a true model, a pipeline and a
//! number of replicates. Each replicate draws its dataset from a seed derived
//! from the master seed and the replicate index, so the results are the same
//! whatever the number of worker threads.

mod metrics;
mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::desparsified_lasso;
use crate::datagen::{parse_beta_spec, DataError, FamilySpec, Generator, GeneratorSpec, ModelSpec};
use crate::mnr::{adjust_pvalues, joint_infer, run_causal, run_mnr, Adjustment, MnrConfig};
use crate::rng::derive_seed;

pub use metrics::{
    check_bands, compute_fsr_nsr, BandCheck, CoefMetrics, GroupMetrics, JointMetrics, MetricsTable,
    ReplicateFailure, ReplicateSummary,
};
pub use report::{emit_comparison, emit_report, ReportFormat, REPORT_CSV_COLUMNS};

/// Tag separating replicate seeds from the per-dataset purpose tags.
const REPLICATE_TAG: u64 = 0x5245_504c;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("config is not valid JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// True model as written in a config file; `beta` uses the `index:value`
/// grammar with 1-based indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(flatten)]
    pub family: FamilySpec,
    #[serde(default)]
    pub intercept: f64,
    pub beta: String,
}

impl ModelConfig {
    pub fn resolve(&self, p: usize) -> Result<ModelSpec, DataError> {
        ModelSpec::new(self.family, self.intercept, parse_beta_spec(&self.beta, p)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pipeline {
    Mnr {
        #[serde(default)]
        config: MnrConfig,
    },
    Desparsified,
    Causal {
        #[serde(default)]
        config: MnrConfig,
    },
}

impl Pipeline {
    pub fn label(&self) -> &'static str {
        match self {
            Pipeline::Mnr { config } if config.mode == crate::mnr::Mode::Screening => {
                "MNR (screening)"
            }
            Pipeline::Mnr { .. } => "MNR",
            Pipeline::Desparsified => "Desparsified lasso",
            Pipeline::Causal { .. } => "MNR causal",
        }
    }
}

/// How a replicate's selected set is formed for FSR/NSR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionRule {
    pub adjustment: Adjustment,
    pub q: f64,
}

/// Acceptance band on one metric of the table; see [`MetricsTable::value`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

/// Smaller variant of an experiment for quick runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub generator: GeneratorSpec,
    pub model: ModelConfig,
    pub pipeline: Pipeline,
    pub replicates: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_rule: Option<SelectionRule>,
    /// Coefficient sets for joint inference (MNR pipeline only).
    #[serde(
        default,
        with = "crate::index1::nested",
        skip_serializing_if = "Vec::is_empty"
    )]
    pub joint_sets: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bands: Vec<Band>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub desk: Option<ScaleOverride>,
    #[serde(default)]
    pub scale_note: String,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, BenchError> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| BenchError::Json(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn model_spec(&self) -> Result<ModelSpec, DataError> {
        self.model.resolve(self.generator.cov.p)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidConfig(m));
        if self.replicates == 0 {
            return bad("replicates must be >= 1".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("level {} outside (0, 1)", self.level));
        }
        if let Some(rule) = self.selection_rule {
            if !(rule.q > 0.0 && rule.q <= 1.0) {
                return bad(format!("selection threshold {} outside (0, 1]", rule.q));
            }
        }
        self.generator.cov.validate()?;
        self.model_spec()?;
        let p = self.generator.cov.p;
        for set in &self.joint_sets {
            if set.len() < 2 || set.iter().any(|&j| j >= p) {
                return bad(format!(
                    "joint set {:?} needs >= 2 features within 1..={p}",
                    set.iter().map(|j| j + 1).collect::<Vec<_>>()
                ));
            }
        }
        for band in &self.bands {
            if band.min.is_none() && band.max.is_none() {
                return bad(format!("band on {} has neither min nor max", band.metric));
            }
            if !metrics::is_known_metric(&band.metric) {
                return bad(format!("unknown metric {}", band.metric));
            }
        }
        if let Pipeline::Mnr { config } | Pipeline::Causal { config } = &self.pipeline {
            config
                .validate()
                .map_err(|e| BenchError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }

    /// Applies the `desk` override, if any.
    pub fn desk_scaled(&self) -> Self {
        let mut out = self.clone();
        if let Some(d) = self.desk {
            if let Some(n) = d.n {
                out.generator.n = n;
            }
            if let Some(p) = d.p {
                out.generator.cov.p = p;
            }
            if let Some(r) = d.replicates {
                out.replicates = r;
            }
            out.desk = None;
        }
        out
    }

    pub fn replicate_seed(&self, r: usize) -> u64 {
        derive_seed(self.seed, &[REPLICATE_TAG, r as u64])
    }
}

fn adjusted_selection(p: &[(usize, f64)], rule: SelectionRule) -> Vec<usize> {
    let raw: Vec<f64> = p.iter().map(|x| x.1).collect();
    let adj = adjust_pvalues(&raw, rule.adjustment).expect("p-values in [0, 1]");
    p.iter()
        .zip(adj)
        .filter(|(_, a)| *a <= rule.q)
        .map(|(x, _)| x.0)
        .collect()
}

fn run_one(
    cfg: &ExperimentConfig,
    gen: &Generator,
    model: &ModelSpec,
    r: usize,
) -> ReplicateSummary {
    let seed = cfg.replicate_seed(r);
    let p = model.p();
    let mut out = ReplicateSummary::empty(r, seed, p, cfg.joint_sets.len());
    let ds = match gen.generate(seed) {
        Ok(ds) => ds,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    match &cfg.pipeline {
        Pipeline::Mnr { config } | Pipeline::Causal { config } => {
            let config = MnrConfig {
                level: cfg.level,
                ..*config
            };
            let causal = matches!(cfg.pipeline, Pipeline::Causal { .. });
            let rep = if causal {
                run_causal(&ds, &config)
            } else {
                run_mnr(&ds, &config)
            };
            let rep = match rep {
                Ok(rep) => rep,
                Err(e) => {
                    out.error = Some(e.to_string());
                    return out;
                }
            };
            for rec in &rep.records {
                let j = rec.feature;
                out.estimate[j] = Some(rec.beta_hat);
                out.covered[j] = Some(rec.covers(model.beta[j]));
                out.width[j] = Some(rec.width());
            }
            out.feature_failures = rep.failures.len();
            out.max_score_sup = rep
                .records
                .iter()
                .filter_map(|rec| rec.score_sup)
                .reduce(f64::max);
            out.selected = if causal {
                rep.selected_causal.clone()
            } else {
                cfg.selection_rule
                    .map(|rule| rep.selected_at(rule.adjustment, rule.q))
            };
            if !causal {
                for (k, set) in cfg.joint_sets.iter().enumerate() {
                    out.joint_covered[k] =
                        match joint_infer(&ds, set, &rep.blankets, &rep.selection, cfg.level) {
                            Ok(j) => {
                                let truth: Vec<f64> =
                                    j.features.iter().map(|&f| model.beta[f]).collect();
                                Some(j.covers(&truth))
                            }
                            Err(e) => {
                                log::warn!("replicate {r}: joint set {}: {e}", k + 1);
                                None
                            }
                        };
                }
            }
        }
        Pipeline::Desparsified => {
            let res = match desparsified_lasso(&ds, cfg.level) {
                Ok(res) => res,
                Err(e) => {
                    out.error = Some(e.to_string());
                    return out;
                }
            };
            for j in 0..p {
                out.estimate[j] = Some(res.beta_bc[j]);
                out.covered[j] = res.covers(j, model.beta[j]);
                out.width[j] = res.width(j);
            }
            out.feature_failures = res.flagged.len();
            out.selected = cfg.selection_rule.map(|rule| {
                let pv: Vec<(usize, f64)> =
                    (0..p).filter_map(|j| Some((j, res.p_value[j]?))).collect();
                adjusted_selection(&pv, rule)
            });
        }
    }
    out
}

/// Runs replicates `range` of an experiment, in replicate order.
pub fn run_replicates(
    cfg: &ExperimentConfig,
    range: std::ops::Range<usize>,
) -> Result<Vec<ReplicateSummary>, BenchError> {
    cfg.validate()?;
    let model = cfg.model_spec()?;
    let gen = Generator::new(&cfg.generator, &model)?;
    Ok(range
        .into_par_iter()
        .map(|r| run_one(cfg, &gen, &model, r))
        .collect())
}

/// Runs every replicate and aggregates the metrics.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsTable, BenchError> {
    let reps = run_replicates(cfg, 0..cfg.replicates)?;
    Ok(MetricsTable::from_replicates(
        cfg,
        &cfg.model_spec()?,
        &reps,
    ))
}
