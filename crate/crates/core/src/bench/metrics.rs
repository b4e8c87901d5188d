use serde::{Deserialize, Serialize};

use super::{Band, ExperimentConfig};
use crate::datagen::ModelSpec;

/// Outcome of one replicate. Per-coefficient entries are `None` where the
/// pipeline produced no interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub replicate: usize,
    pub seed: u64,
    pub estimate: Vec<Option<f64>>,
    pub covered: Vec<Option<bool>>,
    pub width: Vec<Option<f64>>,
    #[serde(default, with = "crate::index1::opt_vec")]
    pub selected: Option<Vec<usize>>,
    pub joint_covered: Vec<Option<bool>>,
    pub feature_failures: usize,
    /// Largest sup-norm of the score at the returned MLEs (GLM and Cox only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_score_sup: Option<f64>,
    /// Set when the whole replicate failed; it is then left out of every
    /// aggregate.
    pub error: Option<String>,
}

impl ReplicateSummary {
    pub fn empty(replicate: usize, seed: u64, p: usize, joint: usize) -> Self {
        Self {
            replicate,
            seed,
            estimate: vec![None; p],
            covered: vec![None; p],
            width: vec![None; p],
            selected: None,
            joint_covered: vec![None; joint],
            feature_failures: 0,
            max_score_sup: None,
            error: None,
        }
    }
}

/// Mean coverage and width over a group of coefficients, with standard
/// deviations `sqrt(Var{pooled values} / R)` as in the usual reporting of
/// these simulations (R = completed replicates, sample variance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    /// Number of (coefficient, replicate) intervals pooled.
    pub count: usize,
    pub coverage: f64,
    pub coverage_sd: f64,
    pub width: f64,
    pub width_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefMetrics {
    #[serde(with = "crate::index1::one")]
    pub feature: usize,
    pub truth: f64,
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointMetrics {
    #[serde(with = "crate::index1::vec")]
    pub features: Vec<usize>,
    pub count: usize,
    pub coverage: Option<f64>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub name: String,
    pub method: String,
    pub level: f64,
    pub n: usize,
    pub p: usize,
    pub replicates: usize,
    pub completed: usize,
    pub failed: Vec<ReplicateFailure>,
    /// Features without an interval, summed over completed replicates.
    pub feature_failures: usize,
    pub signal: Option<GroupMetrics>,
    pub noise: Option<GroupMetrics>,
    pub fsr: Option<f64>,
    pub nsr: Option<f64>,
    pub coefficients: Vec<CoefMetrics>,
    pub joint: Vec<JointMetrics>,
    #[serde(default)]
    pub scale_note: String,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_var(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

fn group(cover: &[f64], width: &[f64], replicates: usize) -> Option<GroupMetrics> {
    if cover.is_empty() {
        return None;
    }
    let r = replicates.max(1) as f64;
    Some(GroupMetrics {
        count: cover.len(),
        coverage: mean(cover),
        coverage_sd: (sample_var(cover) / r).sqrt(),
        width: mean(width),
        width_sd: (sample_var(width) / r).sqrt(),
    })
}

/// False and negative selection rates pooled over replicates:
/// `FSR = Σ|Ŝ_r \ S*| / Σ|Ŝ_r|` (0 if nothing is selected) and
/// `NSR = Σ|S* \ Ŝ_r| / (R·|S*|)` (0 if `S*` is empty).
pub fn compute_fsr_nsr(selected: &[Vec<usize>], truth: &[usize]) -> (f64, f64) {
    let (mut false_sel, mut total_sel, mut missed) = (0usize, 0usize, 0usize);
    for s in selected {
        total_sel += s.len();
        false_sel += s.iter().filter(|j| !truth.contains(j)).count();
        missed += truth.iter().filter(|j| !s.contains(j)).count();
    }
    let fsr = if total_sel == 0 {
        0.0
    } else {
        false_sel as f64 / total_sel as f64
    };
    let denom = selected.len() * truth.len();
    let nsr = if denom == 0 {
        0.0
    } else {
        missed as f64 / denom as f64
    };
    (fsr, nsr)
}

impl MetricsTable {
    /// Aggregates replicate summaries, visited in the order given.
    pub fn from_replicates(
        cfg: &ExperimentConfig,
        model: &ModelSpec,
        reps: &[ReplicateSummary],
    ) -> Self {
        let truth = model.active_set();
        let p = model.p();
        let ok: Vec<&ReplicateSummary> = reps.iter().filter(|r| r.error.is_none()).collect();
        let completed = ok.len();

        let (mut sc, mut sw, mut nc, mut nw) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for r in &ok {
            for j in 0..p {
                let (Some(c), Some(w)) = (r.covered[j], r.width[j]) else {
                    continue;
                };
                let c = f64::from(u8::from(c));
                if truth.contains(&j) {
                    sc.push(c);
                    sw.push(w);
                } else {
                    nc.push(c);
                    nw.push(w);
                }
            }
        }

        let coefficients = truth
            .iter()
            .map(|&j| {
                let est: Vec<f64> = ok.iter().filter_map(|r| r.estimate[j]).collect();
                let cov: Vec<f64> = ok
                    .iter()
                    .filter_map(|r| r.covered[j].map(|c| f64::from(u8::from(c))))
                    .collect();
                CoefMetrics {
                    feature: j,
                    truth: model.beta[j],
                    count: est.len(),
                    mean: if est.is_empty() { 0.0 } else { mean(&est) },
                    sd: sample_var(&est).sqrt(),
                    coverage: if cov.is_empty() { 0.0 } else { mean(&cov) },
                }
            })
            .collect();

        let joint = cfg
            .joint_sets
            .iter()
            .enumerate()
            .map(|(k, set)| {
                let hits: Vec<f64> = ok
                    .iter()
                    .filter_map(|r| r.joint_covered.get(k).copied().flatten())
                    .map(|c| f64::from(u8::from(c)))
                    .collect();
                JointMetrics {
                    features: set.clone(),
                    count: hits.len(),
                    coverage: (!hits.is_empty()).then(|| mean(&hits)),
                    failures: completed - hits.len(),
                }
            })
            .collect();

        let selections: Option<Vec<Vec<usize>>> = ok.iter().map(|r| r.selected.clone()).collect();
        let (fsr, nsr) = match selections {
            Some(s) if !s.is_empty() => {
                let (f, n) = compute_fsr_nsr(&s, &truth);
                (Some(f), Some(n))
            }
            _ => (None, None),
        };

        Self {
            name: cfg.name.clone(),
            method: cfg.pipeline.label().to_string(),
            level: cfg.level,
            n: cfg.generator.n,
            p,
            replicates: reps.len(),
            completed,
            failed: reps
                .iter()
                .filter_map(|r| {
                    r.error.as_ref().map(|e| ReplicateFailure {
                        replicate: r.replicate,
                        error: e.clone(),
                    })
                })
                .collect(),
            feature_failures: ok.iter().map(|r| r.feature_failures).sum(),
            signal: group(&sc, &sw, completed),
            noise: group(&nc, &nw, completed),
            fsr,
            nsr,
            coefficients,
            joint,
            scale_note: cfg.scale_note.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Looks up a metric by name:
    /// `signal_coverage`, `noise_coverage`, `signal_width`, `noise_width`,
    /// `fsr`, `nsr`, `failure_rate`, `joint_coverage_min`,
    /// `joint_coverage:K` (K-th joint set, 1-based), `mean_beta:J` and
    /// `coef_coverage:J` (feature J, 1-based).
    pub fn value(&self, metric: &str) -> Option<f64> {
        let coef = |j: &str| -> Option<&CoefMetrics> {
            let j: usize = j.parse().ok()?;
            self.coefficients.iter().find(|c| c.feature + 1 == j)
        };
        match metric.split_once(':') {
            Some(("mean_beta", j)) => coef(j).map(|c| c.mean),
            Some(("coef_coverage", j)) => coef(j).map(|c| c.coverage),
            Some(("joint_coverage", k)) => {
                let k: usize = k.parse().ok()?;
                self.joint.get(k.checked_sub(1)?)?.coverage
            }
            Some(_) => None,
            None => match metric {
                "signal_coverage" => self.signal.map(|g| g.coverage),
                "noise_coverage" => self.noise.map(|g| g.coverage),
                "signal_width" => self.signal.map(|g| g.width),
                "noise_width" => self.noise.map(|g| g.width),
                "fsr" => self.fsr,
                "nsr" => self.nsr,
                "failure_rate" => Some(self.failed.len() as f64 / self.replicates.max(1) as f64),
                "joint_coverage_min" => self
                    .joint
                    .iter()
                    .map(|j| j.coverage)
                    .collect::<Option<Vec<f64>>>()
                    .filter(|v| !v.is_empty())
                    .map(|v| v.into_iter().fold(f64::INFINITY, f64::min)),
                _ => None,
            },
        }
    }
}

pub(crate) fn is_known_metric(metric: &str) -> bool {
    match metric.split_once(':') {
        Some((kind, idx)) => {
            matches!(kind, "mean_beta" | "coef_coverage" | "joint_coverage")
                && idx.parse::<usize>().is_ok()
        }
        None => matches!(
            metric,
            "signal_coverage"
                | "noise_coverage"
                | "signal_width"
                | "noise_width"
                | "fsr"
                | "nsr"
                | "failure_rate"
                | "joint_coverage_min"
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandCheck {
    pub metric: String,
    pub value: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub pass: bool,
}

impl std::fmt::Display for BandCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let lo = self.min.map_or("-inf".to_string(), |v| v.to_string());
        let hi = self.max.map_or("inf".to_string(), |v| v.to_string());
        let v = self
            .value
            .map_or("missing".to_string(), |v| format!("{v:.4}"));
        let tag = if self.pass { "ok" } else { "OUT OF BAND" };
        write!(f, "{}: {} in [{}, {}] {}", self.metric, v, lo, hi, tag)
    }
}

/// Evaluates every band; a missing metric fails its band.
pub fn check_bands(table: &MetricsTable, bands: &[Band]) -> Vec<BandCheck> {
    bands
        .iter()
        .map(|b| {
            let value = table.value(&b.metric);
            let pass = value.is_some_and(|v| {
                b.min.is_none_or(|lo| v >= lo) && b.max.is_none_or(|hi| v <= hi)
            });
            BandCheck {
                metric: b.metric.clone(),
                value,
                min: b.min,
                max: b.max,
                pass,
            }
        })
        .collect()
}
