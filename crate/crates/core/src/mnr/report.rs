use serde::{Deserialize, Serialize};

use super::{
    adjust_pvalues, z_score, Adjustment, InferenceRecord, MnrConfig, MnrError, Mode, Neighborhoods,
};
use crate::blanket::BlanketMap;
use crate::datagen::{Dataset, Family};
use crate::select::SelectionResult;

/// Column order of the CSV export.
pub const CSV_COLUMNS: [&str; 11] = [
    "feature",
    "beta_hat",
    "se",
    "ci_low",
    "ci_high",
    "p_value",
    "p_holm",
    "p_bh",
    "z_score",
    "df",
    "subset_size",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFailure {
    #[serde(with = "crate::index1::one")]
    pub feature: usize,
    pub error: String,
    pub numerical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnrReport {
    pub family: Family,
    pub mode: Mode,
    pub level: f64,
    pub names: Vec<String>,
    pub records: Vec<InferenceRecord>,
    pub z_scores: Vec<f64>,
    pub p_holm: Vec<f64>,
    pub p_bh: Vec<f64>,
    pub selection: SelectionResult,
    pub blankets: BlanketMap,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "crate::index1::opt_vec"
    )]
    pub selected_causal: Option<Vec<usize>>,
    #[serde(default)]
    pub causal_fallback: bool,
    pub failures: Vec<FeatureFailure>,
}

impl MnrReport {
    pub(crate) fn assemble(
        ds: &Dataset,
        cfg: &MnrConfig,
        nb: Neighborhoods,
        records: Vec<InferenceRecord>,
        failures: Vec<FeatureFailure>,
        alpha: Option<f64>,
    ) -> Result<Self, MnrError> {
        let p: Vec<f64> = records.iter().map(|r| r.p_value).collect();
        let p_holm = adjust_pvalues(&p, Adjustment::Holm)?;
        let p_bh = adjust_pvalues(&p, Adjustment::Bh)?;
        let z_scores = p.iter().map(|&v| z_score(v)).collect();
        let (selected_causal, causal_fallback) = match alpha {
            None => (None, false),
            Some(a) => {
                let hits: Vec<usize> = records
                    .iter()
                    .zip(&p_holm)
                    .filter(|(_, q)| **q <= a)
                    .map(|(r, _)| r.feature)
                    .collect();
                if hits.is_empty() && !records.is_empty() {
                    let best = records
                        .iter()
                        .min_by(|x, y| {
                            x.p_value
                                .total_cmp(&y.p_value)
                                .then(x.feature.cmp(&y.feature))
                        })
                        .expect("nonempty");
                    (Some(vec![best.feature]), true)
                } else {
                    (Some(hits), false)
                }
            }
        };
        Ok(Self {
            family: ds.family(),
            mode: cfg.mode,
            level: cfg.level,
            names: ds.names().to_vec(),
            records,
            z_scores,
            p_holm,
            p_bh,
            selection: nb.selection,
            blankets: nb.blankets,
            alpha,
            selected_causal,
            causal_fallback,
            failures,
        })
    }

    pub fn record(&self, j: usize) -> Option<&InferenceRecord> {
        self.records.iter().find(|r| r.feature == j)
    }

    /// Features whose adjusted p-value is at most `q`.
    pub fn selected_at(&self, method: Adjustment, q: f64) -> Vec<usize> {
        let adj = match method {
            Adjustment::Holm => &self.p_holm,
            Adjustment::Bh => &self.p_bh,
        };
        self.records
            .iter()
            .zip(adj)
            .filter(|(_, a)| **a <= q)
            .map(|(r, _)| r.feature)
            .collect()
    }

    /// Record positions ordered by Holm-adjusted p-value, then raw p-value.
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.records.len()).collect();
        idx.sort_by(|&a, &b| {
            self.p_holm[a]
                .total_cmp(&self.p_holm[b])
                .then(self.records[a].p_value.total_cmp(&self.records[b].p_value))
                .then(a.cmp(&b))
        });
        idx
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS).expect("in-memory write");
        for (i, r) in self.records.iter().enumerate() {
            let name = self
                .names
                .get(r.feature)
                .cloned()
                .unwrap_or_else(|| format!("X{}", r.feature + 1));
            w.write_record([
                name,
                r.beta_hat.to_string(),
                r.se.to_string(),
                r.ci_low.to_string(),
                r.ci_high.to_string(),
                r.p_value.to_string(),
                self.p_holm[i].to_string(),
                self.p_bh[i].to_string(),
                self.z_scores[i].to_string(),
                r.df.map_or_else(|| "inf".to_string(), |d| d.to_string()),
                r.subset.len().to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}
