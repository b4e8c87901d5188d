use serde::{Deserialize, Serialize};

use super::MnrError;
use crate::numkit::Dist;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjustment {
    Holm,
    Bh,
}

fn order(p: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    idx
}

/// Holm step-down or Benjamini-Hochberg step-up adjusted p-values.
pub fn adjust_pvalues(p: &[f64], method: Adjustment) -> Result<Vec<f64>, MnrError> {
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(MnrError::Domain(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p.len();
    let idx = order(p);
    let mut out = vec![0.0; m];
    match method {
        Adjustment::Holm => {
            let mut run = 0.0f64;
            for (rank, &i) in idx.iter().enumerate() {
                run = run.max(((m - rank) as f64 * p[i]).min(1.0));
                out[i] = run;
            }
        }
        Adjustment::Bh => {
            let mut run = 1.0f64;
            for (rank, &i) in idx.iter().enumerate().rev() {
                // m·p/k can round below p at k = m
                let step = (m as f64 * p[i] / (rank + 1) as f64).max(p[i]);
                run = run.min(step.min(1.0));
                out[i] = run;
            }
        }
    }
    Ok(out)
}

/// `Φ⁻¹(1 − p)`, with `p` clamped away from 0 and 1 so the score is finite.
pub fn z_score(p: f64) -> f64 {
    let q = p.clamp(1e-300, 1.0 - f64::EPSILON / 2.0);
    -Dist::StdNormal.quantile(q).expect("clamped into (0, 1)")
}
