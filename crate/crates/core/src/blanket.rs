//! Markov blanket estimates for every feature.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkit::Matrix;
use crate::select::{
    centered, default_screen_cap, gaussian_path_tuned, gram, top_k, PenaltyKind, QuadProblem,
    Tuning, BIC_PATIENCE, EBIC_GAMMA,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlanketError {
    #[error("need at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("blanket cap must be >= 1")]
    ZeroCap,
    #[error("invalid blanket map: {0}")]
    Invalid(String),
    #[error("blanket JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlanketMethod {
    Nodewise,
    CorrScreen,
}

impl std::str::FromStr for BlanketMethod {
    type Err = BlanketError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nodewise" => Ok(BlanketMethod::Nodewise),
            "corr" | "corr_screen" | "corr-screen" => Ok(BlanketMethod::CorrScreen),
            other => Err(BlanketError::Invalid(format!(
                "unknown blanket method '{other}'"
            ))),
        }
    }
}

/// Estimated neighborhood of every feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlanketMap {
    pub method: BlanketMethod,
    pub cap: usize,
    #[serde(with = "crate::index1::nested")]
    pub neighbors: Vec<Vec<usize>>,
    /// Nodes whose regression failed and fell back to correlation screening.
    #[serde(
        default,
        skip_serializing_if = "Vec::is_empty",
        with = "crate::index1::vec"
    )]
    pub fallback: Vec<usize>,
}

impl BlanketMap {
    pub fn p(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, j: usize) -> &[usize] {
        &self.neighbors[j]
    }

    pub fn validate(&self) -> Result<(), BlanketError> {
        let p = self.p();
        for (j, nb) in self.neighbors.iter().enumerate() {
            if nb.len() > self.cap {
                return Err(BlanketError::Invalid(format!(
                    "feature {} has {} neighbors, cap {}",
                    j + 1,
                    nb.len(),
                    self.cap
                )));
            }
            if nb.iter().any(|&k| k == j || k >= p) {
                return Err(BlanketError::Invalid(format!(
                    "bad neighbor of feature {}",
                    j + 1
                )));
            }
            if nb.windows(2).any(|w| w[0] >= w[1]) {
                return Err(BlanketError::Invalid(format!(
                    "neighbors of feature {} not strictly ascending",
                    j + 1
                )));
            }
        }
        Ok(())
    }

    pub fn is_symmetric(&self) -> bool {
        self.neighbors.iter().enumerate().all(|(j, nb)| {
            nb.iter()
                .all(|&k| self.neighbors[k].binary_search(&j).is_ok())
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("blanket map serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, BlanketError> {
        let map: BlanketMap =
            serde_json::from_str(s).map_err(|e| BlanketError::Json(e.to_string()))?;
        map.validate()?;
        Ok(map)
    }
}

fn check(x: &Matrix, cap: usize) -> Result<(), BlanketError> {
    if x.rows() < 3 {
        return Err(BlanketError::TooFewSamples(x.rows()));
    }
    if cap == 0 {
        return Err(BlanketError::ZeroCap);
    }
    Ok(())
}

/// Centered Gram `X_cᵀX_c/n` and the matching absolute correlations.
pub(crate) fn gram_and_corr(x: &Matrix) -> (Matrix, Matrix) {
    let cols: Vec<Vec<f64>> = x.to_columns().iter().map(|c| centered(c)).collect();
    let h = gram(&cols);
    let p = h.rows();
    let corr = Matrix::from_fn(p, p, |a, b| {
        let d = (h.get(a, a) * h.get(b, b)).sqrt();
        if d > 0.0 {
            (h.get(a, b) / d).abs()
        } else {
            0.0
        }
    });
    (h, corr)
}

fn corr_row(corr: &Matrix, j: usize, cap: usize) -> Vec<usize> {
    let mut nb = top_k(corr.row(j), cap, Some(j));
    nb.sort_unstable();
    nb
}

pub fn corr_screen_blankets(x: &Matrix, cap: usize) -> Result<BlanketMap, BlanketError> {
    check(x, cap)?;
    let (_, corr) = gram_and_corr(x);
    Ok(corr_screen_from(&corr, cap))
}

pub(crate) fn corr_screen_from(corr: &Matrix, cap: usize) -> BlanketMap {
    let p = corr.rows();
    BlanketMap {
        method: BlanketMethod::CorrScreen,
        cap,
        neighbors: (0..p).map(|j| corr_row(corr, j, cap)).collect(),
        fallback: Vec::new(),
    }
}

/// Nodewise lasso neighborhoods, symmetrized by union.
///
/// Each node is regressed on its `⌊n/ln n⌋` most correlated features with a
/// lasso path tuned by the extended BIC (pool of `p − 1` candidates), and the
/// support is cut to `cap` by coefficient size.
/// The union of the node supports can exceed `cap`, so edges are then
/// admitted in order of decreasing weight `max(|b_jk|, |b_kj|)` while both
/// endpoints have room. The result is symmetric and respects the cap.
pub fn nodewise_blankets(x: &Matrix, cap: usize) -> Result<BlanketMap, BlanketError> {
    check(x, cap)?;
    let (h, corr) = gram_and_corr(x);
    Ok(nodewise_from(&h, &corr, x.rows(), cap))
}

pub(crate) fn nodewise_from(h: &Matrix, corr: &Matrix, n: usize, cap: usize) -> BlanketMap {
    let p = h.rows();
    let screen = default_screen_cap(n).min(p.saturating_sub(1));
    let nodes: Vec<Result<Vec<(usize, f64)>, String>> = (0..p)
        .into_par_iter()
        .map(|j| {
            let vars = top_k(corr.row(j), screen, Some(j));
            let q = QuadProblem {
                h,
                c: vars.iter().map(|&k| h.get(k, j)).collect(),
                vars: vars.clone(),
                yy: h.get(j, j),
                n,
            };
            let tuning = Tuning::ExtendedBic {
                gamma: EBIC_GAMMA,
                pool: p - 1,
            };
            let fit = gaussian_path_tuned(&q, PenaltyKind::Lasso, tuning, Some(BIC_PATIENCE))
                .map_err(|e| e.to_string())?;
            let coef: Vec<(usize, f64)> = vars.into_iter().zip(fit.beta).collect();
            Ok(crate::select::truncate_support(&coef, cap))
        })
        .collect();

    let mut weight = std::collections::BTreeMap::<(usize, usize), f64>::new();
    let mut fallback = Vec::new();
    for (j, node) in nodes.into_iter().enumerate() {
        let edges = match node {
            Ok(e) => e,
            Err(msg) => {
                log::warn!("nodewise regression for feature {} failed ({msg}); using correlation screening", j + 1);
                fallback.push(j);
                corr_row(corr, j, cap)
                    .into_iter()
                    .map(|k| (k, corr.get(j, k)))
                    .collect()
            }
        };
        for (k, b) in edges {
            let key = (j.min(k), j.max(k));
            let w = weight.entry(key).or_insert(0.0);
            *w = w.max(b.abs());
        }
    }
    let mut edges: Vec<((usize, usize), f64)> = weight.into_iter().collect();
    edges.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut neighbors = vec![Vec::new(); p];
    for ((a, b), _) in edges {
        if neighbors[a].len() < cap && neighbors[b].len() < cap {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
    }
    neighbors.iter_mut().for_each(|v| v.sort_unstable());
    BlanketMap {
        method: BlanketMethod::Nodewise,
        cap,
        neighbors,
        fallback,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{build_cov, sample_mvn, CovKind, CovSpec};

    #[test]
    fn corr_screen_on_population_toeplitz() {
        // population correlations fed in as the correlation matrix directly
        let sigma = build_cov(&CovSpec::new(CovKind::Toeplitz { rho: 0.9 }, 10).unwrap()).unwrap();
        let map = corr_screen_from(&sigma, 2);
        assert_eq!(map.neighbors(4), &[3, 5]);
        let full = corr_screen_from(&sigma, 9);
        assert_eq!(full.neighbors(0), &[1, 2, 3, 4, 5, 6, 7, 8, 9]);
    }

    #[test]
    fn corr_screen_cap_binds_on_equicorrelation() {
        let sigma = build_cov(&CovSpec::new(CovKind::Equicorr { rho: 0.8 }, 12).unwrap()).unwrap();
        let x = sample_mvn(&sigma, false, 80, 5).unwrap();
        let map = corr_screen_blankets(&x, 4).unwrap();
        assert!(map.neighbors.iter().all(|nb| nb.len() == 4));
        map.validate().unwrap();
    }

    #[test]
    fn single_edge_pair() {
        let sigma = build_cov(&CovSpec::new(CovKind::Equicorr { rho: 0.9 }, 2).unwrap()).unwrap();
        let x = sample_mvn(&sigma, false, 1000, 11).unwrap();
        let map = nodewise_blankets(&x, 5).unwrap();
        assert_eq!(map.neighbors, vec![vec![1], vec![0]]);
    }

    #[test]
    fn json_is_one_based() {
        let map = BlanketMap {
            method: BlanketMethod::Nodewise,
            cap: 2,
            neighbors: vec![vec![1], vec![0, 2], vec![1]],
            fallback: Vec::new(),
        };
        let s = map.to_json();
        assert_eq!(
            s,
            r#"{"method":"nodewise","cap":2,"neighbors":[[2],[1,3],[2]]}"#
        );
        assert_eq!(BlanketMap::from_json(&s).unwrap(), map);
        assert!(
            BlanketMap::from_json(r#"{"method":"nodewise","cap":1,"neighbors":[[1]]}"#).is_err()
        );
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(
            nodewise_blankets(&Matrix::zeros(2, 3), 1).unwrap_err(),
            BlanketError::TooFewSamples(2)
        );
        assert_eq!(
            corr_screen_blankets(&Matrix::identity(3), 0).unwrap_err(),
            BlanketError::ZeroCap
        );
    }
}
