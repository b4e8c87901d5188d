//! Iterated screening: after a penalized fit on the screened set, features
//! left out are re-ranked by their association with the response
//! conditional on the current support, and the fit is repeated on the
//! support plus the best of them. Features whose marginal association is
//! masked by their neighbours (for example lag-2 terms under an AR(2)
//! precision) enter this way.

use crate::glm::{fit_mle, Likelihood};
use crate::numkit::{cholesky, Matrix};

use super::path::PathFit;
use super::{top_k, SelectError};

/// Screening rounds including the first, marginal one.
pub const ISIS_MAX_ROUNDS: usize = 5;

fn support(vars: &[usize], fit: &PathFit) -> Vec<usize> {
    let mut s: Vec<usize> = vars
        .iter()
        .zip(&fit.beta)
        .filter(|(_, b)| **b != 0.0)
        .map(|(v, _)| *v)
        .collect();
    s.sort_unstable();
    s
}

/// Runs the screen / fit / conditional re-screen loop. `first` is the
/// marginally screened set, `fit` runs a tuned path on a variable list and
/// `conditional` scores every feature given an active set (entries that are
/// not candidates must be `-inf`). Returns the variables of the final fit
/// together with that fit.
pub(crate) fn iterate<F, S>(
    cap: usize,
    first: Vec<usize>,
    mut fit: F,
    mut conditional: S,
) -> Result<(Vec<usize>, PathFit), SelectError>
where
    F: FnMut(&[usize]) -> Result<PathFit, SelectError>,
    S: FnMut(&[usize]) -> Option<Vec<f64>>,
{
    let mut vars = first;
    let mut current = fit(&vars)?;
    let mut seen = vec![support(&vars, &current)];
    for round in 1..ISIS_MAX_ROUNDS {
        let active = seen.last().cloned().unwrap_or_default();
        if active.is_empty() || active.len() >= cap {
            break;
        }
        let Some(mut scores) = conditional(&active) else {
            break;
        };
        for &a in &active {
            scores[a] = f64::NEG_INFINITY;
        }
        let mut next = active.clone();
        next.extend(
            top_k(&scores, cap - active.len(), None)
                .into_iter()
                .filter(|&k| scores[k].is_finite()),
        );
        next.sort_unstable();
        let refit = match fit(&next) {
            Ok(f) => f,
            Err(e) => {
                log::debug!("screening round {round} abandoned: {e}");
                break;
            }
        };
        let sup = support(&next, &refit);
        vars = next;
        current = refit;
        if seen.contains(&sup) {
            break;
        }
        seen.push(sup);
    }
    Ok((vars, current))
}

/// Partial correlation of every candidate with the target given `active`,
/// all in Gram form: `h` is the centered Gram matrix over all features and
/// `c[k]` the centered cross product of feature `k` with the target.
pub(crate) fn quad_conditional(
    h: &Matrix,
    c: &[f64],
    active: &[usize],
    candidate: impl Fn(usize) -> bool,
) -> Option<Vec<f64>> {
    let m = active.len();
    let sub = Matrix::from_fn(m, m, |r, s| h.get(active[r], active[s]));
    let factor = cholesky(&sub).ok()?;
    let ca: Vec<f64> = active.iter().map(|&a| c[a]).collect();
    let b = factor.solve(&ca).ok()?;
    let scores = (0..c.len())
        .map(|k| {
            if !candidate(k) {
                return f64::NEG_INFINITY;
            }
            let hk: Vec<f64> = active.iter().map(|&a| h.get(k, a)).collect();
            let num = c[k] - hk.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>();
            let Ok(g) = factor.solve(&hk) else {
                return f64::NEG_INFINITY;
            };
            let den = h.get(k, k) - hk.iter().zip(&g).map(|(x, y)| x * y).sum::<f64>();
            if den > 1e-10 * h.get(k, k).max(f64::MIN_POSITIVE) {
                num.abs() / den.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    Some(scores)
}

/// Rao score statistic of every candidate at the likelihood fit on `active`,
/// using the efficient information.
pub(crate) fn glm_conditional(
    lik: &Likelihood,
    cols: &[Vec<f64>],
    active: &[usize],
) -> Option<Vec<f64>> {
    let base: Vec<&[f64]> = active.iter().map(|&a| cols[a].as_slice()).collect();
    let mle = fit_mle(lik, &base).ok()?;
    let factor = cholesky(&mle.information).ok()?;
    let scores = (0..cols.len())
        .map(|k| {
            if active.contains(&k) {
                return f64::NEG_INFINITY;
            }
            let mut with: Vec<&[f64]> = base.clone();
            with.push(cols[k].as_slice());
            let mut theta = mle.theta.clone();
            theta.push(0.0);
            let ev = lik.eval(&with, &theta, true);
            let Some(hess) = ev.hess else {
                return 0.0;
            };
            let last = theta.len() - 1;
            let u = ev.grad[last];
            let hk: Vec<f64> = (0..last).map(|r| hess.get(r, last)).collect();
            let adj = match factor.solve(&hk) {
                Ok(g) => hk.iter().zip(&g).map(|(x, y)| x * y).sum::<f64>(),
                Err(_) => 0.0,
            };
            let info = hess.get(last, last) - adj;
            if info > 0.0 {
                u.abs() / info.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    Some(scores)
}
