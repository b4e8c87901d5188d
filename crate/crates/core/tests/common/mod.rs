//! Shared builders and reference implementations for the integration tests.
#![allow(dead_code)]

use mnr::datagen::{
    build_cov, gen_response, parse_beta_spec, sample_mvn, CovKind, CovSpec, Dataset, FamilySpec,
    Generator, GeneratorSpec, ModelSpec, Response,
};
use mnr::numkit::{dot, invert_spd, Matrix};
use mnr::select::{centered, fit_penalized, PenaltyKind, PenaltySpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOEPLITZ_BETA: &str = "1:2,2:4,3:-3,4:-5,5:10";

pub fn generator(
    kind: CovKind,
    p: usize,
    n: usize,
    family: FamilySpec,
    intercept: f64,
    beta: &str,
) -> Generator {
    let model = ModelSpec::new(family, intercept, parse_beta_spec(beta, p).unwrap()).unwrap();
    let spec = GeneratorSpec {
        cov: CovSpec::new(kind, p).unwrap(),
        n,
    };
    Generator::new(&spec, &model).unwrap()
}

pub fn gaussian() -> FamilySpec {
    FamilySpec::Gaussian { sigma2: 1.0 }
}

/// The Toeplitz(0.9) linear model with five strong signals.
pub fn toeplitz_model(n: usize, p: usize) -> Generator {
    generator(
        CovKind::Toeplitz { rho: 0.9 },
        p,
        n,
        gaussian(),
        1.0,
        TOEPLITZ_BETA,
    )
}

pub fn columns_of(ds: &Dataset) -> Vec<Vec<f64>> {
    ds.columns()
}

/// Reference OLS with an intercept by normal equations, independent of the
/// crate's Cholesky: returns coefficients (intercept first), their standard
/// errors and the residual degrees of freedom.
pub fn ols_oracle(cols: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<f64>, usize) {
    let n = y.len();
    let k = cols.len() + 1;
    let x = DMatrix::from_fn(n, k, |i, c| if c == 0 { 1.0 } else { cols[c - 1][i] });
    let yv = DVector::from_column_slice(y);
    let xtx = x.transpose() * &x;
    let inv = xtx.try_inverse().expect("full rank");
    let b = &inv * x.transpose() * &yv;
    let resid = &yv - &x * &b;
    let df = n - k;
    let s2 = resid.dot(&resid) / df as f64;
    let se = (0..k).map(|i| (s2 * inv[(i, i)]).sqrt()).collect();
    (b.iter().copied().collect(), se, df)
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at the 1% level.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

/// Random sparse symmetric positive definite matrix: a sparse symmetric
/// pattern made diagonally dominant.
pub fn sparse_precision(p: usize, density: f64, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..i {
            if rng.random::<f64>() < density {
                let v = rng.random_range(-1.0..1.0);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
    }
    for i in 0..p {
        let off: f64 = (0..p).filter(|&j| j != i).map(|j| m.get(i, j).abs()).sum();
        m.set(i, i, off + rng.random_range(0.1..2.0));
    }
    m
}

/// Relative error between `θ_jj` and the leading entry of the inverse of
/// `Σ` restricted to `{j} ∪ {k : θ_jk ≠ 0}`.
pub fn block_inverse_error(theta: &Matrix, j: usize) -> f64 {
    let p = theta.rows();
    let sigma = invert_spd(theta).unwrap();
    let mut s = vec![j];
    s.extend((0..p).filter(|&k| k != j && theta.get(j, k) != 0.0));
    let inv = invert_spd(&sigma.select(&s, &s)).unwrap();
    (inv.get(0, 0) - theta.get(j, j)).abs() / theta.get(j, j)
}

/// Standardized Gaussian regression problem for KKT checks, or `None` when
/// the draw has a constant column.
pub fn kkt_problem(n: usize, p: usize, rho: f64, seed: u64) -> Option<Dataset> {
    let cov = if rho < 0.05 {
        Matrix::identity(p)
    } else {
        build_cov(&CovSpec::new(CovKind::Toeplitz { rho }, p).unwrap()).unwrap()
    };
    let x = sample_mvn(&cov, false, n, seed).unwrap();
    let mut beta = vec![0.0; p];
    beta[0] = 1.5;
    beta[p - 1] = -1.0;
    let model = ModelSpec::new(gaussian(), 0.3, beta).unwrap();
    gen_response(&x, &model, seed ^ 1)
        .and_then(|d| d.standardize())
        .ok()
}

/// `λ_max` of the centered lasso problem.
pub fn lambda_max(ds: &Dataset) -> f64 {
    let Response::Gaussian { y } = ds.response() else {
        panic!("gaussian response expected")
    };
    let yc = centered(y);
    let n = y.len() as f64;
    ds.columns()
        .iter()
        .map(|c| dot(&centered(c), &yc).abs() / n)
        .fold(0.0, f64::max)
}

/// Largest violation of the lasso KKT conditions at `λ`: `|g_j| ≤ λ` for
/// inactive and `g_j = λ·sign(β_j)` for active coefficients, where
/// `g = X_cᵀ(y_c − X_cβ)/n`.
pub fn lasso_kkt_violation(ds: &Dataset, lambda: f64) -> f64 {
    let Response::Gaussian { y } = ds.response() else {
        panic!("gaussian response expected")
    };
    let fit = fit_penalized(ds, &PenaltySpec::new(PenaltyKind::Lasso, lambda).unwrap()).unwrap();
    let n = y.len();
    let yc = centered(y);
    let xc: Vec<Vec<f64>> = ds.columns().iter().map(|c| centered(c)).collect();
    let resid: Vec<f64> = (0..n)
        .map(|i| yc[i] - xc.iter().zip(&fit.beta).map(|(c, b)| c[i] * b).sum::<f64>())
        .collect();
    xc.iter()
        .zip(&fit.beta)
        .map(|(c, &b)| {
            let g = dot(c, &resid) / n as f64;
            if b == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g - lambda * b.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}
