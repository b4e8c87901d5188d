use super::{Matrix, NumError};

const PIVOT_RTOL: f64 = 1e-12;
const SYMMETRY_RTOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor {
    dim: usize,
    // row-major, upper triangle left at zero
    lower: Vec<f64>,
}

/// Cholesky factorization of a symmetric positive definite matrix.
///
/// Fails with [`NumError::NotPositiveDefinite`] when a pivot drops to
/// `1e-12 * max(diag)` or below; no regularization is attempted.
pub fn cholesky(a: &Matrix) -> Result<SpdFactor, NumError> {
    if !a.is_square() {
        return Err(NumError::DimensionMismatch {
            expected: a.rows(),
            got: a.cols(),
        });
    }
    let asym = a.max_asymmetry();
    if asym > SYMMETRY_RTOL * a.max_abs().max(1.0) {
        return Err(NumError::NotSymmetric(asym));
    }
    let n = a.rows();
    let max_diag = (0..n)
        .map(|i| a.get(i, i))
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = PIVOT_RTOL * max_diag.max(0.0);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let row_j = j * n;
        let mut pivot = a.get(j, j);
        for k in 0..j {
            pivot -= l[row_j + k] * l[row_j + k];
        }
        if !(pivot > threshold) || max_diag <= 0.0 {
            return Err(NumError::NotPositiveDefinite { index: j, pivot });
        }
        let d = pivot.sqrt();
        l[row_j + j] = d;
        for i in (j + 1)..n {
            let row_i = i * n;
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[row_i + k] * l[row_j + k];
            }
            l[row_i + j] = s / d;
        }
    }
    Ok(SpdFactor { dim: n, lower: l })
}

impl SpdFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> Matrix {
        Matrix::new(self.dim, self.dim, self.lower.clone()).expect("finite factor")
    }

    #[inline]
    fn l(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.dim + j]
    }

    /// Solves `L x = b` in place.
    pub fn forward_in_place(&self, b: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(l, x)| l * x).sum();
            b[i] = (b[i] - s) / self.l(i, i);
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn backward_in_place(&self, b: &mut [f64]) {
        let n = self.dim;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l(k, i) * b[k];
            }
            b[i] = s / self.l(i, i);
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, NumError> {
        if b.len() != self.dim {
            return Err(NumError::DimensionMismatch {
                expected: self.dim,
                got: b.len(),
            });
        }
        let mut x = b.to_vec();
        self.forward_in_place(&mut x);
        self.backward_in_place(&mut x);
        Ok(x)
    }

    /// `A⁻¹ = L⁻ᵀ L⁻¹`, symmetrized.
    pub fn inverse(&self) -> Matrix {
        let n = self.dim;
        // columns of L⁻¹
        let mut linv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.forward_in_place(&mut e);
            for i in 0..n {
                linv[i * n + j] = e[i];
            }
        }
        let mut inv = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                // (L⁻ᵀ L⁻¹)_ij = Σ_k linv[k][i] linv[k][j], k ≥ max(i, j)
                let s: f64 = (i..n).map(|k| linv[k * n + i] * linv[k * n + j]).sum();
                inv.set(i, j, s);
                inv.set(j, i, s);
            }
        }
        inv
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim).map(|i| self.l(i, i).ln()).sum::<f64>()
    }
}

pub fn solve_spd(factor: &SpdFactor, b: &[f64]) -> Result<Vec<f64>, NumError> {
    factor.solve(b)
}

pub fn invert_spd(a: &Matrix) -> Result<Matrix, NumError> {
    Ok(cholesky(a)?.inverse())
}
