//! Small dense complex kernels for the decoder: column correlations,
//! least squares over a column subset, residual computation.

use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

use crate::real::Real;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinalgError {
    #[error("singular support: selected columns are rank deficient")]
    SingularSupport,
    #[error("support size {0} exceeds row count {1}")]
    SupportTooLarge(usize, usize),
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn zero(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex::zero(); rows * cols],
        }
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Complex<T>,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex<T> {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex<T>) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[Complex<T>] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .fold(Complex::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    pub fn mul_mat(&self, other: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        assert_eq!(self.cols, other.rows);
        let mut out = ComplexMatrix::zero(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a.is_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    let v = out.get(r, c) + a * other.get(k, c);
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> ComplexMatrix<T> {
        ComplexMatrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }
}

pub fn norm_sqr<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm<T: Real>(v: &[Complex<T>]) -> T {
    norm_sqr(v).sqrt()
}

/// Squared magnitudes of the inner products between every column and `r`.
pub fn column_correlations<T: Real>(phi: &ComplexMatrix<T>, r: &[Complex<T>]) -> Vec<T> {
    assert_eq!(r.len(), phi.rows());
    let mut acc = vec![Complex::<T>::zero(); phi.cols()];
    for (i, &ri) in r.iter().enumerate() {
        for (a, &p) in acc.iter_mut().zip(phi.row(i)) {
            *a += p.conj() * ri;
        }
    }
    acc.into_iter().map(|x| x.norm_sqr()).collect()
}

/// Relative rank tolerance: a reduced column whose pivot falls below this
/// fraction of the largest pivot flags the support as singular.
const RANK_TOL: f64 = 1e-10;

/// Minimizes `||y - phi[:, support] * beta||` by Householder QR.
///
/// Returns the coefficients aligned with `support`. Rank deficiency is an
/// error, not a least-norm fallback.
pub fn least_squares_on_support<T: Real>(
    phi: &ComplexMatrix<T>,
    support: &[usize],
    y: &[Complex<T>],
) -> Result<Vec<Complex<T>>, LinalgError> {
    let m = phi.rows();
    let k = support.len();
    if k > m {
        return Err(LinalgError::SupportTooLarge(k, m));
    }
    if k == 0 {
        return Ok(Vec::new());
    }

    // Column-major scratch of the selected columns; reflections are applied
    // in place, leaving R in the upper triangle.
    let mut a = vec![Complex::<T>::zero(); m * k];
    for (j, &col) in support.iter().enumerate() {
        for i in 0..m {
            a[j * m + i] = phi.get(i, col);
        }
    }
    let mut qty: Vec<Complex<T>> = y.to_vec();
    let mut pivots: Vec<T> = Vec::with_capacity(k);

    for j in 0..k {
        let col_norm = {
            let s: T = a[j * m + j..(j + 1) * m].iter().map(|x| x.norm_sqr()).sum();
            s.sqrt()
        };
        if col_norm.is_zero() {
            return Err(LinalgError::SingularSupport);
        }
        let head = a[j * m + j];
        let phase = if head.is_zero() {
            Complex::new(T::one(), T::zero())
        } else {
            head / head.norm()
        };
        let alpha = -phase * col_norm;
        // v = x - alpha*e1, stored over the column tail
        a[j * m + j] = head - alpha;
        let vnorm2: T = a[j * m + j..(j + 1) * m].iter().map(|x| x.norm_sqr()).sum();

        let reflect = |target: &mut [Complex<T>], v: &[Complex<T>]| {
            let dot = v
                .iter()
                .zip(target.iter())
                .fold(Complex::<T>::zero(), |acc, (&vi, &ti)| acc + vi.conj() * ti);
            let coef = dot * T::of(2.0) / vnorm2;
            for (t, &vi) in target.iter_mut().zip(v) {
                *t -= coef * vi;
            }
        };

        let (v_cols, rest) = a.split_at_mut((j + 1) * m);
        let v = &v_cols[j * m + j..];
        for l in 0..k - j - 1 {
            reflect(&mut rest[l * m + j..(l + 1) * m], v);
        }
        reflect(&mut qty[j..], v);
        pivots.push(alpha.norm());
        // overwrite the reflector slot with the diagonal entry of R
        a[j * m + j] = alpha;
    }

    let largest = pivots.iter().cloned().fold(T::zero(), T::max);
    if pivots.iter().any(|&p| p < largest * T::of(RANK_TOL)) {
        return Err(LinalgError::SingularSupport);
    }

    // Back-substitute R beta = (Q^H y)[..k]; R[j, l] sits at a[l*m + j].
    let mut beta = vec![Complex::<T>::zero(); k];
    for j in (0..k).rev() {
        let mut rhs = qty[j];
        for l in j + 1..k {
            rhs -= a[l * m + j] * beta[l];
        }
        beta[j] = rhs / a[j * m + j];
    }
    Ok(beta)
}

/// `y - phi[:, support] * beta`.
pub fn residual_update<T: Real>(
    y: &[Complex<T>],
    phi: &ComplexMatrix<T>,
    support: &[usize],
    beta: &[Complex<T>],
) -> Vec<Complex<T>> {
    assert_eq!(support.len(), beta.len());
    let mut r = y.to_vec();
    for (&col, &b) in support.iter().zip(beta) {
        for (i, ri) in r.iter_mut().enumerate() {
            *ri -= phi.get(i, col) * b;
        }
    }
    r
}
