//! Minimal dense linear algebra: row-major matrices, Cholesky factorisation,
//! and symmetric (generalised) eigenvalue extraction.
//!
//! Everything here is sized for the problems this crate actually solves
//! (Gram matrices of a few hundred rows, beam models below ~1000 degrees of
//! freedom), so the implementations favour the classic dense algorithms:
//! Householder tridiagonalisation followed by implicit-shift QL, as in
//! EISPACK/Jama.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::math;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds from a flat row-major slice. Panics if the length disagrees.
    pub fn from_rows(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "flat data length mismatch");
        Mat {
            rows,
            cols,
            data: data.to_vec(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// y = A x.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mul_vec dimension mismatch");
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.iter()) {
                acc += a * b;
            }
            y[i] = acc;
        }
        y
    }

    /// Largest absolute asymmetry |a_ij - a_ji|, for diagnostics and tests.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                let gap = math::abs(self[(i, j)] - self[(j, i)]);
                if gap > worst {
                    worst = gap;
                }
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Mat,
}

impl Cholesky {
    /// Factors `a = L Lᵀ`. Fails with [`Error::NotPositiveDefinite`] if a
    /// pivot is non-positive or non-finite.
    pub fn new(a: &Mat) -> Result<Self> {
        assert!(a.is_square(), "Cholesky needs a square matrix");
        let n = a.rows();
        let mut l = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[(i, j)];
                for k in 0..j {
                    sum -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(Error::NotPositiveDefinite);
                    }
                    l[(i, j)] = math::sqrt(sum);
                } else {
                    l[(i, j)] = sum / l[(j, j)];
                }
            }
        }
        Ok(Cholesky { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn factor(&self) -> &Mat {
        &self.l
    }

    /// Solves `A x = b` via the two triangular systems.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        assert_eq!(x.len(), n, "solve dimension mismatch");
        // L y = b
        for i in 0..n {
            let mut sum = x[i];
            for k in 0..i {
                sum -= self.l[(i, k)] * x[k];
            }
            x[i] = sum / self.l[(i, i)];
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let mut sum = x[i];
            for k in (i + 1)..n {
                sum -= self.l[(k, i)] * x[k];
            }
            x[i] = sum / self.l[(i, i)];
        }
    }

    /// Forward substitution only: solves `L y = b`.
    pub fn forward_solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut sum = x[i];
            for k in 0..i {
                sum -= self.l[(i, k)] * x[k];
            }
            x[i] = sum / self.l[(i, i)];
        }
    }

    /// log det A = 2 Σ log L_ii.
    pub fn log_det(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim() {
            acc += math::ln(self.l[(i, i)]);
        }
        2.0 * acc
    }

    /// x b = xᵀ A⁻¹ x for a single vector (quadratic form through the factor).
    pub fn quad_form_inv(&self, x: &[f64]) -> f64 {
        let mut y = x.to_vec();
        self.forward_solve_in_place(&mut y);
        y.iter().map(|v| v * v).sum()
    }
}

const EIGEN_MAX_SWEEPS: usize = 50;

/// Eigenvalues of a symmetric matrix, ascending.
///
/// Householder tridiagonalisation followed by implicit-shift QL; eigenvectors
/// are not accumulated.
pub fn sym_eigenvalues(a: &Mat) -> Result<Vec<f64>> {
    assert!(a.is_square(), "sym_eigenvalues needs a square matrix");
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut work = a.clone();
    let (mut d, mut e) = tridiagonalize(&mut work);
    ql_implicit(&mut d, &mut e)?;
    d.sort_unstable_by(|x, y| x.partial_cmp(y).expect("eigenvalues are finite"));
    Ok(d)
}

/// Eigenvalues of the symmetric-definite pencil `K φ = λ M φ`, ascending.
///
/// Reduces to a standard symmetric problem through the Cholesky factor of
/// `M`: `C = L⁻¹ K L⁻ᵀ`.
pub fn generalized_sym_eigenvalues(k: &Mat, m: &Mat) -> Result<Vec<f64>> {
    assert_eq!(k.rows(), m.rows(), "pencil dimension mismatch");
    assert!(k.is_square() && m.is_square(), "pencil must be square");
    let n = k.rows();
    let chol = Cholesky::new(m)?;

    // W = L⁻¹ K, one forward solve per column of K.
    let mut w = Mat::zeros(n, n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            col[i] = k[(i, j)];
        }
        chol.forward_solve_in_place(&mut col);
        for i in 0..n {
            w[(i, j)] = col[i];
        }
    }
    // C = W L⁻ᵀ = (L⁻¹ Wᵀ)ᵀ, one forward solve per row of W.
    let mut c = Mat::zeros(n, n);
    for i in 0..n {
        col.copy_from_slice(w.row(i));
        chol.forward_solve_in_place(&mut col);
        for j in 0..n {
            c[(i, j)] = col[j];
        }
    }
    // Symmetry holds exactly in real arithmetic; average out roundoff.
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = s;
            c[(j, i)] = s;
        }
    }
    sym_eigenvalues(&c)
}

/// In-place Householder reduction to tridiagonal form (diagonal, subdiagonal).
///
/// Ported from the public-domain Jama `tred2` with the eigenvector
/// accumulation removed; the reduced diagonal materialises on `work`'s
/// diagonal.
fn tridiagonalize(work: &mut Mat) -> (Vec<f64>, Vec<f64>) {
    let n = work.rows();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        d[j] = work[(n - 1, j)];
    }

    for i in (1..n).rev() {
        // Scale to avoid under/overflow.
        let mut scale = 0.0;
        let mut h = 0.0;
        for item in d.iter().take(i) {
            scale += math::abs(*item);
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = work[(i - 1, j)];
                work[(i, j)] = 0.0;
                work[(j, i)] = 0.0;
            }
        } else {
            // Generate the Householder vector.
            for item in d.iter_mut().take(i) {
                *item /= scale;
                h += *item * *item;
            }
            let mut f = d[i - 1];
            let mut g = math::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }

            // Apply the similarity transformation to the leading block.
            for j in 0..i {
                f = d[j];
                work[(j, i)] = f;
                g = e[j] + work[(j, j)] * f;
                for k in (j + 1)..i {
                    g += work[(k, j)] * d[k];
                    e[k] += work[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    work[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = work[(i - 1, j)];
                work[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n {
        d[i] = work[(i, i)];
    }
    e[0] = 0.0;
    (d, e)
}

/// Implicit-shift QL on a symmetric tridiagonal matrix; eigenvalues land in
/// `d`. Ported from the public-domain Jama `tql2` without eigenvectors.
fn ql_implicit(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON; // 2^-52
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    for l in 0..n {
        tst1 = tst1.max(math::abs(d[l]) + math::abs(e[l]));
        let mut m = l;
        while m < n {
            if math::abs(e[m]) <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > EIGEN_MAX_SWEEPS {
                    return Err(Error::EigenNoConvergence);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = math::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = math::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if math::abs(e[l]) <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() < tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn cholesky_solves_small_system() {
        // A = [[4, 2], [2, 3]], b = [2, 1] -> x = [0.5, 0]
        let a = Mat::from_rows(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let chol = Cholesky::new(&a).unwrap();
        let x = chol.solve(&[2.0, 1.0]);
        assert_close(x[0], 0.5, 1e-12);
        assert_close(x[1], 0.0, 1e-12);
        assert_close(chol.log_det(), (4.0_f64 * 3.0 - 4.0).ln(), 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Mat::from_rows(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(Cholesky::new(&a).unwrap_err(), Error::NotPositiveDefinite);
    }

    #[test]
    fn quad_form_matches_direct_inverse() {
        let a = Mat::from_rows(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let chol = Cholesky::new(&a).unwrap();
        let x = [1.0, -2.0];
        let sol = chol.solve(&x);
        let direct: f64 = x.iter().zip(sol.iter()).map(|(u, v)| u * v).sum();
        assert_close(chol.quad_form_inv(&x), direct, 1e-12);
    }

    #[test]
    fn eigenvalues_of_diagonal_matrix() {
        let a = Mat::from_rows(3, 3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let ev = sym_eigenvalues(&a).unwrap();
        assert_close(ev[0], 1.0, 1e-12);
        assert_close(ev[1], 2.0, 1e-12);
        assert_close(ev[2], 3.0, 1e-12);
    }

    #[test]
    fn eigenvalues_match_analytic_2x2() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let a = Mat::from_rows(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let ev = sym_eigenvalues(&a).unwrap();
        assert_close(ev[0], 1.0, 1e-12);
        assert_close(ev[1], 3.0, 1e-12);
    }

    #[test]
    fn eigenvalues_sum_and_trace_agree() {
        // Fixed symmetric 5x5; trace equals sum of eigenvalues.
        let n = 5;
        let a = Mat::from_fn(n, n, |i, j| {
            1.0 / (1.0 + (i + j) as f64) + if i == j { 2.0 } else { 0.0 }
        });
        let ev = sym_eigenvalues(&a).unwrap();
        let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
        assert_close(ev.iter().sum::<f64>(), trace, 1e-10);
        for w in ev.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn generalized_reduces_to_standard_for_identity_mass() {
        let a = Mat::from_rows(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let m = Mat::identity(2);
        let ev = generalized_sym_eigenvalues(&a, &m).unwrap();
        assert_close(ev[0], 1.0, 1e-12);
        assert_close(ev[1], 3.0, 1e-12);
    }

    #[test]
    fn generalized_scalar_case() {
        // k x = λ m x with k = 8, m = 2 -> λ = 4.
        let k = Mat::from_rows(1, 1, &[8.0]);
        let m = Mat::from_rows(1, 1, &[2.0]);
        let ev = generalized_sym_eigenvalues(&k, &m).unwrap();
        assert_close(ev[0], 4.0, 1e-12);
    }

    #[test]
    fn generalized_diagonal_mass_scales_spectrum() {
        // K = diag(1, 4), M = diag(4, 1): eigenvalues 0.25 and 4.
        let k = Mat::from_rows(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        let m = Mat::from_rows(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let ev = generalized_sym_eigenvalues(&k, &m).unwrap();
        assert_close(ev[0], 0.25, 1e-12);
        assert_close(ev[1], 4.0, 1e-12);
    }
}
