//! Small dense matrices and the symmetric factorizations the filter and the
//! detectors need. Row-major, heap allocated, dimensions checked at runtime.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices. All rows must share one length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![T::one(); n])
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn scalar(v: T) -> Self {
        Self::from_diag(&[v])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// `self * x` for a column vector `x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols, "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Accumulates `self * x` into `out`.
    pub fn mul_vec_add(&self, x: &[T], out: &mut [T]) {
        assert_eq!(x.len(), self.cols, "mul_vec dimension mismatch");
        assert_eq!(out.len(), self.rows, "mul_vec output mismatch");
        for (i, o) in out.iter_mut().enumerate() {
            *o += self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum::<T>();
        }
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Dimension(format!(
                "shape {}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&a| a * a).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = half * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| U::lit(a.as_f64())).collect(),
        }
    }

    fn check_symmetric(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let asym = self.max_asymmetry();
        let scale = T::one().max(self.max_abs());
        if asym > T::lit(1e-9).max(T::epsilon() * T::lit(64.0)) * scale {
            return Err(Error::NotSymmetric(asym.as_f64()));
        }
        Ok(())
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[T]> = self.data.chunks(self.cols.max(1)).collect();
        f.debug_struct("Matrix")
            .field("shape", &(self.rows, self.cols))
            .field("rows", &rows)
            .finish()
    }
}

/// Lower-triangular Cholesky factor `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    lower: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn new(m: &Matrix<T>) -> Result<Self> {
        m.check_symmetric()?;
        let n = m.rows();
        let mut l = Matrix::zeros(n, n);
        // Pivots below this are treated as zero.
        let floor = T::epsilon() * T::lit(n as f64) * m.max_abs().max(T::min_positive_value());
        for j in 0..n {
            let mut d = m[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > floor) {
                return Err(Error::NotPositiveDefinite {
                    pivot: j,
                    value: d.as_f64(),
                });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn lower(&self) -> &Matrix<T> {
        &self.lower
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    /// Solves `L y = b` in place.
    pub fn forward_substitute(&self, b: &mut [T]) {
        let l = &self.lower;
        for i in 0..b.len() {
            let row = l.row(i);
            let s: T = row[..i].iter().zip(&b[..i]).map(|(&a, &x)| a * x).sum();
            b[i] = (b[i] - s) / row[i];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn backward_substitute(&self, y: &mut [T]) {
        let l = &self.lower;
        let n = y.len();
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.dim(), "solve dimension mismatch");
        let mut x = b.to_vec();
        self.forward_substitute(&mut x);
        self.backward_substitute(&mut x);
        x
    }

    /// `bᵀ M⁻¹ b`, computed as `‖L⁻¹ b‖²`.
    pub fn inverse_quadratic_form(&self, b: &[T]) -> T {
        let mut y = b.to_vec();
        self.forward_substitute(&mut y);
        y.iter().map(|&v| v * v).sum()
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv.symmetrized()
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matrix whose columns are the eigenvectors.
pub fn sym_eigen<T: Real>(m: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
    m.check_symmetric()?;
    let n = m.rows();
    let mut a = m.symmetrized();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm().max(T::min_positive_value());
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= T::epsilon() * scale * T::lit(1e-2) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Ok(((0..n).map(|i| a[(i, i)]).collect(), v))
}

fn spectral_map<T: Real>(vecs: &Matrix<T>, vals: &[T], f: impl Fn(T) -> T) -> Matrix<T> {
    let n = vals.len();
    let mapped: Vec<T> = vals.iter().map(|&l| f(l)).collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s: T = (0..n)
                .map(|k| vecs[(i, k)] * mapped[k] * vecs[(j, k)])
                .sum();
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    out
}

fn pd_floor<T: Real>(vals: &[T]) -> T {
    let top = vals.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    T::epsilon() * T::lit(vals.len().max(1) as f64) * top.max(T::min_positive_value())
}

/// Symmetric positive-definite square root `S` with `S S = M`.
pub fn sym_sqrt<T: Real>(m: &Matrix<T>) -> Result<Matrix<T>> {
    let (vals, vecs) = sym_eigen(m)?;
    let floor = pd_floor(&vals);
    if let Some((i, &v)) = vals.iter().enumerate().find(|(_, &v)| !(v > floor)) {
        return Err(Error::NotPositiveDefinite {
            pivot: i,
            value: v.as_f64(),
        });
    }
    Ok(spectral_map(&vecs, &vals, |l| l.sqrt()))
}

/// `M^{-1/2}` for symmetric positive-definite `M`.
pub fn sym_inv_sqrt<T: Real>(m: &Matrix<T>) -> Result<Matrix<T>> {
    let (vals, vecs) = sym_eigen(m)?;
    let floor = pd_floor(&vals);
    if let Some((i, &v)) = vals.iter().enumerate().find(|(_, &v)| !(v > floor)) {
        return Err(Error::NotPositiveDefinite {
            pivot: i,
            value: v.as_f64(),
        });
    }
    Ok(spectral_map(&vecs, &vals, |l| l.sqrt().recip()))
}

/// Square root of a symmetric positive-semidefinite matrix. Slightly negative
/// eigenvalues from rounding are clamped to zero; clearly negative ones error.
pub fn psd_sqrt<T: Real>(m: &Matrix<T>) -> Result<Matrix<T>> {
    let (vals, vecs) = sym_eigen(m)?;
    let floor = pd_floor(&vals) * T::lit(16.0);
    if let Some((i, &v)) = vals.iter().enumerate().find(|(_, &v)| v < -floor) {
        return Err(Error::NotPositiveDefinite {
            pivot: i,
            value: v.as_f64(),
        });
    }
    Ok(spectral_map(&vecs, &vals, |l| l.max(T::zero()).sqrt()))
}

/// Solves `M x = b` for symmetric positive-definite `M`.
pub fn solve_spd<T: Real>(m: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    if b.len() != m.rows() {
        return Err(Error::Dimension(format!(
            "right-hand side has {} entries, matrix is {}x{}",
            b.len(),
            m.rows(),
            m.cols()
        )));
    }
    Ok(Cholesky::new(m)?.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
        let g = Matrix::from_vec(
            n,
            n,
            (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        g.matmul(&g.transpose())
            .unwrap()
            .add(&Matrix::identity(n).scale(0.1))
            .unwrap()
    }

    #[test]
    fn sqrt_of_identity_and_scalar() {
        let s = sym_sqrt(&Matrix::<f64>::identity(3)).unwrap();
        assert!(s.sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-15);
        let s = sym_sqrt(&Matrix::scalar(4.0f64)).unwrap();
        assert_eq!(s[(0, 0)], 2.0);
    }

    #[test]
    fn sqrt_residual_on_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=16 {
            let m = random_spd(n, &mut rng);
            let s = sym_sqrt(&m).unwrap();
            let res = s.matmul(&s).unwrap().sub(&m).unwrap().frobenius_norm();
            assert!(res < 1e-10, "n={n} residual {res:e}");
            assert!(s.max_asymmetry() < 1e-12);
            let si = sym_inv_sqrt(&m).unwrap();
            let id = si.matmul(&s).unwrap().sub(&Matrix::identity(n)).unwrap();
            assert!(id.max_abs() < 1e-8);
        }
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(
            sym_sqrt(&m),
            Err(Error::NotPositiveDefinite { .. })
        ));
        let z = Matrix::<f64>::zeros(2, 2);
        assert!(sym_sqrt(&z).is_err());
        assert!(psd_sqrt(&z).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn solve_spd_examples() {
        let b = vec![1.0, -2.0, 3.0];
        assert_eq!(solve_spd(&Matrix::identity(3), &b).unwrap(), b);
        assert!((solve_spd(&Matrix::scalar(2.0f64), &[4.0]).unwrap()[0] - 2.0).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1, 4, 9, 30] {
            let m = random_spd(n, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let x = solve_spd(&m, &b).unwrap();
            let r: f64 = m
                .mul_vec(&x)
                .iter()
                .zip(&b)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(r < 1e-8, "n={n} residual {r:e}");
        }
    }

    #[test]
    fn solve_spd_rejects_singular() {
        let m = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(solve_spd(&m, &[1.0, 1.0]).is_err());
        let asym = Matrix::from_rows(&[[2.0, 1.0], [0.0, 2.0]]).unwrap();
        assert!(matches!(Cholesky::new(&asym), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn quadratic_form_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_spd(6, &mut rng);
        let ch = Cholesky::new(&m).unwrap();
        let b: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let x = ch.solve(&b);
        let direct: f64 = b.iter().zip(&x).map(|(a, c)| a * c).sum();
        assert!((direct - ch.inverse_quadratic_form(&b)).abs() < 1e-9 * direct.abs());
        let id = m.matmul(&ch.inverse()).unwrap();
        assert!(id.sub(&Matrix::identity(6)).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn works_in_single_precision() {
        let m = Matrix::from_rows(&[[4.0f32, 1.0], [1.0, 3.0]]).unwrap();
        let s = sym_sqrt(&m).unwrap();
        assert!(s.matmul(&s).unwrap().sub(&m).unwrap().max_abs() < 1e-5);
    }
}
