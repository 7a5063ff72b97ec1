//! Nominal mean and long-run covariance of the grid indicator process.
//!
//! Under nominal operation `ž` is i.i.d. `N(0, I)`, so the indicator vector
//! `ξ_t` of a block only depends on blocks it shares samples with. Its mean
//! and the summed autocovariance `Σ = Σ_t Σ(t)` have closed forms in terms of
//! the standard normal CDF evaluated at grid sub-vectors and at componentwise
//! minima of pairs of them.

use crate::error::{Error, Result};
use crate::quantizer::DetectorGrid;
use crate::scalar::Real;
use crate::statskit::{std_normal_cdf_f64, Cholesky, Matrix};

/// Time offsets of the `L` sub-blocks of a test block, relative to its oldest
/// sample. Sub-vector `ρ_{i,l}` is compared against `ž_{s + offsets[l]}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    offsets: Vec<usize>,
}

impl BlockLayout {
    /// `(ž_s, …, ž_{s+L−1})`.
    pub fn contiguous(block_len: usize) -> Self {
        Self {
            offsets: (0..block_len).collect(),
        }
    }

    /// `(ž_t, ž_{t−lag})`.
    pub fn pair(lag: usize) -> Self {
        Self {
            offsets: vec![lag, 0],
        }
    }

    pub fn new(offsets: Vec<usize>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::InvalidArgument("empty block layout".into()));
        }
        let mut sorted = offsets.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(
                "block layout repeats an offset".into(),
            ));
        }
        if sorted[0] != 0 {
            return Err(Error::InvalidArgument(
                "block layout must include offset 0".into(),
            ));
        }
        Ok(Self { offsets })
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Number of consecutive samples a block covers.
    pub fn span(&self) -> usize {
        self.offsets.iter().max().map_or(0, |m| m + 1)
    }
}

/// `[ξ]_i = ∏_l 1{block_l ⪯ ρ_{i,l}}`, componentwise `≤` on each sub-vector.
pub fn indicator<T: Real>(grid: &DetectorGrid<T>, block: &[T]) -> Vec<bool> {
    assert_eq!(block.len(), grid.width(), "block width");
    let mut out = vec![false; grid.len()];
    indicator_into(grid, block, &mut out);
    out
}

pub(crate) fn indicator_into<T: Real>(grid: &DetectorGrid<T>, block: &[T], out: &mut [bool]) {
    for (o, p) in out.iter_mut().zip(grid.points()) {
        *o = block.iter().zip(p).all(|(b, r)| b <= r);
    }
}

fn phi_vec(rho: &[f64]) -> f64 {
    rho.iter().map(|&x| std_normal_cdf_f64(x)).product()
}

fn phi_min(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| std_normal_cdf_f64(x.min(y)))
        .product()
}

/// `Φ(ρ_{i,l})` for every point and sub-block.
fn phi_table(grid: &DetectorGrid<f64>) -> Vec<Vec<f64>> {
    (0..grid.len())
        .map(|i| {
            (0..grid.block_len())
                .map(|l| phi_vec(grid.part(i, l)))
                .collect()
        })
        .collect()
}

/// `[u_⋆]_i = ∏_l Φ(ρ_{i,l})`.
pub fn nominal_mean<T: Real>(grid: &DetectorGrid<T>) -> Vec<T> {
    let g = grid.cast::<f64>();
    phi_table(&g)
        .iter()
        .map(|row| T::lit(row.iter().product()))
        .collect()
}

/// `Σ(t) = E{(ξ_t − u_⋆)(ξ_0 − u_⋆)ᵀ}` for contiguous blocks of length `L`,
/// zero for `|t| ≥ L`.
pub fn lag_covariance<T: Real>(grid: &DetectorGrid<T>, t: isize) -> Matrix<T> {
    let g = grid.cast::<f64>();
    let phi = phi_table(&g);
    lag_covariance_f64(&g, &phi, t).cast()
}

fn lag_covariance_f64(g: &DetectorGrid<f64>, phi: &[Vec<f64>], t: isize) -> Matrix<f64> {
    let n = g.len();
    let l = g.block_len() as isize;
    let mut out = Matrix::zeros(n, n);
    if t.abs() >= l {
        return out;
    }
    let mean: Vec<f64> = phi.iter().map(|r| r.iter().product()).collect();
    for i in 0..n {
        for j in 0..n {
            let tilde = if t < 0 {
                let s = (-t) as usize;
                let lu = l as usize;
                let mut p = 1.0;
                for tau in 0..s {
                    p *= phi[i][tau] * phi[j][lu - s + tau];
                }
                for tau in 0..(lu - s) {
                    p *= phi_min(g.part(i, tau + s), g.part(j, tau));
                }
                p
            } else if t == 0 {
                (0..l as usize)
                    .map(|tau| phi_min(g.part(i, tau), g.part(j, tau)))
                    .product()
            } else {
                let s = t as usize;
                let lu = l as usize;
                let mut p = 1.0;
                for tau in 0..s {
                    p *= phi[i][lu - s + tau] * phi[j][tau];
                }
                for tau in 0..(lu - s) {
                    p *= phi_min(g.part(i, tau), g.part(j, s + tau));
                }
                p
            };
            out[(i, j)] = tilde - mean[i] * mean[j];
        }
    }
    out
}

/// `Σ = Σ_{t=−L+1}^{L−1} Σ(t)` for contiguous blocks.
pub fn nominal_covariance<T: Real>(grid: &DetectorGrid<T>) -> Matrix<T> {
    let g = grid.cast::<f64>();
    let phi = phi_table(&g);
    let l = g.block_len() as isize;
    let mut total = Matrix::zeros(g.len(), g.len());
    for t in (-l + 1)..l {
        total = total
            .add(&lag_covariance_f64(&g, &phi, t))
            .expect("same shape");
    }
    total.symmetrized().cast()
}

/// `Σ(k)` for an arbitrary block layout, built by grouping the thresholds that
/// apply to each absolute sample time.
pub fn layout_lag_covariance<T: Real>(
    grid: &DetectorGrid<T>,
    layout: &BlockLayout,
    k: isize,
) -> Result<Matrix<T>> {
    check_layout(grid, layout)?;
    let g = grid.cast::<f64>();
    Ok(layout_lag_covariance_f64(&g, layout, k).cast())
}

fn check_layout<T: Real>(grid: &DetectorGrid<T>, layout: &BlockLayout) -> Result<()> {
    if layout.len() != grid.block_len() {
        return Err(Error::Dimension(format!(
            "layout has {} sub-blocks, grid has {}",
            layout.len(),
            grid.block_len()
        )));
    }
    Ok(())
}

fn layout_lag_covariance_f64(g: &DetectorGrid<f64>, layout: &BlockLayout, k: isize) -> Matrix<f64> {
    let n = g.len();
    let d = g.dim();
    let offs = layout.offsets();
    let span = layout.span() as isize;
    let mut out = Matrix::zeros(n, n);
    if k.abs() >= span {
        return out;
    }
    let mean: Vec<f64> = (0..n)
        .map(|i| (0..g.block_len()).map(|l| phi_vec(g.part(i, l))).product())
        .collect();
    let mut thresholds: Vec<(isize, Vec<f64>)> = Vec::with_capacity(2 * offs.len());
    for i in 0..n {
        for j in 0..n {
            thresholds.clear();
            let mut merge =
                |time: isize, rho: &[f64]| match thresholds.iter_mut().find(|(t, _)| *t == time) {
                    Some((_, th)) => th.iter_mut().zip(rho).for_each(|(a, &b)| *a = a.min(b)),
                    None => thresholds.push((time, rho.to_vec())),
                };
            for (l, &o) in offs.iter().enumerate() {
                merge(k + o as isize, g.part(i, l));
            }
            for (l, &o) in offs.iter().enumerate() {
                merge(o as isize, g.part(j, l));
            }
            debug_assert!(thresholds.iter().all(|(_, th)| th.len() == d));
            let tilde: f64 = thresholds.iter().map(|(_, th)| phi_vec(th)).product();
            out[(i, j)] = tilde - mean[i] * mean[j];
        }
    }
    out
}

/// Long-run covariance for an arbitrary layout.
pub fn layout_covariance<T: Real>(
    grid: &DetectorGrid<T>,
    layout: &BlockLayout,
) -> Result<Matrix<T>> {
    check_layout(grid, layout)?;
    let g = grid.cast::<f64>();
    let span = layout.span() as isize;
    let mut total = Matrix::zeros(g.len(), g.len());
    for k in (-span + 1)..span {
        total = total.add(&layout_lag_covariance_f64(&g, layout, k))?;
    }
    Ok(total.symmetrized().cast())
}

/// `u_⋆`, `Σ` and a factorization of the regularized `Σ + εI`.
#[derive(Debug, Clone)]
pub struct NominalModel<T> {
    mean: Vec<T>,
    cov: Matrix<T>,
    factor: Cholesky<T>,
    epsilon: T,
}

impl<T: Real> NominalModel<T> {
    /// Regularizes with `ε = 1e−10 · trace(Σ) / I` before factorizing.
    pub fn new(mean: Vec<T>, cov: Matrix<T>) -> Result<Self> {
        let n = mean.len();
        if cov.rows() != n || cov.cols() != n {
            return Err(Error::Dimension(format!(
                "mean has {n} entries, covariance is {}x{}",
                cov.rows(),
                cov.cols()
            )));
        }
        let epsilon = T::lit(1e-10) * cov.trace() / T::lit(n as f64);
        let reg = cov.add(&Matrix::identity(n).scale(epsilon))?;
        let factor = Cholesky::new(&reg)?;
        Ok(Self {
            mean,
            cov,
            factor,
            epsilon,
        })
    }

    /// Contiguous-block model of the joint-statistics detector.
    pub fn for_grid(grid: &DetectorGrid<T>) -> Result<Self> {
        Self::new(nominal_mean(grid), nominal_covariance(grid))
    }

    pub fn for_layout(grid: &DetectorGrid<T>, layout: &BlockLayout) -> Result<Self> {
        Self::new(nominal_mean(grid), layout_covariance(grid, layout)?)
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix<T> {
        &self.cov
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn dof(&self) -> usize {
        self.mean.len()
    }

    /// `v = T (u − u_⋆)ᵀ Σ⁻¹ (u − u_⋆)` for a window of `window` blocks.
    pub fn statistic(&self, u: &[T], window: usize) -> T {
        assert_eq!(u.len(), self.mean.len(), "empirical CDF length");
        let diff: Vec<T> = u.iter().zip(&self.mean).map(|(&a, &b)| a - b).collect();
        T::lit(window as f64) * self.factor.inverse_quadratic_form(&diff)
    }

    /// Same model with points reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = order.len();
        let mean = order.iter().map(|&i| self.mean[i]).collect();
        let mut cov = Matrix::zeros(n, n);
        for (a, &i) in order.iter().enumerate() {
            for (b, &j) in order.iter().enumerate() {
                cov[(a, b)] = self.cov[(i, j)];
            }
        }
        Self::new(mean, cov)
    }
}
