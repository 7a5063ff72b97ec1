//! Test-point grids for the empirical-CDF detectors.
//!
//! Points are the centroids of a Lloyd (k-means) quantizer trained on a fixed
//! Monte Carlo sample of `N(0, I_{LD})`, seeded with k-means++.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const ALGORITHM_TAG: &str = "lloyd-kmeanspp-v1";

/// `I` points in `R^{LD}`, each split into `L` sub-vectors of length `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorGrid<T> {
    block_len: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> DetectorGrid<T> {
    pub fn new(block_len: usize, dim: usize, points: &[Vec<T>]) -> Result<Self> {
        if block_len == 0 || dim == 0 || points.is_empty() {
            return Err(Error::InvalidArgument(
                "grid needs L >= 1, D >= 1 and at least one point".into(),
            ));
        }
        let width = block_len * dim;
        let mut data = Vec::with_capacity(points.len() * width);
        for (i, p) in points.iter().enumerate() {
            if p.len() != width {
                return Err(Error::Dimension(format!(
                    "grid point {i} has {} coordinates, expected {width}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "grid point {i} has a non-finite coordinate"
                )));
            }
            data.extend_from_slice(p);
        }
        let grid = Self {
            block_len,
            dim,
            data,
        };
        for i in 0..grid.len() {
            for j in 0..i {
                if grid.point(i) == grid.point(j) {
                    return Err(Error::InvalidArgument(format!(
                        "grid points {j} and {i} coincide"
                    )));
                }
            }
        }
        Ok(grid)
    }

    #[inline]
    pub fn block_len(&self) -> usize {
        self.block_len
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.block_len * self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        let w = self.width();
        &self.data[i * w..(i + 1) * w]
    }

    /// Sub-vector `ρ_{i,l}`.
    #[inline]
    pub fn part(&self, i: usize, l: usize) -> &[T] {
        let start = i * self.width() + l * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.width())
    }

    pub fn cast<U: Real>(&self) -> DetectorGrid<U> {
        DetectorGrid {
            block_len: self.block_len,
            dim: self.dim,
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }

    /// Same points, reordered so that new point `k` is old point `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let rows: Vec<Vec<T>> = order.iter().map(|&i| self.point(i).to_vec()).collect();
        Self::new(self.block_len, self.dim, &rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LloydParams {
    /// Training sample size; `None` means `max(10⁵, 1000·I)`.
    pub sample_count: Option<usize>,
    pub seed: u64,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for LloydParams {
    fn default() -> Self {
        Self {
            sample_count: None,
            seed: 0,
            max_iters: 200,
            rel_tol: 1e-6,
        }
    }
}

impl LloydParams {
    pub fn resolved_sample_count(&self, points: usize) -> usize {
        self.sample_count
            .unwrap_or_else(|| 100_000usize.max(1000 * points))
    }
}

#[derive(Debug, Clone)]
pub struct LloydOutcome {
    pub grid: DetectorGrid<f64>,
    /// Mean squared distance to the nearest centroid, one entry per
    /// assignment pass.
    pub distortions: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LloydOutcome {
    pub fn final_distortion(&self) -> f64 {
        *self.distortions.last().expect("at least one pass")
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid and its squared distance. Ties go to the
/// lowest index.
#[inline]
fn nearest(x: &[f64], centroids: &[f64], width: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.chunks(width).enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

pub(crate) fn standard_normal_sample(count: usize, width: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count * width)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect()
}

fn kmeans_pp(samples: &[f64], width: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = samples.len() / width;
    let mut centroids = Vec::with_capacity(k * width);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(&samples[first * width..(first + 1) * width]);
    let mut d2: Vec<f64> = samples
        .par_chunks(width)
        .map(|x| sq_dist(x, &centroids[..width]))
        .collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            d2.iter()
                .position(|&d| {
                    acc += d;
                    acc > target
                })
                .unwrap_or(n - 1)
        } else {
            rng.random_range(0..n)
        };
        let c = samples[pick * width..(pick + 1) * width].to_vec();
        d2.par_iter_mut()
            .zip(samples.par_chunks(width))
            .for_each(|(d, x)| *d = d.min(sq_dist(x, &c)));
        centroids.extend_from_slice(&c);
    }
    centroids
}

/// Runs Lloyd's algorithm against `N(0, I_{LD})`.
///
/// Distortion is nonincreasing across passes. Empty cells are reseeded at the
/// sample farthest from its centroid. Stops when the relative distortion
/// improvement drops below `rel_tol` or after `max_iters` passes; in the latter
/// case `converged` is false and the last iterate is returned.
pub fn lloyd_grid(
    block_len: usize,
    dim: usize,
    points: usize,
    params: &LloydParams,
) -> Result<LloydOutcome> {
    if block_len == 0 || dim == 0 || points == 0 {
        return Err(Error::InvalidArgument(
            "Lloyd grid needs L, D, I >= 1".into(),
        ));
    }
    let width = block_len * dim;
    let n = params.resolved_sample_count(points);
    if n < points {
        return Err(Error::InvalidArgument(format!(
            "{n} training samples cannot support {points} centroids"
        )));
    }
    let samples = standard_normal_sample(n, width, params.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(0x5851_f42d_4c95_7f2d));
    let mut centroids = kmeans_pp(&samples, width, points, &mut rng);

    let mut distortions = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let max_iters = params.max_iters.max(1);
    while iterations < max_iters {
        iterations += 1;
        let assigned: Vec<(usize, f64)> = samples
            .par_chunks(width)
            .map(|x| nearest(x, &centroids, width))
            .collect();
        let distortion = assigned.iter().map(|a| a.1).sum::<f64>() / n as f64;

        let mut sums = vec![0.0; points * width];
        let mut counts = vec![0usize; points];
        for (x, &(k, _)) in samples.chunks(width).zip(&assigned) {
            counts[k] += 1;
            for (s, v) in sums[k * width..(k + 1) * width].iter_mut().zip(x) {
                *s += v;
            }
        }
        let mut far: Vec<(usize, f64)> =
            assigned.iter().enumerate().map(|(i, a)| (i, a.1)).collect();
        let mut far_taken = 0;
        for k in 0..points {
            let c = &mut centroids[k * width..(k + 1) * width];
            if counts[k] > 0 {
                let inv = 1.0 / counts[k] as f64;
                for (cv, s) in c.iter_mut().zip(&sums[k * width..(k + 1) * width]) {
                    *cv = s * inv;
                }
            } else {
                if far_taken == 0 {
                    far.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                }
                let idx = far[far_taken].0;
                far_taken += 1;
                c.copy_from_slice(&samples[idx * width..(idx + 1) * width]);
            }
        }

        let improved = distortions
            .last()
            .map(|&prev: &f64| (prev - distortion) / prev.max(f64::MIN_POSITIVE));
        distortions.push(distortion);
        if far_taken == 0 && matches!(improved, Some(r) if r < params.rel_tol) {
            converged = true;
            break;
        }
    }

    let rows: Vec<Vec<f64>> = centroids.chunks(width).map(<[f64]>::to_vec).collect();
    Ok(LloydOutcome {
        grid: DetectorGrid::new(block_len, dim, &rows)?,
        distortions,
        iterations,
        converged,
    })
}

/// Mean squared quantization error of `grid` on `samples` (flat, row-major).
pub fn distortion(grid: &DetectorGrid<f64>, samples: &[f64]) -> f64 {
    let w = grid.width();
    let total: f64 = samples
        .par_chunks(w)
        .map(|x| nearest(x, &grid.data, w).1)
        .sum();
    total / (samples.len() / w) as f64
}

/// Everything that determines a trained grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridKey {
    pub block_len: usize,
    pub dim: usize,
    pub points: usize,
    pub sample_count: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl GridKey {
    pub fn new(block_len: usize, dim: usize, points: usize, params: &LloydParams) -> Self {
        Self {
            block_len,
            dim,
            points,
            sample_count: params.resolved_sample_count(points),
            seed: params.seed,
            max_iters: params.max_iters,
            rel_tol: params.rel_tol,
        }
    }

    /// Default file name for this key inside a cache directory.
    pub fn file_name(&self) -> String {
        format!(
            "grid_L{}_D{}_I{}_n{}_s{}.txt",
            self.block_len, self.dim, self.points, self.sample_count, self.seed
        )
    }

    fn header(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "format = cpsdetect-grid");
        let _ = writeln!(s, "algorithm = {ALGORITHM_TAG}");
        let _ = writeln!(s, "block_len = {}", self.block_len);
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "points = {}", self.points);
        let _ = writeln!(s, "sample_count = {}", self.sample_count);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "max_iters = {}", self.max_iters);
        let _ = writeln!(s, "rel_tol = {:?}", self.rel_tol);
        s
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Writes the grid as `I` lines of `L·D` round-trip decimal doubles, with the
/// key in a `<path>.meta` sidecar.
pub fn save_grid(path: &Path, grid: &DetectorGrid<f64>, key: &GridKey) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let mut body = String::new();
    for p in grid.points() {
        let row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        body.push_str(&row.join(" "));
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| io_err(path, e))?;
    let meta = sidecar(path);
    fs::write(&meta, key.header()).map_err(|e| io_err(&meta, e))
}

/// Loads a cached grid; `Ok(None)` when absent or keyed differently.
pub fn load_grid(path: &Path, key: &GridKey) -> Result<Option<DetectorGrid<f64>>> {
    let meta = sidecar(path);
    let header = match fs::read_to_string(&meta) {
        Ok(h) => h,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_err(&meta, e)),
    };
    if header != key.header() {
        return Ok(None);
    }
    let body = match fs::read_to_string(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_err(path, e)),
    };
    let mut rows = Vec::with_capacity(key.points);
    for (ln, line) in body.lines().enumerate() {
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|e| {
                    Error::GridCache(format!("{} line {}: {e}", path.display(), ln + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.len() != key.points {
        return Err(Error::GridCache(format!(
            "{}: {} rows, expected {}",
            path.display(),
            rows.len(),
            key.points
        )));
    }
    DetectorGrid::new(key.block_len, key.dim, &rows)
        .map(Some)
        .map_err(|e| Error::GridCache(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Built,
}

/// Loads the grid from `path` if its key matches, otherwise trains and
/// stores it.
pub fn lloyd_grid_cached(
    path: &Path,
    block_len: usize,
    dim: usize,
    points: usize,
    params: &LloydParams,
) -> Result<(DetectorGrid<f64>, CacheStatus, Option<LloydOutcome>)> {
    let key = GridKey::new(block_len, dim, points, params);
    if let Some(grid) = load_grid(path, &key)? {
        return Ok((grid, CacheStatus::Hit, None));
    }
    let outcome = lloyd_grid(block_len, dim, points, params)?;
    save_grid(path, &outcome.grid, &key)?;
    Ok((outcome.grid.clone(), CacheStatus::Built, Some(outcome)))
}
