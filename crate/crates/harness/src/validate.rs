//! Statistical self-checks behind `cpsdetect validate`.

use cpsdetect::detectors::{
    indicator, nominal_covariance, nominal_mean, JsDetector, JsDetectorConfig,
};
use cpsdetect::linsys::{Plant, SteadyState, WhitenedStream};
use cpsdetect::quantizer::LloydParams;
use cpsdetect::statskit::Matrix;
use cpsdetect::{DetectorGrid, SystemModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::run::obtain_grid;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Copy)]
pub struct ValidateOptions {
    pub seed: u64,
    /// Perturbs an off-diagonal entry of the closed-form covariance.
    pub corrupt_sigma: bool,
    pub null_steps: usize,
    pub sigma_samples: usize,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            corrupt_sigma: false,
            null_steps: 1_000_000,
            sigma_samples: 4_000_000,
        }
    }
}

fn reference_model() -> SystemModel {
    SystemModel::scalar(0.98, 1.0, 0.1, 0.1).expect("stable reference model")
}

/// Monte Carlo estimate of a sum of indicator autocovariances with batch
/// standard errors.
#[derive(Debug, Clone)]
pub struct McEstimate {
    pub mean: Matrix<f64>,
    pub se: Matrix<f64>,
}

/// Estimates `Σ_{k ∈ lags} Σ(k)` for contiguous blocks of i.i.d. `N(0, 1)`
/// samples. Each batch draws its own independent stream, so batch means are
/// i.i.d. and their spread gives the standard error.
pub fn monte_carlo_lag_sum(
    grid: &DetectorGrid,
    lags: &[isize],
    samples: usize,
    batches: usize,
    seed: u64,
) -> McEstimate {
    assert_eq!(grid.dim(), 1, "scalar grids only");
    let n = grid.len();
    let l = grid.block_len();
    let u = nominal_mean(grid);
    let per_batch = samples / batches;
    let lo = lags.iter().copied().min().unwrap_or(0).min(0);
    let hi = lags.iter().copied().max().unwrap_or(0).max(0);
    let batch_means: Vec<Vec<f64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64 + 1);
            let z: Vec<f64> = (0..per_batch)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let blocks = per_batch + 1 - l;
            let centered: Vec<Vec<f64>> = (0..blocks)
                .map(|s| {
                    indicator(grid, &z[s..s + l])
                        .iter()
                        .zip(&u)
                        .map(|(&x, &m)| x as u8 as f64 - m)
                        .collect()
                })
                .collect();
            let mut acc = vec![0.0; n * n];
            let mut a = vec![0.0; n];
            let range = (-lo) as usize..(blocks as isize - hi) as usize;
            let count = range.len();
            for s in range {
                a.iter_mut().for_each(|x| *x = 0.0);
                for &k in lags {
                    let row = &centered[(s as isize + k) as usize];
                    a.iter_mut().zip(row).for_each(|(x, &c)| *x += c);
                }
                let cs = &centered[s];
                for i in 0..n {
                    for j in 0..n {
                        acc[i * n + j] += a[i] * cs[j];
                    }
                }
            }
            acc.iter().map(|x| x / count as f64).collect()
        })
        .collect();
    let bf = batches as f64;
    let mut mean = Matrix::zeros(n, n);
    let mut se = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let m = batch_means.iter().map(|b| b[i * n + j]).sum::<f64>() / bf;
            let var = batch_means
                .iter()
                .map(|b| (b[i * n + j] - m).powi(2))
                .sum::<f64>()
                / (bf - 1.0);
            mean[(i, j)] = m;
            se[(i, j)] = (var / bf).sqrt();
        }
    }
    McEstimate { mean, se }
}

/// Largest `|closed − mc| / se` over all entries.
pub fn max_standardized_gap(closed: &Matrix<f64>, mc: &McEstimate) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..closed.rows() {
        for j in 0..closed.cols() {
            worst = worst.max((closed[(i, j)] - mc.mean[(i, j)]).abs() / mc.se[(i, j)]);
        }
    }
    worst
}

/// Null run of the JS detector sampled every `T + L` steps: returns the
/// sampled `v` and `ψ` values.
pub fn strided_null_statistics(
    block_len: usize,
    points: usize,
    window: usize,
    steps: usize,
    plant_seed: u64,
    lloyd_seed: u64,
) -> Result<(Vec<f64>, Vec<f64>), HarnessError> {
    let model = reference_model();
    let steady = SteadyState::new(&model)?;
    let params = LloydParams {
        seed: lloyd_seed,
        ..LloydParams::default()
    };
    let (grid, _) = obtain_grid(block_len, 1, points, &params, None)?;
    let mut det = JsDetector::new(JsDetectorConfig {
        grid,
        window,
        alpha: 0.99,
    })?;
    let stride = window + block_len;
    let mut ws = WhitenedStream::new(&model, &steady);
    let mut plant = Plant::new(&model, &steady, plant_seed)?;
    let (mut vs, mut psis) = (Vec::new(), Vec::new());
    for t in 0..steps {
        let zw = ws.whiten_step(&plant.step().output).whitened;
        if t >= det.warm_up() && (t - det.warm_up()) % stride == 0 {
            let r = det.step(&zw);
            vs.push(r.v);
            psis.push(r.psi);
        } else {
            det.observe(&zw);
        }
    }
    Ok((vs, psis))
}

pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

fn null_checks(opts: &ValidateOptions) -> Result<Vec<Check>, HarnessError> {
    let points = 20;
    let (vs, psis) =
        strided_null_statistics(3, points, 500, opts.null_steps, opts.seed, opts.seed + 1)?;
    let (m, v) = mean_var(&vs);
    let i = points as f64;
    let far = psis.iter().filter(|&&p| p >= 0.99).count() as f64 / psis.len() as f64;
    Ok(vec![
        Check {
            name: "null_mean".into(),
            passed: (m - i).abs() <= 0.1 * i,
            measured: m,
            tolerance: 0.1 * i,
            detail: format!("mean of {} strided v against I = {points}", vs.len()),
        },
        Check {
            name: "null_variance".into(),
            passed: (v - 2.0 * i).abs() <= 0.2 * 2.0 * i,
            measured: v,
            tolerance: 0.4 * i,
            detail: format!("variance of strided v against 2I = {}", 2 * points),
        },
        Check {
            name: "false_alarm_rate".into(),
            passed: (0.005..=0.02).contains(&far),
            measured: far,
            tolerance: 0.01,
            detail: "fraction with psi >= 0.99, accepted in [0.005, 0.02]".into(),
        },
    ])
}

fn sigma_check(opts: &ValidateOptions) -> Result<Check, HarnessError> {
    let params = LloydParams {
        sample_count: Some(20_000),
        seed: opts.seed,
        ..LloydParams::default()
    };
    let (grid, _) = obtain_grid(2, 1, 4, &params, None)?;
    let mut closed = nominal_covariance(&grid);
    if opts.corrupt_sigma {
        closed[(0, 1)] += 0.02;
        closed[(1, 0)] += 0.02;
    }
    let mc = monte_carlo_lag_sum(&grid, &[-1, 0, 1], opts.sigma_samples, 200, opts.seed);
    let gap = max_standardized_gap(&closed, &mc);
    Ok(Check {
        name: "sigma_closed_form_vs_monte_carlo".into(),
        passed: gap <= 3.0,
        measured: gap,
        tolerance: 3.0,
        detail: format!(
            "largest entrywise gap in standard errors, L = 2, I = 4, {} samples",
            opts.sigma_samples
        ),
    })
}

fn round_trip_check(opts: &ValidateOptions) -> Result<Check, HarnessError> {
    let model = SystemModel::new(
        Matrix::from_rows(&[[0.9, 0.2], [-0.1, 0.7]])?,
        Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]])?,
        Matrix::from_rows(&[[0.2, 0.05], [0.05, 0.1]])?,
        Matrix::from_rows(&[[0.1, 0.0], [0.0, 0.3]])?,
    )?;
    let steady = SteadyState::new(&model)?;
    let mut fwd = WhitenedStream::new(&model, &steady);
    let mut back = WhitenedStream::new(&model, &steady);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let zw: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
        let z = fwd.reconstruct_step(&zw);
        let again = back.whiten_step(&z).whitened;
        for (a, b) in zw.iter().zip(&again) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(Check {
        name: "whiten_reconstruct_round_trip".into(),
        passed: worst <= 1e-9,
        measured: worst,
        tolerance: 1e-9,
        detail: "max deviation over 10^4 steps of a 2-state, 2-output plant".into(),
    })
}

pub fn run_validation(opts: &ValidateOptions) -> Result<ValidationReport, HarnessError> {
    let mut checks = null_checks(opts)?;
    checks.push(sigma_check(opts)?);
    checks.push(round_trip_check(opts)?);
    Ok(ValidationReport {
        seed: opts.seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}
