//! Null behaviour of the detectors, checked by sampling.

use cpsdetect::detectors::{
    indicator, nominal_mean, JsDetector, JsDetectorConfig, NominalModel, NpiDetector, SoDetector,
    SoForm,
};
use cpsdetect::linsys::{Plant, SteadyState, SystemModel, WhitenedStream};
use cpsdetect::quantizer::{lloyd_grid, DetectorGrid, LloydParams};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn grid(l: usize, i: usize, seed: u64) -> DetectorGrid<f64> {
    let params = LloydParams {
        seed,
        ..LloydParams::default()
    };
    lloyd_grid(l, 1, i, &params).unwrap().grid
}

fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn batch_mean(x: &[f64], batches: usize) -> (f64, f64) {
    let per = x.len() / batches;
    let means: Vec<f64> = x
        .chunks_exact(per)
        .map(|c| c.iter().sum::<f64>() / per as f64)
        .collect();
    let b = means.len() as f64;
    let m = means.iter().sum::<f64>() / b;
    let v = means.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (b - 1.0);
    (m, (v / b).sqrt())
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (
        m,
        x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0),
    )
}

#[test]
fn indicator_mean_matches_nominal_mean() {
    let g = grid(3, 10, 11);
    let u = nominal_mean(&g);
    let z = normals(1_000_002, 12);
    let xi: Vec<Vec<bool>> = z.windows(3).map(|b| indicator(&g, b)).collect();
    for i in 0..g.len() {
        let col: Vec<f64> = xi.iter().map(|x| x[i] as u8 as f64).collect();
        let (m, se) = batch_mean(&col, 500);
        assert!(
            (m - u[i]).abs() < 3.0 * se,
            "point {i}: {m} vs {} (se {se})",
            u[i]
        );
    }
}

#[test]
fn so_statistic_is_chi_squared_under_null() {
    let m = SystemModel::scalar(0.98, 1.0, 0.1, 0.1).unwrap();
    let ss = SteadyState::new(&m).unwrap();
    let mut so = SoDetector::new(&ss, 0.99, SoForm::Inverse).unwrap();
    let mut ws = WhitenedStream::new(&m, &ss);
    let v: Vec<f64> = Plant::new(&m, &ss, 31)
        .unwrap()
        .take(1_000_000)
        .map(|s| so.step(&ws.whiten_step(&s.output).raw).v)
        .skip(100)
        .collect();
    let (mean, se) = batch_mean(&v, 500);
    assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean} se {se}");
    let dev: Vec<f64> = v.iter().map(|x| (x - 1.0).powi(2)).collect();
    let (var, se) = batch_mean(&dev, 500);
    assert!((var - 2.0).abs() < 3.0 * se, "variance {var} se {se}");
}

/// Strided `(v, ψ)` samples of a JS detector fed i.i.d. normals.
fn strided_js(l: usize, i: usize, t: usize, steps: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut det = JsDetector::new(JsDetectorConfig {
        grid: grid(l, i, seed),
        window: t,
        alpha: 0.99,
    })
    .unwrap();
    let stride = t + l;
    let (mut v, mut psi) = (Vec::new(), Vec::new());
    for (k, z) in normals(steps, seed + 1).into_iter().enumerate() {
        if k >= det.warm_up() && (k - det.warm_up()) % stride == 0 {
            let r = det.step(&[z]);
            v.push(r.v);
            psi.push(r.psi);
        } else {
            det.observe(&[z]);
        }
    }
    (v, psi)
}

#[test]
fn js_confidence_is_uniform_under_null() {
    // The smallest cell probability here is about 0.004, so the window needs
    // to be long before the counts look Gaussian.
    let (_, psi) = strided_js(3, 20, 5_000, 3_000 * 5_003, 41);
    let bins = 10;
    let mut counts = vec![0usize; bins];
    for p in &psi {
        counts[((p * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let expected = psi.len() as f64 / bins as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let critical = ChiSquared::new((bins - 1) as f64)
        .unwrap()
        .inverse_cdf(0.99);
    assert!(stat < critical, "{stat} >= {critical}, counts {counts:?}");
}

#[test]
fn npi_lag_statistics_have_chi_squared_moments_under_null() {
    let (l, i, t) = (3, 20, 500);
    let params = LloydParams {
        seed: 51,
        ..LloydParams::default()
    };
    let g = lloyd_grid(2, 1, i, &params).unwrap().grid;
    let mut npi = NpiDetector::new(g, l - 1, t, 0.99).unwrap();
    let stride = t + l;
    let mut v = vec![Vec::new(); l - 1];
    for (k, z) in normals(1_000_000, 52).into_iter().enumerate() {
        let rows = npi.step(&[z]);
        if k >= npi.warm_up() && (k - npi.warm_up()) % stride == 0 {
            for r in rows {
                v[r.lag - 1].push(r.report.v);
            }
        }
    }
    for (lag, vl) in v.iter().enumerate() {
        let (m, var) = mean_var(vl);
        assert!(
            (m - i as f64).abs() < 0.1 * i as f64,
            "lag {} mean {m}",
            lag + 1
        );
        assert!(
            (var - 2.0 * i as f64).abs() < 0.2 * 2.0 * i as f64,
            "lag {} variance {var}",
            lag + 1
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn statistic_nonnegative_and_permutation_invariant(
        seed in any::<u64>(),
        l in 1usize..4,
        n in 2usize..9,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..l).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let g = DetectorGrid::new(l, 1, &rows).unwrap();
        let model = NominalModel::for_grid(&g).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let permuted = NominalModel::for_grid(&g.permuted(&order).unwrap()).unwrap();
        for _ in 0..20 {
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let v = model.statistic(&u, 100);
            prop_assert!(v >= 0.0);
            let pu: Vec<f64> = order.iter().map(|&k| u[k]).collect();
            let pv = permuted.statistic(&pu, 100);
            prop_assert!((v - pv).abs() <= 1e-8 * v.max(1.0), "{} vs {}", v, pv);
        }
    }
}
