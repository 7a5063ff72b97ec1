//! Distributional properties of the whitened stream and the attacked streams.

use cpsdetect::attacks::{apply_scenario, AttackKind, AttackScenario, SignGate};
use cpsdetect::linsys::{simulate, SteadyState, SystemModel, WhitenedStream};
use cpsdetect::statskit::Matrix;

fn scalar_model() -> (SystemModel<f64>, SteadyState<f64>) {
    let m = SystemModel::scalar(0.98, 1.0, 0.1, 0.1).unwrap();
    let ss = SteadyState::new(&m).unwrap();
    (m, ss)
}

fn whitened(m: &SystemModel<f64>, ss: &SteadyState<f64>, z: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut w = WhitenedStream::new(m, ss);
    z.iter().map(|zt| w.whiten_step(zt).whitened).collect()
}

/// Mean and standard error of a sample, the error from batch means.
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

#[test]
fn nominal_innovations_are_white_standard_normal() {
    let m = SystemModel::new(
        Matrix::from_rows(&[[0.9, 0.2], [-0.1, 0.7]]).unwrap(),
        Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap(),
        Matrix::from_rows(&[[0.2, 0.05], [0.05, 0.1]]).unwrap(),
        Matrix::from_rows(&[[0.1, 0.0], [0.0, 0.3]]).unwrap(),
    )
    .unwrap();
    let ss = SteadyState::new(&m).unwrap();
    let y: Vec<Vec<f64>> = simulate(&m, &ss, 400_000, 21)
        .unwrap()
        .into_iter()
        .map(|s| s.output)
        .collect();
    let w = whitened(&m, &ss, &y);
    // discard the transient from the zero initial estimate
    let w = &w[1_000..];
    for a in 0..2 {
        let xa: Vec<f64> = w.iter().map(|v| v[a]).collect();
        let (mean, se) = batch_mean(&xa, 200);
        assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
        for b in 0..2 {
            let same: Vec<f64> = w.iter().map(|v| v[a] * v[b]).collect();
            let (c, se) = batch_mean(&same, 200);
            let expected = if a == b { 1.0 } else { 0.0 };
            assert!((c - expected).abs() < 3.0 * se, "cov[{a}{b}] {c} se {se}");
            let lagged: Vec<f64> = w.windows(2).map(|p| p[1][a] * p[0][b]).collect();
            let (c, se) = batch_mean(&lagged, 200);
            assert!(c.abs() < 3.0 * se, "lag-1 cov[{a}{b}] {c} se {se}");
        }
    }
}

#[test]
fn uncorrelated_attack_hides_in_second_moments_not_in_magnitudes() {
    let (m, ss) = scalar_model();
    let y: Vec<Vec<f64>> = simulate(&m, &ss, 300_000, 8)
        .unwrap()
        .into_iter()
        .map(|s| s.output)
        .collect();
    let scenario = AttackScenario {
        kind: AttackKind::Uncorrelated {
            lag: 2,
            upsilon: 0.8,
            gate: SignGate::Rademacher,
        },
        onset: 0,
        seed: 3,
    };
    let z = apply_scenario(&m, &ss, &scenario, &y).unwrap();
    let w: Vec<f64> = whitened(&m, &ss, &z).into_iter().map(|v| v[0]).collect();
    let sq: Vec<f64> = w.iter().map(|x| x * x).collect();
    let (var, se) = batch_mean(&sq, 200);
    assert!((var - 1.0).abs() < 3.0 * se, "variance {var}");
    for lag in 1..=4 {
        let prod: Vec<f64> = w.windows(lag + 1).map(|p| p[lag] * p[0]).collect();
        let (c, se) = batch_mean(&prod, 200);
        assert!(c.abs() < 3.0 * se, "lag {lag}: {c} se {se}");
    }
    // Squares are correlated at the attack lag: cov(r_t², r_{t−2}²) = 2υ².
    let sq_prod: Vec<f64> = sq.windows(3).map(|p| p[2] * p[0] - 1.0).collect();
    let (c, se) = batch_mean(&sq_prod, 200);
    assert!((c - 2.0 * 0.8f64.powi(2)).abs() < 3.0 * se, "{c} se {se}");
    assert!(c > 10.0 * se);
}

#[test]
fn pairwise_attack_keeps_pairs_gaussian_and_breaks_triples() {
    let (m, ss) = scalar_model();
    let y: Vec<Vec<f64>> = simulate(&m, &ss, 200_001, 9)
        .unwrap()
        .into_iter()
        .map(|s| s.output)
        .collect();
    let onset = 1;
    let scenario = AttackScenario {
        kind: AttackKind::Pairwise,
        onset,
        seed: 4,
    };
    let z = apply_scenario(&m, &ss, &scenario, &y).unwrap();
    let w: Vec<f64> = whitened(&m, &ss, &z).into_iter().map(|v| v[0]).collect();
    // Odd local times start at onset.
    let mut negatives = 0;
    for t in (onset + 2..w.len()).step_by(2) {
        if w[t] * w[t - 1] * w[t - 2] < 0.0 {
            negatives += 1;
        }
    }
    assert_eq!(negatives, 0);
    // Orthant probabilities of lag-1 and lag-2 pairs stay at 1/4.
    let w = &w[onset..];
    for lag in 1..=2 {
        let hits: Vec<f64> = w
            .windows(lag + 1)
            .map(|p| (p[0] <= 0.0 && p[lag] <= 0.0) as u8 as f64 - 0.25)
            .collect();
        let (c, se) = batch_mean(&hits, 200);
        assert!(c.abs() < 3.0 * se, "lag {lag}: {c} se {se}");
    }
    // The all-negative triple never occurs at odd positions, so overall its
    // frequency halves from 1/8 to 1/16.
    let trip: Vec<f64> = w
        .windows(3)
        .map(|p| p.iter().all(|&x| x <= 0.0) as u8 as f64)
        .collect();
    let (c, se) = batch_mean(&trip, 200);
    assert!((c - 1.0 / 16.0).abs() < 3.0 * se, "{c} se {se}");
}
