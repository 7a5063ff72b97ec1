//! Probability functions and small symmetric-matrix utilities.

mod matrix;

pub use matrix::{psd_sqrt, solve_spd, sym_eigen, sym_inv_sqrt, sym_sqrt, Cholesky, Matrix};

use statrs::function::gamma;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Probability<T>(T);

impl<T: Real> Probability<T> {
    pub fn new(value: T) -> Result<Self> {
        if value >= T::zero() && value <= T::one() {
            Ok(Self(value))
        } else {
            Err(Error::InvalidArgument(format!(
                "{value} is not a probability"
            )))
        }
    }

    /// Clamps rounding excursions outside `[0, 1]`.
    fn clamped(value: f64) -> Self {
        Self(T::lit(value.clamp(0.0, 1.0)))
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }
}

/// Standard normal CDF `Φ(x)`. Infinite arguments map to 0 and 1.
pub fn std_normal_cdf<T: Real>(x: T) -> Probability<T> {
    Probability::clamped(std_normal_cdf_f64(x.as_f64()))
}

#[inline]
pub(crate) fn std_normal_cdf_f64(x: f64) -> f64 {
    // Φ(−|x|) = Q(1/2, x²/2) / 2 keeps full relative accuracy in the tail.
    if x.is_nan() {
        return f64::NAN;
    }
    if x == 0.0 {
        return 0.5;
    }
    let tail = if x.is_infinite() {
        0.0
    } else {
        0.5 * gamma::gamma_ur(0.5, 0.5 * x * x)
    };
    if x < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// CDF of `N(0, I)` on `R^d` at `ρ`; factorizes into the product of marginals.
pub fn std_normal_cdf_vec<T: Real>(rho: &[T]) -> Result<Probability<T>> {
    if rho.is_empty() {
        return Err(Error::InvalidArgument(
            "normal CDF of an empty vector".into(),
        ));
    }
    Ok(Probability::clamped(
        rho.iter()
            .map(|&x| std_normal_cdf_f64(x.as_f64()))
            .product(),
    ))
}

/// Chi-squared CDF with `k` degrees of freedom, via the regularized lower
/// incomplete gamma function `P(k/2, x/2)`.
pub fn chi_squared_cdf<T: Real>(x: T, k: usize) -> Result<Probability<T>> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "chi-squared needs at least one degree of freedom".into(),
        ));
    }
    let x = x.as_f64();
    if x.is_nan() || x < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "chi-squared CDF of negative argument {x}"
        )));
    }
    Ok(Probability::clamped(chi_squared_cdf_f64(x, k)))
}

pub(crate) fn chi_squared_cdf_f64(x: f64, k: usize) -> f64 {
    if x == 0.0 {
        0.0
    } else if x == f64::INFINITY {
        1.0
    } else {
        gamma::gamma_lr(0.5 * k as f64, 0.5 * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Composite Simpson integration of the standard normal density on
    /// `[0, x]`, plus the half mass on the negative axis.
    fn quadrature_cdf(x: f64) -> f64 {
        let n = 20_000;
        let h = x / n as f64;
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = pdf(0.0) + pdf(x);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * pdf(i as f64 * h);
        }
        0.5 + s * h / 3.0
    }

    #[test]
    fn normal_cdf_examples() {
        assert_eq!(std_normal_cdf(0.0f64).value(), 0.5);
        assert_eq!(std_normal_cdf(f64::INFINITY).value(), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY).value(), 0.0);
        let oracle = quadrature_cdf(1.0);
        assert!((oracle - 0.841345).abs() < 1e-6);
        let d = (std_normal_cdf(1.0f64).value() - oracle).abs();
        assert!(d < 1e-12, "{d:e}");
        for x in [0.3, 1.7, 2.5, 4.0] {
            assert!((std_normal_cdf(x).value() - quadrature_cdf(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_cdf_vec_examples() {
        assert_eq!(std_normal_cdf_vec(&[0.0f64, 0.0]).unwrap().value(), 0.25);
        assert_eq!(
            std_normal_cdf_vec(&[f64::INFINITY; 4]).unwrap().value(),
            1.0
        );
        let oracle = 0.5 * quadrature_cdf(1.0);
        assert!((oracle - 0.420672).abs() < 1e-6);
        assert!((std_normal_cdf_vec(&[0.0f64, 1.0]).unwrap().value() - oracle).abs() < 1e-12);
        assert!(std_normal_cdf_vec::<f64>(&[]).is_err());
    }

    #[test]
    fn chi_squared_examples() {
        for k in 1..5 {
            assert_eq!(chi_squared_cdf(0.0f64, k).unwrap().value(), 0.0);
        }
        let half = chi_squared_cdf(2.0 * 2f64.ln(), 2).unwrap().value();
        assert!((half - 0.5).abs() < 1e-12);
        // H_1(x) = 2Φ(√x) − 1
        let oracle = 2.0 * quadrature_cdf(1.0) - 1.0;
        assert!((oracle - 0.682689).abs() < 1e-6);
        assert!((chi_squared_cdf(1.0f64, 1).unwrap().value() - oracle).abs() < 1e-12);
        assert!(chi_squared_cdf(-1.0f64, 3).is_err());
        assert!(chi_squared_cdf(1.0f64, 0).is_err());
    }

    #[test]
    fn chi_squared_two_dof_closed_form() {
        for i in 0..=500 {
            let x = i as f64 * 0.1;
            let h = chi_squared_cdf(x, 2).unwrap().value();
            assert!((h - (1.0 - (-x / 2.0).exp())).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn single_precision_evaluation() {
        let p = std_normal_cdf(1.0f32).value();
        assert!((p - 0.841_344_7).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn normal_cdf_symmetric_and_monotone(x in -40.0f64..40.0, dx in 0.0f64..5.0) {
            let a = std_normal_cdf(x).value();
            let b = std_normal_cdf(-x).value();
            prop_assert!((a + b - 1.0).abs() < 1e-14);
            prop_assert!(std_normal_cdf(x + dx).value() >= a);
        }

        #[test]
        fn chi_squared_monotone(x in 0.0f64..300.0, dx in 0.0f64..10.0, k in 1usize..120) {
            let a = chi_squared_cdf(x, k).unwrap().value();
            let b = chi_squared_cdf(x + dx, k).unwrap().value();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b >= a - 1e-15);
        }
    }
}
