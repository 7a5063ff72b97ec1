//! Second-order test on the raw innovation.

use super::block::check_alpha;
use super::Report;
use crate::error::Result;
use crate::linsys::SteadyState;
use crate::scalar::Real;
use crate::statskit::Matrix;

/// Weight of the quadratic form `z̃ᵀ W z̃`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SoForm {
    /// `W = Γ⁻¹`; `v ~ χ²(D)` under the null.
    #[default]
    Inverse,
    /// `W = Γ`, kept for comparison.
    Literal,
}

#[derive(Debug, Clone)]
pub struct SoDetector<T> {
    weight: Matrix<T>,
    form: SoForm,
    alpha: f64,
    t: usize,
}

impl<T: Real> SoDetector<T> {
    pub fn new(steady: &SteadyState<T>, alpha: f64, form: SoForm) -> Result<Self> {
        check_alpha(alpha)?;
        let weight = match form {
            SoForm::Inverse => steady.gamma_inv.clone(),
            SoForm::Literal => steady.gamma.clone(),
        };
        Ok(Self {
            weight,
            form,
            alpha,
            t: 0,
        })
    }

    pub fn form(&self) -> SoForm {
        self.form
    }

    pub fn dof(&self) -> usize {
        self.weight.rows()
    }

    /// Consumes the raw innovation `z̃_t`. Every row is warm.
    pub fn step(&mut self, innovation: &[T]) -> Report<T> {
        let t = self.t;
        self.t += 1;
        let wz = self.weight.mul_vec(innovation);
        let v: T = wz.iter().zip(innovation).map(|(&a, &b)| a * b).sum();
        Report::scored(t, v.max(T::zero()), self.dof(), self.alpha)
    }
}
