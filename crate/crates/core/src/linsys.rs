//! Stationary linear-Gaussian plant
//!
//! ```text
//! x_{t+1} = A x_t + w_t,   w_t ~ N(0, Q)
//! y_t     = C x_t + v_t,   v_t ~ N(0, R)
//! ```
//!
//! together with its steady-state Kalman predictor, the innovation whitener
//! `ž_t = Γ^{-1/2} (z_t − C x̂_{t|t−1})` and the inverse recursion that turns a
//! prescribed whitened sequence back into measurements.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::statskit::{psd_sqrt, sym_inv_sqrt, sym_sqrt, Cholesky, Matrix};

const DARE_MAX_ITERS: usize = 100_000;
const LYAPUNOV_MAX_DOUBLINGS: usize = 64;

#[derive(Debug, Clone)]
pub struct SystemModel<T> {
    a: Matrix<T>,
    c: Matrix<T>,
    q: Matrix<T>,
    r: Matrix<T>,
    q_sqrt: Matrix<T>,
    r_sqrt: Matrix<T>,
}

impl<T: Real> SystemModel<T> {
    /// Validates shapes, `Q` symmetric PSD, `R` symmetric PD and `A` strictly
    /// stable.
    pub fn new(a: Matrix<T>, c: Matrix<T>, q: Matrix<T>, r: Matrix<T>) -> Result<Self> {
        let nx = a.rows();
        if !a.is_square() || nx == 0 {
            return Err(Error::Dimension(format!(
                "A must be square and nonempty, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if c.cols() != nx || c.rows() == 0 {
            return Err(Error::Dimension(format!(
                "C must be Dx{nx}, got {}x{}",
                c.rows(),
                c.cols()
            )));
        }
        if q.rows() != nx || q.cols() != nx {
            return Err(Error::Dimension(format!("Q must be {nx}x{nx}")));
        }
        let d = c.rows();
        if r.rows() != d || r.cols() != d {
            return Err(Error::Dimension(format!("R must be {d}x{d}")));
        }
        Cholesky::new(&r)?;
        let model = Self::new_unchecked(a, c, q, r)?;
        if !is_strictly_stable(&model.a) {
            return Err(Error::Unstable);
        }
        Ok(model)
    }

    /// Scalar plant, `D_x = D = 1`.
    pub fn scalar(a: T, c: T, q: T, r: T) -> Result<Self> {
        Self::new(
            Matrix::scalar(a),
            Matrix::scalar(c),
            Matrix::scalar(q),
            Matrix::scalar(r),
        )
    }

    /// Skips the stability and `R` definiteness checks. Only used to drive
    /// degenerate noiseless simulations in tests.
    pub(crate) fn new_unchecked(
        a: Matrix<T>,
        c: Matrix<T>,
        q: Matrix<T>,
        r: Matrix<T>,
    ) -> Result<Self> {
        let q_sqrt = psd_sqrt(&q)?;
        let r_sqrt = psd_sqrt(&r)?;
        Ok(Self {
            a,
            c,
            q,
            r,
            q_sqrt,
            r_sqrt,
        })
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn c(&self) -> &Matrix<T> {
        &self.c
    }

    pub fn q(&self) -> &Matrix<T> {
        &self.q
    }

    pub fn r(&self) -> &Matrix<T> {
        &self.r
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn meas_dim(&self) -> usize {
        self.c.rows()
    }
}

/// Spectral radius strictly below one, tested by repeated squaring.
pub fn is_strictly_stable<T: Real>(a: &Matrix<T>) -> bool {
    let mut p = a.clone();
    for _ in 0..LYAPUNOV_MAX_DOUBLINGS {
        let n = p.frobenius_norm();
        if n.is_nan() || n > T::lit(1e30).min(T::max_value().sqrt()) {
            return false;
        }
        if n < T::epsilon() * T::epsilon() {
            return true;
        }
        p = p.matmul(&p).expect("square");
    }
    false
}

/// Relative residual of `Ψ = AΨAᵀ − AΨCᵀ(CΨCᵀ+R)⁻¹CΨAᵀ + Q`.
pub fn dare_residual<T: Real>(model: &SystemModel<T>, psi: &Matrix<T>) -> Result<T> {
    let next = riccati_map(model, psi)?;
    Ok(next.sub(psi)?.frobenius_norm() / T::one().max(psi.frobenius_norm()))
}

/// Relative residual of `P = APAᵀ + Q`.
pub fn lyapunov_residual<T: Real>(model: &SystemModel<T>, p: &Matrix<T>) -> Result<T> {
    let next = model
        .a
        .matmul(p)?
        .matmul(&model.a.transpose())?
        .add(&model.q)?;
    Ok(next.sub(p)?.frobenius_norm() / T::one().max(p.frobenius_norm()))
}

fn riccati_map<T: Real>(model: &SystemModel<T>, psi: &Matrix<T>) -> Result<Matrix<T>> {
    let (a, c) = (&model.a, &model.c);
    let at = a.transpose();
    let a_psi = a.matmul(psi)?;
    let a_psi_at = a_psi.matmul(&at)?;
    let a_psi_ct = a_psi.matmul(&c.transpose())?;
    let gamma = c.matmul(psi)?.matmul(&c.transpose())?.add(&model.r)?;
    let gamma_ch = Cholesky::new(&gamma.symmetrized())?;
    // (AΨCᵀ) Γ⁻¹ (AΨCᵀ)ᵀ
    let nx = a.rows();
    let mut correction = Matrix::zeros(nx, nx);
    let a_psi_ct_t = a_psi_ct.transpose();
    let solved: Vec<Vec<T>> = (0..nx)
        .map(|j| {
            let col: Vec<T> = (0..a_psi_ct_t.rows()).map(|k| a_psi_ct_t[(k, j)]).collect();
            gamma_ch.solve(&col)
        })
        .collect();
    for i in 0..nx {
        for (j, s) in solved.iter().enumerate() {
            correction[(i, j)] = a_psi_ct.row(i).iter().zip(s).map(|(&x, &y)| x * y).sum();
        }
    }
    Ok(a_psi_at.sub(&correction)?.add(&model.q)?.symmetrized())
}

/// Steady-state prediction-error covariance `Ψ`, by fixed-point iteration of
/// the Riccati map from `Ψ₀ = Q`.
pub fn solve_dare<T: Real>(model: &SystemModel<T>) -> Result<Matrix<T>> {
    let tol = T::solver_tolerance();
    let mut psi = model.q.clone();
    let mut step = T::infinity();
    for _ in 0..DARE_MAX_ITERS {
        let next = riccati_map(model, &psi)?;
        step = next.sub(&psi)?.frobenius_norm() / T::one().max(next.frobenius_norm());
        psi = next;
        if step <= tol {
            return Ok(psi);
        }
    }
    Err(Error::NoConvergence {
        iterations: DARE_MAX_ITERS,
        residual: step.as_f64(),
    })
}

/// Stationary state covariance `P = APAᵀ + Q`, by Smith doubling.
pub fn steady_state_cov<T: Real>(model: &SystemModel<T>) -> Result<Matrix<T>> {
    if !is_strictly_stable(&model.a) {
        return Err(Error::Unstable);
    }
    let mut p = model.q.clone();
    let mut ak = model.a.clone();
    for _ in 0..LYAPUNOV_MAX_DOUBLINGS {
        let incr = ak.matmul(&p)?.matmul(&ak.transpose())?;
        p = p.add(&incr)?.symmetrized();
        if incr.frobenius_norm() <= T::epsilon() * T::one().max(p.frobenius_norm()) {
            return Ok(p);
        }
        ak = ak.matmul(&ak)?;
    }
    Err(Error::Unstable)
}

/// Steady-state gain `K = AΨCᵀ(CΨCᵀ+R)⁻¹` and innovation covariance
/// `Γ = CΨCᵀ + R`.
pub fn kalman_gain<T: Real>(
    model: &SystemModel<T>,
    psi: &Matrix<T>,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let c = &model.c;
    let gamma = c
        .matmul(psi)?
        .matmul(&c.transpose())?
        .add(&model.r)?
        .symmetrized();
    let gamma_ch = Cholesky::new(&gamma)?;
    let a_psi_ct = model.a.matmul(psi)?.matmul(&c.transpose())?;
    // K Γ = AΨCᵀ  ⇔  Γ Kᵀ = (AΨCᵀ)ᵀ since Γ is symmetric
    let nx = model.state_dim();
    let d = model.meas_dim();
    let mut gain = Matrix::zeros(nx, d);
    for i in 0..nx {
        let row = gamma_ch.solve(a_psi_ct.row(i));
        for (j, v) in row.into_iter().enumerate() {
            gain[(i, j)] = v;
        }
    }
    Ok((gain, gamma))
}

/// Everything derived from the plant once it is in steady state.
#[derive(Debug, Clone)]
pub struct SteadyState<T> {
    pub p: Matrix<T>,
    pub psi: Matrix<T>,
    pub gain: Matrix<T>,
    pub gamma: Matrix<T>,
    pub gamma_half: Matrix<T>,
    pub gamma_half_inv: Matrix<T>,
    pub gamma_inv: Matrix<T>,
}

impl<T: Real> SteadyState<T> {
    pub fn new(model: &SystemModel<T>) -> Result<Self> {
        let p = steady_state_cov(model)?;
        let psi = solve_dare(model)?;
        let (gain, gamma) = kalman_gain(model, &psi)?;
        let gamma_half = sym_sqrt(&gamma)?;
        let gamma_half_inv = sym_inv_sqrt(&gamma)?;
        let gamma_inv = Cholesky::new(&gamma)?.inverse();
        Ok(Self {
            p,
            psi,
            gain,
            gamma,
            gamma_half,
            gamma_half_inv,
            gamma_inv,
        })
    }
}

/// One simulated plant sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSample<T> {
    pub state: Vec<T>,
    pub output: Vec<T>,
}

/// Streaming simulator, reproducible from its seed.
#[derive(Debug, Clone)]
pub struct Plant<T> {
    model: SystemModel<T>,
    x: Vec<T>,
    rng: ChaCha8Rng,
}

fn gaussian<T: Real>(sqrt_cov: &Matrix<T>, rng: &mut ChaCha8Rng) -> Vec<T> {
    let e: Vec<T> = (0..sqrt_cov.cols())
        .map(|_| {
            let s: f64 = StandardNormal.sample(rng);
            T::lit(s)
        })
        .collect();
    sqrt_cov.mul_vec(&e)
}

impl<T: Real> Plant<T> {
    /// Starts from `x₀ ~ N(0, P)`.
    pub fn new(model: &SystemModel<T>, steady: &SteadyState<T>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gaussian(&psd_sqrt(&steady.p)?, &mut rng);
        Ok(Self {
            model: model.clone(),
            x,
            rng,
        })
    }

    pub fn with_initial_state(model: &SystemModel<T>, x0: Vec<T>, seed: u64) -> Result<Self> {
        if x0.len() != model.state_dim() {
            return Err(Error::Dimension(format!(
                "initial state has {} entries, expected {}",
                x0.len(),
                model.state_dim()
            )));
        }
        Ok(Self {
            model: model.clone(),
            x: x0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn step(&mut self) -> PlantSample<T> {
        let m = &self.model;
        let mut y = gaussian(&m.r_sqrt, &mut self.rng);
        m.c.mul_vec_add(&self.x, &mut y);
        let state = self.x.clone();
        let mut next = gaussian(&m.q_sqrt, &mut self.rng);
        m.a.mul_vec_add(&self.x, &mut next);
        self.x = next;
        PlantSample { state, output: y }
    }
}

impl<T: Real> Iterator for Plant<T> {
    type Item = PlantSample<T>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.step())
    }
}

/// `horizon` samples of `(x_t, y_t)` from the stationary plant.
pub fn simulate<T: Real>(
    model: &SystemModel<T>,
    steady: &SteadyState<T>,
    horizon: usize,
    seed: u64,
) -> Result<Vec<PlantSample<T>>> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    Ok(Plant::new(model, steady, seed)?.take(horizon).collect())
}

/// Raw and whitened innovation of one measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Innovation<T> {
    pub raw: Vec<T>,
    pub whitened: Vec<T>,
}

/// Steady-state one-step predictor shared by the receiver-side whitener and
/// the attacker-side reconstruction. Both directions advance the same
/// predictor state, so the two maps are exact inverses when started alike.
#[derive(Debug, Clone)]
pub struct WhitenedStream<T> {
    a: Matrix<T>,
    c: Matrix<T>,
    gain: Matrix<T>,
    gamma_half: Matrix<T>,
    gamma_half_inv: Matrix<T>,
    x_pred: Vec<T>,
    t: usize,
}

impl<T: Real> WhitenedStream<T> {
    /// Predictor starts at `x̂₀ = 0`.
    pub fn new(model: &SystemModel<T>, steady: &SteadyState<T>) -> Self {
        Self {
            a: model.a.clone(),
            c: model.c.clone(),
            gain: steady.gain.clone(),
            gamma_half: steady.gamma_half.clone(),
            gamma_half_inv: steady.gamma_half_inv.clone(),
            x_pred: vec![T::zero(); model.state_dim()],
            t: 0,
        }
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn meas_dim(&self) -> usize {
        self.c.rows()
    }

    pub fn predicted_state(&self) -> &[T] {
        &self.x_pred
    }

    fn advance(&mut self, raw: &[T]) {
        let mut next = self.gain.mul_vec(raw);
        self.a.mul_vec_add(&self.x_pred, &mut next);
        self.x_pred = next;
        self.t += 1;
    }

    pub fn whiten_step(&mut self, z: &[T]) -> Innovation<T> {
        assert_eq!(z.len(), self.meas_dim(), "measurement dimension");
        let pred = self.c.mul_vec(&self.x_pred);
        let raw: Vec<T> = z.iter().zip(&pred).map(|(&a, &b)| a - b).collect();
        let whitened = self.gamma_half_inv.mul_vec(&raw);
        self.advance(&raw);
        Innovation { raw, whitened }
    }

    /// Measurement `z_t = C x̂_{t|t−1} + Γ^{1/2} ž_t` that makes the receiver
    /// see `whitened` at this step.
    pub fn reconstruct_step(&mut self, whitened: &[T]) -> Vec<T> {
        assert_eq!(whitened.len(), self.meas_dim(), "measurement dimension");
        let raw = self.gamma_half.mul_vec(whitened);
        let mut z = raw.clone();
        self.c.mul_vec_add(&self.x_pred, &mut z);
        self.advance(&raw);
        z
    }
}
