//! Sensor attacks on the measurement channel.
//!
//! The stealthy attacks are built in the whitened domain: the attacker runs a
//! copy of the receiver's steady-state filter on the true output `y` to get
//! `y̌_t`, maps it through an attack kernel to the innovation `ž_t` the receiver
//! should see, and inverts the receiver's whitener to emit `z_t`. Bias and
//! replay act on `y` directly.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linsys::{SteadyState, SystemModel, WhitenedStream};
use crate::scalar::Real;

/// Distribution of the random gate `γ_t` multiplying the mixed sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignGate {
    /// `γ_t ∈ {−1, +1}`; keeps `ž_t ~ N(0, I)`.
    #[default]
    Rademacher,
    /// `γ_t ∈ {0, 1}`, taken literally. Zeroes half the samples.
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackKind {
    None,
    /// `r_t = υ r_{t−τ} + √(1−υ²) y̌_t`, `ž_t = γ_t r_t`: uncorrelated but
    /// dependent at lag `τ`.
    Uncorrelated {
        lag: usize,
        upsilon: f64,
        gate: SignGate,
    },
    /// Scalar only. Pairwise independent, jointly dependent in triples.
    Pairwise,
    Bias {
        offset: Vec<f64>,
    },
    /// Replays the `window` outputs recorded just before onset, looped.
    Replay {
        window: usize,
    },
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::Uncorrelated { .. } => "uncorrelated",
            AttackKind::Pairwise => "pairwise",
            AttackKind::Bias { .. } => "bias",
            AttackKind::Replay { .. } => "replay",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackScenario {
    pub kind: AttackKind,
    pub onset: usize,
    pub seed: u64,
}

impl AttackScenario {
    pub fn none() -> Self {
        Self {
            kind: AttackKind::None,
            onset: 0,
            seed: 0,
        }
    }

    pub fn validate(&self, meas_dim: usize) -> Result<()> {
        match &self.kind {
            AttackKind::None => {}
            AttackKind::Uncorrelated { lag, upsilon, .. } => {
                if *lag == 0 {
                    return Err(Error::InvalidArgument(
                        "attack lag must be at least 1".into(),
                    ));
                }
                if !(*upsilon > 0.0 && *upsilon < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "upsilon must lie in (0, 1), got {upsilon}"
                    )));
                }
            }
            AttackKind::Pairwise => {
                if meas_dim != 1 {
                    return Err(Error::InvalidArgument(format!(
                        "pairwise attack needs a scalar measurement, got D = {meas_dim}"
                    )));
                }
            }
            AttackKind::Bias { offset } => {
                if offset.len() != meas_dim {
                    return Err(Error::Dimension(format!(
                        "bias offset has {} entries, measurement has {meas_dim}",
                        offset.len()
                    )));
                }
            }
            AttackKind::Replay { window } => {
                if *window == 0 {
                    return Err(Error::InvalidArgument(
                        "replay window must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn normal_vec<T: Real>(dim: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    (0..dim)
        .map(|_| {
            let s: f64 = StandardNormal.sample(rng);
            T::lit(s)
        })
        .collect()
}

/// State of the lag-`τ` mixing attack.
#[derive(Debug, Clone)]
pub struct UncorrelatedKernel<T> {
    upsilon: T,
    innovation_weight: T,
    gate: SignGate,
    /// `r_{t−τ}, …, r_{t−1}`, oldest first.
    history: VecDeque<Vec<T>>,
    rng: ChaCha8Rng,
}

impl<T: Real> UncorrelatedKernel<T> {
    /// Seeds `r_{−τ+1}, …, r_0` i.i.d. `N(0, I)`.
    pub fn new(dim: usize, lag: usize, upsilon: f64, gate: SignGate, seed: u64) -> Result<Self> {
        if lag == 0 || !(upsilon > 0.0 && upsilon < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need lag >= 1 and 0 < upsilon < 1, got lag {lag}, upsilon {upsilon}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let history = (0..lag).map(|_| normal_vec(dim, &mut rng)).collect();
        Ok(Self {
            upsilon: T::lit(upsilon),
            innovation_weight: T::lit((1.0 - upsilon * upsilon).sqrt()),
            gate,
            history,
            rng,
        })
    }

    pub fn step(&mut self, y_white: &[T]) -> Vec<T> {
        let delayed = self.history.pop_front().expect("history holds lag entries");
        let r: Vec<T> = delayed
            .iter()
            .zip(y_white)
            .map(|(&d, &y)| self.upsilon * d + self.innovation_weight * y)
            .collect();
        let heads = self.rng.random_bool(0.5);
        let gamma = match (self.gate, heads) {
            (_, true) => T::one(),
            (SignGate::Rademacher, false) => -T::one(),
            (SignGate::Binary, false) => T::zero(),
        };
        let out = r.iter().map(|&v| gamma * v).collect();
        self.history.push_back(r);
        out
    }
}

/// State of the triple-dependence attack: `ž_t = y̌_t` for even local time,
/// `sign(ž_{t−1} ž_{t−2}) |y̌_t|` for odd.
#[derive(Debug, Clone)]
pub struct PairwiseKernel<T> {
    prev1: T,
    prev2: T,
    local_t: usize,
}

impl<T: Real> PairwiseKernel<T> {
    /// `prev1 = ž_{t−1}`, `prev2 = ž_{t−2}` at the first attacked step, which
    /// is local time 1 (odd).
    pub fn new(prev1: T, prev2: T) -> Self {
        Self {
            prev1,
            prev2,
            local_t: 1,
        }
    }

    pub fn step(&mut self, y_white: T) -> T {
        let out = if self.local_t.is_multiple_of(2) {
            y_white
        } else {
            let s = self.prev1 * self.prev2;
            let sign = if s >= T::zero() { T::one() } else { -T::one() };
            sign * y_white.abs()
        };
        self.prev2 = self.prev1;
        self.prev1 = out;
        self.local_t += 1;
        out
    }

    pub fn step_vec(&mut self, y_white: &[T]) -> Result<Vec<T>> {
        match y_white {
            [y] => Ok(vec![self.step(*y)]),
            _ => Err(Error::InvalidArgument(format!(
                "pairwise attack needs a scalar measurement, got D = {}",
                y_white.len()
            ))),
        }
    }

    /// Whether the next call produces the sign-constrained sample.
    pub fn next_is_odd(&self) -> bool {
        self.local_t % 2 == 1
    }
}

#[derive(Debug, Clone)]
pub struct BiasKernel<T> {
    offset: Vec<T>,
}

impl<T: Real> BiasKernel<T> {
    pub fn new(offset: &[f64]) -> Self {
        Self {
            offset: offset.iter().map(|&v| T::lit(v)).collect(),
        }
    }

    pub fn step(&self, y: &[T]) -> Vec<T> {
        y.iter().zip(&self.offset).map(|(&a, &b)| a + b).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ReplayKernel<T> {
    window: usize,
    recorded: Vec<Vec<T>>,
    cursor: usize,
}

impl<T: Real> ReplayKernel<T> {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            recorded: Vec::with_capacity(window),
            cursor: 0,
        }
    }

    /// Keeps the most recent `window` samples.
    pub fn record(&mut self, y: &[T]) {
        if self.recorded.len() == self.window {
            self.recorded.remove(0);
        }
        self.recorded.push(y.to_vec());
    }

    pub fn is_ready(&self) -> bool {
        self.recorded.len() == self.window
    }

    pub fn step(&mut self) -> Result<Vec<T>> {
        if !self.is_ready() {
            return Err(Error::ReplayNotReady {
                recorded: self.recorded.len(),
                needed: self.window,
            });
        }
        let z = self.recorded[self.cursor].clone();
        self.cursor = (self.cursor + 1) % self.window;
        Ok(z)
    }
}

#[derive(Debug, Clone)]
enum Kernel<T> {
    None,
    Uncorrelated(UncorrelatedKernel<T>),
    Pairwise(Option<PairwiseKernel<T>>),
    Bias(BiasKernel<T>),
    Replay(ReplayKernel<T>),
}

enum Emit<T> {
    Raw(Vec<T>),
    Whitened(Vec<T>),
}

/// Causal attacker: consumes `y_t` one step at a time and emits `z_t`.
#[derive(Debug, Clone)]
pub struct Attacker<T> {
    onset: usize,
    t: usize,
    observer: WhitenedStream<T>,
    receiver: WhitenedStream<T>,
    kernel: Kernel<T>,
    /// Last two whitened innovations the receiver saw, newest first.
    seen: [T; 2],
    prescribed: Option<Vec<T>>,
    rng: ChaCha8Rng,
}

impl<T: Real> Attacker<T> {
    pub fn new(
        model: &SystemModel<T>,
        steady: &SteadyState<T>,
        scenario: &AttackScenario,
    ) -> Result<Self> {
        let d = model.meas_dim();
        scenario.validate(d)?;
        // Separate streams: kernel randomness, and fallback initial values.
        let kernel = match &scenario.kind {
            AttackKind::None => Kernel::None,
            AttackKind::Uncorrelated { lag, upsilon, gate } => Kernel::Uncorrelated(
                UncorrelatedKernel::new(d, *lag, *upsilon, *gate, scenario.seed)?,
            ),
            AttackKind::Pairwise => Kernel::Pairwise(None),
            AttackKind::Bias { offset } => Kernel::Bias(BiasKernel::new(offset)),
            AttackKind::Replay { window } => {
                if scenario.onset < *window {
                    return Err(Error::ReplayNotReady {
                        recorded: scenario.onset,
                        needed: *window,
                    });
                }
                Kernel::Replay(ReplayKernel::new(*window))
            }
        };
        Ok(Self {
            onset: scenario.onset,
            t: 0,
            observer: WhitenedStream::new(model, steady),
            receiver: WhitenedStream::new(model, steady),
            kernel,
            seen: [T::zero(); 2],
            prescribed: None,
            rng: ChaCha8Rng::seed_from_u64(scenario.seed ^ 0x9e37_79b9_7f4a_7c15),
        })
    }

    /// Whitened innovation the attacker prescribed for the last step, if the
    /// last step was attacked in the whitened domain.
    pub fn last_prescribed(&self) -> Option<&[T]> {
        self.prescribed.as_deref()
    }

    pub fn time(&self) -> usize {
        self.t
    }

    fn emit_raw(&mut self, z: Vec<T>) -> Vec<T> {
        let seen = self.receiver.whiten_step(&z).whitened;
        self.seen = [seen[0], self.seen[0]];
        z
    }

    fn emit_whitened(&mut self, zw: Vec<T>) -> Vec<T> {
        let z = self.receiver.reconstruct_step(&zw);
        self.seen = [zw[0], self.seen[0]];
        self.prescribed = Some(zw);
        z
    }

    pub fn step(&mut self, y: &[T]) -> Result<Vec<T>> {
        let y_white = self.observer.whiten_step(y).whitened;
        let active = self.t >= self.onset;
        self.t += 1;
        self.prescribed = None;
        if !active {
            if let Kernel::Replay(k) = &mut self.kernel {
                k.record(y);
            }
            return Ok(self.emit_raw(y.to_vec()));
        }
        if matches!(self.kernel, Kernel::Pairwise(None)) {
            // History before onset is the receiver's own nominal innovations;
            // with fewer than two of them, draw the rest.
            let (p1, p2) = match self.onset {
                0 => (self.draw(), self.draw()),
                1 => (self.seen[0], self.draw()),
                _ => (self.seen[0], self.seen[1]),
            };
            self.kernel = Kernel::Pairwise(Some(PairwiseKernel::new(p1, p2)));
        }
        let out = match &mut self.kernel {
            Kernel::None => Emit::Raw(y.to_vec()),
            Kernel::Bias(k) => Emit::Raw(k.step(y)),
            Kernel::Replay(k) => Emit::Raw(k.step()?),
            Kernel::Uncorrelated(k) => Emit::Whitened(k.step(&y_white)),
            Kernel::Pairwise(k) => {
                Emit::Whitened(k.as_mut().expect("initialized above").step_vec(&y_white)?)
            }
        };
        Ok(match out {
            Emit::Raw(z) => self.emit_raw(z),
            Emit::Whitened(zw) => self.emit_whitened(zw),
        })
    }

    fn draw(&mut self) -> T {
        let s: f64 = StandardNormal.sample(&mut self.rng);
        T::lit(s)
    }
}

/// Attacked measurement stream for a whole nominal trajectory.
pub fn apply_scenario<T: Real>(
    model: &SystemModel<T>,
    steady: &SteadyState<T>,
    scenario: &AttackScenario,
    y: &[Vec<T>],
) -> Result<Vec<Vec<T>>> {
    let mut attacker = Attacker::new(model, steady, scenario)?;
    y.iter().map(|yt| attacker.step(yt)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsys::simulate;

    fn setup() -> (SystemModel<f64>, SteadyState<f64>, Vec<Vec<f64>>) {
        let m = SystemModel::scalar(0.98, 1.0, 0.1, 0.1).unwrap();
        let ss = SteadyState::new(&m).unwrap();
        let y = simulate(&m, &ss, 4_000, 17)
            .unwrap()
            .into_iter()
            .map(|s| s.output)
            .collect();
        (m, ss, y)
    }

    fn whiten_all(m: &SystemModel<f64>, ss: &SteadyState<f64>, z: &[Vec<f64>]) -> Vec<f64> {
        let mut w = WhitenedStream::new(m, ss);
        z.iter().map(|zt| w.whiten_step(zt).whitened[0]).collect()
    }

    fn uncorrelated(onset: usize) -> AttackScenario {
        AttackScenario {
            kind: AttackKind::Uncorrelated {
                lag: 1,
                upsilon: std::f64::consts::FRAC_1_SQRT_2,
                gate: SignGate::Rademacher,
            },
            onset,
            seed: 5,
        }
    }

    #[test]
    fn no_attack_is_identity() {
        let (m, ss, y) = setup();
        let z = apply_scenario(&m, &ss, &AttackScenario::none(), &y).unwrap();
        assert_eq!(z, y);
        let bias = AttackScenario {
            kind: AttackKind::Bias { offset: vec![0.0] },
            onset: 10,
            seed: 0,
        };
        assert_eq!(apply_scenario(&m, &ss, &bias, &y).unwrap(), y);
    }

    #[test]
    fn receiver_sees_prescribed_innovation() {
        let (m, ss, y) = setup();
        for scenario in [
            uncorrelated(1000),
            AttackScenario {
                kind: AttackKind::Pairwise,
                onset: 1000,
                seed: 3,
            },
        ] {
            let mut attacker = Attacker::new(&m, &ss, &scenario).unwrap();
            let mut receiver = WhitenedStream::new(&m, &ss);
            let mut nominal = WhitenedStream::new(&m, &ss);
            for (t, yt) in y.iter().enumerate() {
                let z = attacker.step(yt).unwrap();
                let seen = receiver.whiten_step(&z).whitened;
                let clean = nominal.whiten_step(yt).whitened;
                if t < 1000 {
                    assert_eq!(seen, clean);
                    assert!(attacker.last_prescribed().is_none());
                } else {
                    let want = attacker.last_prescribed().unwrap();
                    assert!((seen[0] - want[0]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn gate_limit_reduces_to_signed_innovation() {
        let mut k = UncorrelatedKernel::<f64>::new(1, 1, 1e-12, SignGate::Rademacher, 4).unwrap();
        for i in 0..100 {
            let y = (i as f64 * 0.37).sin();
            let z = k.step(&[y])[0];
            assert!((z.abs() - y.abs()).abs() < 1e-9);
        }
        let mut b = UncorrelatedKernel::<f64>::new(1, 2, 0.5, SignGate::Binary, 4).unwrap();
        let zeros = (0..1000).filter(|_| b.step(&[1.0])[0] == 0.0).count();
        assert!((400..600).contains(&zeros));
    }

    #[test]
    fn pairwise_triple_product_nonnegative_on_odd_steps() {
        let (m, ss, y) = setup();
        let scenario = AttackScenario {
            kind: AttackKind::Pairwise,
            onset: 101,
            seed: 8,
        };
        let z = apply_scenario(&m, &ss, &scenario, &y).unwrap();
        let zw = whiten_all(&m, &ss, &z);
        for t in (101..y.len()).step_by(2) {
            assert!(zw[t] * zw[t - 1] * zw[t - 2] >= -1e-12, "t={t}");
        }
    }

    #[test]
    fn pairwise_first_step_uses_drawn_history_at_zero_onset() {
        let mut k = PairwiseKernel::new(1.0f64, -1.0);
        assert!(k.next_is_odd());
        assert_eq!(k.step(2.0), -2.0);
        assert_eq!(k.step(-3.0), -3.0);
        // sign(−3 · −2) = +
        assert_eq!(k.step(-0.5), 0.5);
    }

    #[test]
    fn pairwise_rejects_vector_measurements() {
        let scenario = AttackScenario {
            kind: AttackKind::Pairwise,
            onset: 0,
            seed: 0,
        };
        assert!(scenario.validate(2).is_err());
        let mut k = PairwiseKernel::new(1.0f64, 1.0);
        assert!(k.step_vec(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn replay_needs_capture() {
        let (m, ss, y) = setup();
        let early = AttackScenario {
            kind: AttackKind::Replay { window: 50 },
            onset: 20,
            seed: 0,
        };
        assert!(matches!(
            Attacker::new(&m, &ss, &early),
            Err(Error::ReplayNotReady { .. })
        ));
        let mut k = ReplayKernel::<f64>::new(3);
        k.record(&[1.0]);
        assert!(k.step().is_err());

        let ok = AttackScenario {
            kind: AttackKind::Replay { window: 50 },
            onset: 200,
            seed: 0,
        };
        let z = apply_scenario(&m, &ss, &ok, &y).unwrap();
        for t in 200..400 {
            assert_eq!(z[t], y[150 + (t - 200) % 50]);
        }
    }

    #[test]
    fn replay_of_constant_is_constant() {
        let mut k = ReplayKernel::<f64>::new(4);
        for _ in 0..10 {
            k.record(&[2.5]);
        }
        assert!((0..20).all(|_| k.step().unwrap() == vec![2.5]));
    }

    #[test]
    fn causal() {
        let (m, ss, y) = setup();
        let full = apply_scenario(&m, &ss, &uncorrelated(500), &y).unwrap();
        let part = apply_scenario(&m, &ss, &uncorrelated(500), &y[..1500]).unwrap();
        assert_eq!(&full[..1500], &part[..]);
    }

    #[test]
    fn rejects_bad_parameters() {
        let bad = |kind| AttackScenario {
            kind,
            onset: 0,
            seed: 0,
        };
        for kind in [
            AttackKind::Uncorrelated {
                lag: 0,
                upsilon: 0.5,
                gate: SignGate::Rademacher,
            },
            AttackKind::Uncorrelated {
                lag: 1,
                upsilon: 1.0,
                gate: SignGate::Rademacher,
            },
            AttackKind::Bias {
                offset: vec![1.0, 1.0],
            },
            AttackKind::Replay { window: 0 },
        ] {
            assert!(bad(kind).validate(1).is_err());
        }
    }
}
