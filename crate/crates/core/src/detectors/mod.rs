//! JS, NPI and SO detectors over the whitened innovation stream.

mod block;
mod nominal;
mod npi;
mod so;
mod window;

pub use block::{BlockDetector, JsDetector, JsDetectorConfig};
pub use nominal::{
    indicator, lag_covariance, layout_covariance, layout_lag_covariance, nominal_covariance,
    nominal_mean, BlockLayout, NominalModel,
};
pub use npi::{LagReport, NpiDetector};
pub use so::{SoDetector, SoForm};
pub use window::SlidingWindow;

use crate::scalar::Real;

/// One detector output row. Rows before the window fills are not `warm` and
/// carry `v = ψ = 0` with no alarm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Report<T> {
    pub t: usize,
    pub v: T,
    pub psi: T,
    pub alarm: bool,
    pub warm: bool,
}

impl<T: Real> Report<T> {
    pub(crate) fn cold(t: usize) -> Self {
        Self {
            t,
            v: T::zero(),
            psi: T::zero(),
            alarm: false,
            warm: false,
        }
    }

    /// `ψ = H_dof(v)`, alarm iff `ψ ≥ α`.
    pub(crate) fn scored(t: usize, v: T, dof: usize, alpha: f64) -> Self {
        let psi = block::confidence(v.as_f64(), dof);
        Self {
            t,
            v,
            psi: T::lit(psi),
            alarm: psi >= alpha,
            warm: true,
        }
    }
}

/// Per-run alarm bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlarmTally {
    pub onset: usize,
    pub pre_rows: usize,
    pub pre_alarms: usize,
    pub post_rows: usize,
    pub post_alarms: usize,
    pub first_alarm_after_onset: Option<usize>,
}

impl AlarmTally {
    pub fn new(onset: usize) -> Self {
        Self {
            onset,
            ..Self::default()
        }
    }

    pub fn record(&mut self, t: usize, alarm: bool) {
        if t < self.onset {
            self.pre_rows += 1;
            self.pre_alarms += alarm as usize;
        } else {
            self.post_rows += 1;
            self.post_alarms += alarm as usize;
            if alarm && self.first_alarm_after_onset.is_none() {
                self.first_alarm_after_onset = Some(t);
            }
        }
    }

    /// Fraction of warm pre-onset rows that alarmed.
    pub fn false_alarm_rate(&self) -> Option<f64> {
        (self.pre_rows > 0).then(|| self.pre_alarms as f64 / self.pre_rows as f64)
    }

    /// Steps from onset to the first alarm at or after it.
    pub fn detection_delay(&self) -> Option<usize> {
        self.first_alarm_after_onset.map(|t| t - self.onset)
    }
}
