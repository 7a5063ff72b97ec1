//! Streaming windowed-CDF test shared by the JS and NPI detectors.

use std::collections::VecDeque;
use std::sync::Arc;

use super::nominal::{indicator_into, BlockLayout, NominalModel};
use super::window::SlidingWindow;
use super::Report;
use crate::error::{Error, Result};
use crate::quantizer::DetectorGrid;
use crate::scalar::Real;
use crate::statskit::chi_squared_cdf_f64;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "alarm threshold {alpha} is outside [0, 1]"
        )))
    }
}

/// Builds blocks of whitened samples according to a [`BlockLayout`], feeds
/// their grid indicators through a sliding window and scores the window mean.
#[derive(Debug, Clone)]
pub struct BlockDetector<T> {
    grid: Arc<DetectorGrid<T>>,
    layout: BlockLayout,
    nominal: Arc<NominalModel<T>>,
    window: SlidingWindow,
    alpha: f64,
    history: VecDeque<Vec<T>>,
    block: Vec<T>,
    xi: Vec<bool>,
    t: usize,
}

impl<T: Real> BlockDetector<T> {
    pub fn new(
        grid: Arc<DetectorGrid<T>>,
        layout: BlockLayout,
        nominal: Arc<NominalModel<T>>,
        window_len: usize,
        alpha: f64,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        if window_len == 0 {
            return Err(Error::InvalidArgument(
                "window length must be positive".into(),
            ));
        }
        if layout.len() != grid.block_len() {
            return Err(Error::Dimension(format!(
                "layout has {} sub-blocks, grid has {}",
                layout.len(),
                grid.block_len()
            )));
        }
        if nominal.dof() != grid.len() {
            return Err(Error::Dimension(format!(
                "nominal model has {} entries, grid has {} points",
                nominal.dof(),
                grid.len()
            )));
        }
        let span = layout.span();
        Ok(Self {
            window: SlidingWindow::new(window_len, grid.len()),
            block: vec![T::zero(); grid.width()],
            xi: vec![false; grid.len()],
            history: VecDeque::with_capacity(span + 1),
            grid,
            layout,
            nominal,
            alpha,
            t: 0,
        })
    }

    pub fn grid(&self) -> &DetectorGrid<T> {
        &self.grid
    }

    pub fn nominal(&self) -> &NominalModel<T> {
        &self.nominal
    }

    pub fn window_len(&self) -> usize {
        self.window.capacity()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// First 0-based step whose report is computed from a full window.
    pub fn warm_up(&self) -> usize {
        self.window.capacity() + self.layout.span() - 2
    }

    pub fn time(&self) -> usize {
        self.t
    }

    /// Current window mean `u_{t,T}`.
    pub fn window_mean(&self) -> Vec<T> {
        self.window.mean()
    }

    /// Consumes `ž_t` and reports on the window ending at the newest block.
    pub fn step(&mut self, whitened: &[T]) -> Report<T> {
        let t = self.t;
        self.t += 1;
        if !self.ingest(whitened) {
            return Report::cold(t);
        }
        let v = self
            .nominal
            .statistic(&self.window.mean(), self.window.capacity());
        Report::scored(t, v, self.grid.len(), self.alpha)
    }

    /// Same as [`step`](Self::step) without scoring; returns whether the
    /// window is full afterwards.
    pub fn observe(&mut self, whitened: &[T]) -> bool {
        self.t += 1;
        self.ingest(whitened)
    }

    fn ingest(&mut self, whitened: &[T]) -> bool {
        let d = self.grid.dim();
        assert_eq!(whitened.len(), d, "whitened sample dimension");
        let span = self.layout.span();
        self.history.push_back(whitened.to_vec());
        if self.history.len() > span {
            self.history.pop_front();
        }
        if self.history.len() < span {
            return false;
        }
        for (l, &o) in self.layout.offsets().iter().enumerate() {
            self.block[l * d..(l + 1) * d].copy_from_slice(&self.history[o]);
        }
        indicator_into(&self.grid, &self.block, &mut self.xi);
        self.window.push(self.xi.clone());
        self.window.is_full()
    }
}

/// Grid, window length `T` and threshold `α` of a JS detector.
#[derive(Debug, Clone)]
pub struct JsDetectorConfig<T> {
    pub grid: DetectorGrid<T>,
    pub window: usize,
    pub alpha: f64,
}

/// Joint-statistics detector over contiguous blocks of `L` whitened samples.
#[derive(Debug, Clone)]
pub struct JsDetector<T> {
    inner: BlockDetector<T>,
}

impl<T: Real> JsDetector<T> {
    pub fn new(config: JsDetectorConfig<T>) -> Result<Self> {
        let nominal = NominalModel::for_grid(&config.grid)?;
        Self::with_nominal(
            Arc::new(config.grid),
            Arc::new(nominal),
            config.window,
            config.alpha,
        )
    }

    /// Reuses a precomputed nominal model, e.g. across Monte Carlo replicas.
    pub fn with_nominal(
        grid: Arc<DetectorGrid<T>>,
        nominal: Arc<NominalModel<T>>,
        window: usize,
        alpha: f64,
    ) -> Result<Self> {
        let layout = BlockLayout::contiguous(grid.block_len());
        Ok(Self {
            inner: BlockDetector::new(grid, layout, nominal, window, alpha)?,
        })
    }

    pub fn step(&mut self, whitened: &[T]) -> Report<T> {
        self.inner.step(whitened)
    }

    pub fn observe(&mut self, whitened: &[T]) -> bool {
        self.inner.observe(whitened)
    }

    pub fn warm_up(&self) -> usize {
        self.inner.warm_up()
    }

    pub fn window_mean(&self) -> Vec<T> {
        self.inner.window_mean()
    }

    pub fn nominal(&self) -> &NominalModel<T> {
        self.inner.nominal()
    }

    pub fn grid(&self) -> &DetectorGrid<T> {
        self.inner.grid()
    }

    pub fn window_len(&self) -> usize {
        self.inner.window_len()
    }
}

pub(crate) fn confidence(v: f64, dof: usize) -> f64 {
    chi_squared_cdf_f64(v.max(0.0), dof).clamp(0.0, 1.0)
}
