//! Normality and pairwise independence: one windowed CDF test per lag on
//! pairs `(ž_t, ž_{t−l})`.

use std::sync::Arc;

use super::block::BlockDetector;
use super::nominal::{BlockLayout, NominalModel};
use super::Report;
use crate::error::{Error, Result};
use crate::quantizer::DetectorGrid;
use crate::scalar::Real;

/// Report of the lag-`l` test at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagReport<T> {
    pub lag: usize,
    pub report: Report<T>,
}

#[derive(Debug, Clone)]
pub struct NpiDetector<T> {
    lags: Vec<BlockDetector<T>>,
    warm_up: usize,
}

impl<T: Real> NpiDetector<T> {
    /// Tests lags `1..=max_lag` against a shared grid on `R^{2D}`.
    pub fn new(
        pair_grid: DetectorGrid<T>,
        max_lag: usize,
        window: usize,
        alpha: f64,
    ) -> Result<Self> {
        if pair_grid.block_len() != 2 {
            return Err(Error::Dimension(format!(
                "pair grid must have two sub-blocks, got {}",
                pair_grid.block_len()
            )));
        }
        if max_lag == 0 {
            return Err(Error::InvalidArgument("NPI needs at least one lag".into()));
        }
        let grid = Arc::new(pair_grid);
        let lags = (1..=max_lag)
            .map(|lag| {
                let layout = BlockLayout::pair(lag);
                let nominal = Arc::new(NominalModel::for_layout(&grid, &layout)?);
                BlockDetector::new(grid.clone(), layout, nominal, window, alpha)
            })
            .collect::<Result<Vec<_>>>()?;
        let warm_up = lags.iter().map(|d| d.warm_up()).max().unwrap_or(0);
        Ok(Self { lags, warm_up })
    }

    pub fn max_lag(&self) -> usize {
        self.lags.len()
    }

    /// Rows are flagged warm only once every lag has a full window.
    pub fn warm_up(&self) -> usize {
        self.warm_up
    }

    pub fn nominal(&self, lag: usize) -> &NominalModel<T> {
        self.lags[lag - 1].nominal()
    }

    pub fn step(&mut self, whitened: &[T]) -> Vec<LagReport<T>> {
        let warm_up = self.warm_up;
        self.lags
            .iter_mut()
            .enumerate()
            .map(|(k, det)| {
                let mut report = det.step(whitened);
                if report.t < warm_up {
                    report = Report::cold(report.t);
                }
                LagReport { lag: k + 1, report }
            })
            .collect()
    }

    /// Whether any lag alarms.
    pub fn any_alarm(reports: &[LagReport<T>]) -> bool {
        reports.iter().any(|r| r.report.alarm)
    }
}
