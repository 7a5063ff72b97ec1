//! Simulation → attack → detection pipeline and its outputs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cpsdetect::attacks::Attacker;
use cpsdetect::detectors::{
    AlarmTally, JsDetector, JsDetectorConfig, LagReport, NpiDetector, Report, SoDetector,
};
use cpsdetect::linsys::{Plant, SteadyState, WhitenedStream};
use cpsdetect::quantizer::{
    lloyd_grid, lloyd_grid_cached, CacheStatus, GridKey, LloydOutcome, LloydParams,
};
use cpsdetect::DetectorGrid;
use serde::Serialize;

use crate::config::{ExperimentConfig, LloydSpec};
use crate::HarnessError;

/// Warm rows of every enabled detector.
#[derive(Debug, Clone, Default)]
pub struct Traces {
    pub onset: usize,
    pub js: Option<Vec<Report<f64>>>,
    pub js_slow: Option<Vec<Report<f64>>>,
    pub npi: Option<Vec<Vec<LagReport<f64>>>>,
    pub so: Option<Vec<Report<f64>>>,
}

/// How a grid was obtained, for logging.
#[derive(Debug, Clone)]
pub struct GridInfo {
    pub path: Option<PathBuf>,
    pub status: CacheStatus,
    pub outcome: Option<LloydOutcome>,
}

/// Trains or loads a grid, caching under `cache_dir` when given.
pub fn obtain_grid(
    block_len: usize,
    dim: usize,
    points: usize,
    params: &LloydParams,
    cache_dir: Option<&Path>,
) -> Result<(DetectorGrid, GridInfo), HarnessError> {
    match cache_dir {
        Some(dir) => {
            fs::create_dir_all(dir)
                .map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
            let path = dir.join(GridKey::new(block_len, dim, points, params).file_name());
            let (grid, status, outcome) = lloyd_grid_cached(&path, block_len, dim, points, params)?;
            Ok((
                grid,
                GridInfo {
                    path: Some(path),
                    status,
                    outcome,
                },
            ))
        }
        None => {
            let outcome = lloyd_grid(block_len, dim, points, params)?;
            Ok((
                outcome.grid.clone(),
                GridInfo {
                    path: None,
                    status: CacheStatus::Built,
                    outcome: Some(outcome),
                },
            ))
        }
    }
}

fn grid_for(
    block_len: usize,
    dim: usize,
    points: usize,
    lloyd: &LloydSpec,
    seed: u64,
    cache: Option<&PathBuf>,
) -> Result<DetectorGrid, HarnessError> {
    Ok(obtain_grid(
        block_len,
        dim,
        points,
        &lloyd.params(seed),
        cache.map(|p| p.as_path()),
    )?
    .0)
}

/// Runs the pipeline in memory.
pub fn simulate_traces(cfg: &ExperimentConfig) -> Result<Traces, HarnessError> {
    cfg.validate()?;
    let model = cfg.system_model()?;
    let steady = SteadyState::new(&model)?;
    let d = model.meas_dim();
    let scenario = cfg.scenario();

    let mut js = None;
    let mut js_slow = None;
    if let Some(spec) = &cfg.js {
        let grid = grid_for(
            spec.block_len,
            d,
            spec.points,
            &spec.lloyd,
            cfg.seeds.lloyd,
            spec.grid_cache.as_ref(),
        )?;
        js = Some(JsDetector::new(JsDetectorConfig {
            grid: grid.clone(),
            window: spec.window,
            alpha: spec.alpha,
        })?);
        if let Some(w) = spec.slow_window {
            js_slow = Some(JsDetector::new(JsDetectorConfig {
                grid,
                window: w,
                alpha: spec.alpha,
            })?);
        }
    }
    let mut npi = match &cfg.npi {
        Some(spec) => {
            let grid = grid_for(
                2,
                d,
                spec.points,
                &spec.lloyd,
                cfg.seeds.lloyd,
                spec.grid_cache.as_ref(),
            )?;
            Some(NpiDetector::new(
                grid,
                spec.block_len - 1,
                spec.window,
                spec.alpha,
            )?)
        }
        None => None,
    };
    let mut so = match &cfg.so {
        Some(spec) => Some(SoDetector::new(&steady, spec.alpha, spec.form.into())?),
        None => None,
    };

    let mut plant = Plant::new(&model, &steady, cfg.seeds.plant)?;
    let mut attacker = Attacker::new(&model, &steady, &scenario)?;
    let mut receiver = WhitenedStream::new(&model, &steady);

    let mut traces = Traces {
        onset: scenario.onset,
        js: js.as_ref().map(|_| Vec::new()),
        js_slow: js_slow.as_ref().map(|_| Vec::new()),
        npi: npi.as_ref().map(|_| Vec::new()),
        so: so.as_ref().map(|_| Vec::new()),
    };
    for _ in 0..cfg.horizon {
        let sample = plant.step();
        let z = attacker.step(&sample.output)?;
        let inn = receiver.whiten_step(&z);
        if let (Some(det), Some(rows)) = (js.as_mut(), traces.js.as_mut()) {
            let r = det.step(&inn.whitened);
            if r.warm {
                rows.push(r);
            }
        }
        if let (Some(det), Some(rows)) = (js_slow.as_mut(), traces.js_slow.as_mut()) {
            let r = det.step(&inn.whitened);
            if r.warm {
                rows.push(r);
            }
        }
        if let (Some(det), Some(rows)) = (npi.as_mut(), traces.npi.as_mut()) {
            let r = det.step(&inn.whitened);
            if r[0].report.warm {
                rows.push(r);
            }
        }
        if let (Some(det), Some(rows)) = (so.as_mut(), traces.so.as_mut()) {
            rows.push(det.step(&inn.raw));
        }
    }
    Ok(traces)
}

/// Per-detector summary metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorSummary {
    pub rows: usize,
    pub alarms: usize,
    pub pre_onset_rows: usize,
    pub pre_onset_alarms: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub false_alarm_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection_delay: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_v_pre: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_v_post: Option<f64>,
}

impl DetectorSummary {
    pub fn from_reports<'a>(onset: usize, rows: impl Iterator<Item = &'a Report<f64>>) -> Self {
        let mut tally = AlarmTally::new(onset);
        let (mut pre, mut post) = ((0.0, 0usize), (0.0, 0usize));
        for r in rows {
            tally.record(r.t, r.alarm);
            let acc = if r.t < onset { &mut pre } else { &mut post };
            acc.0 += r.v;
            acc.1 += 1;
        }
        let mean = |(s, n): (f64, usize)| (n > 0).then(|| s / n as f64);
        Self {
            rows: tally.pre_rows + tally.post_rows,
            alarms: tally.pre_alarms + tally.post_alarms,
            pre_onset_rows: tally.pre_rows,
            pre_onset_alarms: tally.pre_alarms,
            false_alarm_rate: tally.false_alarm_rate(),
            detection_delay: tally.detection_delay(),
            mean_v_pre: mean(pre),
            mean_v_post: mean(post),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NpiLagSummary {
    pub lag: usize,
    #[serde(flatten)]
    pub summary: DetectorSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub horizon: usize,
    pub onset: usize,
    pub attack: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub js: Option<DetectorSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub js_slow: Option<DetectorSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub so: Option<DetectorSummary>,
    /// Alarms when any lag alarms.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub npi: Option<DetectorSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub npi_lags: Vec<NpiLagSummary>,
}

impl RunSummary {
    pub fn new(cfg: &ExperimentConfig, traces: &Traces) -> Self {
        let onset = traces.onset;
        let npi_lags = match &traces.npi {
            Some(rows) if !rows.is_empty() => (0..rows[0].len())
                .map(|k| NpiLagSummary {
                    lag: k + 1,
                    summary: DetectorSummary::from_reports(
                        onset,
                        rows.iter().map(|r| &r[k].report),
                    ),
                })
                .collect(),
            _ => Vec::new(),
        };
        let npi = traces.npi.as_ref().map(|rows| {
            let combined: Vec<Report<f64>> = rows
                .iter()
                .map(|r| Report {
                    alarm: NpiDetector::any_alarm(r),
                    v: f64::NAN,
                    ..r[0].report
                })
                .collect();
            let mut s = DetectorSummary::from_reports(onset, combined.iter());
            s.mean_v_pre = None;
            s.mean_v_post = None;
            s
        });
        Self {
            horizon: cfg.horizon,
            onset,
            attack: cfg.scenario().kind.name().to_string(),
            js: traces
                .js
                .as_ref()
                .map(|r| DetectorSummary::from_reports(onset, r.iter())),
            js_slow: traces
                .js_slow
                .as_ref()
                .map(|r| DetectorSummary::from_reports(onset, r.iter())),
            so: traces
                .so
                .as_ref()
                .map(|r| DetectorSummary::from_reports(onset, r.iter())),
            npi,
            npi_lags,
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("summary serializes")
    }
}

/// Decimal with nine significant digits; tiny magnitudes fall back to
/// exponent notation.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs();
    if mag < 1e-6 {
        return format!("{x:.8e}");
    }
    let exp = mag.log10().floor() as i32;
    let decimals = (8 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

fn write_reports(path: &Path, rows: &[Report<f64>]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["t", "v", "psi", "alarm"])
        .map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            format_sig9(r.v),
            format_sig9(r.psi),
            (r.alarm as u8).to_string(),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_npi(path: &Path, rows: &[Vec<LagReport<f64>>]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["t", "l", "v", "psi", "alarm"])
        .map_err(|e| io_err(path, e))?;
    for step in rows {
        for r in step {
            w.write_record([
                r.report.t.to_string(),
                r.lag.to_string(),
                format_sig9(r.report.v),
                format_sig9(r.report.psi),
                (r.report.alarm as u8).to_string(),
            ])
            .map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    let mut f = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    f.write_all(text.as_bytes()).map_err(|e| io_err(path, e))?;
    f.flush().map_err(|e| io_err(path, e))
}

/// Runs the experiment and writes `js.csv`, `js_slow.csv`, `npi.csv`,
/// `so.csv` (for enabled detectors), `summary.toml` and `config.toml`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary, HarnessError> {
    let traces = simulate_traces(cfg)?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    if let Some(rows) = &traces.js {
        write_reports(&out.join("js.csv"), rows)?;
    }
    if let Some(rows) = &traces.js_slow {
        write_reports(&out.join("js_slow.csv"), rows)?;
    }
    if let Some(rows) = &traces.npi {
        write_npi(&out.join("npi.csv"), rows)?;
    }
    if let Some(rows) = &traces.so {
        write_reports(&out.join("so.csv"), rows)?;
    }
    let summary = RunSummary::new(cfg, &traces);
    write_text(&out.join("summary.toml"), &summary.to_toml_string())?;
    write_text(&out.join("config.toml"), &cfg.to_toml_string())?;
    Ok(summary)
}
