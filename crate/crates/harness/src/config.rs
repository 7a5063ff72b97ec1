//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use cpsdetect::attacks::{AttackKind, AttackScenario, SignGate};
use cpsdetect::detectors::SoForm;
use cpsdetect::quantizer::LloydParams;
use cpsdetect::statskit::Matrix;
use cpsdetect::SystemModel;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizon: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub model: ModelSpec,
    #[serde(default)]
    pub attack: AttackSpec,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub js: Option<JsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub npi: Option<NpiSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub so: Option<SoSpec>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub a: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKindSpec {
    #[default]
    None,
    Uncorrelated,
    Pairwise,
    Bias,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateSpec {
    #[default]
    Rademacher,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    #[serde(default)]
    pub kind: AttackKindSpec,
    #[serde(default)]
    pub onset: usize,
    #[serde(default = "default_lag")]
    pub lag: usize,
    #[serde(default = "default_upsilon")]
    pub upsilon: f64,
    #[serde(default)]
    pub gate: GateSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
}

fn default_lag() -> usize {
    1
}

fn default_upsilon() -> f64 {
    std::f64::consts::FRAC_1_SQRT_2
}

impl Default for AttackSpec {
    fn default() -> Self {
        Self {
            kind: AttackKindSpec::None,
            onset: 0,
            lag: default_lag(),
            upsilon: default_upsilon(),
            gate: GateSpec::Rademacher,
            offset: None,
            window: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    #[serde(default = "one")]
    pub plant: u64,
    #[serde(default = "two")]
    pub attack: u64,
    #[serde(default = "three")]
    pub lloyd: u64,
}

fn one() -> u64 {
    1
}
fn two() -> u64 {
    2
}
fn three() -> u64 {
    3
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            plant: 1,
            attack: 2,
            lloyd: 3,
        }
    }
}

/// Lloyd training settings shared by the JS and NPI sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LloydSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_count: Option<usize>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn default_max_iters() -> usize {
    200
}

fn default_rel_tol() -> f64 {
    1e-6
}

impl Default for LloydSpec {
    fn default() -> Self {
        Self {
            sample_count: None,
            max_iters: default_max_iters(),
            rel_tol: default_rel_tol(),
        }
    }
}

impl LloydSpec {
    pub fn params(&self, seed: u64) -> LloydParams {
        LloydParams {
            sample_count: self.sample_count,
            seed,
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JsSpec {
    #[serde(default = "default_block_len")]
    pub block_len: usize,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Second, longer window run alongside the first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slow_window: Option<usize>,
    /// Directory holding cached grids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_cache: Option<PathBuf>,
    #[serde(default)]
    pub lloyd: LloydSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NpiSpec {
    /// Lags `1..block_len` are tested.
    #[serde(default = "default_block_len")]
    pub block_len: usize,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_cache: Option<PathBuf>,
    #[serde(default)]
    pub lloyd: LloydSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SoFormSpec {
    #[default]
    Inverse,
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoSpec {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub form: SoFormSpec,
}

fn default_block_len() -> usize {
    3
}
fn default_points() -> usize {
    100
}
fn default_window() -> usize {
    100
}
fn default_alpha() -> f64 {
    0.99
}

impl Default for JsSpec {
    fn default() -> Self {
        Self {
            block_len: default_block_len(),
            points: default_points(),
            window: default_window(),
            alpha: default_alpha(),
            slow_window: None,
            grid_cache: None,
            lloyd: LloydSpec::default(),
        }
    }
}

impl Default for NpiSpec {
    fn default() -> Self {
        Self {
            block_len: default_block_len(),
            points: default_points(),
            window: default_window(),
            alpha: default_alpha(),
            grid_cache: None,
            lloyd: LloydSpec::default(),
        }
    }
}

impl Default for SoSpec {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            form: SoFormSpec::Inverse,
        }
    }
}

impl From<SoFormSpec> for SoForm {
    fn from(f: SoFormSpec) -> Self {
        match f {
            SoFormSpec::Inverse => SoForm::Inverse,
            SoFormSpec::Literal => SoForm::Literal,
        }
    }
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<Matrix<f64>, HarnessError> {
    Matrix::from_rows(rows).map_err(|e| config_err(format!("model.{name}: {e}")))
}

fn check_alpha(section: &str, alpha: f64) -> Result<(), HarnessError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(config_err(format!(
            "{section}.alpha = {alpha} is outside [0, 1]"
        )))
    }
}

impl ExperimentConfig {
    /// The setup of the reproduced experiments: `A = 0.98`, `C = 1`,
    /// `Q = R = 0.1`, all three detectors with `L = 3`, `I = 100`, `T = 100`.
    pub fn reference(kind: AttackKindSpec) -> Self {
        Self {
            horizon: 50_000,
            output: default_output(),
            model: ModelSpec {
                a: vec![vec![0.98]],
                c: vec![vec![1.0]],
                q: vec![vec![0.1]],
                r: vec![vec![0.1]],
            },
            attack: AttackSpec {
                kind,
                onset: 25_000,
                ..AttackSpec::default()
            },
            seeds: Seeds::default(),
            js: Some(JsSpec::default()),
            npi: Some(NpiSpec::default()),
            so: Some(SoSpec::default()),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            HarnessError::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn system_model(&self) -> Result<SystemModel, HarnessError> {
        let m = &self.model;
        SystemModel::new(
            matrix("a", &m.a)?,
            matrix("c", &m.c)?,
            matrix("q", &m.q)?,
            matrix("r", &m.r)?,
        )
        .map_err(|e| config_err(format!("model: {e}")))
    }

    pub fn scenario(&self) -> AttackScenario {
        let a = &self.attack;
        let kind = match a.kind {
            AttackKindSpec::None => AttackKind::None,
            AttackKindSpec::Uncorrelated => AttackKind::Uncorrelated {
                lag: a.lag,
                upsilon: a.upsilon,
                gate: match a.gate {
                    GateSpec::Rademacher => SignGate::Rademacher,
                    GateSpec::Binary => SignGate::Binary,
                },
            },
            AttackKindSpec::Pairwise => AttackKind::Pairwise,
            AttackKindSpec::Bias => AttackKind::Bias {
                offset: a.offset.clone().unwrap_or_default(),
            },
            AttackKindSpec::Replay => AttackKind::Replay {
                window: a.window.unwrap_or(0),
            },
        };
        AttackScenario {
            kind,
            onset: a.onset,
            seed: self.seeds.attack,
        }
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.horizon == 0 {
            return Err(config_err("horizon must be positive"));
        }
        if self.attack.kind != AttackKindSpec::None && self.horizon <= self.attack.onset {
            return Err(config_err(format!(
                "horizon {} does not exceed attack.onset {}",
                self.horizon, self.attack.onset
            )));
        }
        let model = self.system_model()?;
        let scenario = self.scenario();
        scenario
            .validate(model.meas_dim())
            .map_err(|e| config_err(format!("attack: {e}")))?;
        if let AttackKind::Replay { window } = scenario.kind {
            if window > scenario.onset {
                return Err(config_err(format!(
                    "attack.window {window} exceeds attack.onset {}",
                    scenario.onset
                )));
            }
        }
        if let Some(js) = &self.js {
            check_alpha("js", js.alpha)?;
            if js.block_len == 0 || js.points == 0 || js.window == 0 {
                return Err(config_err(
                    "js.block_len, js.points and js.window must be positive",
                ));
            }
            if js.slow_window == Some(0) {
                return Err(config_err("js.slow_window must be positive"));
            }
        }
        if let Some(npi) = &self.npi {
            check_alpha("npi", npi.alpha)?;
            if npi.block_len < 2 {
                return Err(config_err("npi.block_len must be at least 2"));
            }
            if npi.points == 0 || npi.window == 0 {
                return Err(config_err("npi.points and npi.window must be positive"));
            }
        }
        if let Some(so) = &self.so {
            check_alpha("so", so.alpha)?;
        }
        if self.js.is_none() && self.npi.is_none() && self.so.is_none() {
            return Err(config_err("no detector section ([js], [npi] or [so])"));
        }
        Ok(())
    }
}
