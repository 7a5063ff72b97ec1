//! Detection of stealthy sensor attacks on linear Gaussian plants by testing
//! the joint distribution of the whitened Kalman innovation.
//!
//! Everything numeric is generic over [`Real`]; the aliases below fix the
//! scalar to `f64` (and `f32` where it is useful).

pub mod attacks;
pub mod detectors;
pub mod error;
pub mod linsys;
pub mod quantizer;
pub mod scalar;
pub mod statskit;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Matrix = statskit::Matrix<f64>;
pub type SystemModel = linsys::SystemModel<f64>;
pub type SteadyState = linsys::SteadyState<f64>;
pub type Plant = linsys::Plant<f64>;
pub type WhitenedStream = linsys::WhitenedStream<f64>;
pub type Attacker = attacks::Attacker<f64>;
pub type DetectorGrid = quantizer::DetectorGrid<f64>;
pub type NominalModel = detectors::NominalModel<f64>;
pub type JsDetector = detectors::JsDetector<f64>;
pub type NpiDetector = detectors::NpiDetector<f64>;
pub type SoDetector = detectors::SoDetector<f64>;
pub type Report = detectors::Report<f64>;

pub type SystemModelF32 = linsys::SystemModel<f32>;
pub type SteadyStateF32 = linsys::SteadyState<f32>;
pub type DetectorGridF32 = quantizer::DetectorGrid<f32>;
pub type JsDetectorF32 = detectors::JsDetector<f32>;
