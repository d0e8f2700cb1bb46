//! Simulated acoustic soft-skin sensing: tone synthesis and spectral
//! features, a parametric skin simulator, calibration datasets, a small
//! model zoo for force regression and contact localisation, evaluation
//! metrics and deterministic SVG reports.

pub mod dataset;
pub mod dsp;
pub mod hexfloat;
pub mod io;
pub mod learn;
pub mod metrics;
pub mod report;
pub mod rng;
pub mod simskin;

pub use dataset::{CalibrationDataset, CalibrationRecord, DatasetError};
pub use dsp::{DspError, SpectralFeatures, Waveform};
pub use learn::{LearnError, ModelKind, ModelSpec, Task, TrainedModel};
pub use metrics::MetricsError;
pub use report::ReportError;
pub use rng::SplitMix64;
pub use simskin::{Location, SimError, SkinProfile};
