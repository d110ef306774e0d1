//! Support-based domain adaptation (SuDA) for joint-angle regression from
//! two-channel flexible stretch sensors.
//!
//! The crate covers the whole desk-scale workflow:
//!
//! * [`data`]: sensor datasets, CSV ingestion, chronological splits, percentile normalization.
//! * [`bvh`]: BVH parsing, forward kinematics and joint bending angles.
//! * [`sim`]: an analytic body-fabric-sensor surrogate producing source/target domains.
//! * [`support`]: support curve fitting, arc-length proxies and quantized registration.
//! * [`regressor`]: the windowed FC/LSTM/FC regressor with hand-written backpropagation.
//! * [`baselines`]: Source-Only, MMD, CORAL and gradient-reversal baselines.
//! * [`eval`]: metrics, the end-to-end pipeline, sweeps, reports and SVG plots.

pub mod baselines;
pub mod bvh;
pub mod data;
mod error;
pub mod eval;
pub mod regressor;
pub mod seed;
pub mod sim;
pub mod support;

pub use error::{Error, Result};

pub use baselines::{DidaConfig, DidaMethod};
pub use data::{Dataset, DomainTag, LabeledFrame, NormStats, SensorFrame};
pub use regressor::{RegressorConfig, RegressorModel, TrainConfig};
pub use sim::{SurrogateConfig, TrajectorySpec};
pub use support::{RegistrationMap, SupportCurve};
