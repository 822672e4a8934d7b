//! Bayesian optimization for a human expert and an AI agent working in
//! batches: the human exploits, the AI over-explores on a schedule that
//! tracks its own information gain.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); sessions,
//! agents and I/O work in `f64`.

pub mod acquisition;
pub mod agents;
pub mod benchmarks;
pub mod domain;
pub mod engine;
pub mod error;
pub mod gp;
pub mod kernels;
pub mod linalg;
pub mod objective;
pub mod scalar;
pub mod theory;

pub use acquisition::{acquisition_value, bo_muse_beta, maximize, zeta_lower_bound, AcquisitionSpec, BetaSchedule};
pub use agents::{AgentSpec, Policy, Role, Suggestion};
pub use benchmarks::Goal;
pub use domain::Bounds;
pub use engine::{run_session, BatchRecord, Mode, RegretTrace, Session, SessionConfig, SessionData};
pub use error::{BoundViolation, Error, Result};
pub use gp::{GpPosterior, Observation, Source};
pub use kernels::{KernelFamily, KernelSpec};
pub use objective::{Objective, ObjectiveConfig};
pub use scalar::Scalar;

pub type KernelSpec64 = KernelSpec<f64>;
pub type KernelSpec32 = KernelSpec<f32>;
pub type GpPosterior64 = GpPosterior<f64>;
pub type GpPosterior32 = GpPosterior<f32>;
pub type AcquisitionSpec64 = AcquisitionSpec<f64>;
pub type AcquisitionSpec32 = AcquisitionSpec<f32>;
pub type BetaSchedule64 = BetaSchedule<f64>;
pub type BetaSchedule32 = BetaSchedule<f32>;
pub type Bounds64 = Bounds<f64>;
