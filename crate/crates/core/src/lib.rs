//! Multi-cell massive MIMO downlink simulator.
//!
//! The pipeline runs from a hexagonal layout and large-scale gains through
//! Rayleigh fading, pilot training with MMSE estimation and MRT/ZF
//! precoding to per-user SINR and achievable rate, evaluated both in closed
//! form and by Monte Carlo. [`experiments`] drives parameter sweeps.

pub mod channel;
pub mod config;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod precoding;
pub mod rate;
pub mod rng;
pub mod scenario;

pub use config::{NormalizationMode, SinrMode, SystemConfig};
pub use error::{Result, SimError};
pub use estimation::{allocate_pilots, estimate_variance, EstimateVariance, PilotAssignment};
pub use precoding::Precoder;
pub use scenario::{LargeScaleMap, Scenario};
