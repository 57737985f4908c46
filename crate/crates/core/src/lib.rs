//! Stochastic-geometry simulator and analysis toolchain for dense
//! small-cell networks: Monte Carlo SIR/SINR snapshots under single-slope
//! or combined LOS/NLOS propagation, interference-limited transmit-power
//! calibration, area-spectral-efficiency metrics, piecewise power-law
//! fitting and the closed-form energy-efficiency optimum.

pub mod calibration;
pub mod config;
pub mod energymodel;
pub mod error;
pub mod fitting;
pub mod geometry;
pub mod metrics;
pub mod output;
pub mod pipeline;
pub mod propagation;
pub mod simcore;

pub use error::{Error, Result};
