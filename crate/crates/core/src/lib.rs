//! Numerical toolkit for the curvature-chemotaxis model on `T^2 x T_{2pi}`.
//!
//! The crate computes the bifurcation structure of the uniform state of the
//! kinetic chemotaxis PDE with anticipation: bifurcation points, cubic
//! normal-form coefficients, critical anticipation thresholds and branch
//! criticality, the linear spectrum of the linearized operator, and it
//! reproduces the spot/lane stationary branches by direct pseudospectral
//! simulation with parameter continuation.
//!
//! Module map:
//! - [`params`]: model parameters and per-wave-number derived constants
//! - [`theta`]: complex periodic functions of the angle, multipliers, resolvent
//! - [`field`]: real fields on the tensor grid, symmetry operators, kernel basis
//! - [`integrals`]: closed-form integral quantities and their independent oracles
//! - [`normal_form`]: bifurcation point, cubic coefficients, thresholds, criticality
//! - [`spectrum`]: per-mode linearized operators, spectra, kernel dimension counts
//! - [`dynamics`]: nonlinear right-hand side, IMEX stepping to stationarity
//! - [`stability`]: matrix-free linearization about arbitrary fields
//! - [`continuation`]: warm-started sweeps in the interaction strength
//! - [`verify`]: closed-form vs oracle cross-validation suite
//! - [`report`]: run manifests and CSV/JSON writers

pub mod continuation;
pub mod dynamics;
pub mod error;
pub mod fft3;
pub mod field;
pub mod integrals;
pub mod linalg;
pub mod normal_form;
pub mod params;
pub mod report;
pub mod spectrum;
pub mod stability;
pub mod theta;
pub mod verify;

pub use error::{Error, Result};
pub use params::{ModelParams, RescaledConstants};
