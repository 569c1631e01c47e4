//! Impulsive Goodwin's oscillator (IGO) toolkit.
//!
//! A third-order positive chain plant is closed by pulse-modulated impulsive
//! feedback: at each firing the first state jumps by a weight `F(y)` and the
//! next firing is scheduled `Φ(y)` time units later. Between firings the plant
//! evolves freely, so the hybrid dynamics reduce to the impulse-to-impulse map
//! `Q(X) = exp(A·Φ(CX))·(X + F(CX)·B)`.
//!
//! Modules:
//! - [`numerics`]: chain plants, divided differences, Opitz-formula matrix
//!   functions, a series matrix-exponential oracle and a 3×3 eigenvalue solver.
//! - [`model`]: amplitude/frequency modulation functions.
//! - [`poincare`]: the map `Q`, orbits, cycle detection and 1-cycle fixed points.
//! - [`stability`]: Jacobian at a fixed point, the determinant and linear
//!   slope criteria, and spectral checks on the closed-loop Jacobian family.
//! - [`hybridsim`]: exact event-driven reconstruction of continuous trajectories.
//! - [`design`]: slope-plane sweeps and spectral-radius minimisation.
//!
//! Grid-shaped workloads (sweeps, multi-start solves) run on rayon when the
//! `parallel` feature is enabled and fall back to a sequential loop otherwise;
//! see [`exec`].

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod error;
pub mod exec;
pub mod format;
pub mod hybridsim;
pub mod model;
pub mod numerics;
pub mod poincare;
pub mod stability;

pub use design::{design_for_target, optimize_slopes, slope_sweep, SlopeBox, SweepGrid, SweepSpec};
pub use error::{IgoError, Result};
pub use exec::Execution;
pub use hybridsim::{corridor_check, simulate, transient_metrics, Horizon, SimTrace};
pub use model::{Modulation, ModulationBounds, ModulationKind, Violation};
pub use numerics::{ChainPlant, Mat3, ScalarFunction, StateVec};
pub use poincare::{CycleClass, CycleSpec, FixedPoint};
pub use stability::StabilityReport;
