//! Numerical laboratory for the fast signal diffusion limit of a
//! Keller–Segel system with strongly decaying sensitivity
//! `χ(v) ≤ χ₀/(a+v)^k`, `k > 1`.
//!
//! - [`mesh`]: cell-centered grids, conservative operators, Helmholtz solves
//! - [`theory`]: closed-form thresholds, η, the weighted Lyapunov functional
//!   and randomized property suites for them
//! - [`dynamics`]: the IMEX time stepper shared by `λ > 0` and `λ = 0`
//! - [`experiments`]: λ-sweeps, the heat-kernel constant, boundedness and
//!   Lyapunov probes
//! - [`io`]: CSV and snapshot formats

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod io;
pub mod mesh;
pub mod theory;

pub use dynamics::{init_state, run, step, DiagnosticsRecord, InitPreset, RunOutput, SimConfig, SimState};
pub use error::{Error, Result};
pub use experiments::{estimate_c0, lambda_sweep, C0Estimate, SweepConfig, SweepResult};
pub use mesh::{Field, FluxMode, Grid};
pub use theory::{ChiParams, ConditionParams, Sensitivity};
