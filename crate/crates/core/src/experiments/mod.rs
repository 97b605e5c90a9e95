//! λ-sweeps comparing the parabolic–parabolic runs against the
//! parabolic–elliptic reference, the heat-kernel constant estimate behind η,
//! and probes for uniform-in-λ boundedness and the weighted Lyapunov
//! functional.

mod c0;
mod probes;
mod sweep;

pub use c0::{estimate_c0, probe_cells, C0Estimate};
pub use probes::{
    boundedness_probe, linear_fit, lyapunov_probe, BoundednessEntry, BoundednessReport, LinearFit, LyapunovReport,
};
pub use sweep::{lambda_sweep, ErrorRow, LambdaSummary, Monotonicity, Norm, SweepConfig, SweepResult};

use crate::dynamics::SimConfig;
use crate::error::{Error, Result};
use crate::theory::threshold_chi0_pe;

/// Errors unless `χ₀` lies strictly below the λ-free threshold at the
/// configured η.
pub fn require_below_threshold(cfg: &SimConfig) -> Result<f64> {
    let th = threshold_chi0_pe(cfg.n(), &cfg.chi, cfg.eta)?;
    if th.vacuous || cfg.chi.chi0 >= th.value {
        return Err(Error::Precondition(format!(
            "chi0 = {} is not below the parabolic-elliptic threshold 2k(a+eta)^(k-1)/n = {}",
            cfg.chi.chi0, th.value
        )));
    }
    Ok(th.value)
}
