//! Time integration of the coupled density/signal system for `λ ≥ 0`.
//!
//! One IMEX Euler scheme covers both regimes: the signal is updated first by
//! a Helmholtz solve with mass coefficient `λ/dt + 1` (at `λ = 0` this is the
//! elliptic problem itself), then the density diffuses implicitly while the
//! chemotactic flux is taken explicitly from the new signal.

mod run;
mod step;

pub use run::{diagnose, run, run_with, BlowUp, DiagnosticsRecord, RunOutput};
pub use step::{stability_dt, stability_dt_with, step, step_with, Stepper, POSITIVITY_TOLERANCE};

use crate::error::{Error, Result};
use crate::mesh::{Field, FluxMode, Grid, HelmholtzOperator};
use crate::theory::{r_value, ChiParams, ConditionParams};

/// A Gaussian profile `base + amp·exp(−|x − center|²/(2σ²))`; `amp = 0`
/// gives a constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub base: f64,
    pub amp: f64,
    pub sigma: f64,
    /// Defaults to the domain center.
    pub center: Option<[f64; 2]>,
}

impl Bump {
    pub fn constant(c: f64) -> Self {
        Bump {
            base: c,
            amp: 0.0,
            sigma: 1.0,
            center: None,
        }
    }

    pub fn gaussian(base: f64, amp: f64, sigma: f64) -> Self {
        Bump {
            base,
            amp,
            sigma,
            center: None,
        }
    }

    pub fn sample(&self, grid: &Grid) -> Field {
        let c = self.center.unwrap_or_else(|| grid.domain_center());
        let two_s2 = 2.0 * self.sigma * self.sigma;
        Field::from_fn(*grid, |x| {
            if self.amp == 0.0 {
                return self.base;
            }
            let d2: f64 = (0..grid.dim()).map(|i| (x[i] - c[i]).powi(2)).sum();
            self.base + self.amp * (-d2 / two_s2).exp()
        })
    }

    fn validate(&self, prefix: &str) -> Result<()> {
        let key = |k: &str| format!("init.{prefix}_{k}");
        if !self.base.is_finite() {
            return Err(Error::config(&key("base"), "must be finite"));
        }
        if !self.amp.is_finite() {
            return Err(Error::config(&key("amp"), "must be finite"));
        }
        if self.amp != 0.0 && !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::config(
                &key("sigma"),
                format!("must be positive (got {})", self.sigma),
            ));
        }
        if let Some(c) = self.center {
            if !c.iter().all(|x| x.is_finite()) {
                return Err(Error::config(&key("center"), "must be finite"));
            }
        }
        Ok(())
    }
}

/// Initial-data preset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitPreset {
    Constant { u: f64, v: f64 },
    GaussianBump { u: Bump, v: Bump },
}

impl InitPreset {
    pub fn name(&self) -> &'static str {
        match self {
            InitPreset::Constant { .. } => "constant",
            InitPreset::GaussianBump { .. } => "gaussian-bump",
        }
    }

    /// Samples `(u_init, v_init)` at cell centers.
    pub fn sample(&self, grid: &Grid) -> (Field, Field) {
        match *self {
            InitPreset::Constant { u, v } => (Field::constant(*grid, u), Field::constant(*grid, v)),
            InitPreset::GaussianBump { u, v } => (u.sample(grid), v.sample(grid)),
        }
    }
}

/// Exponent and ε of the weighted Lyapunov diagnostic; `r` follows from them
/// together with λ and χ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovSpec {
    pub p: f64,
    pub eps: f64,
}

impl Default for LyapunovSpec {
    fn default() -> Self {
        LyapunovSpec { p: 2.0, eps: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: Grid,
    pub chi: ChiParams,
    pub lambda: f64,
    pub dt: f64,
    pub t_end: f64,
    pub init: InitPreset,
    pub solver_tol: f64,
    pub flux: FluxMode,
    /// Steps between diagnostics records.
    pub diag_every: usize,
    pub snapshot_times: Vec<f64>,
    /// Halt once `max u` exceeds this multiple of its initial value.
    pub blowup_factor: f64,
    /// Exponent of the W^{1,q} diagnostic; `None` means `n + 1`.
    pub q: Option<f64>,
    pub lyapunov: LyapunovSpec,
    /// Lower bound for the signal used by the Lyapunov weight.
    pub eta: f64,
}

impl SimConfig {
    /// A configuration with default solver tolerance (1e-10), centered
    /// fluxes, diagnostics every step, no snapshots, blow-up ceiling 1e6,
    /// `q = n + 1` and `η = 0`.
    pub fn new(grid: Grid, chi: ChiParams, lambda: f64, dt: f64, t_end: f64, init: InitPreset) -> Self {
        SimConfig {
            grid,
            chi,
            lambda,
            dt,
            t_end,
            init,
            solver_tol: 1e-10,
            flux: FluxMode::Centered,
            diag_every: 1,
            snapshot_times: Vec::new(),
            blowup_factor: 1e6,
            q: None,
            lyapunov: LyapunovSpec::default(),
            eta: 0.0,
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        SimConfig { lambda, ..self.clone() }
    }

    /// Spatial dimension `n`.
    pub fn n(&self) -> u32 {
        self.grid.dim() as u32
    }

    pub fn q(&self) -> f64 {
        self.q.unwrap_or(self.grid.dim() as f64 + 1.0)
    }

    /// Number of steps taken to reach `t_end` (rounded up).
    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    /// The weight exponent `r` for the configured `(p, ε)`.
    pub fn lyapunov_r(&self) -> Result<f64> {
        let c = self.condition()?;
        Ok(r_value(&c, &self.chi))
    }

    pub fn condition(&self) -> Result<ConditionParams> {
        let LyapunovSpec { p, eps } = self.lyapunov;
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::config("output.lyapunov_p", format!("must exceed 1 (got {p})")));
        }
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::config(
                "output.lyapunov_eps",
                format!("must lie in (0, 1/2) (got {eps})"),
            ));
        }
        ConditionParams::new(p, eps, self.lambda, self.n())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config(
                "time.lambda",
                format!("must be >= 0 (got {})", self.lambda),
            ));
        }
        if !positive(self.dt) {
            return Err(Error::config("time.dt", format!("must be positive (got {})", self.dt)));
        }
        if !positive(self.t_end) {
            return Err(Error::config(
                "time.t_end",
                format!("must be positive (got {})", self.t_end),
            ));
        }
        if self.dt > self.t_end {
            return Err(Error::config(
                "time.dt",
                format!("must not exceed t_end (dt = {}, t_end = {})", self.dt, self.t_end),
            ));
        }
        if !positive(self.solver_tol) {
            return Err(Error::config(
                "time.solver_tol",
                format!("must be positive (got {})", self.solver_tol),
            ));
        }
        if self.diag_every == 0 {
            return Err(Error::config("output.every", "must be at least 1"));
        }
        if let Some(t) = self.snapshot_times.iter().find(|t| !(**t >= 0.0 && **t <= self.t_end)) {
            return Err(Error::config(
                "output.snapshots",
                format!("time {t} outside [0, t_end]"),
            ));
        }
        if !(self.blowup_factor.is_finite() && self.blowup_factor > 1.0) {
            return Err(Error::config(
                "output.blowup_factor",
                format!("must exceed 1 (got {})", self.blowup_factor),
            ));
        }
        if let Some(q) = self.q {
            if !(q.is_finite() && q >= 1.0) {
                return Err(Error::config("output.q", format!("must be >= 1 (got {q})")));
            }
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::config("output.eta", format!("must be >= 0 (got {})", self.eta)));
        }
        if self.chi.a + self.eta <= 0.0 {
            return Err(Error::config(
                "output.eta",
                "a = 0 requires a positive eta for the Lyapunov weight",
            ));
        }
        self.condition()?;
        match &self.init {
            InitPreset::Constant { u, v } => {
                if !u.is_finite() {
                    return Err(Error::config("init.u", "must be finite"));
                }
                if !v.is_finite() {
                    return Err(Error::config("init.v", "must be finite"));
                }
            }
            InitPreset::GaussianBump { u, v } => {
                u.validate("u")?;
                v.validate("v")?;
            }
        }
        Ok(())
    }
}

/// Density, signal and time after `step` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub u: Field,
    pub v: Field,
    pub t: f64,
    pub step: usize,
}

/// Samples the initial data and checks the admissibility dichotomy:
/// `u ≥ 0` not identically zero, and `v > 0` when `a = 0` or `v ≥ 0` not
/// identically zero when `a > 0`.
///
/// At `λ = 0` the signal carries no memory, so `v` is replaced by the
/// elliptic solve of `u_init`.
pub fn init_state(cfg: &SimConfig) -> Result<SimState> {
    cfg.validate()?;
    let (u, v) = cfg.init.sample(&cfg.grid);
    let ukey = if matches!(cfg.init, InitPreset::Constant { .. }) {
        "init.u"
    } else {
        "init.u_base"
    };
    let vkey = if matches!(cfg.init, InitPreset::Constant { .. }) {
        "init.v"
    } else {
        "init.v_base"
    };
    if u.min() < 0.0 || u.max() <= 0.0 {
        return Err(Error::config(
            ukey,
            "initial density must be nonnegative and not identically zero",
        ));
    }
    if cfg.chi.a == 0.0 {
        if v.min() <= 0.0 {
            return Err(Error::config(vkey, "a = 0 requires a strictly positive initial signal"));
        }
    } else if v.min() < 0.0 || v.max() <= 0.0 {
        return Err(Error::config(
            vkey,
            "initial signal must be nonnegative and not identically zero",
        ));
    }
    let v = if cfg.lambda == 0.0 {
        HelmholtzOperator::new(cfg.grid, 1.0)?.solve(&u, cfg.solver_tol)?
    } else {
        v
    };
    Ok(SimState { u, v, t: 0.0, step: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump_cfg(lambda: f64) -> SimConfig {
        let g = Grid::line(1.0, 256).unwrap();
        let chi = ChiParams::new(1.0, 1.0, 2.0).unwrap();
        let init = InitPreset::GaussianBump {
            u: Bump::gaussian(0.1, 5.0, 0.05),
            v: Bump::constant(1.0),
        };
        SimConfig::new(g, chi, lambda, 1e-3, 0.1, init)
    }

    #[test]
    fn constant_preset_samples_constants() {
        let mut cfg = bump_cfg(0.5);
        cfg.init = InitPreset::Constant { u: 1.0, v: 1.0 };
        let s = init_state(&cfg).unwrap();
        assert!(s.u.values().iter().chain(s.v.values()).all(|&x| x == 1.0));
        assert_eq!(s.t, 0.0);
    }

    #[test]
    fn bump_mass_matches_gaussian_integral() {
        let s = init_state(&bump_cfg(0.5)).unwrap();
        let sigma: f64 = 0.05;
        let full = 5.0 * sigma * (2.0 * std::f64::consts::PI).sqrt();
        // the tails beyond ±10σ are far below the tolerance
        assert!((s.u.integral() - (0.1 + full)).abs() < 1e-9);
        assert!(s.u.min() > 0.0);
    }

    #[test]
    fn pole_at_zero_signal_is_rejected() {
        let mut cfg = bump_cfg(0.5);
        cfg.chi = ChiParams::new(1.0, 0.0, 2.0).unwrap();
        cfg.eta = 0.1;
        cfg.init = InitPreset::Constant { u: 1.0, v: 0.0 };
        match init_state(&cfg) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "init.v"),
            other => panic!("unexpected {other:?}"),
        }
        cfg.chi = ChiParams::new(1.0, 0.5, 2.0).unwrap();
        assert!(
            init_state(&cfg).is_err(),
            "v identically zero is rejected for a > 0 too"
        );
        cfg.init = InitPreset::Constant { u: 0.0, v: 1.0 };
        assert!(init_state(&cfg).is_err());
    }

    #[test]
    fn elliptic_signal_at_lambda_zero() {
        let cfg = bump_cfg(0.0);
        let s = init_state(&cfg).unwrap();
        let op = HelmholtzOperator::new(cfg.grid, 1.0).unwrap();
        assert!(op.relative_residual(&s.v, &s.u).unwrap() <= 1e-10);
    }

    #[test]
    fn validation_names_keys() {
        let key = |cfg: SimConfig| match cfg.validate() {
            Err(Error::Config { key, .. }) => key,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(
            key(SimConfig {
                dt: 1.0,
                ..bump_cfg(0.1)
            }),
            "time.dt"
        );
        assert_eq!(
            key(SimConfig {
                lambda: -1.0,
                ..bump_cfg(0.1)
            }),
            "time.lambda"
        );
        assert_eq!(
            key(SimConfig {
                diag_every: 0,
                ..bump_cfg(0.1)
            }),
            "output.every"
        );
        assert_eq!(
            key(SimConfig {
                snapshot_times: vec![0.5],
                ..bump_cfg(0.1)
            }),
            "output.snapshots"
        );
        let mut cfg = bump_cfg(0.1);
        cfg.lyapunov.eps = 0.5;
        assert_eq!(key(cfg), "output.lyapunov_eps");
    }

    #[test]
    fn step_count_rounds_up() {
        let cfg = bump_cfg(0.1);
        assert_eq!(cfg.steps(), 100);
        assert_eq!(SimConfig { t_end: 0.1005, ..cfg }.steps(), 101);
    }
}
