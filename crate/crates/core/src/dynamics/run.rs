use super::step::Stepper;
use super::{init_state, SimConfig, SimState};
use crate::error::{Error, Result};
use crate::mesh::{norm_lp, w1q_norm, Field};
use crate::theory::{lyapunov_functional, Sensitivity};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub min_v: f64,
    pub max_u: f64,
    pub linf_u: f64,
    pub w1q_v: f64,
    pub lyapunov: f64,
    /// Cells where `v < η` was clamped for the Lyapunov weight.
    pub clamped: usize,
    /// Cells with `u < 0` (within the positivity tolerance).
    pub negative: usize,
}

/// Early halt because `max u` passed the blow-up ceiling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowUp {
    pub t: f64,
    pub max_u: f64,
    pub ceiling: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub final_state: SimState,
    pub diagnostics: Vec<DiagnosticsRecord>,
    /// States at the configured snapshot times, in increasing time order.
    pub snapshots: Vec<SimState>,
    pub blowup: Option<BlowUp>,
}

impl RunOutput {
    /// Largest relative deviation of the recorded mass from its initial value.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.diagnostics.first().map_or(0.0, |d| d.mass);
        self.diagnostics
            .iter()
            .map(|d| (d.mass - m0).abs() / m0)
            .fold(0.0, f64::max)
    }
}

/// Diagnostics of a single state with Lyapunov weight exponent `r`.
pub fn diagnose(state: &SimState, cfg: &SimConfig, r: f64) -> Result<DiagnosticsRecord> {
    let u = &state.u;
    let negative = u.values().iter().filter(|&&x| x < 0.0).count();
    let clipped = if negative > 0 {
        Field::new(*u.grid(), u.values().iter().map(|x| x.max(0.0)).collect())?
    } else {
        u.clone()
    };
    let lyap = lyapunov_functional(&clipped, &state.v, cfg.lyapunov.p, r, &cfg.chi, cfg.eta)?;
    let rec = DiagnosticsRecord {
        t: state.t,
        mass: u.integral(),
        min_v: state.v.min(),
        max_u: u.max(),
        linf_u: norm_lp(u, f64::INFINITY)?,
        w1q_v: w1q_norm(&cfg.grid, &state.v, cfg.q())?,
        lyapunov: lyap.value,
        clamped: lyap.clamped,
        negative,
    };
    let finite = [
        rec.t,
        rec.mass,
        rec.min_v,
        rec.max_u,
        rec.linf_u,
        rec.w1q_v,
        rec.lyapunov,
    ]
    .iter()
    .all(|x| x.is_finite());
    if !finite {
        return Err(Error::NonFinite("diagnostics"));
    }
    Ok(rec)
}

/// Integrates from the initial data to `t_end` with the configured sensitivity.
pub fn run(cfg: &SimConfig) -> Result<RunOutput> {
    run_with(cfg, &cfg.chi)
}

/// As [`run`] with a custom sensitivity.
///
/// Diagnostics are recorded at step 0, every `diag_every` steps and at the
/// last step. Snapshots are taken at the step nearest each requested time.
/// Step failures are wrapped in [`Error::RunFailed`] with the failing time.
pub fn run_with<S: Sensitivity + ?Sized>(cfg: &SimConfig, chi: &S) -> Result<RunOutput> {
    let mut state = init_state(cfg)?;
    let r = cfg.lyapunov_r()?;
    let stepper = Stepper::new(cfg, chi)?;
    let n_steps = cfg.steps();

    let mut snap_steps: Vec<usize> = cfg
        .snapshot_times
        .iter()
        .map(|t| ((t / cfg.dt).round() as usize).min(n_steps))
        .collect();
    snap_steps.sort_unstable();
    let mut next_snap = 0;
    let mut snapshots = Vec::with_capacity(snap_steps.len());
    let mut take_snapshots = |state: &SimState, next: &mut usize| {
        while *next < snap_steps.len() && snap_steps[*next] == state.step {
            snapshots.push(state.clone());
            *next += 1;
        }
    };

    let mut diagnostics = vec![diagnose(&state, cfg, r)?];
    take_snapshots(&state, &mut next_snap);
    let ceiling = cfg.blowup_factor * state.u.max();
    let mut blowup = None;

    while state.step < n_steps {
        let t_next = (state.step + 1) as f64 * cfg.dt;
        let wrap = |e: Error| Error::RunFailed {
            t: t_next,
            source: Box::new(e),
        };
        state = stepper.step(&state).map_err(wrap)?;
        take_snapshots(&state, &mut next_snap);
        let max_u = state.u.max();
        let last = state.step == n_steps;
        if max_u > ceiling {
            diagnostics.push(diagnose(&state, cfg, r).map_err(wrap)?);
            blowup = Some(BlowUp {
                t: state.t,
                max_u,
                ceiling,
            });
            break;
        }
        if state.step % cfg.diag_every == 0 || last {
            diagnostics.push(diagnose(&state, cfg, r).map_err(wrap)?);
        }
    }

    Ok(RunOutput {
        final_state: state,
        diagnostics,
        snapshots,
        blowup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Bump, InitPreset};
    use crate::mesh::{FluxMode, Grid};
    use crate::theory::ChiParams;

    fn bump(grid: Grid, chi0: f64, lambda: f64, dt: f64, t_end: f64) -> SimConfig {
        let chi = ChiParams::new(chi0, 1.0, 2.0).unwrap();
        let init = InitPreset::GaussianBump {
            u: Bump::gaussian(0.1, 5.0, 0.05),
            v: Bump::constant(1.0),
        };
        SimConfig::new(grid, chi, lambda, dt, t_end, init)
    }

    #[test]
    fn constant_data_gives_constant_diagnostics() {
        let g = Grid::line(1.0, 32).unwrap();
        let mut cfg = bump(g, 1.0, 0.1, 0.01, 1.0);
        cfg.init = InitPreset::Constant { u: 1.5, v: 1.5 };
        cfg.diag_every = 10;
        let out = run(&cfg).unwrap();
        assert_eq!(out.diagnostics.len(), 11);
        let d0 = out.diagnostics[0];
        for d in &out.diagnostics {
            assert!((d.mass - d0.mass).abs() < 1e-13);
            assert!((d.max_u - d0.max_u).abs() < 1e-13);
            assert!((d.min_v - d0.min_v).abs() < 1e-13);
            assert!((d.lyapunov - d0.lyapunov).abs() < 1e-12);
        }
        assert!((out.final_state.t - 1.0).abs() < 1e-12);
        assert!(out.blowup.is_none());
    }

    #[test]
    fn snapshots_land_on_requested_steps() {
        let g = Grid::line(1.0, 32).unwrap();
        let mut cfg = bump(g, 1.0, 0.1, 0.01, 0.5);
        cfg.snapshot_times = vec![0.25, 0.0, 0.5];
        let out = run(&cfg).unwrap();
        let ts: Vec<f64> = out.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(ts.len(), 3);
        assert!((ts[0] - 0.0).abs() < 1e-15 && (ts[1] - 0.25).abs() < 1e-12 && (ts[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bump_run_conserves_mass() {
        let g = Grid::line(1.0, 128).unwrap();
        let cfg = bump(g, 1.0, 0.01, 1e-3, 0.2);
        let out = run(&cfg).unwrap();
        assert!(out.mass_drift() <= 1e-10, "{}", out.mass_drift());
    }

    #[test]
    fn blowup_ceiling_halts_run() {
        // off-center perturbation of an unstable constant state aggregates
        let g = Grid::line(1.0, 128).unwrap();
        let mut cfg = bump(g, 100.0, 0.01, 1e-3, 1.0);
        cfg.init = InitPreset::GaussianBump {
            u: Bump {
                center: Some([0.3, 0.0]),
                ..Bump::gaussian(1.0, 0.5, 0.1)
            },
            v: Bump::constant(1.0),
        };
        cfg.flux = FluxMode::Upwind;
        cfg.blowup_factor = 4.0;
        let out = run(&cfg).unwrap();
        let b = out.blowup.expect("ceiling reached");
        assert!(b.t < 1.0 && b.max_u > b.ceiling);
        assert_eq!(out.final_state.t, b.t);
        assert_eq!(out.diagnostics.last().unwrap().t, b.t);
    }

    #[test]
    fn dt_self_convergence_first_order() {
        let g = Grid::line(1.0, 64).unwrap();
        let finals: Vec<Field> = [4e-3, 2e-3, 1e-3]
            .iter()
            .map(|&dt| run(&bump(g, 1.0, 0.1, dt, 0.2)).unwrap().final_state.u)
            .collect();
        let e1 = norm_lp(&finals[0].sub(&finals[1]).unwrap(), 2.0).unwrap();
        let e2 = norm_lp(&finals[1].sub(&finals[2]).unwrap(), 2.0).unwrap();
        let ratio = e1 / e2;
        assert!((1.6..=2.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn failure_carries_time() {
        let g = Grid::line(1.0, 64).unwrap();
        let mut cfg = bump(g, 400.0, 1.0, 0.05, 1.0);
        cfg.blowup_factor = 1e12;
        match run(&cfg) {
            Err(Error::RunFailed { t, .. }) => assert!(t > 0.0),
            other => panic!("expected a positivity failure, got {:?}", other.map(|o| o.blowup)),
        }
    }
}
