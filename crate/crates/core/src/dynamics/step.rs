use super::{SimConfig, SimState};
use crate::error::{Error, Result};
use crate::mesh::{chemotaxis_divergence, for_each_face, laplacian, Field, HelmholtzOperator};
use crate::theory::Sensitivity;

/// Largest tolerated negative density, relative to `max u`.
pub const POSITIVITY_TOLERANCE: f64 = 1e-9;

/// The two Helmholtz operators of one IMEX step, built once per run.
pub struct Stepper<'a, S: Sensitivity + ?Sized> {
    cfg: &'a SimConfig,
    chi: &'a S,
    v_op: HelmholtzOperator,
    u_op: HelmholtzOperator,
}

impl<'a, S: Sensitivity + ?Sized> Stepper<'a, S> {
    pub fn new(cfg: &'a SimConfig, chi: &'a S) -> Result<Self> {
        Ok(Stepper {
            cfg,
            chi,
            v_op: HelmholtzOperator::new(cfg.grid, cfg.lambda / cfg.dt + 1.0)?,
            u_op: HelmholtzOperator::new(cfg.grid, 1.0 / cfg.dt)?,
        })
    }

    /// One IMEX Euler step, signal first.
    ///
    /// Both solves are written for the increment over the old state, so a
    /// steady state produces an exactly zero right-hand side.
    pub fn step(&self, s: &SimState) -> Result<SimState> {
        let cfg = self.cfg;
        let g = &cfg.grid;

        // ((λ/dt + 1)I − Δ)(v_new − v) = u − v + Δv
        let mut rhs = laplacian(g, &s.v)?;
        for ((r, &u), &v) in rhs.values_mut().iter_mut().zip(s.u.values()).zip(s.v.values()) {
            *r += u - v;
        }
        let dv = solve_increment(&self.v_op, &rhs, &s.u, cfg.solver_tol)?;
        let v = add(&s.v, &dv);

        // ((1/dt)I − Δ)(u_new − u) = Δu − ∇·(uχ(v_new)∇v_new)
        let div = chemotaxis_divergence(g, &s.u, &v, self.chi, cfg.flux)?;
        let mut rhs = laplacian(g, &s.u)?;
        for (r, &d) in rhs.values_mut().iter_mut().zip(div.values()) {
            *r -= d;
        }
        let du = solve_increment(&self.u_op, &rhs, &s.u, cfg.solver_tol)?;
        let u = add(&s.u, &du);

        let t = (s.step + 1) as f64 * cfg.dt;
        check_positivity(&u, t)?;
        Ok(SimState {
            u,
            v,
            t,
            step: s.step + 1,
        })
    }
}

/// Solves for an increment with the residual measured against `scale`
/// rather than the (typically much smaller) increment right-hand side.
fn solve_increment(op: &HelmholtzOperator, rhs: &Field, scale: &Field, tol: f64) -> Result<Field> {
    let rn = rhs.dot(rhs)?.sqrt();
    let sn = scale.dot(scale)?.sqrt();
    let tol = if rn > sn && rn > 0.0 { tol * sn / rn } else { tol };
    op.solve(rhs, tol)
}

fn add(a: &Field, b: &Field) -> Field {
    let vals = a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect();
    Field::new(*a.grid(), vals).expect("same grid")
}

fn check_positivity(u: &Field, t: f64) -> Result<()> {
    if !u.is_finite() {
        return Err(Error::NonFinite("density update"));
    }
    let (cell, value) = u.argmin();
    if value < -POSITIVITY_TOLERANCE * u.max().max(0.0) {
        return Err(Error::Positivity { cell, value, t });
    }
    Ok(())
}

/// One step with the configured sensitivity `cfg.chi`.
pub fn step(state: &SimState, cfg: &SimConfig) -> Result<SimState> {
    Stepper::new(cfg, &cfg.chi)?.step(state)
}

/// One step with a custom sensitivity bounded by its declared envelope.
pub fn step_with<S: Sensitivity + ?Sized>(state: &SimState, cfg: &SimConfig, chi: &S) -> Result<SimState> {
    Stepper::new(cfg, chi)?.step(state)
}

/// Advective time-step suggestion `min_faces h / (2|χ(v_f) ∂v|)`, capped at
/// `t_end`. Diffusion is implicit, so this is the only step restriction.
pub fn stability_dt(cfg: &SimConfig, state: &SimState) -> f64 {
    stability_dt_with(cfg, state, &cfg.chi)
}

pub fn stability_dt_with<S: Sensitivity + ?Sized>(cfg: &SimConfig, state: &SimState, chi: &S) -> f64 {
    let v = state.v.values();
    let a = chi.envelope().a;
    let mut dt = cfg.t_end;
    for_each_face(&cfg.grid, |l, r, h| {
        let dv = v[r] - v[l];
        if dv == 0.0 {
            return;
        }
        let vf = 0.5 * (v[l] + v[r]);
        let speed = if a + vf > 0.0 {
            (chi.chi(vf) * dv / h).abs()
        } else {
            f64::INFINITY
        };
        dt = dt.min(h / (2.0 * speed));
    });
    dt
}
