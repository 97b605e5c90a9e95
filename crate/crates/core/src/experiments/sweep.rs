use super::require_below_threshold;
use crate::dynamics::{run, RunOutput, SimConfig, SimState};
use crate::error::{Error, Result};
use crate::mesh::norm_lp;
use rayon::prelude::*;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    Linf,
    L2,
}

impl Norm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Norm::Linf => "linf",
            Norm::L2 => "l2",
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linf" => Ok(Norm::Linf),
            "l2" => Ok(Norm::L2),
            other => Err(Error::config(
                "sweep.norms",
                format!("expected \"linf\" or \"l2\" (got \"{other}\")"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Grid, data and numerics shared by every run; its λ is ignored.
    pub base: SimConfig,
    /// Strictly decreasing positive values.
    pub lambdas: Vec<f64>,
    /// Comparison times in `(0, t_end]`.
    pub times: Vec<f64>,
    /// The first entry drives the summary `E(λ)`.
    pub norms: Vec<Norm>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.lambdas.is_empty() {
            return Err(Error::config("sweep.lambdas", "must not be empty"));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::config("sweep.lambdas", format!("must be positive (got {l})")));
        }
        if self.lambdas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("sweep.lambdas", "must be strictly decreasing"));
        }
        if self.times.is_empty() {
            return Err(Error::config("sweep.times", "must not be empty"));
        }
        if let Some(t) = self.times.iter().find(|t| !(**t > 0.0 && **t <= self.base.t_end)) {
            return Err(Error::config("sweep.times", format!("time {t} outside (0, t_end]")));
        }
        if self.norms.is_empty() {
            return Err(Error::config("sweep.norms", "must select at least one norm"));
        }
        Ok(())
    }

    fn sorted_times(&self) -> Vec<f64> {
        let mut t = self.times.clone();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}

/// One line of the sweep CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub lambda: f64,
    pub t: f64,
    pub err_u_linf: f64,
    pub err_u_l2: f64,
    pub err_v_linf: f64,
    pub err_v_l2: f64,
}

impl ErrorRow {
    fn err_u(&self, n: Norm) -> f64 {
        match n {
            Norm::Linf => self.err_u_linf,
            Norm::L2 => self.err_u_l2,
        }
    }

    fn err_v(&self, n: Norm) -> f64 {
        match n {
            Norm::Linf => self.err_v_linf,
            Norm::L2 => self.err_v_l2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSummary {
    pub lambda: f64,
    pub e_u: f64,
    pub e_v: f64,
    pub runtime_seconds: f64,
    /// `sup_t (‖u‖_∞ + ‖v‖_{W^{1,q}})` over the diagnostics of this run.
    pub sup_bound: f64,
    /// `E(λ_i)/E(λ_{i−1})`; `None` for the first λ.
    pub ratio_u: Option<f64>,
    pub ratio_v: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    StrictlyDecreasing,
    NotMonotone,
    NotApplicable,
}

impl Monotonicity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Monotonicity::StrictlyDecreasing => "strictly decreasing",
            Monotonicity::NotMonotone => "not monotone",
            Monotonicity::NotApplicable => "n/a",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<ErrorRow>,
    pub summary: Vec<LambdaSummary>,
    pub verdict: Monotonicity,
    pub reference_runtime_seconds: f64,
    pub reference_sup_bound: f64,
}

impl SweepResult {
    /// Observed order `log(E_i/E_{i−1}) / log(λ_i/λ_{i−1})` for u and v
    /// between consecutive λ.
    pub fn empirical_rates(&self) -> Vec<(f64, f64)> {
        self.summary
            .windows(2)
            .map(|w| {
                let dl = (w[1].lambda / w[0].lambda).ln();
                ((w[1].e_u / w[0].e_u).ln() / dl, (w[1].e_v / w[0].e_v).ln() / dl)
            })
            .collect()
    }

    /// `max/min` of the per-λ boundedness suprema.
    pub fn sup_bound_ratio(&self) -> f64 {
        let (lo, hi) = self.summary.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), s| {
            (lo.min(s.sup_bound), hi.max(s.sup_bound))
        });
        hi / lo
    }
}

struct TimedRun {
    out: RunOutput,
    seconds: f64,
}

fn run_at(sw: &SweepConfig, lambda: f64, times: &[f64]) -> Result<TimedRun> {
    let mut cfg = sw.base.with_lambda(lambda);
    cfg.snapshot_times = times.to_vec();
    let start = Instant::now();
    let out = run(&cfg).map_err(|e| Error::SweepAborted {
        lambda,
        reason: e.to_string(),
        blowup: false,
    })?;
    if let Some(b) = out.blowup {
        return Err(Error::SweepAborted {
            lambda,
            reason: format!("blow-up ceiling {:e} exceeded at t = {}", b.ceiling, b.t),
            blowup: true,
        });
    }
    Ok(TimedRun {
        out,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn sup_bound(out: &RunOutput) -> f64 {
    out.diagnostics.iter().map(|d| d.linf_u + d.w1q_v).fold(0.0, f64::max)
}

fn diff_norm(a: &SimState, b: &SimState, u: bool, p: f64) -> Result<f64> {
    let d = if u { a.u.sub(&b.u)? } else { a.v.sub(&b.v)? };
    norm_lp(&d, p)
}

/// Runs the λ = 0 reference and every λ in the list on identical data and
/// numerics, concurrently, and compares them at the comparison times.
///
/// Results are assembled in list order, so the output does not depend on
/// scheduling. Requires `χ₀` below the λ-free threshold.
pub fn lambda_sweep(sw: &SweepConfig) -> Result<SweepResult> {
    sw.validate()?;
    require_below_threshold(&sw.base)?;
    let times = sw.sorted_times();

    let all: Vec<f64> = std::iter::once(0.0).chain(sw.lambdas.iter().copied()).collect();
    let runs: Vec<Result<TimedRun>> = all.par_iter().map(|&l| run_at(sw, l, &times)).collect();
    let mut runs = runs.into_iter().collect::<Result<Vec<_>>>()?.into_iter();
    let reference = runs.next().expect("reference run");

    let primary = sw.norms[0];
    let mut rows = Vec::with_capacity(sw.lambdas.len() * times.len());
    let mut summary: Vec<LambdaSummary> = Vec::with_capacity(sw.lambdas.len());
    for (&lambda, r) in sw.lambdas.iter().zip(runs) {
        let mut e_u: f64 = 0.0;
        let mut e_v: f64 = 0.0;
        for (i, &t) in times.iter().enumerate() {
            let (a, b) = (&r.out.snapshots[i], &reference.out.snapshots[i]);
            let row = ErrorRow {
                lambda,
                t,
                err_u_linf: diff_norm(a, b, true, f64::INFINITY)?,
                err_u_l2: diff_norm(a, b, true, 2.0)?,
                err_v_linf: diff_norm(a, b, false, f64::INFINITY)?,
                err_v_l2: diff_norm(a, b, false, 2.0)?,
            };
            e_u = e_u.max(row.err_u(primary));
            e_v = e_v.max(row.err_v(primary));
            rows.push(row);
        }
        let prev = summary.last();
        summary.push(LambdaSummary {
            lambda,
            e_u,
            e_v,
            runtime_seconds: r.seconds,
            sup_bound: sup_bound(&r.out),
            ratio_u: prev.map(|p| e_u / p.e_u),
            ratio_v: prev.map(|p| e_v / p.e_v),
        });
    }

    let verdict = if summary.len() < 2 {
        Monotonicity::NotApplicable
    } else if summary.windows(2).all(|w| w[1].e_u < w[0].e_u && w[1].e_v < w[0].e_v) {
        Monotonicity::StrictlyDecreasing
    } else {
        Monotonicity::NotMonotone
    };

    Ok(SweepResult {
        rows,
        summary,
        verdict,
        reference_runtime_seconds: reference.seconds,
        reference_sup_bound: sup_bound(&reference.out),
    })
}
