use crate::dynamics::{run, BlowUp, LyapunovSpec, SimConfig};
use crate::error::{Error, Result};
use crate::theory::{condition_ass_pp, condition_lhs, threshold_chi0_pe, ConditionParams};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundednessEntry {
    pub lambda: f64,
    /// `sup_t (‖u‖_∞ + ‖v‖_{W^{1,q}})` over the recorded diagnostics.
    pub sup: f64,
    pub blowup: Option<BlowUp>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundednessReport {
    pub entries: Vec<BoundednessEntry>,
    /// `max/min` of the suprema; `None` if any run hit the blow-up ceiling.
    pub ratio: Option<f64>,
    pub below_threshold: bool,
}

/// Runs `base` at each λ and compares the suprema of `‖u‖_∞ + ‖v‖_{W^{1,q}}`.
///
/// Above the λ-free threshold the report still comes back, carrying blow-up
/// flags instead of a ratio when the ceiling is hit.
pub fn boundedness_probe(base: &SimConfig, lambdas: &[f64]) -> Result<BoundednessReport> {
    if lambdas.is_empty() {
        return Err(Error::Precondition(
            "boundedness probe needs at least one lambda".into(),
        ));
    }
    let th = threshold_chi0_pe(base.n(), &base.chi, base.eta)?;
    let entries = lambdas
        .par_iter()
        .map(|&lambda| {
            let out = run(&base.with_lambda(lambda)).map_err(|e| Error::SweepAborted {
                lambda,
                reason: e.to_string(),
                blowup: false,
            })?;
            let sup = out.diagnostics.iter().map(|d| d.linf_u + d.w1q_v).fold(0.0, f64::max);
            Ok(BoundednessEntry {
                lambda,
                sup,
                blowup: out.blowup,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ratio = if entries.iter().any(|e| e.blowup.is_some()) {
        None
    } else {
        let lo = entries.iter().map(|e| e.sup).fold(f64::INFINITY, f64::min);
        let hi = entries.iter().map(|e| e.sup).fold(0.0, f64::max);
        Some(hi / lo)
    };
    Ok(BoundednessReport {
        entries,
        ratio,
        below_threshold: !th.vacuous && base.chi.chi0 < th.value,
    })
}

/// Ordinary least squares line with the standard error of its slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_sigma: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Some(LinearFit {
        slope,
        intercept,
        slope_sigma: (ssr / (nf - 2.0) / sxx).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovReport {
    pub p: f64,
    pub eps: f64,
    pub r: f64,
    /// `(t, ∫u^p φ_r(v))` at every diagnostics record.
    pub series: Vec<(f64, f64)>,
    pub sup: f64,
    /// Fit over the records in the final half of the run.
    pub fit: LinearFit,
    pub blowup: Option<BlowUp>,
    /// Finite supremum, no blow-up, and trailing slope at most three
    /// standard errors above zero.
    pub bounded: bool,
}

/// Tracks the weighted functional `∫u^p φ_r(v)` along a run of `base` at its
/// own λ.
///
/// Requires `λ > 0` and that the weighted-energy condition holds for
/// `(p, ε, λ)` with the configured χ and η.
pub fn lyapunov_probe(base: &SimConfig, p: f64, eps: f64) -> Result<LyapunovReport> {
    if !(base.lambda > 0.0) {
        return Err(Error::Precondition("lyapunov probe requires lambda > 0".into()));
    }
    let cond = ConditionParams::new(p, eps, base.lambda, base.n())?;
    if !condition_ass_pp(&cond, &base.chi, base.eta) {
        let lhs = condition_lhs(&cond, base.chi.chi0);
        let rhs = base.chi.k * (base.chi.a + base.eta).powf(base.chi.k - 1.0);
        return Err(Error::Precondition(format!(
            "weighted-energy condition violated: ((1-lambda+2 lambda eps)+ p + sqrt(p f_p(lambda))) chi0 / (2(1-eps)) \
             = {lhs} exceeds k (a+eta)^(k-1) = {rhs}"
        )));
    }
    let cfg = SimConfig {
        lyapunov: LyapunovSpec { p, eps },
        ..base.clone()
    };
    let r = cfg.lyapunov_r()?;
    let out = run(&cfg)?;
    let series: Vec<(f64, f64)> = out.diagnostics.iter().map(|d| (d.t, d.lyapunov)).collect();
    let sup = series.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);

    let t_last = series.last().map_or(0.0, |s| s.0);
    let (x, y): (Vec<f64>, Vec<f64>) = series.iter().filter(|s| s.0 >= 0.5 * t_last).copied().unzip();
    let fit = linear_fit(&x, &y)
        .ok_or_else(|| Error::Precondition("too few diagnostics records in the final half of the run".into()))?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let span = x.last().unwrap() - x[0];
    let noise_floor = 1e-12 * mean.abs() / span;
    let bounded = sup.is_finite() && out.blowup.is_none() && fit.slope <= 3.0 * fit.slope_sigma + noise_floor;
    Ok(LyapunovReport {
        p,
        eps,
        r,
        series,
        sup,
        fit,
        blowup: out.blowup,
        bounded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Bump, InitPreset};
    use crate::mesh::Grid;
    use crate::theory::ChiParams;

    fn base(init: InitPreset, chi0: f64) -> SimConfig {
        let g = Grid::line(1.0, 64).unwrap();
        let chi = ChiParams::new(chi0, 1.0, 2.0).unwrap();
        let mut cfg = SimConfig::new(g, chi, 0.01, 1e-3, 0.3, init);
        cfg.diag_every = 10;
        cfg
    }

    fn bump() -> InitPreset {
        InitPreset::GaussianBump {
            u: Bump::gaussian(0.1, 5.0, 0.05),
            v: Bump::constant(1.0),
        }
    }

    #[test]
    fn constant_data_identical_suprema() {
        let r = boundedness_probe(&base(InitPreset::Constant { u: 1.0, v: 1.0 }, 1.0), &[0.1, 0.01]).unwrap();
        assert_eq!(r.entries[0].sup, r.entries[1].sup);
        assert_eq!(r.ratio, Some(1.0));
        assert!(r.below_threshold);
    }

    #[test]
    fn fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-13);
        assert!(f.slope_sigma < 1e-14);
        assert!(linear_fit(&x[..2], &y[..2]).is_none());
    }

    #[test]
    fn lyapunov_constant_data_is_flat() {
        let r = lyapunov_probe(&base(InitPreset::Constant { u: 1.0, v: 1.0 }, 1.0), 1.5, 0.1).unwrap();
        assert!(r.series.iter().all(|s| (s.1 - r.series[0].1).abs() < 1e-12));
        assert!(r.bounded);
    }

    #[test]
    fn lyapunov_bump_is_bounded() {
        let r = lyapunov_probe(&base(bump(), 1.0), 1.5, 0.1).unwrap();
        assert!(r.sup.is_finite() && r.bounded, "{:?}", r.fit);
    }

    #[test]
    fn lyapunov_rejects_inadmissible() {
        let cfg = base(bump(), 3.0);
        match lyapunov_probe(&cfg, 1.5, 0.1) {
            Err(Error::Precondition(m)) => assert!(m.contains("exceeds")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(lyapunov_probe(&cfg.with_lambda(0.0), 1.5, 0.1).is_err());
    }
}
