//! Closed-form objects of the strong-sensitivity chemotaxis model.
//!
//! Everything here is a pure function of scalar parameters (plus two field
//! reductions for the weighted Lyapunov functional). The sensitivity family is
//! `χ(s) = χ₀/(a+s)^k` with `χ₀ > 0`, `a ≥ 0`, `k > 1`; all threshold logic
//! sees a sensitivity only through this envelope.

pub mod verify;

use crate::error::{Error, Result};
use crate::mesh::Field;

/// Envelope parameters `(χ₀, a, k)` of the sensitivity `χ(s) ≤ χ₀/(a+s)^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiParams {
    pub chi0: f64,
    pub a: f64,
    pub k: f64,
}

impl ChiParams {
    pub fn new(chi0: f64, a: f64, k: f64) -> Result<Self> {
        if !(chi0.is_finite() && chi0 > 0.0) {
            return Err(Error::config("chi.chi0", format!("must satisfy chi0 > 0 (got {chi0})")));
        }
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::config("chi.a", format!("must satisfy a >= 0 (got {a})")));
        }
        if !(k.is_finite() && k > 1.0) {
            return Err(Error::config("chi.k", format!("must satisfy k > 1 (got {k})")));
        }
        Ok(ChiParams { chi0, a, k })
    }

    /// Same envelope with a different `χ₀`.
    pub fn with_chi0(&self, chi0: f64) -> Result<Self> {
        Self::new(chi0, self.a, self.k)
    }
}

/// A pointwise sensitivity function together with its declared envelope.
pub trait Sensitivity: Sync {
    /// χ(s). Callers guarantee `envelope().a + s > 0`.
    fn chi(&self, s: f64) -> f64;
    fn envelope(&self) -> ChiParams;
}

impl Sensitivity for ChiParams {
    #[inline]
    fn chi(&self, s: f64) -> f64 {
        self.chi0 / (self.a + s).powf(self.k)
    }

    fn envelope(&self) -> ChiParams {
        *self
    }
}

/// A user-supplied sensitivity bounded by a declared `(χ₀, a, k)` envelope.
pub struct EnvelopedSensitivity<F> {
    envelope: ChiParams,
    f: F,
}

impl<F: Fn(f64) -> f64 + Sync> EnvelopedSensitivity<F> {
    pub fn new(envelope: ChiParams, f: F) -> Self {
        EnvelopedSensitivity { envelope, f }
    }

    /// Checks `0 ≤ χ(s) ≤ χ₀/(a+s)^k` at the given sample points.
    pub fn respects_envelope(&self, samples: impl IntoIterator<Item = f64>) -> bool {
        samples.into_iter().all(|s| {
            let x = (self.f)(s);
            x >= 0.0 && x <= self.envelope.chi(s) * (1.0 + 1e-12)
        })
    }
}

impl<F: Fn(f64) -> f64 + Sync> Sensitivity for EnvelopedSensitivity<F> {
    fn chi(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    fn envelope(&self) -> ChiParams {
        self.envelope
    }
}

/// `χ₀/(a+s)^k`, rejecting the pole.
pub fn chi_eval(chi: &ChiParams, s: f64) -> Result<f64> {
    let base = chi.a + s;
    if !(base > 0.0) {
        return Err(Error::SingularSensitivity(base));
    }
    Ok(chi.chi0 / base.powf(chi.k))
}

/// Inputs of the uniform lower bound η for the signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaInputs {
    /// Lower bound of the Neumann kernel of `w_t = Δw − w`.
    pub c0: f64,
    /// Mass ‖u_init‖₁.
    pub mass: f64,
    /// min over Ω̄ of v_init.
    pub vmin: f64,
}

impl EtaInputs {
    pub fn new(c0: f64, mass: f64, vmin: f64) -> Result<Self> {
        if !(c0.is_finite() && c0 > 0.0) {
            return Err(Error::Domain(format!("c0 must be positive (got {c0})")));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Domain(format!("mass must be positive (got {mass})")));
        }
        if !(vmin.is_finite() && vmin >= 0.0) {
            return Err(Error::Domain(format!("vmin must be nonnegative (got {vmin})")));
        }
        Ok(EtaInputs { c0, mass, vmin })
    }
}

/// `η = sup_{τ>0} min{ e^{−2τ}·vmin, c₀·m·(1 − e^{−τ}) }`.
///
/// With `x = e^{−τ}` the first term `vmin·x²` falls and the second
/// `c₀m(1 − x)` rises as τ grows, so the supremum sits at their crossing:
/// the root in (0, 1) of `vmin·x² + c₀m·x − c₀m = 0`.
pub fn eta_closed_form(input: &EtaInputs) -> f64 {
    let (v, cm) = (input.vmin, input.c0 * input.mass);
    if v == 0.0 {
        return 0.0;
    }
    // rationalized root, free of cancellation when v ≫ cm
    let x = 2.0 * cm / (cm + (cm * cm + 4.0 * v * cm).sqrt());
    v * x * x
}

/// `(p, ε, λ, n)` of the weighted-energy condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionParams {
    pub p: f64,
    pub eps: f64,
    pub lambda: f64,
    pub n: u32,
}

impl ConditionParams {
    /// Requires `p > 1`, `0 < ε < 1/2`, `λ ≥ 0`, `n ≥ 1`.
    pub fn new(p: f64, eps: f64, lambda: f64, n: u32) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::Domain(format!("p must exceed 1 (got {p})")));
        }
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::Domain(format!("eps must lie in (0, 1/2) (got {eps})")));
        }
        Self::limiting_unchecked(p, eps, lambda, n)
    }

    /// The closed endpoint `ε = 0`, `p ≥ 1`, used to relate the condition to
    /// the λ-free threshold at `p = n/2`.
    pub fn limiting(p: f64, lambda: f64, n: u32) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::Domain(format!("p must be at least 1 (got {p})")));
        }
        Self::limiting_unchecked(p, 0.0, lambda, n)
    }

    fn limiting_unchecked(p: f64, eps: f64, lambda: f64, n: u32) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Domain(format!("lambda must be nonnegative (got {lambda})")));
        }
        if n == 0 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        Ok(ConditionParams { p, eps, lambda, n })
    }
}

/// A χ₀ threshold. `vacuous` is set when `a + η = 0`, where the bound
/// collapses to zero and no positive χ₀ satisfies it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub value: f64,
    pub vacuous: bool,
}

fn envelope_base(chi: &ChiParams, eta: f64) -> Result<f64> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::Domain(format!("eta must be nonnegative (got {eta})")));
    }
    Ok(chi.a + eta)
}

/// λ-dependent threshold
/// `4k(a+η)^{k−1} / ((1−λ)₊n + √(n(nλ² − 2nλ + n + 8λ)))`.
pub fn threshold_chi0_pp(n: u32, lambda: f64, chi: &ChiParams, eta: f64) -> Result<Threshold> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Domain(format!("lambda must be nonnegative (got {lambda})")));
    }
    let base = envelope_base(chi, eta)?;
    let n = n as f64;
    let denom = (1.0 - lambda).max(0.0) * n + (n * (n * lambda * lambda - 2.0 * n * lambda + n + 8.0 * lambda)).sqrt();
    let value = 4.0 * chi.k * base.powf(chi.k - 1.0) / denom;
    Ok(Threshold {
        value,
        vacuous: base == 0.0,
    })
}

/// λ-free threshold `2k(a+η)^{k−1}/n`.
pub fn threshold_chi0_pe(n: u32, chi: &ChiParams, eta: f64) -> Result<Threshold> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    let base = envelope_base(chi, eta)?;
    let value = 2.0 * chi.k * base.powf(chi.k - 1.0) / n as f64;
    Ok(Threshold {
        value,
        vacuous: base == 0.0,
    })
}

/// `f_p(λ) = pλ² + (−2p + 4εp + 4 − 4ε)λ + p`, positive for every admissible
/// `(p, ε, λ)`.
pub fn f_poly(cond: &ConditionParams) -> f64 {
    let ConditionParams { p, eps, lambda: l, .. } = *cond;
    p * l * l + (-2.0 * p + 4.0 * eps * p + 4.0 - 4.0 * eps) * l + p
}

/// Discriminant of `f_p` in λ:
/// `4(−(1 − (2ε−1)²)p² − 4(1−ε)(1−2ε)p + 4(1−ε)²)`.
pub fn f_discriminant(p: f64, eps: f64) -> f64 {
    let s = 2.0 * eps - 1.0;
    4.0 * (-(1.0 - s * s) * p * p - 4.0 * (1.0 - eps) * (1.0 - 2.0 * eps) * p + 4.0 * (1.0 - eps) * (1.0 - eps))
}

/// Left-hand coefficient of the condition after multiplying through by λ:
/// `((1 − λ + 2λε)₊p + √(p f_p(λ))) χ₀ / (2(1 − ε))`.
pub fn condition_lhs(cond: &ConditionParams, chi0: f64) -> f64 {
    let ConditionParams { p, eps, lambda: l, .. } = *cond;
    ((1.0 - l + 2.0 * l * eps).max(0.0) * p + (p * f_poly(cond)).sqrt()) * chi0 / (2.0 * (1.0 - eps))
}

/// Weighted-energy condition in λ-multiplied form,
/// `condition_lhs ≤ k (a+η)^{k−1}`.
///
/// This is exactly the requirement that `H_{r,ε}(s) ≤ 0` for all `s ≥ η`
/// with `r = r_value(..)`, and at `λ = 0, ε = 0, p = n/2` it coincides with
/// the λ-free threshold. Well defined at `λ = 0`.
pub fn condition_ass_pp(cond: &ConditionParams, chi: &ChiParams, eta: f64) -> bool {
    let base = chi.a + eta;
    condition_lhs(cond, chi.chi0) <= chi.k * base.powf(chi.k - 1.0)
}

/// The same inequality with the envelope exponent `k` in place of `k − 1`.
///
/// Kept for the consistency report: for `a + η > 1` it admits parameters at
/// which `H_{r,ε}(η) > 0`.
pub fn condition_ass_pp_exponent_k(cond: &ConditionParams, chi: &ChiParams, eta: f64) -> bool {
    let base = chi.a + eta;
    condition_lhs(cond, chi.chi0) <= chi.k * base.powf(chi.k)
}

/// Largest χ₀ for which [`condition_ass_pp`] holds (the condition is linear in χ₀).
pub fn condition_chi0_max(cond: &ConditionParams, k: f64, a: f64, eta: f64) -> f64 {
    k * (a + eta).powf(k - 1.0) / condition_lhs(cond, 1.0)
}

/// `r = λ(p−1)χ₀ √(p / f_p(λ))`.
pub fn r_value(cond: &ConditionParams, chi: &ChiParams) -> f64 {
    let ConditionParams { p, lambda, .. } = *cond;
    lambda * (p - 1.0) * chi.chi0 * (p / f_poly(cond)).sqrt()
}

/// `∫_η^s (a+σ)^{−k} dσ = ((a+η)^{1−k} − (a+s)^{1−k})/(k−1)`.
fn envelope_integral(s: f64, chi: &ChiParams, eta: f64) -> f64 {
    let e = 1.0 - chi.k;
    ((chi.a + eta).powf(e) - (chi.a + s).powf(e)) / (chi.k - 1.0)
}

/// `φ_r(s) = exp{−r ∫_η^s (a+σ)^{−k} dσ}` for `s ≥ η`.
pub fn phi_r(s: f64, r: f64, chi: &ChiParams, eta: f64) -> Result<f64> {
    if !(s >= eta) {
        return Err(Error::Domain(format!("phi_r needs s >= eta (s = {s}, eta = {eta})")));
    }
    if !(chi.a + eta > 0.0) {
        return Err(Error::Domain("phi_r needs a + eta > 0".into()));
    }
    if s.is_infinite() {
        return Ok(phi_r_floor(r, chi, eta));
    }
    Ok((-r * envelope_integral(s, chi, eta)).exp())
}

/// `exp{−r/((k−1)(a+η)^{k−1})}`, the infimum of `φ_r` over `[η, ∞)`.
pub fn phi_r_floor(r: f64, chi: &ChiParams, eta: f64) -> f64 {
    (-r / ((chi.k - 1.0) * (chi.a + eta).powf(chi.k - 1.0))).exp()
}

/// The quadratic-in-r sign function
///
/// ```text
/// H(s) = f_p(λ) r² / (4λ²(1−ε)(p−1)(a+s)^{2k})
///      + [ (1−λ+2λε)₊ p χ₀ / (2λ(1−ε)(a+s)^{2k}) − k/(λ(a+s)^{k+1}) ] r
///      + p(p−1)χ₀² / (4(1−ε)(a+s)^{2k})
/// ```
pub fn h_sign(s: f64, cond: &ConditionParams, chi: &ChiParams, eta: f64, r: f64) -> Result<f64> {
    let ConditionParams { p, eps, lambda: l, .. } = *cond;
    if !(l > 0.0) {
        return Err(Error::Domain("h_sign requires lambda > 0".into()));
    }
    if !(s >= eta) {
        return Err(Error::Domain(format!("h_sign needs s >= eta (s = {s}, eta = {eta})")));
    }
    let base = chi.a + s;
    if !(base > 0.0) {
        return Err(Error::Domain("h_sign needs a + s > 0".into()));
    }
    let b2k = base.powf(2.0 * chi.k);
    let quad = f_poly(cond) / (4.0 * l * l * (1.0 - eps) * (p - 1.0) * b2k);
    let lin = (1.0 - l + 2.0 * l * eps).max(0.0) * p * chi.chi0 / (2.0 * l * (1.0 - eps) * b2k)
        - chi.k / (l * base.powf(chi.k + 1.0));
    let cst = p * (p - 1.0) * chi.chi0 * chi.chi0 / (4.0 * (1.0 - eps) * b2k);
    Ok(quad * r * r + lin * r + cst)
}

/// Value of `∫_Ω u^p φ_r(v)` with the number of cells where `v < η` was
/// clamped to `η` for the weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovValue {
    pub value: f64,
    pub clamped: usize,
}

/// `∫_Ω u^p φ_r(v)`; lies between `φ_r_floor·‖u‖_p^p` and `‖u‖_p^p`.
pub fn lyapunov_functional(u: &Field, v: &Field, p: f64, r: f64, chi: &ChiParams, eta: f64) -> Result<LyapunovValue> {
    u.grid().check_same(v.grid(), "lyapunov_functional")?;
    if !(p > 1.0) {
        return Err(Error::Domain(format!("lyapunov exponent p must exceed 1 (got {p})")));
    }
    let (k, umin) = u.argmin();
    if umin < -1e-12 {
        return Err(Error::Positivity {
            cell: k,
            value: umin,
            t: f64::NAN,
        });
    }
    let mut clamped = 0;
    let mut sum = 0.0;
    for (&uk, &vk) in u.values().iter().zip(v.values()) {
        let s = if vk < eta {
            clamped += 1;
            eta
        } else {
            vk
        };
        sum += uk.max(0.0).powf(p) * phi_r(s, r, chi, eta)?;
    }
    Ok(LyapunovValue {
        value: sum * u.grid().cell_volume(),
        clamped,
    })
}
