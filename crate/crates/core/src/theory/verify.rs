//! Randomized property suites for the closed-form theory.
//!
//! The formulas under test are passed in through [`Formulas`], so a suite can
//! be pointed at a deliberately broken implementation to confirm it notices.
//! Oracles here (adaptive Simpson quadrature, τ-grid search, the factored
//! discriminant) share no code with the closed forms they check.

use super::*;
use crate::mesh::{norm_lp, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed used when none is given on the command line.
pub const DEFAULT_SEED: u64 = 0x006b_736c_696d_6974;

/// The implementations checked by the suites.
#[derive(Clone, Copy)]
pub struct Formulas {
    pub f_poly: fn(&ConditionParams) -> f64,
    pub f_discriminant: fn(f64, f64) -> f64,
    pub condition: fn(&ConditionParams, &ChiParams, f64) -> bool,
    pub r_value: fn(&ConditionParams, &ChiParams) -> f64,
    pub h_sign: fn(f64, &ConditionParams, &ChiParams, f64, f64) -> Result<f64>,
    pub phi_r: fn(f64, f64, &ChiParams, f64) -> Result<f64>,
    pub eta: fn(&EtaInputs) -> f64,
    pub threshold_pp: fn(u32, f64, &ChiParams, f64) -> Result<Threshold>,
    pub threshold_pe: fn(u32, &ChiParams, f64) -> Result<Threshold>,
}

impl Default for Formulas {
    fn default() -> Self {
        Formulas {
            f_poly,
            f_discriminant,
            condition: condition_ass_pp,
            r_value,
            h_sign,
            phi_r,
            eta: eta_closed_form,
            threshold_pp: threshold_chi0_pp,
            threshold_pe: threshold_chi0_pe,
        }
    }
}

/// Sample counts and seed for a suite run.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub poly_draws: usize,
    pub discriminant_draws: usize,
    pub h_sets: usize,
    pub h_grid_points: usize,
    pub phi_draws: usize,
    pub eta_draws: usize,
    pub threshold_draws: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: DEFAULT_SEED,
            poly_draws: 100_000,
            discriminant_draws: 100_000,
            h_sets: 200,
            h_grid_points: 400,
            phi_draws: 2_000,
            eta_draws: 500,
            threshold_draws: 2_000,
        }
    }
}

impl VerifyConfig {
    pub fn with_seed(seed: u64) -> Self {
        VerifyConfig {
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub checked: usize,
    /// First failing sample, formatted as `key=value` pairs.
    pub counterexample: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub outcomes: Vec<PropertyOutcome>,
    /// Informational findings that are not pass/fail properties.
    pub notes: Vec<String>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

/// Open interval sample, never returning either endpoint.
fn open(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    loop {
        let x = rng.gen_range(lo..hi);
        if x > lo {
            return x;
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Tally {
    name: &'static str,
    checked: usize,
    counterexample: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally {
            name,
            checked: 0,
            counterexample: None,
        }
    }

    fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok && self.counterexample.is_none() {
            self.counterexample = Some(describe());
        }
    }

    fn finish(self) -> PropertyOutcome {
        PropertyOutcome {
            name: self.name,
            passed: self.counterexample.is_none() && self.checked > 0,
            checked: self.checked,
            counterexample: self.counterexample,
        }
    }
}

fn poly_positive(cfg: &VerifyConfig, f: &Formulas) -> PropertyOutcome {
    let mut rng = rng_for(cfg.seed, 1);
    let mut t = Tally::new("f_poly positive");
    for _ in 0..cfg.poly_draws {
        let p = 50.0 - rng.gen_range(0.0..49.0);
        let eps = open(&mut rng, 0.0, 0.5);
        let lambda = rng.gen_range(0.0..=10.0);
        let c = ConditionParams { p, eps, lambda, n: 2 };
        let v = (f.f_poly)(&c);
        t.check(v > 0.0, || format!("p={p:e} eps={eps:e} lambda={lambda:e} f={v:e}"));
    }
    t.finish()
}

fn discriminant_negative(cfg: &VerifyConfig, f: &Formulas) -> PropertyOutcome {
    let mut rng = rng_for(cfg.seed, 2);
    let mut t = Tally::new("discriminant negative");
    for _ in 0..cfg.discriminant_draws {
        let p = 50.0 - rng.gen_range(0.0..49.0);
        let eps = open(&mut rng, 0.0, 0.5);
        let d = (f.f_discriminant)(p, eps);
        // independent route: B² − 4p² with B the linear coefficient of f_p
        let b = -2.0 * p + 4.0 * eps * p + 4.0 - 4.0 * eps;
        let expanded = b * b - 4.0 * p * p;
        let agree = (d - expanded).abs() <= 1e-10 * (b * b + 4.0 * p * p);
        t.check(d < 0.0 && agree, || {
            format!("p={p:e} eps={eps:e} D={d:e} B^2-4p^2={expanded:e}")
        });
    }
    // g(1) = 0, so D → 0⁻ linearly as p → 1⁺
    for delta in [1e-3, 1e-6, 1e-9] {
        let eps = open(&mut rng, 0.0, 0.5);
        let d = (f.f_discriminant)(1.0 + delta, eps);
        t.check(d < 0.0 && d.abs() <= 20.0 * delta, || {
            format!("p=1+{delta:e} eps={eps:e} D={d:e} (expected 0- limit)")
        });
    }
    t.finish()
}

/// Random admissible parameter set for the H-sign property.
struct HSample {
    cond: ConditionParams,
    chi: ChiParams,
    eta: f64,
}

fn sample_h_set(rng: &mut ChaCha8Rng, chi0_scale: (f64, f64)) -> HSample {
    loop {
        let p = 10.0 - rng.gen_range(0.0..9.0);
        let eps = open(rng, 0.0, 0.5);
        let lambda = 5.0 - rng.gen_range(0.0..5.0);
        let k = 4.0 - rng.gen_range(0.0..3.0);
        let a = rng.gen_range(0.0..3.0);
        let eta = rng.gen_range(0.0..2.0);
        if a + eta < 0.05 {
            continue;
        }
        let cond = ConditionParams { p, eps, lambda, n: 2 };
        let chi0 = rng.gen_range(chi0_scale.0..chi0_scale.1) * condition_chi0_max(&cond, k, a, eta);
        let chi = ChiParams { chi0, a, k };
        return HSample { cond, chi, eta };
    }
}

fn h_nonpositive(cfg: &VerifyConfig, f: &Formulas) -> PropertyOutcome {
    let mut rng = rng_for(cfg.seed, 3);
    let mut t = Tally::new("H sign nonpositive");
    let m = cfg.h_grid_points.max(2);
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < cfg.h_sets && attempts < 100 * cfg.h_sets {
        attempts += 1;
        let HSample { cond, chi, eta } = sample_h_set(&mut rng, (0.01, 2.0));
        if !(f.condition)(&cond, &chi, eta) {
            continue;
        }
        accepted += 1;
        let r = (f.r_value)(&cond, &chi);
        for i in 0..m {
            // s = η, then η + 10^e for e on [−6, 4]
            let s = if i == 0 {
                eta
            } else {
                eta + 10f64.powf(-6.0 + 10.0 * (i - 1) as f64 / (m - 2).max(1) as f64)
            };
            let h = (f.h_sign)(s, &cond, &chi, eta, r);
            let ok = matches!(h, Ok(v) if v <= 1e-12);
            t.check(ok, || {
                format!(
                    "p={:e} eps={:e} lambda={:e} chi0={:e} a={:e} k={:e} eta={eta:e} r={r:e} s={s:e} H={h:?}",
                    cond.p, cond.eps, cond.lambda, chi.chi0, chi.a, chi.k
                )
            });
        }
    }
    if accepted < cfg.h_sets {
        t.check(false, || {
            format!("only {accepted} admissible sets found in {attempts} attempts")
        });
    }
    t.finish()
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    // scale the absolute tolerance by a coarse magnitude estimate
    let scale = whole
        .abs()
        .max(((b - a) * fa.abs().max(fb.abs())).min(whole.abs() * 1e3));
    recurse(f, a, b, fa, fm, fb, whole, rel_tol * scale.max(f64::MIN_POSITIVE), 60)
}

fn phi_quadrature(cfg: &VerifyConfig, f: &Formulas) -> PropertyOutcome {
    let mut rng = rng_for(cfg.seed, 4);
    let mut t = Tally::new("phi_r closed form vs quadrature");
    let mut drawn = 0;
    while drawn < cfg.phi_draws {
        let k = 4.0 - rng.gen_range(0.0..3.0);
        let a = rng.gen_range(0.0..3.0);
        let eta = rng.gen_range(0.0..2.0);
        if a + eta < 0.1 {
            continue;
        }
        drawn += 1;
        let r = rng.gen_range(0.0..5.0);
        let s = eta + 10f64.powf(rng.gen_range(-4.0..2.0));
        let chi = ChiParams { chi0: 1.0, a, k };
        let integrand = |x: f64| (a + x).powf(-k);
        // compare exponents: φ itself can underflow far below any useful tolerance
        let exponent = r * adaptive_simpson(&integrand, eta, s, 1e-13);
        let got = (f.phi_r)(s, r, &chi, eta);
        let underflow = -f64::from_bits(1).ln();
        let ok = match got {
            Ok(v) if v > 0.0 => (v.ln() + exponent).abs() <= 1e-10 * exponent.max(1.0),
            Ok(v) => v == 0.0 && exponent * (1.0 + 1e-10) >= underflow,
            Err(_) => false,
        };
        t.check(ok, || {
            format!(
                "k={k:e} a={a:e} eta={eta:e} r={r:e} s={s:e} phi={got:?} quadrature={:e}",
                (-exponent).exp()
            )
        });
    }
    t.finish()
}

fn phi_sandwich(cfg: &VerifyConfig, f: &Formulas) -> PropertyOutcome {
    let mut rng = rng_for(cfg.seed, 5);
    let mut t = Tally::new("phi_r sandwich, monotonicity and Lyapunov bounds");
    let grid = Grid::line(1.0, 32).expect("valid grid");
    for _ in 0..cfg.phi_draws / 4 {
        let k = 4.0 - rng.gen_range(0.0..3.0);
        let a = rng.gen_range(0.0..3.0);
        let eta = rng.gen_range(0.0..2.0);
        if a + eta < 0.05 {
            continue;
        }
        let r = rng.gen_range(0.0..5.0);
        let chi = ChiParams { chi0: 1.0, a, k };
        let floor = phi_r_floor(r, &chi, eta);
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let s = eta
                + if i == 0 {
                    0.0
                } else {
                    10f64.powf(-3.0 + 7.0 * i as f64 / 49.0)
                };
            let phi = (f.phi_r)(s, r, &chi, eta);
            let ok = matches!(phi, Ok(v) if v <= 1.0 && v >= floor * (1.0 - 1e-12) && v <= prev);
            t.check(ok, || {
                format!("k={k:e} a={a:e} eta={eta:e} r={r:e} s={s:e} phi={phi:?} floor={floor:e} prev={prev:e}")
            });
            if let Ok(v) = phi {
                prev = v;
            }
        }
        let p = 5.0 - rng.gen_range(0.0..4.0);
        let u = Field::new(grid, (0..grid.len()).map(|_| rng.gen_range(0.0..3.0)).collect()).expect("sized");
        let v = Field::new(grid, (0..grid.len()).map(|_| eta + rng.gen_range(0.0..10.0)).collect()).expect("sized");
        let upper = norm_lp(&u, p).expect("finite").powf(p);
        let lv = lyapunov_functional(&u, &v, p, r, &chi, eta).map(|l| l.value);
        let ok = matches!(lv, Ok(x) if x <= upper * (1.0 + 1e-12) && x >= floor * upper * (1.0 - 1e-12));
        t.check(ok, || format!("lyapunov={lv:?} floor={floor:e} norm_p^p={upper:e}"));
    }
    t.finish()
}

/// Brute-force `sup_τ min{V e^{−2τ}, cm(1 − e^{−τ})}` by successive grid zooms.
pub fn eta_tau_grid(vmin: f64, cm: f64) -> f64 {
    let objective = |tau: f64| (vmin * (-2.0 * tau).exp()).min(cm * (1.0 - (-tau).exp()));
    let (mut lo, mut hi) = (0.0f64, 60.0f64);
    let pts = 2001;
    let mut best = 0.0;
    for _ in 0..12 {
        let step = (hi - lo) / (pts - 1) as f64;
        let mut arg = lo;
        best = f64::NEG_INFINITY;
        for i in 0..pts {
            let tau = lo + step * i as f64;
            let val = objective(tau);
            if val > best {
                best = val;
                arg = tau;
            }
        }
        lo = (arg - step).max(0.0);
        hi = arg + step;
        if hi - lo < 1e-14 {
            break;
        }
    }
    best
}

fn eta_vs_grid(cfg: &VerifyConfig, f: &Formulas) -> PropertyOutcome {
    let mut rng = rng_for(cfg.seed, 6);
    let mut t = Tally::new("eta closed form vs tau-grid");
    for _ in 0..cfg.eta_draws {
        let vmin = 10f64.powf(rng.gen_range(-2.0..2.0));
        let c0 = 10f64.powf(rng.gen_range(-2.0..0.0));
        let mass = 10f64.powf(rng.gen_range(-1.0..2.0));
        let eta = (f.eta)(&EtaInputs { c0, mass, vmin });
        let oracle = eta_tau_grid(vmin, c0 * mass);
        t.check((eta - oracle).abs() <= 1e-6 * oracle.max(1e-3), || {
            format!("vmin={vmin:e} c0={c0:e} mass={mass:e} eta={eta:e} grid={oracle:e}")
        });
    }
    t.finish()
}

fn threshold_equality(cfg: &VerifyConfig, f: &Formulas) -> PropertyOutcome {
    let mut rng = rng_for(cfg.seed, 7);
    let mut t = Tally::new("threshold_pp(lambda=0) == threshold_pe");
    for _ in 0..cfg.threshold_draws {
        let n = rng.gen_range(1..=10u32);
        let k = 6.0 - rng.gen_range(0.0..5.0);
        let a = rng.gen_range(0.0..5.0);
        let eta = rng.gen_range(0.0..5.0);
        let chi = ChiParams { chi0: 1.0, a, k };
        let pp = (f.threshold_pp)(n, 0.0, &chi, eta).map(|t| t.value);
        let pe = (f.threshold_pe)(n, &chi, eta).map(|t| t.value);
        let ok = matches!((&pp, &pe), (Ok(x), Ok(y)) if x.to_bits() == y.to_bits());
        t.check(ok, || format!("n={n} k={k:e} a={a:e} eta={eta:e} pp={pp:?} pe={pe:?}"));
    }
    t.finish()
}

/// How often the exponent-`k` reading of the condition admits a parameter
/// set whose `H_{r,ε}(η)` is positive.
fn exponent_note(cfg: &VerifyConfig) -> String {
    let mut rng = rng_for(cfg.seed, 8);
    let (mut admitted, mut positive) = (0usize, 0usize);
    let mut example = None;
    for _ in 0..cfg.h_sets * 10 {
        let HSample { cond, chi, eta } = sample_h_set(&mut rng, (0.01, 4.0));
        if !condition_ass_pp_exponent_k(&cond, &chi, eta) {
            continue;
        }
        admitted += 1;
        let r = r_value(&cond, &chi);
        if let Ok(h) = h_sign(eta, &cond, &chi, eta, r) {
            if h > 1e-12 {
                positive += 1;
                example.get_or_insert(format!(
                    "p={:.3} eps={:.3} lambda={:.3} chi0={:.3} a={:.3} k={:.3} eta={:.3} H(eta)={h:.3e}",
                    cond.p, cond.eps, cond.lambda, chi.chi0, chi.a, chi.k, eta
                ));
            }
        }
    }
    let mut note = format!(
        "exponent consistency: thresholds carry (a+eta)^(k-1); the exponent-k reading of the \
         weighted-energy condition admitted {admitted} sampled sets, of which {positive} have H(eta) > 0"
    );
    if let Some(e) = example {
        note.push_str(&format!(" (e.g. {e})"));
    }
    note
}

/// Runs every property suite.
pub fn run_suite(cfg: &VerifyConfig, f: &Formulas) -> VerifyReport {
    let outcomes = vec![
        poly_positive(cfg, f),
        discriminant_negative(cfg, f),
        h_nonpositive(cfg, f),
        phi_quadrature(cfg, f),
        phi_sandwich(cfg, f),
        eta_vs_grid(cfg, f),
        threshold_equality(cfg, f),
    ];
    VerifyReport {
        outcomes,
        notes: vec![exponent_note(cfg)],
    }
}
