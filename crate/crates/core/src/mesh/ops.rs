//! Conservative spatial operators and discrete norms.
//!
//! Every operator is written in face-flux form: a flux is computed once per
//! interior face and added to one neighbour and subtracted from the other.
//! Boundary faces carry no flux (mirror ghost cells), so the volume-weighted
//! sum of every returned divergence vanishes up to round-off.

use super::{Field, Grid};
use crate::error::{Error, Result};
use crate::theory::Sensitivity;

/// Face interpolation of `u χ(v)` in the chemotactic flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluxMode {
    /// Arithmetic mean of the two adjacent cells (second order).
    #[default]
    Centered,
    /// Value of the upstream cell with respect to the drift `χ(v)∇v`.
    Upwind,
}

impl FluxMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FluxMode::Centered => "centered",
            FluxMode::Upwind => "upwind",
        }
    }
}

impl std::str::FromStr for FluxMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centered" => Ok(FluxMode::Centered),
            "upwind" => Ok(FluxMode::Upwind),
            other => Err(Error::config(
                "time.flux",
                format!("expected \"centered\" or \"upwind\" (got \"{other}\")"),
            )),
        }
    }
}

/// Calls `visit(left, right, h)` for every interior face, x-faces first.
#[inline]
pub(crate) fn for_each_face(g: &Grid, mut visit: impl FnMut(usize, usize, f64)) {
    let (nx, ny) = (g.nx(), g.ny());
    for j in 0..ny {
        let row = j * nx;
        for i in 0..nx - 1 {
            visit(row + i, row + i + 1, g.hx());
        }
    }
    if g.dim() == 2 {
        for j in 0..ny - 1 {
            for i in 0..nx {
                let k = j * nx + i;
                visit(k, k + nx, g.hy());
            }
        }
    }
}

/// Raw-slice Laplacian shared with the linear solvers.
pub(crate) fn laplacian_into(g: &Grid, f: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for_each_face(g, |l, r, h| {
        let flux = (f[r] - f[l]) / (h * h);
        out[l] += flux;
        out[r] -= flux;
    });
}

/// Second-order central Laplacian with homogeneous Neumann conditions.
pub fn laplacian(g: &Grid, f: &Field) -> Result<Field> {
    g.check_same(f.grid(), "laplacian")?;
    let mut out = vec![0.0; g.len()];
    laplacian_into(g, f.values(), &mut out);
    Field::new(*g, out)
}

/// `∇·(u χ(v) ∇v)` in conservative face-flux form.
///
/// The flux across a face is the face value of `u χ(v)` times the central
/// difference of `v`; boundary faces carry zero flux.
pub fn chemotaxis_divergence<S: Sensitivity + ?Sized>(
    g: &Grid,
    u: &Field,
    v: &Field,
    chi: &S,
    mode: FluxMode,
) -> Result<Field> {
    g.check_same(u.grid(), "chemotaxis_divergence (u)")?;
    g.check_same(v.grid(), "chemotaxis_divergence (v)")?;
    u.require_finite("chemotaxis_divergence (u)")?;
    v.require_finite("chemotaxis_divergence (v)")?;
    let pole = chi.envelope().a + v.min();
    if pole <= 0.0 {
        return Err(Error::SingularSensitivity(pole));
    }

    let (uv, vv) = (u.values(), v.values());
    let weight: Vec<f64> = uv.iter().zip(vv).map(|(&u, &v)| u * chi.chi(v)).collect();
    let mut out = vec![0.0; g.len()];
    for_each_face(g, |l, r, h| {
        let dv = (vv[r] - vv[l]) / h;
        let w = match mode {
            FluxMode::Centered => 0.5 * (weight[l] + weight[r]),
            FluxMode::Upwind => {
                if dv >= 0.0 {
                    weight[l]
                } else {
                    weight[r]
                }
            }
        };
        let flux = w * dv / h;
        out[l] += flux;
        out[r] -= flux;
    });
    Field::new(*g, out)
}

/// `‖f‖_{L^p(Ω)}`; pass `f64::INFINITY` for the max norm.
pub fn norm_lp(f: &Field, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Contract(format!("norm_lp requires p >= 1 (got {p})")));
    }
    f.require_finite("norm_lp")?;
    let vals = f.values();
    if p.is_infinite() {
        return Ok(vals.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
    }
    let vol = f.grid().cell_volume();
    let sum: f64 = if p == 1.0 {
        vals.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        vals.iter().map(|v| v * v).sum()
    } else {
        vals.iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((sum * vol).powf(1.0 / p))
}

/// Discrete `‖∇f‖_{L^q}` from face differences.
///
/// Each interior face contributes `|Δf/h|^q` with weight equal to the cell
/// volume; in 2D the x- and y-face families are summed, which is the
/// discrete `∫ |∂ₓf|^q + |∂ᵧf|^q`.
pub fn grad_norm_lq(g: &Grid, f: &Field, q: f64) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::Contract(format!("grad_norm_lq requires q >= 1 (got {q})")));
    }
    g.check_same(f.grid(), "grad_norm_lq")?;
    f.require_finite("grad_norm_lq")?;
    let vals = f.values();
    if q.is_infinite() {
        let mut m: f64 = 0.0;
        for_each_face(g, |l, r, h| m = m.max(((vals[r] - vals[l]) / h).abs()));
        return Ok(m);
    }
    let mut sum = 0.0;
    for_each_face(g, |l, r, h| sum += ((vals[r] - vals[l]) / h).abs().powf(q));
    Ok((sum * g.cell_volume()).powf(1.0 / q))
}

/// `‖f‖_{L^q} + ‖∇f‖_{L^q}`, the discrete W^{1,q} norm.
pub fn w1q_norm(g: &Grid, f: &Field, q: f64) -> Result<f64> {
    Ok(norm_lp(f, q)? + grad_norm_lq(g, f, q)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::ChiParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(g: Grid, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Field {
        Field::new(g, (0..g.len()).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        for g in [Grid::line(2.0, 17).unwrap(), Grid::rect(1.0, 3.0, 9, 12).unwrap()] {
            let lap = laplacian(&g, &Field::constant(g, 4.2)).unwrap();
            assert!(lap.values().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn laplacian_cosine_second_order() {
        let l = 1.0;
        let mut errs = Vec::new();
        for n in [64, 128, 256] {
            let g = Grid::line(l, n).unwrap();
            let f = Field::from_fn(g, |x| (PI * x[0] / l).cos());
            let lap = laplacian(&g, &f).unwrap();
            let err = f
                .values()
                .iter()
                .zip(lap.values())
                .map(|(fv, lv)| (lv + (PI / l).powi(2) * fv).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn laplacian_is_conservative() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for g in [Grid::line(1.0, 100).unwrap(), Grid::rect(2.0, 1.0, 20, 13).unwrap()] {
            let f = random_field(g, &mut rng, -1.0, 1.0);
            let lap = laplacian(&g, &f).unwrap();
            let mut total = 0.0;
            let scale = lap.values().iter().map(|x| x.abs()).sum::<f64>();
            for k in 0..g.len() {
                total += lap.values()[k] * g.cell_volume();
            }
            assert!(total.abs() <= 1e-12 * scale * g.cell_volume(), "{total}");
        }
    }

    #[test]
    fn laplacian_rejects_foreign_field() {
        let g = Grid::line(1.0, 8).unwrap();
        let other = Grid::line(1.0, 16).unwrap();
        assert!(matches!(laplacian(&g, &Field::zeros(other)), Err(Error::Contract(_))));
    }

    #[test]
    fn divergence_vanishes_for_flat_v_or_zero_u() {
        let chi = ChiParams::new(2.0, 1.0, 2.0).unwrap();
        let g = Grid::rect(1.0, 1.0, 8, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_field(g, &mut rng, 0.0, 2.0);
        let v = random_field(g, &mut rng, 0.0, 2.0);
        for mode in [FluxMode::Centered, FluxMode::Upwind] {
            let d = chemotaxis_divergence(&g, &u, &Field::constant(g, 0.7), &chi, mode).unwrap();
            assert!(d.values().iter().all(|&x| x == 0.0));
            let d = chemotaxis_divergence(&g, &Field::zeros(g), &v, &chi, mode).unwrap();
            assert!(d.values().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn divergence_is_conservative() {
        let chi = ChiParams::new(3.0, 0.5, 1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for g in [Grid::line(1.0, 64).unwrap(), Grid::rect(1.0, 2.0, 16, 24).unwrap()] {
            let u = random_field(g, &mut rng, 0.0, 5.0);
            let v = random_field(g, &mut rng, 0.0, 5.0);
            for mode in [FluxMode::Centered, FluxMode::Upwind] {
                let d = chemotaxis_divergence(&g, &u, &v, &chi, mode).unwrap();
                let scale: f64 = d.values().iter().map(|x| x.abs()).sum();
                let mut total = 0.0;
                for x in d.values() {
                    total += x * g.cell_volume();
                }
                assert!(total.abs() <= 1e-12 * scale * g.cell_volume());
            }
        }
    }

    #[test]
    fn divergence_matches_hand_computed_1d_fluxes() {
        let chi = ChiParams::new(1.0, 1.0, 2.0).unwrap();
        let g = Grid::line(4.0, 4).unwrap();
        let u = Field::new(g, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let v = Field::new(g, vec![0.0, 1.0, 1.0, 3.0]).unwrap();
        let d = chemotaxis_divergence(&g, &u, &v, &chi, FluxMode::Centered).unwrap();
        // uχ(v): 1, 0.5, 0.75, 0.25; face fluxes: 0.75, 0, 1.0
        let expected = [0.75, -0.75, 1.0, -1.0];
        for (a, b) in d.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let d = chemotaxis_divergence(&g, &u, &v, &chi, FluxMode::Upwind).unwrap();
        // upwind weights: face0 from cell0 (1), face2 from cell2 (0.75)
        let expected = [1.0, -1.0, 1.5, -1.5];
        for (a, b) in d.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn divergence_rejects_pole() {
        let chi = ChiParams::new(1.0, 0.0, 2.0).unwrap();
        let g = Grid::line(1.0, 8).unwrap();
        let u = Field::constant(g, 1.0);
        let v = Field::from_fn(g, |x| x[0] - 0.0625);
        assert!(matches!(
            chemotaxis_divergence(&g, &u, &v, &chi, FluxMode::Centered),
            Err(Error::SingularSensitivity(_))
        ));
    }

    #[test]
    fn norms_of_constant() {
        let g = Grid::rect(1.0, 1.0, 8, 8).unwrap();
        let f = Field::constant(g, 2.0);
        assert!((norm_lp(&f, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(norm_lp(&f, f64::INFINITY).unwrap(), 2.0);
        assert!(norm_lp(&f, 0.5).is_err());
        assert_eq!(grad_norm_lq(&g, &f, 3.0).unwrap(), 0.0);
        assert!(grad_norm_lq(&g, &f, 0.9).is_err());
    }

    #[test]
    fn norm_lp_matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Grid::rect(2.0, 0.5, 10, 6).unwrap();
        let f = random_field(g, &mut rng, -3.0, 3.0);
        for p in [1.0, 2.0, 3.5] {
            let mut acc = 0.0;
            for j in 0..g.ny() {
                for i in 0..g.nx() {
                    acc += f.values()[g.index(i, j)].abs().powf(p) * g.hx() * g.hy();
                }
            }
            let oracle = acc.powf(1.0 / p);
            assert!((norm_lp(&f, p).unwrap() - oracle).abs() <= 1e-13 * oracle);
        }
    }

    #[test]
    fn grad_norm_of_ramp() {
        let (l, n, s) = (2.0, 200, -1.5);
        let g = Grid::line(l, n).unwrap();
        let f = Field::from_fn(g, |x| s * x[0]);
        for q in [1.0, 2.0, 3.0] {
            // n - 1 interior faces, each |s|^q h
            let oracle = s.abs() * ((n - 1) as f64 * g.hx()).powf(1.0 / q);
            let got = grad_norm_lq(&g, &f, q).unwrap();
            assert!((got - oracle).abs() < 1e-12 * oracle);
            assert!((got - s.abs() * l.powf(1.0 / q)).abs() < 0.01 * oracle);
        }
    }

    #[test]
    fn grad_norm_matches_face_loop_2d() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Grid::rect(1.0, 1.5, 7, 9).unwrap();
        let f = random_field(g, &mut rng, 0.0, 1.0);
        let q = 2.5;
        let v = f.values();
        let mut acc = 0.0;
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                if i + 1 < g.nx() {
                    let d = (v[g.index(i + 1, j)] - v[g.index(i, j)]) / g.hx();
                    acc += d.abs().powf(q) * g.cell_volume();
                }
                if j + 1 < g.ny() {
                    let d = (v[g.index(i, j + 1)] - v[g.index(i, j)]) / g.hy();
                    acc += d.abs().powf(q) * g.cell_volume();
                }
            }
        }
        let oracle = acc.powf(1.0 / q);
        assert!((grad_norm_lq(&g, &f, q).unwrap() - oracle).abs() < 1e-13 * oracle);
    }
}
