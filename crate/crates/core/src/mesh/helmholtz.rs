use super::field::dot;
use super::ops::laplacian_into;
use super::{Field, Grid};
use crate::error::{Error, Result};

/// The operator `alpha·I − Δ_h` with homogeneous Neumann conditions.
///
/// Symmetric positive definite for `alpha > 0`; applied to a constant it
/// returns `alpha` times that constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelmholtzOperator {
    grid: Grid,
    alpha: f64,
}

impl HelmholtzOperator {
    pub fn new(grid: Grid, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::Contract(format!(
                "helmholtz mass coefficient must be finite and >= 0 (got {alpha})"
            )));
        }
        Ok(HelmholtzOperator { grid, alpha })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Iteration cap of the 2D solver: ten sweeps per unknown.
    pub fn iteration_cap(&self) -> usize {
        10 * self.grid.len()
    }

    pub fn apply(&self, w: &Field) -> Result<Field> {
        self.grid.check_same(w.grid(), "helmholtz apply")?;
        let mut out = vec![0.0; self.grid.len()];
        self.apply_into(w.values(), &mut out);
        Field::new(self.grid, out)
    }

    fn apply_into(&self, w: &[f64], out: &mut [f64]) {
        laplacian_into(&self.grid, w, out);
        for (o, &x) in out.iter_mut().zip(w) {
            *o = self.alpha * x - *o;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let g = &self.grid;
        let (ix2, iy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
        (0..g.len())
            .map(|k| {
                let (i, j) = g.coords(k);
                let nbx = (i > 0) as u8 + (i + 1 < g.nx()) as u8;
                let nby = (j > 0) as u8 + (j + 1 < g.ny()) as u8;
                self.alpha + nbx as f64 * ix2 + nby as f64 * iy2
            })
            .collect()
    }

    /// Relative residual `‖(αI − Δ_h)w − rhs‖₂ / ‖rhs‖₂` (absolute if rhs = 0).
    pub fn relative_residual(&self, w: &Field, rhs: &Field) -> Result<f64> {
        let aw = self.apply(w)?;
        let r = aw.sub(rhs)?;
        let rn = r.dot(&r)?.sqrt();
        let bn = rhs.dot(rhs)?.sqrt();
        Ok(if bn > 0.0 { rn / bn } else { rn })
    }

    /// Solves `(αI − Δ_h) w = rhs` to relative residual `tol`.
    ///
    /// 1D grids use direct tridiagonal elimination; 2D grids use
    /// Jacobi-preconditioned conjugate gradients starting from zero.
    pub fn solve(&self, rhs: &Field, tol: f64) -> Result<Field> {
        self.solve_from(rhs, None, tol)
    }

    /// As [`solve`](Self::solve), with an optional starting iterate for the
    /// iterative path (ignored in 1D).
    pub fn solve_from(&self, rhs: &Field, guess: Option<&Field>, tol: f64) -> Result<Field> {
        self.grid.check_same(rhs.grid(), "helmholtz solve")?;
        rhs.require_finite("helmholtz rhs")?;
        if !(self.alpha > 0.0) {
            return Err(Error::Contract("helmholtz solve requires alpha > 0".into()));
        }
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::Contract(format!(
                "solver tolerance must be positive (got {tol})"
            )));
        }
        let values = if self.grid.dim() == 1 {
            self.solve_tridiagonal(rhs.values())
        } else {
            if let Some(g) = guess {
                self.grid.check_same(g.grid(), "helmholtz guess")?;
            }
            self.solve_pcg(rhs.values(), guess.map(|g| g.values()), tol)?
        };
        Field::new(self.grid, values)
    }

    fn solve_tridiagonal(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let off = -1.0 / (self.grid.hx() * self.grid.hx());
        let diag = self.diagonal();
        // forward elimination (Thomas), c' and d' in place
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        cp[0] = off / diag[0];
        dp[0] = rhs[0] / diag[0];
        for i in 1..n {
            let m = diag[i] - off * cp[i - 1];
            cp[i] = if i + 1 < n { off / m } else { 0.0 };
            dp[i] = (rhs[i] - off * dp[i - 1]) / m;
        }
        let mut x = dp;
        for i in (0..n - 1).rev() {
            x[i] -= cp[i] * x[i + 1];
        }
        x
    }

    fn solve_pcg(&self, b: &[f64], guess: Option<&[f64]>, tol: f64) -> Result<Vec<f64>> {
        let n = b.len();
        let bnorm = dot(b, b).sqrt();
        if bnorm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let target = tol * bnorm;
        let inv_diag: Vec<f64> = self.diagonal().iter().map(|d| 1.0 / d).collect();
        let cap = self.iteration_cap();

        let mut x = guess.map_or_else(|| vec![0.0; n], |g| g.to_vec());
        let mut r = vec![0.0; n];
        let mut ap = vec![0.0; n];
        let mut iterations = 0;

        // outer loop restarts from the true residual if the recurrence drifted
        loop {
            self.apply_into(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            let mut rnorm = dot(&r, &r).sqrt();
            if rnorm <= target {
                return Ok(x);
            }
            let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
            let mut p = z.clone();
            let mut rz = dot(&r, &z);
            while rnorm > target {
                if iterations >= cap {
                    return Err(Error::SolverDivergence {
                        iterations,
                        residual: rnorm / bnorm,
                    });
                }
                iterations += 1;
                self.apply_into(&p, &mut ap);
                let step = rz / dot(&p, &ap);
                for i in 0..n {
                    x[i] += step * p[i];
                    r[i] -= step * ap[i];
                }
                for i in 0..n {
                    z[i] = r[i] * inv_diag[i];
                }
                let rz_next = dot(&r, &z);
                let beta = rz_next / rz;
                rz = rz_next;
                for i in 0..n {
                    p[i] = z[i] + beta * p[i];
                }
                rnorm = dot(&r, &r).sqrt();
            }
        }
    }
}

/// Solves `(alpha·I − Δ_h) w = rhs`.
pub fn helmholtz_solve(op: &HelmholtzOperator, rhs: &Field, tol: f64) -> Result<Field> {
    op.solve(rhs, tol)
}
