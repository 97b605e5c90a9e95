use crate::error::{Error, Result};
use crate::mesh::{Field, Grid, HelmholtzOperator};
use rayon::prelude::*;

/// Lower bound for the discrete Neumann kernel of `w_t = Δw − w` at `t*`.
#[derive(Debug, Clone, PartialEq)]
pub struct C0Estimate {
    pub grid: Grid,
    pub t_star: f64,
    /// Source cells, in probe order.
    pub probes: Vec<usize>,
    /// `min_x w(x, t*)` for a unit-mass source in each probe cell.
    pub minima: Vec<f64>,
    pub c0: f64,
    pub steps: usize,
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let (mut x, mut f) = (0.0, 1.0 / base as f64);
    while i > 0 {
        x += (i % base) as f64 * f;
        i /= base;
        f /= base as f64;
    }
    x
}

/// The first `count` source cells: corners, the center, edge midpoints, then
/// a low-discrepancy fill. Every prefix is itself a valid probe set, so a
/// larger `count` always contains a smaller one.
pub fn probe_cells(g: &Grid, count: usize) -> Vec<usize> {
    let count = count.min(g.len());
    let (nx, ny) = (g.nx(), g.ny());
    let (mx, my) = (nx / 2, ny / 2);
    let fixed: Vec<usize> = if g.dim() == 1 {
        vec![0, nx - 1, mx]
    } else {
        vec![
            g.index(0, 0),
            g.index(nx - 1, 0),
            g.index(0, ny - 1),
            g.index(nx - 1, ny - 1),
            g.index(mx, my),
            g.index(mx, 0),
            g.index(mx, ny - 1),
            g.index(0, my),
            g.index(nx - 1, my),
        ]
    };
    let mut seen = vec![false; g.len()];
    let mut out = Vec::with_capacity(count);
    let mut push = |k: usize, out: &mut Vec<usize>| {
        if out.len() < count && !seen[k] {
            seen[k] = true;
            out.push(k);
        }
    };
    for k in fixed {
        push(k, &mut out);
    }
    let ext = [g.extents()[0], g.extents().get(1).copied().unwrap_or(1.0)];
    let mut i = 1;
    while out.len() < count && i < 64 * g.len() {
        let x = [radical_inverse(i, 2) * ext[0], radical_inverse(i, 3) * ext[1]];
        push(g.locate(x), &mut out);
        i += 1;
    }
    for k in 0..g.len() {
        push(k, &mut out);
    }
    out
}

/// Evolves a unit-mass discrete delta in each probe cell to `t_star` and
/// takes the smallest kernel value seen.
///
/// The decay term is factored out exactly: implicit Euler advances the pure
/// diffusion `z_t = Δz`, and `w = e^{−t*} z`, so `∫w(t*) = e^{−t*}` holds to
/// round-off.
pub fn estimate_c0(g: &Grid, t_star: f64, probes: usize) -> Result<C0Estimate> {
    if !(t_star.is_finite() && t_star > 0.0) {
        return Err(Error::Precondition(format!("t_star must be positive (got {t_star})")));
    }
    if probes == 0 {
        return Err(Error::Precondition("at least one probe is required".into()));
    }
    let steps = ((t_star / 1e-3).ceil() as usize).clamp(20, 2000);
    let dt = t_star / steps as f64;
    let op = HelmholtzOperator::new(*g, 1.0 / dt)?;
    let decay = (-t_star).exp();
    let cells = probe_cells(g, probes);

    let minima = cells
        .par_iter()
        .map(|&cell| {
            let mut z = Field::zeros(*g);
            z.values_mut()[cell] = 1.0 / g.cell_volume();
            for _ in 0..steps {
                let mut rhs = z;
                rhs.values_mut().iter_mut().for_each(|x| *x /= dt);
                z = op.solve(&rhs, 1e-12)?;
            }
            Ok(decay * z.min())
        })
        .collect::<Result<Vec<f64>>>()?;

    let c0 = minima.iter().copied().fold(f64::INFINITY, f64::min);
    if !(c0 > 0.0) {
        return Err(Error::Internal(format!("kernel minimum {c0} is not positive")));
    }
    Ok(C0Estimate {
        grid: *g,
        t_star,
        probes: cells,
        minima,
        c0,
        steps,
    })
}
