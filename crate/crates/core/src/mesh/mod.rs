//! Discrete domain, cell-centered fields, conservative operators and the
//! Helmholtz-type solver shared by the parabolic and elliptic signal
//! equations.

mod field;
mod grid;
mod helmholtz;
mod ops;

pub use field::Field;
pub use grid::{Grid, MIN_CELLS};
pub use helmholtz::{helmholtz_solve, HelmholtzOperator};
pub use ops::{chemotaxis_divergence, grad_norm_lq, laplacian, norm_lp, w1q_norm, FluxMode};

pub(crate) use ops::for_each_face;
