//! Dense linear algebra, special functions and seedable sampling.

mod bessel;
mod linalg;
mod matrix;
mod rng;

pub use bessel::bessel_k;
pub use linalg::{cholesky_psd, cholesky_solve, inv_sqrt_psd, polar, svd, sym_eigen, Svd};
pub use matrix::{dot, mean_sd, Matrix};
pub use rng::{sample_gamma, stream_id, RngStream};
