//! Self-contained linear-algebra kernels sized for stencil matrices:
//! compressed sparse rows, a preconditioned conjugate-gradient solver, a
//! banded LU with partial pivoting for the (possibly indefinite) Newton
//! systems, and a cyclic Jacobi eigensolver for the small dense blocks of
//! Rayleigh-Ritz steps.

mod banded;
mod cg;
mod csr;
mod small_sym;

pub use banded::BandedLu;
pub use cg::{pcg, CgOptions, CgOutcome};
pub use csr::CsrMatrix;
pub use small_sym::sym_eigen;

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// y += c * x
pub fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}
