//! Conjugate gradients with diagonal (Jacobi) preconditioning for the SPD
//! stiffness-plus-potential form.

use crate::error::{Result, SmsError};

use super::csr::CsrMatrix;
use super::{axpy, dot, norm2};

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    /// Relative residual target: ||b - A x|| <= tol * ||b||.
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub iterations: usize,
    /// Final relative residual.
    pub residual: f64,
}

/// Solves A x = b for SPD A. `x0` seeds the iteration when given.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: CgOptions,
) -> Result<(Vec<f64>, CgOutcome)> {
    let n = a.dim();
    if b.len() != n {
        return Err(SmsError::Contract(format!(
            "rhs length {} does not match matrix dimension {n}",
            b.len()
        )));
    }
    let norm_b = norm2(b);
    if norm_b == 0.0 {
        return Ok((
            vec![0.0; n],
            CgOutcome {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| {
            debug_assert!(d > 0.0, "SPD matrix must have positive diagonal");
            1.0 / d
        })
        .collect();

    let mut x = match x0 {
        Some(s) if s.len() == n => s.to_vec(),
        _ => vec![0.0; n],
    };
    let mut r = b.to_vec();
    if x0.is_some() {
        let ax = a.apply(&x);
        for i in 0..n {
            r[i] -= ax[i];
        }
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = norm2(&r) / norm_b;
    for iter in 0..opts.max_iter {
        if res <= opts.tol {
            return Ok((
                x,
                CgOutcome {
                    iterations: iter,
                    residual: res,
                },
            ));
        }
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(SmsError::Solver {
                context: "conjugate gradients met a non-positive curvature direction".into(),
                residual: res,
                iterations: iter,
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        res = norm2(&r) / norm_b;
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res <= opts.tol {
        Ok((
            x,
            CgOutcome {
                iterations: opts.max_iter,
                residual: res,
            },
        ))
    } else {
        Err(SmsError::Solver {
            context: "conjugate gradients did not reach the residual target".into(),
            residual: res,
            iterations: opts.max_iter,
        })
    }
}
