//! The two bilinear forms of the discrete problem: A realizes the
//! gradient-plus-potential inner product, M the (lumped) mass form. A is the
//! standard (2d+1)-point Dirichlet stiffness with edge coefficients averaged
//! from the inverse metric weight, plus the potential times the quadrature
//! weights; both forms are assembled once and never mutated.
//!
//! The compact inverse is exposed as `apply_resolvent`: solve A w = M h by
//! diagonally preconditioned conjugate gradients. That weak identity
//! <w, phi> = <h, phi>_L2 is the operative definition of the inverse used by
//! the gradient formula, so every descent direction downstream inherits the
//! solver tolerance configured here.

use crate::error::{Result, SmsError};
use crate::grid::{Field, Mesh};
use crate::linalg::{pcg, CgOptions, CgOutcome, CsrMatrix};

#[derive(Debug, Clone)]
pub struct FormPair {
    a: CsrMatrix,
    m: Vec<f64>,
    /// Relative residual target for resolvent solves.
    pub tol_cg: f64,
    /// Iteration cap for resolvent solves.
    pub max_iter: usize,
    min_potential: f64,
    bandwidth: usize,
}

pub const DEFAULT_CG_TOL: f64 = 1e-10;

/// Builds the stiffness-plus-potential form A and the diagonal mass form M.
pub fn assemble(mesh: &Mesh, potential: &Field) -> Result<FormPair> {
    if potential.len() != mesh.len() {
        return Err(SmsError::Contract(format!(
            "potential length {} does not match mesh size {}",
            potential.len(),
            mesh.len()
        )));
    }
    let min_v = potential.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_v > 0.0) {
        return Err(SmsError::Hypothesis(format!(
            "potential must be strictly positive, min = {min_v}"
        )));
    }
    let d = mesh.dimension();
    let n = mesh.nodes_per_axis();
    let h = mesh.spacing();
    let edge_scale = h.powi(d as i32 - 2);
    let weights = mesh.weights();

    // Gradient coefficient: inverse metric squared times the volume factor,
    // i.e. 1/mu; averaged over the two edge endpoints (boundary endpoints are
    // real points of the closed box, so the metric is evaluated there too).
    let gamma_at = |x: &[f64]| 1.0 / mesh.metric_at(x);

    let count = mesh.len();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(count);
    for idx in 0..count {
        let mi = mesh.multi_index(idx);
        let xi = mesh.node(idx);
        let gi = gamma_at(&xi[..d]);
        let mut diag = potential[idx] * weights[idx];
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * d + 1);
        for axis in 0..d {
            for dir in [-1i64, 1i64] {
                let j = mi[axis] as i64 + dir;
                let mut xj = xi;
                xj[axis] = xi[axis] + dir as f64 * h;
                let gj = gamma_at(&xj[..d]);
                let coeff = edge_scale * 0.5 * (gi + gj);
                diag += coeff;
                if j >= 0 && (j as usize) < n {
                    let mut mj = mi;
                    mj[axis] = j as usize;
                    row.push((mesh.linear_index(&mj), -coeff));
                }
                // Boundary edges only contribute to the diagonal (the
                // neighbor value is pinned to zero).
            }
        }
        row.push((idx, diag));
        row.sort_by_key(|&(c, _)| c);
        rows.push(row);
    }
    let a = CsrMatrix::from_rows(rows);
    let bandwidth = a.bandwidth();
    Ok(FormPair {
        a,
        m: weights.to_vec(),
        tol_cg: DEFAULT_CG_TOL,
        max_iter: 10 * count,
        min_potential: min_v,
        bandwidth,
    })
}

impl FormPair {
    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn mass(&self) -> &[f64] {
        &self.m
    }

    pub fn min_potential(&self) -> f64 {
        self.min_potential
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    fn check_len(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.dim() {
            return Err(SmsError::Contract(format!(
                "{what} length {} does not match form dimension {}",
                v.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Gradient-plus-potential inner product u^T A v. The expression is
    /// symmetric term by term, so swapping the arguments returns the exact
    /// same floating-point value.
    pub fn inner_h1v(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        self.check_len(u, "u")?;
        self.check_len(v, "v")?;
        Ok(self.h1v(u, v))
    }

    pub(crate) fn h1v(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.a.for_each_entry(|i, j, a_ij| {
            if i == j {
                acc += a_ij * (u[i] * v[i]);
            } else if i < j {
                acc += a_ij * (u[i] * v[j] + u[j] * v[i]);
            }
        });
        acc
    }

    /// Mass-weighted inner product u^T M v; exactly symmetric like `inner_h1v`.
    pub fn inner_l2(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        self.check_len(u, "u")?;
        self.check_len(v, "v")?;
        Ok(self.l2(u, v))
    }

    pub(crate) fn l2(&self, u: &[f64], v: &[f64]) -> f64 {
        self.m
            .iter()
            .zip(u.iter().zip(v))
            .map(|(m, (a, b))| m * (a * b))
            .sum()
    }

    pub(crate) fn norm_h1v(&self, u: &[f64]) -> f64 {
        self.h1v(u, u).max(0.0).sqrt()
    }

    pub(crate) fn norm_l2(&self, u: &[f64]) -> f64 {
        self.l2(u, u).max(0.0).sqrt()
    }

    /// M h as a vector.
    pub(crate) fn mass_apply(&self, h: &[f64]) -> Vec<f64> {
        self.m.iter().zip(h).map(|(m, x)| m * x).collect()
    }

    /// Solves A w = M h; the weak identity <w, phi> = <h, phi>_L2.
    pub fn apply_resolvent(&self, h: &Field) -> Result<Field> {
        self.apply_resolvent_with_start(h, None).map(|(w, _)| w)
    }

    /// Resolvent solve with an optional warm start, reporting CG diagnostics.
    pub fn apply_resolvent_with_start(
        &self,
        h: &Field,
        start: Option<&[f64]>,
    ) -> Result<(Field, CgOutcome)> {
        self.check_len(h, "h")?;
        let rhs = self.mass_apply(h);
        pcg(
            &self.a,
            &rhs,
            start,
            CgOptions {
                tol: self.tol_cg,
                max_iter: self.max_iter,
            },
        )
    }

    /// The Newton-system matrix A - M diag(lambda + q): same off-diagonals as
    /// A, shifted diagonal. `q` holds the nodal derivative weights.
    pub fn jacobian_matrix(&self, lambda: f64, q: &[f64]) -> CsrMatrix {
        debug_assert_eq!(q.len(), self.dim());
        let n = self.dim();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        self.a.for_each_entry(|i, j, v| {
            let v = if i == j {
                v - self.m[i] * (lambda + q[i])
            } else {
                v
            };
            rows[i].push((j, v));
        });
        CsrMatrix::from_rows(rows)
    }
}
