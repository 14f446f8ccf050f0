//! Banded LU factorization with partial pivoting, for the symmetric but
//! possibly indefinite Jacobians of the Newton search. Stencil matrices on a
//! d-dimensional grid have half bandwidth n^(d-1), so a direct banded solve
//! stays cheap at the mesh sizes this library targets.

use crate::error::{Result, SmsError};

use super::csr::CsrMatrix;

/// LU factors of a band matrix with `kl` subdiagonals and `ku` superdiagonals.
/// Pivoting widens the upper band to `kl + ku`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Column-major band storage, leading dimension 2*kl + ku + 1; the entry
    /// (i, j) lives at ab[j * ldab + (kl + ku + i - j)].
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Factors a CSR matrix whose nonzeros all satisfy |i - j| <= bandwidth.
    pub fn factor(a: &CsrMatrix, bandwidth: usize) -> Result<Self> {
        let n = a.dim();
        let (kl, ku) = (bandwidth, bandwidth);
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0_f64; ldab * n];
        a.for_each_entry(|i, j, v| {
            debug_assert!(i.abs_diff(j) <= bandwidth);
            ab[j * ldab + (kl + ku + i - j)] = v;
        });
        let mut ipiv = vec![0usize; n];

        let idx = |i: usize, j: usize| -> usize { j * ldab + (kl + ku + i - j) };
        for j in 0..n {
            let i_max = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = ab[idx(j, j)].abs();
            for i in (j + 1)..=i_max {
                let cand = ab[idx(i, j)].abs();
                if cand > best {
                    best = cand;
                    p = i;
                }
            }
            ipiv[j] = p;
            if best < f64::MIN_POSITIVE {
                return Err(SmsError::Solver {
                    context: format!("banded LU met a singular pivot at column {j}"),
                    residual: best,
                    iterations: j,
                });
            }
            let c_max = (j + kl + ku).min(n - 1);
            if p != j {
                for c in j..=c_max {
                    ab.swap(idx(j, c), idx(p, c));
                }
            }
            let pivot = ab[idx(j, j)];
            for i in (j + 1)..=i_max {
                let m = ab[idx(i, j)] / pivot;
                ab[idx(i, j)] = m;
                if m != 0.0 {
                    for c in (j + 1)..=c_max {
                        ab[idx(i, c)] -= m * ab[idx(j, c)];
                    }
                }
            }
        }
        Ok(BandedLu { n, kl, ku, ab, ipiv })
    }

    /// Solves A x = b using the stored factors.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(SmsError::Contract(format!(
                "rhs length {} does not match factored dimension {}",
                b.len(),
                self.n
            )));
        }
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let ldab = 2 * kl + ku + 1;
        let idx = |i: usize, j: usize| -> usize { j * ldab + (kl + ku + i - j) };
        let mut x = b.to_vec();
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                x.swap(j, p);
            }
            let xj = x[j];
            if xj != 0.0 {
                for i in (j + 1)..=(j + kl).min(n - 1) {
                    x[i] -= self.ab[idx(i, j)] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.ab[idx(j, j)];
            let xj = x[j];
            if xj != 0.0 {
                let first = j.saturating_sub(ku + kl);
                for i in first..j {
                    x[i] -= self.ab[idx(i, j)] * xj;
                }
            }
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;

    fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.apply(x);
        let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
        norm2(&r) / norm2(b).max(1.0)
    }

    #[test]
    fn solves_spd_tridiagonal() {
        let a = CsrMatrix::from_rows(vec![
            vec![(0, 3.0), (1, -1.0)],
            vec![(0, -1.0), (1, 3.0), (2, -1.0)],
            vec![(1, -1.0), (2, 3.0)],
        ]);
        let lu = BandedLu::factor(&a, 1).unwrap();
        let x = lu.solve(&[1.0, 0.0, 0.0]).unwrap();
        let expect = [8.0 / 21.0, 3.0 / 21.0, 1.0 / 21.0];
        for (xi, ei) in x.iter().zip(expect.iter()) {
            assert!((xi - ei).abs() < 1e-14);
        }
    }

    #[test]
    fn solves_indefinite_system_with_pivoting() {
        // Tridiagonal shifted well into the spectrum: indefinite, needs pivoting.
        let n = 200;
        let shift = 3.5;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::new();
            if i > 0 {
                row.push((i - 1, -1.0));
            }
            row.push((i, 2.0 - shift));
            if i + 1 < n {
                row.push((i + 1, -1.0));
            }
            rows.push(row);
        }
        let a = CsrMatrix::from_rows(rows);
        let xs: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
        let b = a.apply(&xs);
        let lu = BandedLu::factor(&a, 1).unwrap();
        let x = lu.solve(&b).unwrap();
        assert!(residual(&a, &x, &b) < 1e-10);
    }

    #[test]
    fn solves_wider_band() {
        // Pentadiagonal with an indefinite diagonal pattern.
        let n = 120;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::new();
            for dj in -2i64..=2 {
                let j = i as i64 + dj;
                if j >= 0 && (j as usize) < n {
                    let v = match dj.abs() {
                        0 => {
                            if i % 3 == 0 {
                                -1.5
                            } else {
                                4.0
                            }
                        }
                        1 => -1.0,
                        _ => 0.25,
                    };
                    row.push((j as usize, v));
                }
            }
            rows.push(row);
        }
        let a = CsrMatrix::from_rows(rows);
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.61).cos()).collect();
        let b = a.apply(&xs);
        let lu = BandedLu::factor(&a, 2).unwrap();
        let x = lu.solve(&b).unwrap();
        assert!(residual(&a, &x, &b) < 1e-10);
    }

    #[test]
    fn reports_singularity() {
        let a = CsrMatrix::from_rows(vec![
            vec![(0, 1.0), (1, 1.0)],
            vec![(0, 1.0), (1, 1.0)],
        ]);
        assert!(BandedLu::factor(&a, 1).is_err());
    }
}
