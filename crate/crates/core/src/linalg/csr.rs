//! Compressed sparse row storage with the few operations the solvers need.

/// Sparse matrix in CSR form. Rows are built in order; columns within a row
/// are kept in insertion order (assembly inserts them sorted).
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row (column, value) lists.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                debug_assert!(c < n);
                col_idx.push(c);
                vals.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    /// Allocating matvec.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// u^T A v
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.n);
        debug_assert_eq!(v.len(), self.n);
        let mut acc = 0.0;
        for i in 0..self.n {
            let mut row = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += self.vals[k] * v[self.col_idx[k]];
            }
            acc += u[i] * row;
        }
        acc
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    d[i] = self.vals[k];
                }
            }
        }
        d
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.col_idx[k] == j {
                return self.vals[k];
            }
        }
        0.0
    }

    /// Maximum |i - j| over stored nonzeros; the half bandwidth.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                bw = bw.max(i.abs_diff(j));
            }
        }
        bw
    }

    /// Largest |A - A^T| entry; zero for exactly symmetric assembly.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                worst = worst.max((self.vals[k] - self.entry(j, i)).abs());
            }
        }
        worst
    }

    /// Visits stored entries as (row, col, value).
    pub fn for_each_entry(&self, mut visit: impl FnMut(usize, usize, f64)) {
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                visit(i, self.col_idx[k], self.vals[k]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri3() -> CsrMatrix {
        CsrMatrix::from_rows(vec![
            vec![(0, 3.0), (1, -1.0)],
            vec![(0, -1.0), (1, 3.0), (2, -1.0)],
            vec![(1, -1.0), (2, 3.0)],
        ])
    }

    #[test]
    fn matvec_and_bilinear() {
        let a = tri3();
        let y = a.apply(&[1.0, 1.0, 1.0]);
        assert_eq!(y, vec![2.0, 1.0, 2.0]);
        assert_eq!(a.bilinear(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]), 5.0);
    }

    #[test]
    fn structure_queries() {
        let a = tri3();
        assert_eq!(a.diagonal(), vec![3.0, 3.0, 3.0]);
        assert_eq!(a.bandwidth(), 1);
        assert_eq!(a.asymmetry(), 0.0);
        assert_eq!(a.entry(0, 2), 0.0);
        assert_eq!(a.entry(2, 1), -1.0);
    }
}
