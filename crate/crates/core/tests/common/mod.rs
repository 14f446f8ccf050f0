//! Shared fixtures for the integration suites: an independent Sturm-sequence
//! eigenvalue oracle for symmetric tridiagonal matrices, and lazily built
//! benchmark instances reused across criteria.

#![allow(dead_code)]

use std::sync::OnceLock;

use sms_core::critical::split_subspaces;
use sms_core::critical::SubspaceSplit;
use sms_core::functional::EnergyModel;
use sms_core::grid::{build_mesh, Field, Mesh, MeshConfig, MetricWeight, ScalarProfile};
use sms_core::nonlinearity::Nonlinearity;
use sms_core::operators::{assemble, FormPair};
use sms_core::spectrum::{compute_eigenpairs, EigenDecomposition, SpectrumOptions};

/// Number of Sturm pivots below x, i.e. the count of eigenvalues < x.
/// Standard LDL^T recurrence with the exact-hit pivot nudged negative.
fn negcount(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0usize;
    let mut q = 1.0f64;
    for i in 0..diag.len() {
        let sub = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - sub / q;
        if q == 0.0 {
            q = -f64::MIN_POSITIVE;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest `m` eigenvalues of the symmetric tridiagonal (diag, off) by
/// bisection on the negative-pivot count, bracketed by Gershgorin discs.
/// Shares no code with the block solver under test.
pub fn sturm_eigenvalues(diag: &[f64], off: &[f64], m: usize) -> Vec<f64> {
    let n = diag.len();
    assert_eq!(off.len() + 1, n, "off-diagonal length must be n - 1");
    assert!(m <= n, "asked for more eigenvalues than the matrix has");
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - left - right);
        hi = hi.max(diag[i] + left + right);
    }
    (1..=m)
        .map(|j| {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if negcount(diag, off, mid) >= j {
                    b = mid;
                } else {
                    a = mid;
                }
                if b - a <= 1e-15 * b.abs().max(1.0) {
                    break;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Second-difference Dirichlet discretization of -u'' + V(x) u on (-l, l)
/// with n interior nodes: diag 2/h^2 + V(x_i), off-diagonal -1/h^2. With the
/// uniform quadrature weight h on both forms, the generalized eigenvalues
/// equal the eigenvalues of this plain tridiagonal matrix (h cancels), so it
/// brackets the solver without borrowing its assembly.
pub fn dirichlet_tridiag(l: f64, n: usize, v: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
    let h = 2.0 * l / (n as f64 + 1.0);
    let diag = (0..n)
        .map(|i| {
            let x = -l + (i as f64 + 1.0) * h;
            2.0 / (h * h) + v(x)
        })
        .collect();
    let off = vec![-1.0 / (h * h); n - 1];
    (diag, off)
}

/// A fully prepared benchmark instance: grid, forms, spectrum, and the split
/// around the first multiplicity group with k >= 2.
pub struct Instance {
    pub mesh: Mesh,
    pub fp: FormPair,
    pub ed: EigenDecomposition,
    pub split: SubspaceSplit,
}

impl Instance {
    pub fn build(dimension: usize, half_width: f64, n: usize, m: usize) -> Instance {
        let mesh = build_mesh(&MeshConfig {
            dimension,
            half_width,
            nodes_per_axis: n,
            metric_weight: MetricWeight::Constant,
        })
        .expect("mesh");
        let v = mesh
            .sample_potential(&ScalarProfile::HarmonicOffset { offset: 1.0 })
            .expect("potential");
        let mut fp = assemble(&mesh, &v).expect("forms");
        fp.tol_cg = 1e-12;
        let mut opts = SpectrumOptions::new(m);
        opts.tol = 1e-9;
        let ed = compute_eigenpairs(&fp, &opts).expect("spectrum");
        let group = ed
            .groups
            .iter()
            .copied()
            .find(|(k, _)| *k >= 2)
            .expect("a group above the ground state");
        let split = split_subspaces(&ed, group).expect("split");
        Instance {
            mesh,
            fp,
            ed,
            split,
        }
    }

    /// Nonlinear weight used by the shipped configuration.
    pub fn alpha(&self) -> Field {
        self.mesh
            .sample_field(&ScalarProfile::InversePower {
                exponent: 2.0,
                scale: 1.0,
            })
            .expect("alpha")
    }

    /// Pure-power nonlinearity matching the shipped configuration.
    pub fn nonlinearity(&self) -> Nonlinearity {
        Nonlinearity::power(2.0, 3.0, self.mesh.dimension()).expect("nonlinearity")
    }

    pub fn model_at(&self, lambda: f64) -> EnergyModel<'_> {
        EnergyModel::new(&self.fp, self.alpha(), self.nonlinearity(), lambda).expect("model")
    }

    /// Same forms, zero nonlinear weight: the closed-form quadratic regime.
    pub fn quadratic_model_at(&self, lambda: f64) -> EnergyModel<'_> {
        let alpha = vec![0.0; self.fp.dim()];
        EnergyModel::new(&self.fp, alpha, self.nonlinearity(), lambda).expect("model")
    }
}

/// The default benchmark: 1-D, half-width 12, 600 nodes, 8 eigenpairs.
/// Built once per test binary.
pub fn benchmark() -> &'static Instance {
    static CELL: OnceLock<Instance> = OnceLock::new();
    CELL.get_or_init(|| Instance::build(1, 12.0, 600, 8))
}

pub fn norm_h(fp: &FormPair, w: &[f64]) -> f64 {
    fp.inner_h1v(w, w).expect("norm").sqrt()
}

pub fn norm_l2(fp: &FormPair, w: &[f64]) -> f64 {
    fp.inner_l2(w, w).expect("norm").sqrt()
}

/// Normalized L2 distance used for solution distinctness: both profiles are
/// scaled to unit max amplitude first so big and small solutions compare on
/// the same footing.
pub fn profile_distance(fp: &FormPair, a: &[f64], b: &[f64]) -> f64 {
    let amp = |w: &[f64]| w.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1e-300);
    let (sa, sb) = (amp(a), amp(b));
    let diff: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x / sa - y / sb)
        .collect();
    norm_l2(fp, &diff)
}

/// Deterministic pseudo-random field with entries in [-1, 1], decoupled from
/// the crate's RNG choices (simple splitmix64 stream).
pub fn pseudo_random_field(dim: usize, seed: u64) -> Field {
    let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
    let mut next = move || {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    };
    (0..dim)
        .map(|_| {
            let u = (next() >> 11) as f64 / (1u64 << 53) as f64;
            2.0 * u - 1.0
        })
        .collect()
}

/// Prints the one-line verdict the acceptance suite emits per criterion.
pub fn verdict(number: usize, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {number:02} {tag}: {detail}");
}

/// Scientific-notation rendering of a slice, for the verdict lines.
pub fn fmt_vec(xs: &[f64]) -> String {
    let body: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", body.join(", "))
}
