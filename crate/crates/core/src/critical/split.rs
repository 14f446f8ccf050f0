//! Three-way splitting of the discrete space around a multiplicity group
//! (k, h): X1 spans the eigenvectors strictly below the group, X2 the group
//! itself, X3 everything above, realized as the complement of X1 + X2. The
//! projectors are orthogonal in both inner products at once because the
//! basis vectors are eigenvectors: the stiffness projection coefficient
//! <w, e_i> / lambda_i collapses to the mass coefficient <w, e_i>_L2.

use crate::error::{Result, SmsError};
use crate::grid::Field;
use crate::operators::FormPair;
use crate::spectrum::EigenDecomposition;

#[derive(Debug, Clone)]
pub struct SubspaceSplit {
    /// 1-based group start.
    pub k: usize,
    /// Extra group members beyond the first.
    pub h: usize,
    /// Mass-orthonormal basis of X1 (may be empty when k = 1).
    pub x1: Vec<Field>,
    /// Mass-orthonormal basis of X2, the eigenvectors of the group.
    pub x2: Vec<Field>,
    /// Eigenvalues matching x1.
    pub lambda_x1: Vec<f64>,
    /// Eigenvalues matching x2.
    pub lambda_x2: Vec<f64>,
    /// First eigenvalue above the group, when computed.
    pub lambda_above: Option<f64>,
}

/// Builds the split for a multiplicity group out of a decomposition. The
/// group must leave at least one computed eigenvalue above it so the window
/// and geometry constructions have a ceiling to lean on.
pub fn split_subspaces(ed: &EigenDecomposition, group: (usize, usize)) -> Result<SubspaceSplit> {
    let (k, h) = group;
    if k == 0 {
        return Err(SmsError::Contract("group index k is 1-based and must be positive".into()));
    }
    if k + h + 1 > ed.len() {
        return Err(SmsError::Contract(format!(
            "group ({k},{h}) needs eigenpair {} but only {} are computed",
            k + h + 1,
            ed.len()
        )));
    }
    let x1: Vec<Field> = ed.vectors[..k - 1].to_vec();
    let x2: Vec<Field> = ed.vectors[k - 1..k + h].to_vec();
    Ok(SubspaceSplit {
        k,
        h,
        x1,
        x2,
        lambda_x1: ed.values[..k - 1].to_vec(),
        lambda_x2: ed.values[k - 1..k + h].to_vec(),
        lambda_above: ed.values.get(k + h).copied(),
    })
}

impl SubspaceSplit {
    /// Group eigenvalue (the first of the cluster).
    pub fn lambda_k(&self) -> f64 {
        self.lambda_x2[0]
    }

    /// Eigenvalue just below the group; None when the group starts at 1.
    pub fn lambda_below(&self) -> Option<f64> {
        self.lambda_x1.last().copied()
    }

    pub fn dim_x1(&self) -> usize {
        self.x1.len()
    }

    pub fn dim_x2(&self) -> usize {
        self.x2.len()
    }

    fn project_span(fp: &FormPair, basis: &[Field], w: &[f64]) -> Field {
        let mut out = vec![0.0; w.len()];
        for e in basis {
            let c = fp.l2(w, e);
            for (o, x) in out.iter_mut().zip(e) {
                *o += c * x;
            }
        }
        out
    }

    pub fn project_x1(&self, fp: &FormPair, w: &[f64]) -> Field {
        Self::project_span(fp, &self.x1, w)
    }

    pub fn project_x2(&self, fp: &FormPair, w: &[f64]) -> Field {
        Self::project_span(fp, &self.x2, w)
    }

    /// Projection onto X1 + X2 = span of the first k+h eigenvectors.
    pub fn project_x12(&self, fp: &FormPair, w: &[f64]) -> Field {
        let mut out = self.project_x1(fp, w);
        let p2 = self.project_x2(fp, w);
        for (o, x) in out.iter_mut().zip(&p2) {
            *o += x;
        }
        out
    }

    /// Complement projection: w minus its X1 + X2 part.
    pub fn project_x3(&self, fp: &FormPair, w: &[f64]) -> Field {
        let p = self.project_x12(fp, w);
        w.iter().zip(&p).map(|(a, b)| a - b).collect()
    }

    /// Projection onto X1 + X3, the gradient component watched by the
    /// slab condition: w minus its X2 part.
    pub fn project_x13(&self, fp: &FormPair, w: &[f64]) -> Field {
        let p = self.project_x2(fp, w);
        w.iter().zip(&p).map(|(a, b)| a - b).collect()
    }

    /// Projection onto X2 + X3: w minus its X1 part.
    pub fn project_x23(&self, fp: &FormPair, w: &[f64]) -> Field {
        let p = self.project_x1(fp, w);
        w.iter().zip(&p).map(|(a, b)| a - b).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_mesh, MeshConfig, MetricWeight, ScalarProfile};
    use crate::linalg::norm2;
    use crate::operators::assemble;
    use crate::spectrum::{compute_eigenpairs, SpectrumOptions};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (FormPair, EigenDecomposition) {
        let mesh = build_mesh(&MeshConfig {
            dimension: 1,
            half_width: 6.0,
            nodes_per_axis: 60,
            metric_weight: MetricWeight::Constant,
        })
        .unwrap();
        let v = mesh
            .sample_potential(&ScalarProfile::HarmonicOffset { offset: 1.0 })
            .unwrap();
        let fp = assemble(&mesh, &v).unwrap();
        let ed = compute_eigenpairs(&fp, &SpectrumOptions::new(4)).unwrap();
        (fp, ed)
    }

    #[test]
    fn bases_follow_the_group() {
        let (_, ed) = setup();
        let split = split_subspaces(&ed, (2, 0)).unwrap();
        assert_eq!(split.dim_x1(), 1);
        assert_eq!(split.dim_x2(), 1);
        assert_eq!(split.x1[0], ed.vectors[0]);
        assert_eq!(split.x2[0], ed.vectors[1]);
        assert_eq!(split.lambda_k(), ed.values[1]);
        assert_eq!(split.lambda_below(), Some(ed.values[0]));
        assert_eq!(split.lambda_above, Some(ed.values[2]));
    }

    #[test]
    fn eigenvectors_project_cleanly() {
        let (fp, ed) = setup();
        let split = split_subspaces(&ed, (2, 0)).unwrap();
        let p2 = split.project_x2(&fp, &ed.vectors[1]);
        let diff: f64 = p2
            .iter()
            .zip(&ed.vectors[1])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(diff <= 1e-10);
        let p1 = split.project_x1(&fp, &ed.vectors[1]);
        assert!(norm2(&p1) <= 1e-10);
    }

    #[test]
    fn projectors_partition_and_annihilate() {
        let (fp, ed) = setup();
        let split = split_subspaces(&ed, (2, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let w: Field = (0..fp.dim()).map(|_| rng.gen::<f64>() - 0.5).collect();
            let p1 = split.project_x1(&fp, &w);
            let p2 = split.project_x2(&fp, &w);
            let p3 = split.project_x3(&fp, &w);
            let sum_defect: f64 = w
                .iter()
                .zip(p1.iter().zip(p2.iter().zip(&p3)))
                .map(|(wi, (a, (b, c)))| (wi - a - b - c).abs())
                .fold(0.0, f64::max);
            assert!(sum_defect <= 1e-10);
            // idempotency and mutual annihilation
            let p11 = split.project_x1(&fp, &p1);
            let d11: f64 = p11.iter().zip(&p1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(d11 <= 1e-10);
            let p21 = split.project_x2(&fp, &p1);
            assert!(norm2(&p21) <= 1e-10);
            let p13 = split.project_x1(&fp, &p3);
            assert!(norm2(&p13) <= 1e-10);
        }
    }

    #[test]
    fn projector_is_symmetric_in_both_inner_products() {
        let (fp, ed) = setup();
        let split = split_subspaces(&ed, (2, 0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u: Field = (0..fp.dim()).map(|_| rng.gen::<f64>() - 0.5).collect();
        let v: Field = (0..fp.dim()).map(|_| rng.gen::<f64>() - 0.5).collect();
        let pu = split.project_x12(&fp, &u);
        let pv = split.project_x12(&fp, &v);
        let h_lhs = fp.inner_h1v(&pu, &v).unwrap();
        let h_rhs = fp.inner_h1v(&u, &pv).unwrap();
        assert!((h_lhs - h_rhs).abs() <= 1e-9 * (1.0 + h_lhs.abs()));
        let l_lhs = fp.inner_l2(&pu, &v).unwrap();
        let l_rhs = fp.inner_l2(&u, &pv).unwrap();
        assert!((l_lhs - l_rhs).abs() <= 1e-9 * (1.0 + l_lhs.abs()));
    }

    #[test]
    fn rejects_overdrawn_groups() {
        let (_, ed) = setup();
        assert!(matches!(
            split_subspaces(&ed, (4, 0)),
            Err(SmsError::Contract(_))
        ));
        assert!(matches!(
            split_subspaces(&ed, (0, 0)),
            Err(SmsError::Contract(_))
        ));
        assert!(split_subspaces(&ed, (3, 0)).is_ok());
    }
}
