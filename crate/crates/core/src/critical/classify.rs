//! Groups converged critical-point records into distinct solutions and
//! attaches the certificates the multiplicity claim needs: nontriviality,
//! approximate nonnegativity, boundary decay, and where the energy level
//! sits relative to the slab used by the gradient-bound estimate. Records
//! are compared after normalizing to unit max amplitude, so a solution and
//! its rescaled duplicate land in one class while genuinely different
//! profiles stay apart.

use crate::critical::newton::solution_distance;
use crate::functional::CriticalPointRecord;
use crate::grid::Field;
use crate::operators::FormPair;
use serde::Serialize;

/// Position of a solution's energy level relative to the slab [eta', eta''].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BandPlacement {
    Below,
    Inside,
    Above,
    /// No slab was supplied.
    Unknown,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionClass {
    /// Profile of the first record in the class.
    pub representative: Field,
    /// Record ids merged into this class.
    pub members: Vec<usize>,
    pub energy: f64,
    pub residual: f64,
    pub l2_norm: f64,
    /// Quadrature L2 norm exceeds the triviality floor 1e-6.
    pub nontrivial: bool,
    /// Min nodal value is above -1e-6 times the max amplitude.
    pub nonnegative: bool,
    pub min_value: f64,
    /// Max |w| on the outer shell is below 1e-4 times the max amplitude.
    pub decay_ok: bool,
    pub shell_ratio: f64,
    pub band: BandPlacement,
}

/// Clusters the converged records; non-converged ones are ignored. Classes
/// come out in first-appearance order, which is deterministic for a
/// deterministic record list.
pub fn classify_solutions(
    records: &[CriticalPointRecord],
    fp: &FormPair,
    dist_tol: f64,
    band: Option<(f64, f64)>,
) -> Vec<SolutionClass> {
    let mut classes: Vec<SolutionClass> = Vec::new();
    for rec in records.iter().filter(|r| r.converged) {
        if let Some(class) = classes
            .iter_mut()
            .find(|c| solution_distance(fp, &c.representative, &rec.w) <= dist_tol)
        {
            class.members.push(rec.id);
            continue;
        }
        let amp = rec.w.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let l2_norm = fp.norm_l2(&rec.w);
        let placement = match band {
            None => BandPlacement::Unknown,
            Some((lo, _)) if rec.energy < lo => BandPlacement::Below,
            Some((_, hi)) if rec.energy > hi => BandPlacement::Above,
            Some(_) => BandPlacement::Inside,
        };
        classes.push(SolutionClass {
            representative: rec.w.clone(),
            members: vec![rec.id],
            energy: rec.energy,
            residual: rec.residual,
            l2_norm,
            nontrivial: l2_norm > 1e-6,
            nonnegative: rec.min_value >= -1e-6 * amp,
            min_value: rec.min_value,
            decay_ok: rec.shell_max <= 1e-4 * amp || amp == 0.0,
            shell_ratio: if amp > 0.0 { rec.shell_max / amp } else { 0.0 },
            band: placement,
        });
    }
    classes
}
