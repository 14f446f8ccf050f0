//! Estimator for the gradient lower bound on the energy slab. The condition
//! under test: over all fields with a <= J(w) <= b that stay within gamma of
//! X1 + X3, the projected gradient P13 grad J never vanishes. The estimate
//! is the smallest projected-gradient norm found by penalized descent from
//! multistarts; a small positive value is evidence for the bound, an exact
//! zero would witness a constrained critical point inside the slab.
//!
//! Feasible starts come from ray scans: along each probe direction the
//! energy is continuous with J(0) = 0, so a bisection brackets the level set
//! J = (a+b)/2 whenever the ray reaches it. When no probe ray ever enters
//! the slab the set is treated as empty and the estimate is absent rather
//! than zero.

use crate::critical::split::SubspaceSplit;
use crate::error::{Result, SmsError};
use crate::functional::EnergyModel;
use crate::grid::Field;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct NablaEstimate {
    /// Smallest projected-gradient norm seen at a feasible iterate.
    pub value: f64,
    /// The iterate realizing it.
    pub argmin: Field,
    /// Number of multistarts that produced a feasible sample.
    pub feasible_samples: usize,
}

/// Projected-gradient norm, feasibility flags, and the pieces needed for a
/// descent step, all evaluated at one field.
struct SlabPoint {
    j: f64,
    grad: Field,
    p13_grad: Field,
    p13_norm: f64,
    x2_norm: f64,
}

fn eval_point(
    model: &EnergyModel,
    split: &SubspaceSplit,
    w: &Field,
    warm: &mut Option<Field>,
) -> Result<SlabPoint> {
    let fp = model.forms;
    let rhs = model.load(w);
    let (x, _) = fp.apply_resolvent_with_start(&rhs, warm.as_deref())?;
    let grad: Field = w.iter().zip(&x).map(|(a, b)| a - b).collect();
    *warm = Some(x);
    let p2g = split.project_x2(fp, &grad);
    let p13_grad: Field = grad.iter().zip(&p2g).map(|(g, p)| g - p).collect();
    let p13_norm = fp.norm_h1v(&p13_grad);
    let x2_part = split.project_x2(fp, w);
    Ok(SlabPoint {
        j: model.energy(w),
        grad,
        p13_grad,
        p13_norm,
        x2_norm: fp.norm_h1v(&x2_part),
    })
}

/// Scans t -> J(t d) for a parameter landing inside [a, b]: doubling until
/// the band is reached or passed, then bisection onto the midlevel.
fn ray_into_slab(model: &EnergyModel, d: &Field, a: f64, b: f64) -> Option<Field> {
    let scale = |t: f64| -> Field { d.iter().map(|x| t * x).collect() };
    let mid = 0.5 * (a + b);
    let mut lo = 0.0f64;
    let mut t = 1e-3;
    let mut hi = None;
    for _ in 0..60 {
        let j = model.energy(&scale(t));
        if j >= a && j <= b {
            return Some(scale(t));
        }
        if j > b {
            hi = Some(t);
            break;
        }
        if j > lo.max(0.0) && j < a {
            lo = t;
        }
        t *= 2.0;
        if t > 1e8 {
            break;
        }
    }
    let mut hi = hi?;
    let mut lo = lo;
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        let j = model.energy(&scale(m));
        if j >= a && j <= b {
            return Some(scale(m));
        }
        if j < mid {
            lo = m;
        } else {
            hi = m;
        }
        if hi - lo <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    None
}

/// Probe directions: the group mode, its negation, slab-compatible mixtures
/// of the group mode with X3 noise (the X2 component capped under gamma once
/// scaled), and pure random fields.
fn probe_directions(
    model: &EnergyModel,
    split: &SubspaceSplit,
    budget: usize,
    seed: u64,
) -> Vec<Field> {
    let fp = model.forms;
    let n = fp.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda_k = split.lambda_k();
    let ek: Field = split.x2[0].iter().map(|x| x / lambda_k.sqrt()).collect();
    let mut dirs: Vec<Field> = vec![ek.clone(), ek.iter().map(|x| -x).collect()];
    while dirs.len() < budget.max(2) {
        let raw: Field = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let mut d = if dirs.len() % 2 == 0 {
            split.project_x13(fp, &raw)
        } else {
            let x3 = split.project_x3(fp, &raw);
            ek.iter().zip(&x3).map(|(a, b)| a + 0.5 * b).collect()
        };
        let nh = fp.norm_h1v(&d);
        if nh > 1e-12 {
            for v in d.iter_mut() {
                *v /= nh;
            }
            dirs.push(d);
        }
    }
    dirs
}

/// Estimates the infimum of the projected-gradient norm over the slab
/// {a <= J <= b, dist to X1+X3 at most gamma}. Absent (Ok(None)) when no
/// probe enters the slab: the condition is then vacuous at this resolution.
pub fn estimate_nabla_condition(
    model: &EnergyModel,
    split: &SubspaceSplit,
    a: f64,
    b: f64,
    gamma: f64,
    budget: usize,
    seed: u64,
) -> Result<Option<NablaEstimate>> {
    if !(a <= b) {
        return Err(SmsError::Contract(format!(
            "slab bounds must satisfy a <= b, got a = {a}, b = {b}"
        )));
    }
    if !(gamma > 0.0) {
        return Err(SmsError::Contract(format!(
            "slab thickness must be positive, got gamma = {gamma}"
        )));
    }
    let fp = model.forms;
    let band = b - a;

    let mut best: Option<(f64, Field)> = None;
    let mut feasible_samples = 0usize;
    for dir in probe_directions(model, split, budget, seed) {
        let Some(start) = ray_into_slab(model, &dir, a, b) else {
            continue;
        };
        // clip the X2 component of the start onto the slab thickness
        let mut w = start;
        let x2 = split.project_x2(fp, &w);
        let x2n = fp.norm_h1v(&x2);
        if x2n > gamma {
            let excess = 1.0 - gamma / x2n * 0.99;
            for (wi, pi) in w.iter_mut().zip(&x2) {
                *wi -= excess * pi;
            }
        }
        let mut warm: Option<Field> = None;
        let mut pt = eval_point(model, split, &w, &mut warm)?;
        if pt.j < a || pt.j > b {
            // clipping may have dropped J out of the band; rescan the ray
            // through the clipped point
            let nh = fp.norm_h1v(&w).max(f64::MIN_POSITIVE);
            let d: Field = w.iter().map(|x| x / nh).collect();
            let Some(back) = ray_into_slab(model, &d, a, b) else {
                continue;
            };
            w = back;
            warm = None;
            pt = eval_point(model, split, &w, &mut warm)?;
        }
        feasible_samples += 1;

        // penalized descent on 1/2 |P13 g|^2 with band and thickness walls
        let mut hess_warm: Option<Field> = None;
        let mut step: f64 = 1.0;
        let kappa = 1.0 / (band * band).max(1e-30);
        let merit = |p: &SlabPoint| -> f64 {
            let jv = (p.j - b).max(a - p.j).max(0.0);
            let gv = (p.x2_norm - gamma).max(0.0);
            0.5 * p.p13_norm * p.p13_norm + kappa * jv * jv + (gv * gv) / (gamma * gamma)
        };
        let feasible = |p: &SlabPoint| -> bool {
            p.j >= a - 1e-9 * band && p.j <= b + 1e-9 * band && p.x2_norm <= gamma * (1.0 + 1e-9)
        };
        let mut m = merit(&pt);
        track_best(&mut best, &pt, &w, feasible(&pt));
        for _ in 0..120 {
            // gradient of the merit: Hessian applied to the projected
            // gradient, plus penalty pushes along grad J and the X2 part
            let q = model.derivative_weights(&w);
            let rhs: Field = pt
                .p13_grad
                .iter()
                .zip(&q)
                .map(|(v, qi)| model.lambda * v + qi * v)
                .collect();
            let (hx, _) = fp.apply_resolvent_with_start(&rhs, hess_warm.as_deref())?;
            let mut descent: Field = pt
                .p13_grad
                .iter()
                .zip(&hx)
                .map(|(v, x)| v - x)
                .collect();
            hess_warm = Some(hx);
            let jv = if pt.j > b {
                pt.j - b
            } else if pt.j < a {
                pt.j - a
            } else {
                0.0
            };
            if jv != 0.0 {
                for (di, gi) in descent.iter_mut().zip(&pt.grad) {
                    *di += 2.0 * kappa * jv * gi;
                }
            }
            if pt.x2_norm > gamma {
                let x2 = split.project_x2(fp, &w);
                let c = 2.0 * (pt.x2_norm - gamma) / (gamma * gamma * pt.x2_norm);
                for (di, pi) in descent.iter_mut().zip(&x2) {
                    *di += c * pi;
                }
            }
            let dn = fp.norm_h1v(&descent);
            if dn <= 1e-12 * (1.0 + m) {
                break;
            }
            step = (step * 2.0).min(1e4);
            let mut accepted = false;
            while step > 1e-16 {
                let trial: Field = w
                    .iter()
                    .zip(&descent)
                    .map(|(wi, di)| wi - step * di)
                    .collect();
                let tp = eval_point(model, split, &trial, &mut warm)?;
                let tm = merit(&tp);
                if tm < m {
                    w = trial;
                    pt = tp;
                    m = tm;
                    accepted = true;
                    track_best(&mut best, &pt, &w, feasible(&pt));
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
    }
    Ok(best.map(|(value, argmin)| NablaEstimate {
        value,
        argmin,
        feasible_samples,
    }))
}

fn track_best(best: &mut Option<(f64, Field)>, pt: &SlabPoint, w: &Field, feasible: bool) {
    if feasible && best.as_ref().map_or(true, |(v, _)| pt.p13_norm < *v) {
        *best = Some((pt.p13_norm, w.clone()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::split::split_subspaces;
    use crate::grid::{build_mesh, MeshConfig, MetricWeight, ScalarProfile};
    use crate::nonlinearity::Nonlinearity;
    use crate::operators::assemble;
    use crate::spectrum::{compute_eigenpairs, SpectrumOptions};

    fn oscillator(n: usize) -> (crate::grid::Mesh, crate::operators::FormPair) {
        let mesh = build_mesh(&MeshConfig {
            dimension: 1,
            half_width: 6.0,
            nodes_per_axis: n,
            metric_weight: MetricWeight::Constant,
        })
        .unwrap();
        let v = mesh
            .sample_potential(&ScalarProfile::HarmonicOffset { offset: 1.0 })
            .unwrap();
        let fp = assemble(&mesh, &v).unwrap();
        (mesh, fp)
    }

    #[test]
    fn rejects_bad_slab() {
        let (_, fp) = oscillator(30);
        let ed = compute_eigenpairs(&fp, &SpectrumOptions::new(3)).unwrap();
        let split = split_subspaces(&ed, (2, 0)).unwrap();
        let nl = Nonlinearity::power(2.0, 3.0, 1).unwrap();
        let model = EnergyModel::new(&fp, vec![0.0; fp.dim()], nl, 2.0).unwrap();
        assert!(matches!(
            estimate_nabla_condition(&model, &split, 1.0, 0.5, 0.1, 2, 42),
            Err(SmsError::Contract(_))
        ));
        assert!(matches!(
            estimate_nabla_condition(&model, &split, 0.5, 1.0, 0.0, 2, 42),
            Err(SmsError::Contract(_))
        ));
    }

    #[test]
    fn empty_slab_reports_absent() {
        let (mesh, fp) = oscillator(60);
        let ed = compute_eigenpairs(&fp, &SpectrumOptions::new(3)).unwrap();
        let split = split_subspaces(&ed, (2, 0)).unwrap();
        let alpha = mesh
            .sample_field(&ScalarProfile::InversePower {
                exponent: 2.0,
                scale: 1.0,
            })
            .unwrap();
        let nl = Nonlinearity::power(2.0, 3.0, 1).unwrap();
        let lambda = 0.5 * (ed.values[0] + ed.values[1]);
        let model = EnergyModel::new(&fp, alpha, nl, lambda).unwrap();
        // with the weighted nonlinearity the energy is bounded above along
        // every probe ray; a slab far above that bound is never entered
        let out = estimate_nabla_condition(&model, &split, 1e12, 2e12, 0.1, 6, 42).unwrap();
        assert!(out.is_none());
    }

    #[test]
    fn quadratic_slab_has_positive_bound() {
        let (_, fp) = oscillator(80);
        let ed = compute_eigenpairs(&fp, &SpectrumOptions::new(3)).unwrap();
        let split = split_subspaces(&ed, (2, 0)).unwrap();
        let nl = Nonlinearity::power(2.0, 3.0, 1).unwrap();
        let lambda = 0.5 * (ed.values[0] + ed.values[1]);
        let model = EnergyModel::new(&fp, vec![0.0; fp.dim()], nl, lambda).unwrap();
        // pure quadratic energy: the only critical point is 0 at level 0, so
        // any slab of positive levels keeps the projected gradient away from
        // zero; gamma small forces mass onto the X2-complement
        let out = estimate_nabla_condition(&model, &split, 0.01, 0.05, 0.05, 6, 42)
            .unwrap()
            .expect("slab reachable");
        assert!(out.feasible_samples >= 1);
        assert!(out.value > 1e-3, "estimate {}", out.value);
        let j = model.energy(&out.argmin);
        assert!(j >= 0.01 - 1e-9 && j <= 0.05 + 1e-9);
    }

    #[test]
    fn weighted_instance_reports_positive_estimate() {
        let (mesh, fp) = oscillator(80);
        let ed = compute_eigenpairs(&fp, &SpectrumOptions::new(3)).unwrap();
        let split = split_subspaces(&ed, (2, 0)).unwrap();
        let alpha = mesh
            .sample_field(&ScalarProfile::InversePower {
                exponent: 2.0,
                scale: 1.0,
            })
            .unwrap();
        let nl = Nonlinearity::power(2.0, 3.0, 1).unwrap();
        let gap = ed.values[2] - ed.values[1];
        let lambda = ed.values[1] - 0.02 * gap;
        let model = EnergyModel::new(&fp, alpha, nl, lambda).unwrap();
        let out = estimate_nabla_condition(&model, &split, 1e-4, 1e-2, 0.25, 6, 42)
            .unwrap()
            .expect("slab reachable");
        assert!(out.value > 0.0);
        assert!(out.feasible_samples >= 1);
    }
}
