//! Newton search on the nodal critical-point equation
//! A w - M (lambda w + alpha f(w)) = 0, with deflation against a list of
//! already-known solutions. Deflation multiplies the residual by
//! eta(w) = prod_z (1 / |w - z|^2 + 1); by the rank-one structure of the
//! modified Jacobian, the deflated Newton step is the plain step scaled by
//! tau = 1 / (1 - (grad eta . delta) / eta), so each iteration costs one
//! banded factorization regardless of how many solutions are deflated.
//!
//! Seeds are placed where the linking geometry predicts critical points: on
//! the X2+X3 sphere of radius rho and the X1+X2 sphere of radius R.

use crate::critical::split::SubspaceSplit;
use crate::error::{Result, SmsError};
use crate::functional::{CriticalPointRecord, EnergyModel};
use crate::grid::{Field, Mesh};
use crate::linalg::BandedLu;
use crate::operators::FormPair;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Normalized solution distance used by the deflation-soundness guard and by
/// classification: fields are scaled to unit max amplitude, then compared in
/// the quadrature L2 norm. Zero-amplitude fields compare by raw L2 norm.
pub(crate) fn solution_distance(fp: &FormPair, u: &[f64], v: &[f64]) -> f64 {
    let amp = |w: &[f64]| w.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let (au, av) = (amp(u), amp(v));
    if au <= f64::MIN_POSITIVE || av <= f64::MIN_POSITIVE {
        let diff: Field = u.iter().zip(v).map(|(a, b)| a - b).collect();
        return fp.norm_l2(&diff);
    }
    let diff: Field = u
        .iter()
        .zip(v)
        .map(|(a, b)| a / au - b / av)
        .collect();
    fp.norm_l2(&diff)
}

const DEFLATION_GUARD_TOL: f64 = 1e-3;

/// Deterministic seed list on the linking sets: the group direction at both
/// radii and both signs first, then rho-scale mixtures of the group mode
/// with unit X3 noise, alternating with R-scale X1+X2 mixtures. The RNG seed
/// is fixed, so the list is reproducible byte for byte.
pub fn seed_generator(
    split: &SubspaceSplit,
    fp: &FormPair,
    rho: f64,
    big_r: f64,
    count: usize,
) -> Result<Vec<Field>> {
    if !(rho < big_r) {
        return Err(SmsError::Contract(format!(
            "need rho < R, got rho = {rho}, R = {big_r}"
        )));
    }
    let n = fp.dim();
    let lambda_k = split.lambda_k();
    let ek: Field = split.x2[0].iter().map(|x| x / lambda_k.sqrt()).collect();
    let rescale = |w: &[f64], target: f64| -> Field {
        let nh = fp.norm_h1v(w).max(f64::MIN_POSITIVE);
        w.iter().map(|x| x * target / nh).collect()
    };

    let mut seeds: Vec<Field> = Vec::with_capacity(count);
    for scale in [rho, -rho, big_r, -big_r] {
        if seeds.len() == count {
            return Ok(seeds);
        }
        seeds.push(ek.iter().map(|x| scale * x).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    // R-scale X1+X2 items: the X1 axis directions first (both signs), then
    // random mixtures once the axes are exhausted
    let mut x1_axis = split
        .x1
        .iter()
        .zip(&split.lambda_x1)
        .flat_map(|(e, l)| {
            let unit: Field = e.iter().map(|x| x / l.sqrt()).collect();
            let neg: Field = unit.iter().map(|x| -x).collect();
            [unit, neg]
        })
        .collect::<Vec<_>>()
        .into_iter();
    let mut flip = false;
    while seeds.len() < count {
        let candidate = if !flip {
            let raw: Field = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let x3 = split.project_x3(fp, &raw);
            let nh = fp.norm_h1v(&x3);
            if nh <= 1e-12 {
                continue;
            }
            let mixed: Field = ek
                .iter()
                .zip(&x3)
                .map(|(a, b)| (a + b / nh) / std::f64::consts::SQRT_2)
                .collect();
            rescale(&mixed, rho)
        } else if let Some(axis) = x1_axis.next() {
            rescale(&axis, big_r)
        } else {
            let raw: Field = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let x12 = split.project_x12(fp, &raw);
            if fp.norm_h1v(&x12) <= 1e-12 {
                continue;
            }
            rescale(&x12, big_r)
        };
        seeds.push(candidate);
        flip = !flip;
    }
    Ok(seeds)
}

/// Runs deflated Newton from every seed. Non-converged seeds come back as
/// records with `converged = false` and a note; only a singular residual
/// evaluation (failed resolvent) aborts the whole call. A record is never
/// returned as converged within the guard distance of a `known` entry; the
/// zero solution is deflated exactly when the caller lists it in `known`.
pub fn deflated_newton(
    model: &EnergyModel,
    mesh: &Mesh,
    seeds: &[Field],
    known: &[Field],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<CriticalPointRecord>> {
    if !(tol > 0.0) {
        return Err(SmsError::Contract(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let fp = model.forms;
    for (i, s) in seeds.iter().enumerate() {
        if s.len() != fp.dim() {
            return Err(SmsError::Contract(format!(
                "seed {i} has length {} but the grid has {} nodes",
                s.len(),
                fp.dim()
            )));
        }
        if fp.norm_h1v(s) <= f64::MIN_POSITIVE {
            return Err(SmsError::Contract(format!("seed {i} is the zero field")));
        }
    }

    let shell = mesh.outer_shell(0.1);
    let eta = |w: &Field| -> f64 {
        known
            .iter()
            .map(|z| {
                let diff: Field = w.iter().zip(z).map(|(a, b)| a - b).collect();
                let d2 = fp.norm_l2(&diff).powi(2).max(1e-300);
                1.0 / d2 + 1.0
            })
            .product()
    };
    let nodal_norm = |g: &Field| -> f64 { g.iter().map(|x| x * x).sum::<f64>().sqrt() };

    let mut records = Vec::with_capacity(seeds.len());
    for (id, seed) in seeds.iter().enumerate() {
        let mut w = seed.clone();
        let mut warm: Option<Field> = None;
        let mut converged = false;
        let mut iterations = 0usize;
        let mut note = String::new();
        // full Newton steps allowed to raise the merit before giving up;
        // crossing a stiff region often needs a few nonmonotone moves
        let mut nonmonotone_left = 10usize;

        loop {
            // gradient norm in the energy space decides convergence
            let rhs = model.load(&w);
            let (x, _) = fp.apply_resolvent_with_start(&rhs, warm.as_deref())?;
            let grad: Field = w.iter().zip(&x).map(|(a, b)| a - b).collect();
            warm = Some(x);
            if fp.norm_h1v(&grad) <= tol {
                converged = true;
                break;
            }
            if iterations >= max_iter {
                note = format!("no convergence in {max_iter} iterations");
                break;
            }
            iterations += 1;

            let g = model.euler_lagrange_residual(&w);
            let q = model.derivative_weights(&w);
            let jac = fp.jacobian_matrix(model.lambda, &q);
            let lu = match BandedLu::factor(&jac, fp.bandwidth()) {
                Ok(lu) => lu,
                Err(_) => {
                    note = "singular Jacobian (lambda too close to a bifurcation)".into();
                    break;
                }
            };
            let neg_g: Field = g.iter().map(|x| -x).collect();
            let delta = match lu.solve(&neg_g) {
                Ok(d) => d,
                Err(_) => {
                    note = "singular Jacobian (lambda too close to a bifurcation)".into();
                    break;
                }
            };

            // deflation: scale the step by the rank-one correction
            let mut s = 0.0;
            for z in known {
                let diff: Field = w.iter().zip(z).map(|(a, b)| a - b).collect();
                let d2 = fp.norm_l2(&diff).powi(2).max(1e-300);
                s += -2.0 * fp.l2(&diff, &delta) / (d2 * (1.0 + d2));
            }
            let tau = 1.0 / (1.0 - s.clamp(-9.0, 0.9));

            let merit = eta(&w) * nodal_norm(&g);
            let mut t = tau;
            let mut accepted = false;
            for _ in 0..30 {
                let trial: Field = w.iter().zip(&delta).map(|(wi, di)| wi + t * di).collect();
                let trial_merit = eta(&trial) * nodal_norm(&model.euler_lagrange_residual(&trial));
                if trial_merit < merit {
                    w = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                if nonmonotone_left == 0 {
                    note = "line search stalled".into();
                    break;
                }
                nonmonotone_left -= 1;
                w = w
                    .iter()
                    .zip(&delta)
                    .map(|(wi, di)| wi + tau * di)
                    .collect();
            }
        }

        // certificate re-evaluated from scratch, not from the warm loop state
        let residual = model.residual(&w)?;
        converged = converged && residual <= tol;
        if converged {
            for z in known {
                if solution_distance(fp, &w, z) <= DEFLATION_GUARD_TOL {
                    converged = false;
                    note = "converged onto a deflated target".into();
                    break;
                }
            }
        }
        let amp_min = w.iter().cloned().fold(f64::INFINITY, f64::min);
        let shell_max = shell
            .iter()
            .map(|&i| w[i].abs())
            .fold(0.0f64, f64::max);
        records.push(CriticalPointRecord {
            energy: model.energy(&w),
            residual,
            min_value: amp_min,
            shell_max,
            id,
            converged,
            iterations,
            note,
            w,
        });
    }
    Ok(records)
}
