//! Numerical verification of the linking inequality: the energy's infimum on
//! the radius-rho sphere of X2 + X3 must exceed its supremum over the union
//! of the X1 ball and the X1 + X2 sphere of radius R > rho. The inf side is
//! estimated by projected gradient descent in the full space (each step costs
//! one resolvent solve); both sup sides live in low-dimensional eigenvector
//! coordinates, where the exact directional derivative is cheap and ascent
//! needs no linear solves.
//!
//! In the same coordinates, `sup_over_ekh` maximizes the energy over the
//! whole of E_{k+h} = X1 + X2 without constraints. With the weighted
//! nonlinearity active this sup is finite and sinks to zero as lambda climbs
//! to the group eigenvalue; with alpha identically zero and lambda inside the
//! spectral gap the quadratic form is unbounded along the group modes and the
//! ascent reports that instead of a number.

use crate::critical::split::SubspaceSplit;
use crate::error::{Result, SmsError};
use crate::functional::EnergyModel;
use crate::grid::Field;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct GeometryParams {
    /// Inner radius; chosen by line search when absent.
    pub rho: Option<f64>,
    /// Outer radius; defaults to 10 rho when absent.
    pub big_r: Option<f64>,
    /// Multistarts for each optimizer.
    pub budget: usize,
    pub seed: u64,
}

impl Default for GeometryParams {
    fn default() -> Self {
        GeometryParams {
            rho: None,
            big_r: None,
            budget: 6,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct GeometryReport {
    pub rho: f64,
    pub big_r: f64,
    /// Estimated min of J on the X2+X3 sphere of radius rho.
    pub inf_estimate: f64,
    /// Estimated max of J over the X1 ball of radius R.
    pub sup_ball: f64,
    /// Estimated max of J over the X1+X2 sphere of radius R.
    pub sup_sphere: f64,
    /// Max of the two sup estimates (the linking boundary is their union).
    pub sup_estimate: f64,
    /// inf_estimate - sup_estimate; the certificate holds when positive.
    pub margin: f64,
    /// True when lambda sits outside the open window between the eigenvalue
    /// below the group and the group eigenvalue, making the report advisory.
    pub advisory: bool,
    /// True when the radii came from the internal line search.
    pub auto_radii: bool,
    /// Energy evaluations spent (optimizer diagnostics).
    pub evaluations: usize,
}

/// Low-dimensional view of the energy on a span of eigenvectors. With the
/// mass-orthonormal eigenbasis, the squared norm of sum c_i e_i is
/// sum lambda_i c_i^2, so sphere and ball constraints are diagonal.
struct CoordProblem<'m, 'f> {
    model: &'m EnergyModel<'f>,
    basis: Vec<&'m Field>,
    lambdas: Vec<f64>,
    evals: std::cell::Cell<usize>,
}

impl<'m, 'f> CoordProblem<'m, 'f> {
    fn over_x12(model: &'m EnergyModel<'f>, split: &'m SubspaceSplit) -> Self {
        let mut basis: Vec<&Field> = split.x1.iter().collect();
        basis.extend(split.x2.iter());
        let mut lambdas = split.lambda_x1.clone();
        lambdas.extend_from_slice(&split.lambda_x2);
        CoordProblem {
            model,
            basis,
            lambdas,
            evals: std::cell::Cell::new(0),
        }
    }

    fn over_x1(model: &'m EnergyModel<'f>, split: &'m SubspaceSplit) -> Self {
        CoordProblem {
            model,
            basis: split.x1.iter().collect(),
            lambdas: split.lambda_x1.clone(),
            evals: std::cell::Cell::new(0),
        }
    }

    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn field(&self, c: &[f64]) -> Field {
        let n = self.model.dim();
        let mut w = vec![0.0; n];
        for (ci, e) in c.iter().zip(&self.basis) {
            if *ci != 0.0 {
                for (wi, ei) in w.iter_mut().zip(*e) {
                    *wi += ci * ei;
                }
            }
        }
        w
    }

    fn energy(&self, c: &[f64]) -> f64 {
        self.evals.set(self.evals.get() + 1);
        self.model.energy(&self.field(c))
    }

    /// Euclidean coordinate gradient dJ/dc_i via the exact directional
    /// derivative along each basis vector.
    fn gradient(&self, c: &[f64]) -> Vec<f64> {
        let w = self.field(c);
        self.basis
            .iter()
            .map(|e| self.model.directional_derivative(&w, e))
            .collect()
    }

    fn norm2_h(&self, c: &[f64]) -> f64 {
        c.iter()
            .zip(&self.lambdas)
            .map(|(ci, l)| l * ci * ci)
            .sum()
    }
}

/// Gradient ascent in coordinates, constrained to the closed ball of radius
/// `radius` in the subspace norm; returns the best value, its coordinates,
/// and whether any iterate escaped toward infinity (cannot happen here, the
/// ball is compact, but the signature is shared with the free ascent).
fn ascend_ball(cp: &CoordProblem, radius: f64, start: &[f64], max_iter: usize) -> (f64, Vec<f64>) {
    let project = |c: &mut Vec<f64>| {
        let n2 = cp.norm2_h(c);
        if n2 > radius * radius {
            let s = radius / n2.sqrt();
            for x in c.iter_mut() {
                *x *= s;
            }
        }
    };
    let mut c = start.to_vec();
    project(&mut c);
    let mut j = cp.energy(&c);
    let mut step: f64 = 1.0;
    for _ in 0..max_iter {
        let g = cp.gradient(&c);
        // ascend in the subspace metric: divide by lambda_i
        let d: Vec<f64> = g.iter().zip(&cp.lambdas).map(|(gi, l)| gi / l).collect();
        let dn2: f64 = g.iter().zip(&d).map(|(gi, di)| gi * di).sum();
        if dn2.sqrt() <= 1e-12 * (1.0 + j.abs()) {
            break;
        }
        step = (step * 2.0).min(1e6);
        let mut accepted = false;
        while step > 1e-16 {
            let mut trial: Vec<f64> = c.iter().zip(&d).map(|(ci, di)| ci + step * di).collect();
            project(&mut trial);
            let jt = cp.energy(&trial);
            let gain: f64 = trial
                .iter()
                .zip(&c)
                .zip(&g)
                .map(|((t, ci), gi)| gi * (t - ci))
                .sum();
            if jt >= j + 1e-4 * gain.max(0.0) && jt > j - 1e-18 * (1.0 + j.abs()) && jt >= j {
                c = trial;
                j = jt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (j, c)
}

/// Gradient ascent constrained to the sphere of radius `radius`.
fn ascend_sphere(cp: &CoordProblem, radius: f64, start: &[f64], max_iter: usize) -> (f64, Vec<f64>) {
    let retract = |c: &mut Vec<f64>| {
        let n2 = cp.norm2_h(c).max(f64::MIN_POSITIVE);
        let s = radius / n2.sqrt();
        for x in c.iter_mut() {
            *x *= s;
        }
    };
    let mut c = start.to_vec();
    retract(&mut c);
    let mut j = cp.energy(&c);
    let mut step: f64 = 1.0;
    for _ in 0..max_iter {
        let g = cp.gradient(&c);
        let d: Vec<f64> = g.iter().zip(&cp.lambdas).map(|(gi, l)| gi / l).collect();
        // remove the radial component in the subspace metric
        let radial: f64 = g.iter().zip(&c).map(|(gi, ci)| gi * ci).sum::<f64>() / (radius * radius);
        let t: Vec<f64> = d.iter().zip(&c).map(|(di, ci)| di - radial * ci).collect();
        let tn2: f64 = t
            .iter()
            .zip(&cp.lambdas)
            .map(|(ti, l)| l * ti * ti)
            .sum();
        if tn2.sqrt() <= 1e-12 * (1.0 + j.abs() + radius) {
            break;
        }
        step = (step * 2.0).min(1e6);
        let mut accepted = false;
        while step > 1e-16 {
            let mut trial: Vec<f64> = c.iter().zip(&t).map(|(ci, ti)| ci + step * ti).collect();
            retract(&mut trial);
            let jt = cp.energy(&trial);
            if jt > j {
                c = trial;
                j = jt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (j, c)
}

/// Unconstrained coordinate ascent with a divergence guard.
fn ascend_free(
    cp: &CoordProblem,
    start: &[f64],
    max_iter: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut c = start.to_vec();
    let mut j = cp.energy(&c);
    let mut step: f64 = 1.0;
    for _ in 0..max_iter {
        if cp.norm2_h(&c) > 1e16 || j > 1e12 {
            return Err(SmsError::Unbounded(format!(
                "ascent diverged: J = {j:.3e} at subspace norm {:.3e}; the \
                 quadratic part is not confined on this span (this is the \
                 degenerate regime where the nonlinear weight vanishes)",
                cp.norm2_h(&c).sqrt()
            )));
        }
        let g = cp.gradient(&c);
        let d: Vec<f64> = g.iter().zip(&cp.lambdas).map(|(gi, l)| gi / l).collect();
        let dn2: f64 = g.iter().zip(&d).map(|(gi, di)| gi * di).sum();
        if dn2.sqrt() <= 1e-13 * (1.0 + j.abs()) {
            break;
        }
        step = (step * 2.0).min(1e6);
        let mut accepted = false;
        while step > 1e-18 {
            let trial: Vec<f64> = c.iter().zip(&d).map(|(ci, di)| ci + step * di).collect();
            let jt = cp.energy(&trial);
            if jt > j {
                c = trial;
                j = jt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((j, c))
}

/// Deterministic start coordinates: axis hits at the given radius plus
/// seeded random directions up to `budget`.
fn coordinate_starts(
    cp: &CoordProblem,
    radius: f64,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let q = cp.dim();
    let mut starts = Vec::new();
    // mass on the last coordinate first: for X1+X2 spans that is the group
    // direction, the vertex the quadratic maximizer sits on
    for i in (0..q).rev() {
        for sign in [1.0, -1.0] {
            let mut c = vec![0.0; q];
            c[i] = sign * radius / cp.lambdas[i].sqrt();
            starts.push(c);
            if starts.len() >= budget.max(2) {
                return starts;
            }
        }
    }
    while starts.len() < budget {
        let c: Vec<f64> = (0..q)
            .map(|i| (rng.gen::<f64>() - 0.5) * radius / cp.lambdas[i].sqrt())
            .collect();
        starts.push(c);
    }
    starts
}

/// Projected gradient descent for the inf side: minimize J over the
/// radius-rho sphere of X2 + X3 in the full space. Returns (value, argmin,
/// resolvent solves).
fn minimize_on_complement_sphere(
    model: &EnergyModel,
    split: &SubspaceSplit,
    rho: f64,
    budget: usize,
    max_iter: usize,
    seed: u64,
) -> Result<(f64, Field, usize)> {
    let fp = model.forms;
    let n = fp.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda_k = split.lambda_k();
    let ek_h: Field = split.x2[0].iter().map(|x| x / lambda_k.sqrt()).collect();

    let mut starts: Vec<Field> = vec![ek_h.clone(), ek_h.iter().map(|x| -x).collect()];
    while starts.len() < budget.max(2) {
        let raw: Field = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let mut x3 = split.project_x3(fp, &raw);
        let nh = fp.norm_h1v(&x3);
        if nh > 1e-12 {
            for v in x3.iter_mut() {
                *v /= nh;
            }
            let mixed: Field = ek_h.iter().zip(&x3).map(|(a, b)| a + 0.7 * b).collect();
            starts.push(mixed);
        }
    }

    let retract = |w: &mut Field| {
        let nh = fp.norm_h1v(w).max(f64::MIN_POSITIVE);
        let s = rho / nh;
        for x in w.iter_mut() {
            *x *= s;
        }
    };

    let mut best_val = f64::INFINITY;
    let mut best_w: Field = vec![0.0; n];
    let mut solves = 0usize;
    for start in starts {
        let mut w = split.project_x23(fp, &start);
        if fp.norm_h1v(&w) <= 1e-12 {
            continue;
        }
        retract(&mut w);
        let mut j = model.energy(&w);
        let mut warm: Option<Field> = None;
        let mut step: f64 = 1.0;
        for it in 0..max_iter {
            let rhs = model.load(&w);
            let (x, _) = fp.apply_resolvent_with_start(&rhs, warm.as_deref())?;
            solves += 1;
            let g: Field = w.iter().zip(&x).map(|(a, b)| a - b).collect();
            warm = Some(x);
            let mut t = split.project_x23(fp, &g);
            let radial = fp.h1v(&t, &w) / (rho * rho);
            for (ti, wi) in t.iter_mut().zip(&w) {
                *ti -= radial * wi;
            }
            let tn = fp.norm_h1v(&t);
            if tn <= 1e-10 * (1.0 + rho + j.abs()) {
                break;
            }
            step = (step * 2.0).min(1e6);
            let mut accepted = false;
            while step > 1e-16 {
                let mut trial: Field =
                    w.iter().zip(&t).map(|(wi, ti)| wi - step * ti).collect();
                if it % 16 == 15 {
                    trial = split.project_x23(fp, &trial);
                }
                retract(&mut trial);
                let jt = model.energy(&trial);
                if jt < j {
                    w = trial;
                    j = jt;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if j < best_val {
            best_val = j;
            best_w = w;
        }
    }
    Ok((best_val, best_w, solves))
}

fn run_geometry_at(
    model: &EnergyModel,
    split: &SubspaceSplit,
    rho: f64,
    big_r: f64,
    budget: usize,
    max_iter: usize,
    seed: u64,
) -> Result<(f64, f64, f64, usize)> {
    let (inf_val, _, solves) =
        minimize_on_complement_sphere(model, split, rho, budget, max_iter, seed)?;

    let mut evals = solves;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);

    // X1 ball: the origin always belongs to it, so the sup starts at J(0) = 0.
    let mut sup_ball = 0.0f64;
    if split.dim_x1() > 0 {
        let cp = CoordProblem::over_x1(model, split);
        for start in coordinate_starts(&cp, big_r * 0.7, budget, &mut rng) {
            let (v, _) = ascend_ball(&cp, big_r, &start, max_iter);
            sup_ball = sup_ball.max(v);
        }
        evals += cp.evals.get();
    }

    let cp = CoordProblem::over_x12(model, split);
    let mut sup_sphere = f64::NEG_INFINITY;
    for start in coordinate_starts(&cp, big_r, budget, &mut rng) {
        let (v, _) = ascend_sphere(&cp, big_r, &start, max_iter);
        sup_sphere = sup_sphere.max(v);
    }
    evals += cp.evals.get();
    Ok((inf_val, sup_ball, sup_sphere, evals))
}

/// Estimates both sides of the linking inequality and reports the margin.
///
/// When the radii are absent, a line search tries log-spaced rho with
/// R = 10 rho, scores each candidate with a coarse run, and re-runs the best
/// at full budget. The window check lambda_(k-1) < lambda < lambda_k only
/// downgrades the report to advisory; the numbers are still computed.
pub fn verify_geometry(
    model: &EnergyModel,
    split: &SubspaceSplit,
    params: &GeometryParams,
) -> Result<GeometryReport> {
    if let (Some(r), Some(big)) = (params.rho, params.big_r) {
        if !(r < big) {
            return Err(SmsError::Contract(format!(
                "need rho < R, got rho = {r}, R = {big}"
            )));
        }
    }
    let lambda = model.lambda;
    let below = split.lambda_below().unwrap_or(f64::NEG_INFINITY);
    let advisory = !(below < lambda && lambda < split.lambda_k());

    let mut evaluations = 0usize;
    let auto_radii = params.rho.is_none();
    let (rho, big_r) = match (params.rho, params.big_r) {
        (Some(r), Some(big)) => (r, big),
        (Some(r), None) => (r, 10.0 * r),
        _ => {
            let mut best = (f64::NEG_INFINITY, 1.0);
            for i in 0..13 {
                let rho_c = 10f64.powf(-2.0 + 0.25 * i as f64);
                let (inf_c, ball_c, sphere_c, ev) = run_geometry_at(
                    model,
                    split,
                    rho_c,
                    10.0 * rho_c,
                    2,
                    120,
                    params.seed,
                )?;
                evaluations += ev;
                let margin = inf_c - ball_c.max(sphere_c);
                if margin > best.0 {
                    best = (margin, rho_c);
                }
            }
            (best.1, 10.0 * best.1)
        }
    };

    let (inf_estimate, sup_ball, sup_sphere, ev) = run_geometry_at(
        model,
        split,
        rho,
        big_r,
        params.budget,
        500,
        params.seed,
    )?;
    evaluations += ev;
    let sup_estimate = sup_ball.max(sup_sphere);
    Ok(GeometryReport {
        rho,
        big_r,
        inf_estimate,
        sup_ball,
        sup_sphere,
        sup_estimate,
        margin: inf_estimate - sup_estimate,
        advisory,
        auto_radii,
        evaluations,
    })
}

/// Maximizes J over E_{k+h} = X1 + X2 in eigenvector coordinates; the value
/// is nonnegative because the origin competes. Errors with `Unbounded` when
/// the ascent escapes, which is the documented outcome for a vanishing
/// nonlinear weight and lambda inside the gap.
pub fn sup_over_ekh(model: &EnergyModel, split: &SubspaceSplit) -> Result<(f64, Field)> {
    let cp = CoordProblem::over_x12(model, split);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut best = (0.0f64, vec![0.0; cp.dim()]);
    for start in coordinate_starts(&cp, 1.0, cp.dim() * 2 + 4, &mut rng) {
        let (v, c) = ascend_free(&cp, &start, 800)?;
        if v > best.0 {
            best = (v, c);
        }
    }
    let w = cp.field(&best.1);
    Ok((best.0, w))
}
