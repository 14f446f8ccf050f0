//! End-to-end multiplicity experiment: spectrum, subspace splitting, then per
//! lambda inside the window below the group eigenvalue the full certificate
//! chain (linking geometry, slab gradient bound, deflated Newton search,
//! classification). Lambda grid points run in parallel and are merged in
//! index order, so the report is deterministic regardless of thread count.

use crate::config::{ExperimentConfig, TargetGroup};
use crate::critical::classify::{classify_solutions, SolutionClass};
use crate::critical::geometry::{sup_over_ekh, verify_geometry, GeometryParams, GeometryReport};
use crate::critical::nabla::estimate_nabla_condition;
use crate::critical::newton::{deflated_newton, seed_generator, solution_distance};
use crate::critical::split::{split_subspaces, SubspaceSplit};
use crate::error::{Result, SmsError};
use crate::functional::{CriticalPointRecord, EnergyModel};
use crate::grid::{Field, Mesh};
use crate::nonlinearity::Nonlinearity;
use crate::operators::FormPair;
use crate::spectrum::{compute_eigenpairs, EigenDecomposition, SpectrumOptions};
use rayon::prelude::*;
use serde::Serialize;

/// Knobs for the per-lambda stage chain, normally taken from the config's
/// solver block.
#[derive(Debug, Clone)]
pub struct StageControls {
    /// Multistarts for the geometry and slab optimizers.
    pub budget: usize,
    /// Newton seeds per round.
    pub seed_count: usize,
    /// Rounds of rerunning the seeds with found solutions deflated.
    pub deflation_rounds: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub seed: u64,
}

impl StageControls {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        StageControls {
            budget: cfg.solver.budget,
            seed_count: cfg.solver.seed_count,
            deflation_rounds: cfg.solver.deflation_rounds,
            newton_tol: cfg.solver.newton_tol,
            newton_max_iter: cfg.solver.newton_max_iter,
            seed: cfg.seed,
        }
    }
}

/// Compact view of one Newton record for provenance files; the nodal profile
/// stays with the classified solution, not here.
#[derive(Debug, Clone, Serialize)]
pub struct RecordSummary {
    pub id: usize,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub energy: f64,
    pub note: String,
}

impl From<&CriticalPointRecord> for RecordSummary {
    fn from(rec: &CriticalPointRecord) -> Self {
        RecordSummary {
            id: rec.id,
            converged: rec.converged,
            iterations: rec.iterations,
            residual: rec.residual,
            energy: rec.energy,
            note: rec.note.clone(),
        }
    }
}

/// Everything the certificate chain produced at one spectral parameter.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaOutcome {
    pub lambda: f64,
    /// False when lambda sits outside the admissible window between the
    /// eigenvalue below the group and the group eigenvalue; search stages
    /// are skipped then.
    pub applicable: bool,
    pub geometry: Option<GeometryReport>,
    /// Max of the energy over the span of the modes up to the group; absent
    /// when the ascent diverged or was skipped.
    pub sup_ekh: Option<f64>,
    /// Energy slab [eta_lo, eta_hi] bracketing the two sphere-side levels.
    pub eta: Option<(f64, f64)>,
    /// Estimated inf of the projected gradient norm over the slab.
    pub nabla_inf: Option<f64>,
    pub nabla_feasible: usize,
    pub classes: Vec<SolutionClass>,
    pub records: Vec<RecordSummary>,
    /// Count of distinct nontrivial solutions.
    pub n_distinct: usize,
    /// Notes and failures; the chain continues past recoverable ones.
    pub errors: Vec<String>,
    /// How many entries of `errors` are hard stage failures rather than
    /// benign notes (inapplicable window, vanishing weight, empty slab).
    pub failed_stages: usize,
}

impl LambdaOutcome {
    fn empty(lambda: f64) -> Self {
        LambdaOutcome {
            lambda,
            applicable: true,
            geometry: None,
            sup_ekh: None,
            eta: None,
            nabla_inf: None,
            nabla_feasible: 0,
            classes: Vec::new(),
            records: Vec::new(),
            n_distinct: 0,
            errors: Vec::new(),
            failed_stages: 0,
        }
    }

    fn fail(&mut self, msg: String) {
        self.errors.push(msg);
        self.failed_stages += 1;
    }
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub eigen: EigenDecomposition,
    /// Target multiplicity group (k, h), 1-based.
    pub group: (usize, usize),
    /// Window half-length below lambda_k.
    pub mu: f64,
    /// The scanned interval (lambda_k - mu, lambda_k).
    pub window: (f64, f64),
    /// True when the nonlinear weight vanishes identically; the problem is
    /// then linear and no nontrivial solution exists off the spectrum.
    pub degenerate_alpha: bool,
    /// One entry per lambda, ascending toward lambda_k.
    pub outcomes: Vec<LambdaOutcome>,
    /// Largest lambda_k - lambda at which three distinct nontrivial
    /// solutions were still found.
    pub largest_gap_with_three: Option<f64>,
}

/// How far down the certificate chain to go at one lambda.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageDepth {
    /// Linking geometry only.
    Geometry,
    /// Geometry, low-mode sup, energy slab, and the gradient lower bound.
    GradientBound,
    /// Everything, including the Newton search and classification.
    Full,
}

/// Runs the certificate chain at one lambda, down to the requested depth.
/// Stage failures are recorded and later stages that can still run do; the
/// function itself never errs so one bad lambda cannot sink a scan.
pub fn run_lambda(
    model: &EnergyModel,
    mesh: &Mesh,
    split: &SubspaceSplit,
    ctl: &StageControls,
    depth: StageDepth,
) -> LambdaOutcome {
    let fp = model.forms;
    let mut out = LambdaOutcome::empty(model.lambda);

    let params = GeometryParams {
        rho: None,
        big_r: None,
        budget: ctl.budget,
        seed: ctl.seed,
    };
    let geom = match verify_geometry(model, split, &params) {
        Ok(g) => g,
        Err(e) => {
            out.fail(format!("geometry stage failed: {e}"));
            return out;
        }
    };
    if geom.advisory {
        out.applicable = false;
        out.errors.push(
            "lambda lies outside the window below the group eigenvalue; \
             certificate stages skipped"
                .into(),
        );
        out.geometry = Some(geom);
        return out;
    }
    let rho = geom.rho;
    let big_r = geom.big_r;
    let inf_est = geom.inf_estimate;
    out.geometry = Some(geom);
    if depth == StageDepth::Geometry {
        return out;
    }

    if model.alpha_is_zero() {
        out.errors.push(
            "nonlinear weight vanishes identically: the problem is linear \
             and only the zero solution exists off the spectrum"
                .into(),
        );
    } else {
        match sup_over_ekh(model, split) {
            Ok((v, _)) => out.sup_ekh = Some(v),
            Err(e) => out.fail(format!("sup over the low modes failed: {e}")),
        }
        let lo_raw = match out.sup_ekh {
            Some(s) => s.min(inf_est),
            None => inf_est,
        };
        let hi_raw = match out.sup_ekh {
            Some(s) => s.max(inf_est),
            None => inf_est,
        };
        if hi_raw > 0.0 {
            let eta_lo = if lo_raw > 0.0 { lo_raw / 10.0 } else { 0.0 };
            let eta_hi = 10.0 * hi_raw;
            out.eta = Some((eta_lo, eta_hi));
            match estimate_nabla_condition(
                model,
                split,
                eta_lo,
                eta_hi,
                rho / 4.0,
                ctl.budget,
                ctl.seed.wrapping_add(1),
            ) {
                Ok(Some(est)) => {
                    out.nabla_inf = Some(est.value);
                    out.nabla_feasible = est.feasible_samples;
                }
                Ok(None) => out
                    .errors
                    .push("no probe entered the energy slab; gradient bound vacuous".into()),
                Err(e) => out.fail(format!("gradient bound stage failed: {e}")),
            }
        } else {
            out.errors.push(format!(
                "energy slab collapsed: both level estimates are nonpositive \
                 (inf = {inf_est:.3e})"
            ));
        }
    }
    if depth == StageDepth::GradientBound {
        return out;
    }

    let seeds = match seed_generator(split, fp, rho, big_r, ctl.seed_count) {
        Ok(s) => s,
        Err(e) => {
            out.fail(format!("seed generation failed: {e}"));
            return out;
        }
    };
    let zero = vec![0.0; fp.dim()];
    let mut known: Vec<Field> = vec![zero];
    let mut all_records: Vec<CriticalPointRecord> = Vec::new();
    for round in 0..ctl.deflation_rounds {
        let recs = match deflated_newton(
            model,
            mesh,
            &seeds,
            &known,
            ctl.newton_tol,
            ctl.newton_max_iter,
        ) {
            Ok(r) => r,
            Err(e) => {
                out.fail(format!("newton round {round} failed: {e}"));
                break;
            }
        };
        let mut added = 0usize;
        for mut rec in recs {
            rec.id += round * ctl.seed_count;
            if rec.converged
                && known
                    .iter()
                    .all(|k| solution_distance(fp, k, &rec.w) > 1e-3)
            {
                known.push(rec.w.clone());
                added += 1;
            }
            all_records.push(rec);
        }
        if added == 0 {
            break;
        }
    }

    out.classes = classify_solutions(&all_records, fp, 1e-3, out.eta);
    out.n_distinct = out.classes.iter().filter(|c| c.nontrivial).count();
    out.records = all_records.iter().map(RecordSummary::from).collect();
    out
}

/// Picks the target group: the first detected multiplicity group past the
/// ground state for "auto", or the explicit (k, h) request.
fn resolve_group(ed: &EigenDecomposition, target: &TargetGroup) -> Result<(usize, usize)> {
    match target {
        TargetGroup::Named(_) => ed
            .groups
            .iter()
            .copied()
            .find(|(k, _)| *k >= 2)
            .ok_or_else(|| {
                SmsError::Hypothesis(
                    "no multiplicity group past the ground state within the \
                     computed spectrum; raise spectrum.m"
                        .into(),
                )
            }),
        TargetGroup::Group { k, h } => {
            if k + h + 1 > ed.len() {
                return Err(SmsError::Config(format!(
                    "target group ({k}, {h}) needs eigenpair {} above it but \
                     spectrum.m = {}; raise spectrum.m",
                    k + h + 1,
                    ed.len()
                )));
            }
            Ok((*k, *h))
        }
    }
}

/// Lambda grid ascending toward lambda_k: gaps mu * (1, 1/2, 1/5) scaled
/// down by decades, so a five-point window probes two orders of magnitude.
fn lambda_grid(lambda_k: f64, mu: f64, count: usize) -> Vec<f64> {
    const PATTERN: [f64; 3] = [1.0, 0.5, 0.2];
    (0..count)
        .map(|j| {
            let t = PATTERN[j % 3] / 10f64.powi((j / 3) as i32);
            lambda_k - mu * t
        })
        .collect()
}

/// Everything the scan needs after setup: assembled forms, spectrum, split,
/// and the lambda grid. Partial drivers (geometry-only sweeps, single-lambda
/// solves) reuse this instead of re-deriving the window.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub mesh: Mesh,
    pub fp: FormPair,
    pub alpha: Field,
    pub nonlinearity: Nonlinearity,
    pub eigen: EigenDecomposition,
    pub split: SubspaceSplit,
    pub group: (usize, usize),
    pub mu: f64,
    pub window: (f64, f64),
    pub lambdas: Vec<f64>,
    pub degenerate_alpha: bool,
}

impl ExperimentPlan {
    /// Energy model at one lambda, borrowing the plan's forms.
    pub fn model_at(&self, lambda: f64) -> Result<EnergyModel<'_>> {
        EnergyModel::new(&self.fp, self.alpha.clone(), self.nonlinearity.clone(), lambda)
    }
}

/// Setup shared by every driver: mesh, forms, spectrum, target group, split,
/// and the lambda window. Fails on mesh, spectrum, or splitting problems;
/// per-lambda trouble is left to the scan stages.
pub fn prepare(cfg: &ExperimentConfig) -> Result<ExperimentPlan> {
    let (mesh, fp) = cfg.build_problem()?;
    let alpha = mesh.sample_field(&cfg.alpha)?;
    if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(SmsError::Hypothesis(
            "alpha must sample to nonnegative finite values".into(),
        ));
    }
    let nl = cfg.to_nonlinearity()?;

    let mut opts = SpectrumOptions::new(cfg.spectrum.m);
    opts.tol = cfg.spectrum.tol;
    opts.seed = cfg.seed;
    let ed = compute_eigenpairs(&fp, &opts)?;

    let group = resolve_group(&ed, &cfg.target)?;
    let split = split_subspaces(&ed, group)?;
    let lambda_k = split.lambda_k();

    let gap_above = split.lambda_above.expect("split guarantees a ceiling") - lambda_k;
    let gap_below = lambda_k - split.lambda_below().unwrap_or(0.0);
    let mu = (cfg.window.fraction * gap_above).min(0.99 * gap_below);

    let lambdas = match &cfg.window.lambdas {
        Some(explicit) => explicit.clone(),
        None => lambda_grid(lambda_k, mu, cfg.window.count),
    };
    let degenerate_alpha = alpha.iter().all(|a| *a == 0.0);

    Ok(ExperimentPlan {
        mesh,
        fp,
        alpha,
        nonlinearity: nl,
        eigen: ed,
        split,
        group,
        mu,
        window: (lambda_k - mu, lambda_k),
        degenerate_alpha,
        lambdas,
    })
}

/// Runs the certificate chain at every lambda of the plan, in parallel,
/// merged in grid order. The per-lambda RNG stream is `seed + grid index`.
pub fn run_plan(plan: &ExperimentPlan, ctl: &StageControls, depth: StageDepth) -> Vec<LambdaOutcome> {
    let mut outcomes: Vec<(usize, LambdaOutcome)> = plan
        .lambdas
        .par_iter()
        .enumerate()
        .map(|(j, &lambda)| {
            let mut ctl_j = ctl.clone();
            ctl_j.seed = ctl.seed.wrapping_add(j as u64);
            let outcome = match plan.model_at(lambda) {
                Ok(model) => run_lambda(&model, &plan.mesh, &plan.split, &ctl_j, depth),
                Err(e) => {
                    let mut out = LambdaOutcome::empty(lambda);
                    out.applicable = false;
                    out.fail(format!("model construction failed: {e}"));
                    out
                }
            };
            (j, outcome)
        })
        .collect();
    outcomes.sort_by_key(|(j, _)| *j);
    outcomes.into_iter().map(|(_, o)| o).collect()
}

/// Full pipeline: spectrum, split, lambda scan with every certificate stage
/// per grid point. Stage errors are recorded per lambda and the scan
/// continues; only setup failures (mesh, spectrum, splitting) abort.
pub fn multiplicity_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let plan = prepare(cfg)?;
    let ctl = StageControls::from_config(cfg);
    let outcomes = run_plan(&plan, &ctl, StageDepth::Full);
    let lambda_k = plan.split.lambda_k();

    let largest_gap_with_three = outcomes
        .iter()
        .filter(|o| o.n_distinct >= 3)
        .map(|o| lambda_k - o.lambda)
        .fold(None, |acc: Option<f64>, g| {
            Some(acc.map_or(g, |a| a.max(g)))
        });

    Ok(ExperimentReport {
        eigen: plan.eigen,
        group: plan.group,
        mu: plan.mu,
        window: plan.window,
        degenerate_alpha: plan.degenerate_alpha,
        outcomes,
        largest_gap_with_three,
    })
}
