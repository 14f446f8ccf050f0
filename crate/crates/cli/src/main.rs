//! Binary `sms`: drives the multiplicity experiment from one JSON config.
//! Subcommands run successive slices of the pipeline (spectrum, nonlinearity
//! hypotheses, geometry sweep, slab gradient bound, single solve, full scan)
//! plus `verify-all`, which runs every check and exits nonzero on any
//! failure. Artifacts use pinned formatting so identical inputs give
//! identical bytes.

mod artifacts;
mod plot;

use artifacts::{fmt, write_text, CheckDoc, RunDoc};
use clap::{Args, Parser, Subcommand};
use sms_core::config::ExperimentConfig;
use sms_core::critical::{
    prepare, run_lambda, run_plan, ExperimentPlan, LambdaOutcome, StageControls, StageDepth,
};
use sms_core::error::{Result, SmsError};
use sms_core::grid::Mesh;
use sms_core::nonlinearity::{check_hypotheses, default_grid, growth_constants, GrowthConstants};
use sms_core::nonlinearity::HypothesisReport;
use sms_core::spectrum::{verify_spectral_axioms, SpectralReport};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "sms",
    about = "Multiplicity experiments for a semilinear Schrodinger equation on a grid"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON experiment configuration.
    config: PathBuf,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed override.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the spectrum, verify its defining identities, write eigen.csv.
    Spectrum(CommonArgs),
    /// Check the nonlinearity hypotheses and growth constants.
    #[command(name = "verify-f")]
    VerifyF(CommonArgs),
    /// Sweep the lambda window with the linking-geometry certificate.
    Geometry(CommonArgs),
    /// Sweep the window, adding the slab gradient lower bound.
    #[command(name = "nabla-check")]
    NablaCheck(CommonArgs),
    /// Full search at the lambda nearest the group eigenvalue.
    Solve(CommonArgs),
    /// Full search at every lambda of the window (the multiplicity experiment).
    Scan(CommonArgs),
    /// Run every check; nonzero exit when any fails.
    #[command(name = "verify-all")]
    VerifyAll(CommonArgs),
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let (name, args) = match &cli.cmd {
        Cmd::Spectrum(a) => ("spectrum", a),
        Cmd::VerifyF(a) => ("verify-f", a),
        Cmd::Geometry(a) => ("geometry", a),
        Cmd::NablaCheck(a) => ("nabla-check", a),
        Cmd::Solve(a) => ("solve", a),
        Cmd::Scan(a) => ("scan", a),
        Cmd::VerifyAll(a) => ("verify-all", a),
    };
    match dispatch(name, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let payload = serde_json::json!({
                "error": {"kind": error_kind(&e), "message": e.to_string()}
            });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}

/// SMS_THREADS caps the worker pool; unset or invalid means the default.
fn init_threads() {
    if let Ok(s) = std::env::var("SMS_THREADS") {
        if let Ok(n) = s.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn error_kind(e: &SmsError) -> &'static str {
    match e {
        SmsError::Config(_) => "config",
        SmsError::Hypothesis(_) => "hypothesis",
        SmsError::Contract(_) => "contract",
        SmsError::Solver { .. } => "solver",
        SmsError::Evaluation(_) => "evaluation",
        SmsError::Unbounded(_) => "unbounded",
    }
}

fn dispatch(name: &str, args: &CommonArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.display().to_string();
    }
    let out_dir = PathBuf::from(&cfg.output_dir);
    match name {
        "spectrum" => cmd_spectrum(&cfg, &out_dir),
        "verify-f" => cmd_verify_f(&cfg, &out_dir),
        "geometry" => cmd_sweep(&cfg, &out_dir, "geometry", StageDepth::Geometry),
        "nabla-check" => cmd_sweep(&cfg, &out_dir, "nabla-check", StageDepth::GradientBound),
        "solve" => cmd_solve(&cfg, &out_dir),
        "scan" => cmd_sweep(&cfg, &out_dir, "scan", StageDepth::Full),
        "verify-all" => cmd_verify_all(&cfg, &out_dir),
        _ => unreachable!("clap restricts the subcommand set"),
    }
}

/// Values of a field along the first axis through the box center; the
/// profile plotted for eigenfunctions and solutions.
fn axis_slice(mesh: &Mesh, w: &[f64]) -> Vec<(f64, f64)> {
    let d = mesh.dimension();
    let mid = mesh.nodes_per_axis() / 2;
    (0..mesh.len())
        .filter(|&i| {
            let mi = mesh.multi_index(i);
            (1..d).all(|axis| mi[axis] == mid)
        })
        .map(|i| (mesh.node(i)[0], w[i]))
        .collect()
}

fn write_plot(path: &Path, chart: Option<String>, what: &str) -> Result<()> {
    match chart {
        Some(svg) => write_text(path, &svg),
        None => {
            eprintln!("warning: nothing to plot for {what}; skipped {}", path.display());
            Ok(())
        }
    }
}

fn eigen_plot(mesh: &Mesh, plan_values: &[f64], vectors: &[Vec<f64>]) -> Option<String> {
    let series: Vec<plot::Series> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| plot::Series {
            name: format!("e{} ({:.4e})", i + 1, plan_values[i]),
            points: axis_slice(mesh, v),
        })
        .collect();
    plot::line_chart("eigenfunction profiles", "x1", "value", &series)
}

fn spectral_check_docs(rep: &SpectralReport) -> Vec<CheckDoc> {
    rep.checks
        .iter()
        .map(|c| CheckDoc {
            name: c.name.clone(),
            value: c.value,
            pass: c.pass,
        })
        .collect()
}

fn hypothesis_check_docs(rep: &HypothesisReport, gc: &GrowthConstants) -> Vec<CheckDoc> {
    let mut docs: Vec<CheckDoc> = rep
        .checks
        .iter()
        .map(|c| CheckDoc {
            name: c.name.clone(),
            value: c.value,
            pass: c.pass,
        })
        .collect();
    docs.push(CheckDoc {
        name: "growth lower bound slack".into(),
        value: gc.lower_bound_slack,
        pass: gc.lower_bound_pass,
    });
    docs
}

fn cmd_spectrum(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let (mesh, fp) = cfg.build_problem()?;
    let mut opts = sms_core::spectrum::SpectrumOptions::new(cfg.spectrum.m);
    opts.tol = cfg.spectrum.tol;
    opts.seed = cfg.seed;
    let ed = sms_core::spectrum::compute_eigenpairs(&fp, &opts)?;
    let checks = verify_spectral_axioms(&ed, &fp);

    write_text(&out.join("eigen.csv"), &artifacts::eigen_csv(&ed))?;
    write_text(&out.join("spectral_checks.csv"), &artifacts::spectral_csv(&checks))?;
    let mut doc = RunDoc::new("spectrum", cfg);
    doc.spectral_checks = Some(spectral_check_docs(&checks));
    write_text(&out.join("run.json"), &doc.to_json()?)?;
    write_plot(
        &out.join("plots").join("eigenfunctions.svg"),
        eigen_plot(&mesh, &ed.values, &ed.vectors),
        "eigenfunctions",
    )?;

    println!("{:>3}  {:>24}  {:>10}  group", "k", "lambda", "residual");
    for (i, (lam, res)) in ed.values.iter().zip(&ed.residuals).enumerate() {
        let k = i + 1;
        let (gk, gh) = ed
            .groups
            .iter()
            .copied()
            .find(|(s, e)| *s <= k && k <= s + e)
            .unwrap_or((k, 0));
        println!("{k:>3}  {:>24}  {res:>10.2e}  ({gk},{gh})", fmt(*lam));
    }
    for c in &checks.checks {
        println!(
            "check {:<40} {:>12.3e}  {}",
            c.name,
            c.value,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(())
}

fn cmd_verify_f(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let nl = cfg.to_nonlinearity()?;
    let grid = default_grid();
    let rep = check_hypotheses(&nl, &grid, 1e-4)?;
    let gc = growth_constants(&nl, 0.1, &grid)?;

    write_text(&out.join("hypotheses.csv"), &artifacts::hypotheses_csv(&rep, &gc))?;
    let mut doc = RunDoc::new("verify-f", cfg);
    doc.hypothesis_checks = Some(hypothesis_check_docs(&rep, &gc));
    write_text(&out.join("run.json"), &doc.to_json()?)?;

    for c in &rep.checks {
        println!(
            "{:<44} {:>12.3e}  {}  {}",
            c.name,
            c.value,
            if c.pass { "pass" } else { "FAIL" },
            c.detail
        );
    }
    println!(
        "growth constants: a1_eps={:.6e} a2={:.6e} a2_eps={:.6e} a3={:.6e} a4={:.6e}",
        gc.a1_eps, gc.a2, gc.a2_eps, gc.a3, gc.a4
    );
    if !rep.all_pass || !gc.lower_bound_pass {
        let failed: Vec<&str> = rep
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .chain((!gc.lower_bound_pass).then_some("growth lower bound"))
            .collect();
        return Err(SmsError::Hypothesis(format!(
            "nonlinearity fails: {}",
            failed.join(", ")
        )));
    }
    println!("all hypothesis checks passed");
    Ok(())
}

/// Widest distance below the group at which three distinct classes survived,
/// or None if no lambda in the window reached three.
fn largest_gap_with_three(plan: &ExperimentPlan, outcomes: &[LambdaOutcome]) -> Option<f64> {
    let lambda_k = plan.split.lambda_k();
    outcomes
        .iter()
        .filter(|o| o.n_distinct >= 3)
        .map(|o| lambda_k - o.lambda)
        .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.max(g))))
}

/// Shared emission for the sweep-style commands: eigen table, report rows,
/// solution profiles, provenance, and plots.
fn emit_sweep(
    command: &str,
    cfg: &ExperimentConfig,
    out: &Path,
    plan: &ExperimentPlan,
    outcomes: &[LambdaOutcome],
) -> Result<()> {
    write_text(&out.join("eigen.csv"), &artifacts::eigen_csv(&plan.eigen))?;
    write_text(&out.join("report.csv"), &artifacts::report_csv(outcomes))?;

    let (docs, profiles) = artifacts::outcome_docs(outcomes);
    for (id, j, c_idx) in &profiles {
        let w = &outcomes[*j].classes[*c_idx].representative;
        write_text(
            &out.join("solutions").join(format!("sol_{id}.csv")),
            &artifacts::solution_csv(&plan.mesh, w),
        )?;
    }

    let mut doc = RunDoc::new(command, cfg);
    doc.group = Some(plan.group);
    doc.mu = Some(plan.mu);
    doc.window = Some(plan.window);
    doc.degenerate_alpha = Some(plan.degenerate_alpha);
    doc.largest_gap_with_three = largest_gap_with_three(plan, outcomes);
    doc.outcomes = Some(docs);
    write_text(&out.join("run.json"), &doc.to_json()?)?;

    if outcomes.is_empty() {
        eprintln!("warning: empty report; no plots emitted");
        return Ok(());
    }
    let margin_series = plot::Series {
        name: "margin".into(),
        points: outcomes
            .iter()
            .filter_map(|o| o.geometry.as_ref().map(|g| (o.lambda, g.margin)))
            .collect(),
    };
    write_plot(
        &out.join("plots").join("margin.svg"),
        plot::line_chart("linking margin vs lambda", "lambda", "margin", &[margin_series]),
        "margin curve",
    )?;
    write_plot(
        &out.join("plots").join("eigenfunctions.svg"),
        eigen_plot(&plan.mesh, &plan.eigen.values, &plan.eigen.vectors),
        "eigenfunctions",
    )?;

    // Solution profiles of the best outcome (most distinct; ties toward
    // lambda nearest the group eigenvalue, i.e. the last row).
    let best = outcomes
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| {
            a.n_distinct
                .cmp(&b.n_distinct)
                .then(i.cmp(j))
        })
        .map(|(_, o)| o);
    if let Some(best) = best {
        let series: Vec<plot::Series> = best
            .classes
            .iter()
            .filter(|c| c.nontrivial)
            .enumerate()
            .map(|(i, c)| plot::Series {
                name: format!("w{} (J={:.3e})", i + 1, c.energy),
                points: axis_slice(&plan.mesh, &c.representative),
            })
            .collect();
        if series.is_empty() {
            eprintln!("warning: no nontrivial solutions; solution plot skipped");
        } else {
            write_plot(
                &out.join("plots").join("solutions.svg"),
                plot::line_chart(
                    &format!("solution profiles at lambda = {:.9e}", best.lambda),
                    "x1",
                    "value",
                    &series,
                ),
                "solutions",
            )?;
        }
    }

    for o in outcomes {
        let margin = o.geometry.as_ref().map_or(f64::NAN, |g| g.margin);
        println!(
            "lambda {:>22}  margin {:>12.4e}  nabla {:>12.4e}  distinct {}  {}",
            fmt(o.lambda),
            margin,
            o.nabla_inf.unwrap_or(f64::NAN),
            o.n_distinct,
            artifacts::certs_label(o)
        );
        for err in &o.errors {
            println!("    note: {err}");
        }
    }
    Ok(())
}

fn cmd_sweep(cfg: &ExperimentConfig, out: &Path, command: &str, depth: StageDepth) -> Result<()> {
    let plan = prepare(cfg)?;
    let ctl = StageControls::from_config(cfg);
    let outcomes = run_plan(&plan, &ctl, depth);
    emit_sweep(command, cfg, out, &plan, &outcomes)
}

fn cmd_solve(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let plan = prepare(cfg)?;
    let mut ctl = StageControls::from_config(cfg);
    let last = plan.lambdas.len() - 1;
    ctl.seed = cfg.seed.wrapping_add(last as u64);
    let lambda = plan.lambdas[last];
    let model = plan.model_at(lambda)?;
    let outcome = run_lambda(&model, &plan.mesh, &plan.split, &ctl, StageDepth::Full);
    emit_sweep("solve", cfg, out, &plan, &[outcome])
}

fn cmd_verify_all(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let plan = prepare(cfg)?;
    let axioms = verify_spectral_axioms(&plan.eigen, &plan.fp);
    let nl = cfg.to_nonlinearity()?;
    let grid = default_grid();
    let hyp = check_hypotheses(&nl, &grid, 1e-4)?;
    let gc = growth_constants(&nl, 0.1, &grid)?;
    let ctl = StageControls::from_config(cfg);
    let outcomes = run_plan(&plan, &ctl, StageDepth::Full);

    write_text(&out.join("spectral_checks.csv"), &artifacts::spectral_csv(&axioms))?;
    write_text(&out.join("hypotheses.csv"), &artifacts::hypotheses_csv(&hyp, &gc))?;
    emit_sweep("verify-all", cfg, out, &plan, &outcomes)?;

    // Provenance for this command carries every check section; rewrite
    // run.json over the sweep's copy with the extra sections attached.
    let (docs, _) = artifacts::outcome_docs(&outcomes);
    let mut doc = RunDoc::new("verify-all", cfg);
    doc.group = Some(plan.group);
    doc.mu = Some(plan.mu);
    doc.window = Some(plan.window);
    doc.degenerate_alpha = Some(plan.degenerate_alpha);
    doc.largest_gap_with_three = largest_gap_with_three(&plan, &outcomes);
    doc.spectral_checks = Some(spectral_check_docs(&axioms));
    doc.hypothesis_checks = Some(hypothesis_check_docs(&hyp, &gc));
    doc.outcomes = Some(docs);
    write_text(&out.join("run.json"), &doc.to_json()?)?;

    let mut failures: Vec<String> = Vec::new();
    for c in axioms.checks.iter().filter(|c| !c.pass) {
        failures.push(format!("spectral: {}", c.name));
    }
    for c in hyp.checks.iter().filter(|c| !c.pass) {
        failures.push(format!("hypothesis: {}", c.name));
    }
    if !gc.lower_bound_pass {
        failures.push("hypothesis: growth lower bound".into());
    }
    for o in &outcomes {
        if o.failed_stages > 0 {
            failures.push(format!(
                "lambda {:.9e}: {} failed stages",
                o.lambda, o.failed_stages
            ));
        }
        if o.applicable && !plan.degenerate_alpha {
            match &o.geometry {
                Some(g) if g.margin > 0.0 => {}
                Some(g) => failures.push(format!(
                    "lambda {:.9e}: linking margin {:.3e} not positive",
                    o.lambda, g.margin
                )),
                None => failures.push(format!("lambda {:.9e}: no geometry report", o.lambda)),
            }
        }
    }
    if failures.is_empty() {
        println!("verify-all: all checks passed");
        Ok(())
    } else {
        Err(SmsError::Evaluation(format!(
            "verify-all found {} failures: {}",
            failures.len(),
            failures.join("; ")
        )))
    }
}
