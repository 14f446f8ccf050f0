//! Deterministic artifact emission: CSV tables with 17-significant-digit
//! floats, nodal profile files, and the run.json provenance document whose
//! config echo parses back to the exact configuration that ran.

use serde::Serialize;
use sms_core::config::ExperimentConfig;
use sms_core::critical::{BandPlacement, GeometryReport, LambdaOutcome, RecordSummary};
use sms_core::error::{Result, SmsError};
use sms_core::grid::Mesh;
use sms_core::nonlinearity::{GrowthConstants, HypothesisReport};
use sms_core::spectrum::{EigenDecomposition, SpectralReport};
use std::fs;
use std::path::Path;

/// Fixed float formatting: 17 significant digits survive a f64 round trip,
/// so goldens are bit-stable across platforms.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)
            .map_err(|e| SmsError::Evaluation(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text)
        .map_err(|e| SmsError::Evaluation(format!("cannot write {}: {e}", path.display())))
}

/// eigen.csv: one row per eigenpair with its residual and group label.
pub fn eigen_csv(ed: &EigenDecomposition) -> String {
    let mut out = String::from("k,lambda,residual,group_k,group_h\n");
    for (i, (lam, res)) in ed.values.iter().zip(&ed.residuals).enumerate() {
        let k = i + 1;
        let (gk, gh) = ed
            .groups
            .iter()
            .copied()
            .find(|(start, extra)| *start <= k && k <= start + extra)
            .unwrap_or((k, 0));
        out.push_str(&format!("{k},{},{},{gk},{gh}\n", fmt(*lam), fmt(*res)));
    }
    out
}

/// Compact certificate summary for one lambda row of report.csv.
pub fn certs_label(out: &LambdaOutcome) -> String {
    if !out.applicable {
        return "inapplicable".into();
    }
    let mut parts = Vec::new();
    if let Some(g) = &out.geometry {
        parts.push(format!("margin{}", if g.margin > 0.0 { "+" } else { "-" }));
    }
    if let Some(v) = out.nabla_inf {
        parts.push(format!("nabla{}", if v > 0.0 { "+" } else { "-" }));
    }
    let nontrivial: Vec<_> = out.classes.iter().filter(|c| c.nontrivial).collect();
    if !nontrivial.is_empty() {
        let inside = nontrivial
            .iter()
            .filter(|c| c.band == BandPlacement::Inside)
            .count();
        let above = nontrivial
            .iter()
            .filter(|c| c.band == BandPlacement::Above)
            .count();
        let decay = nontrivial.iter().filter(|c| c.decay_ok).count();
        let nonneg = nontrivial.iter().filter(|c| c.nonnegative).count();
        parts.push(format!("band={inside}/{above}", ));
        parts.push(format!("decay={decay}/{}", nontrivial.len()));
        parts.push(format!("nonneg={nonneg}/{}", nontrivial.len()));
    }
    if out.failed_stages > 0 {
        parts.push(format!("failed={}", out.failed_stages));
    }
    if parts.is_empty() {
        "none".into()
    } else {
        parts.join(";")
    }
}

/// report.csv: the per-lambda certificate table.
pub fn report_csv(outcomes: &[LambdaOutcome]) -> String {
    let mut out = String::from("lambda,margin,nabla_inf,n_distinct,certs\n");
    for o in outcomes {
        let margin = o.geometry.as_ref().map_or(f64::NAN, |g| g.margin);
        let nabla = o.nabla_inf.unwrap_or(f64::NAN);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(o.lambda),
            fmt(margin),
            fmt(nabla),
            o.n_distinct,
            certs_label(o)
        ));
    }
    out
}

/// Nodal profile of one solution: coordinates then value, row per node.
pub fn solution_csv(mesh: &Mesh, w: &[f64]) -> String {
    let d = mesh.dimension();
    let mut out = String::new();
    out.push_str(&["x1", "x2", "x3"][..d].join(","));
    out.push_str(",value\n");
    for (idx, val) in w.iter().enumerate() {
        let x = mesh.node(idx);
        for c in &x[..d] {
            out.push_str(&fmt(*c));
            out.push(',');
        }
        out.push_str(&fmt(*val));
        out.push('\n');
    }
    out
}

/// hypotheses.csv: the nonlinearity checks plus the growth constants.
pub fn hypotheses_csv(rep: &HypothesisReport, gc: &GrowthConstants) -> String {
    let mut out = String::from("name,value,pass,detail\n");
    for c in &rep.checks {
        out.push_str(&format!(
            "{},{},{},{}\n",
            c.name,
            fmt(c.value),
            c.pass,
            c.detail.replace(',', ";")
        ));
    }
    let consts = [
        ("a1_eps", gc.a1_eps, true),
        ("a2", gc.a2, true),
        ("a2_eps", gc.a2_eps, true),
        ("a3", gc.a3, true),
        ("a4", gc.a4, true),
        ("integrated_slack", gc.integrated_slack, true),
        ("lower_bound_slack", gc.lower_bound_slack, gc.lower_bound_pass),
    ];
    for (name, value, pass) in consts {
        out.push_str(&format!("{name},{},{pass},growth constant\n", fmt(value)));
    }
    out
}

/// spectral_checks.csv: re-measured decomposition identities.
pub fn spectral_csv(rep: &SpectralReport) -> String {
    let mut out = String::from("name,value,threshold,pass\n");
    for c in &rep.checks {
        out.push_str(&format!(
            "{},{},{},{}\n",
            c.name,
            fmt(c.value),
            fmt(c.threshold),
            c.pass
        ));
    }
    out
}

#[derive(Serialize)]
pub struct CheckDoc {
    pub name: String,
    pub value: f64,
    pub pass: bool,
}

#[derive(Serialize)]
pub struct ClassDoc {
    pub id: usize,
    pub members: Vec<usize>,
    pub energy: f64,
    pub residual: f64,
    pub l2_norm: f64,
    pub min_value: f64,
    pub shell_ratio: f64,
    pub nontrivial: bool,
    pub nonnegative: bool,
    pub decay_ok: bool,
    pub band: BandPlacement,
}

#[derive(Serialize)]
pub struct OutcomeDoc {
    pub lambda: f64,
    pub applicable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryReport>,
    pub sup_ekh: Option<f64>,
    pub eta: Option<(f64, f64)>,
    pub nabla_inf: Option<f64>,
    pub nabla_feasible: usize,
    pub n_distinct: usize,
    pub failed_stages: usize,
    pub errors: Vec<String>,
    pub records: Vec<RecordSummary>,
    pub classes: Vec<ClassDoc>,
}

/// Full provenance for one run. The `config` field echoes the effective
/// configuration (seed and output overrides applied) and parses back to it.
#[derive(Serialize)]
pub struct RunDoc<'a> {
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degenerate_alpha: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub largest_gap_with_three: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_checks: Option<Vec<CheckDoc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypothesis_checks: Option<Vec<CheckDoc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<OutcomeDoc>>,
}

impl<'a> RunDoc<'a> {
    pub fn new(command: &'a str, config: &'a ExperimentConfig) -> Self {
        RunDoc {
            command,
            config,
            group: None,
            mu: None,
            window: None,
            degenerate_alpha: None,
            largest_gap_with_three: None,
            spectral_checks: None,
            hypothesis_checks: None,
            outcomes: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| SmsError::Evaluation(format!("run.json serialization failed: {e}")))
    }
}

/// Builds outcome documents and assigns global solution ids in row order;
/// returns the documents plus (id, lambda index, class index) for profile
/// emission.
pub fn outcome_docs(outcomes: &[LambdaOutcome]) -> (Vec<OutcomeDoc>, Vec<(usize, usize, usize)>) {
    let mut docs = Vec::new();
    let mut profile_index = Vec::new();
    let mut next_id = 0usize;
    for (j, o) in outcomes.iter().enumerate() {
        let mut classes = Vec::new();
        for (c_idx, c) in o.classes.iter().enumerate() {
            let id = next_id;
            next_id += 1;
            if c.nontrivial {
                profile_index.push((id, j, c_idx));
            }
            classes.push(ClassDoc {
                id,
                members: c.members.clone(),
                energy: c.energy,
                residual: c.residual,
                l2_norm: c.l2_norm,
                min_value: c.min_value,
                shell_ratio: c.shell_ratio,
                nontrivial: c.nontrivial,
                nonnegative: c.nonnegative,
                decay_ok: c.decay_ok,
                band: c.band,
            });
        }
        docs.push(OutcomeDoc {
            lambda: o.lambda,
            applicable: o.applicable,
            geometry: o.geometry.clone(),
            sup_ekh: o.sup_ekh,
            eta: o.eta,
            nabla_inf: o.nabla_inf,
            nabla_feasible: o.nabla_feasible,
            n_distinct: o.n_distinct,
            failed_stages: o.failed_stages,
            errors: o.errors.clone(),
            records: o.records.clone(),
            classes,
        });
    }
    (docs, profile_index)
}
