//! Experiment configuration: one JSON document naming the grid, the
//! potential, the nonlinear weight, the spectral request, the target group,
//! the lambda window, and every solver tolerance. Parsing is strict; an
//! unknown key is an error rather than a silently ignored typo, since a
//! misspelled tolerance would invalidate the certificates downstream.

use crate::error::{Result, SmsError};
use crate::grid::{build_mesh, Mesh, MeshConfig, ScalarProfile};
use crate::nonlinearity::{Nonlinearity, NonlinearityKind};
use crate::operators::{assemble, FormPair};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumBlock {
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_eigen_tol")]
    pub tol: f64,
}

impl Default for SpectrumBlock {
    fn default() -> Self {
        SpectrumBlock {
            m: default_m(),
            tol: default_eigen_tol(),
        }
    }
}

/// Target multiplicity group: either picked automatically (the lowest group
/// past the ground state) or named explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetGroup {
    Named(String),
    Group {
        k: usize,
        #[serde(default)]
        h: usize,
    },
}

impl Default for TargetGroup {
    fn default() -> Self {
        TargetGroup::Named("auto".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowBlock {
    /// Fraction of the gap above the group that bounds the lambda window.
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    /// Number of lambda samples inside the window.
    #[serde(default = "default_count")]
    pub count: usize,
    /// Explicit lambda values overriding the automatic grid; values outside
    /// the admissible window are scanned anyway and flagged inapplicable.
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
}

impl Default for WindowBlock {
    fn default() -> Self {
        WindowBlock {
            fraction: default_fraction(),
            count: default_count(),
            lambdas: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
    /// Conjugate-gradient iteration cap; absent means ten times the grid size.
    #[serde(default)]
    pub cg_max_iter: Option<usize>,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iter")]
    pub newton_max_iter: usize,
    /// Multistarts for the geometry and gradient-bound optimizers.
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Newton seeds per lambda.
    #[serde(default = "default_seed_count")]
    pub seed_count: usize,
    /// Rounds of rerunning the seeds with found solutions deflated.
    #[serde(default = "default_deflation_rounds")]
    pub deflation_rounds: usize,
}

impl Default for SolverBlock {
    fn default() -> Self {
        SolverBlock {
            cg_tol: default_cg_tol(),
            cg_max_iter: None,
            newton_tol: default_newton_tol(),
            newton_max_iter: default_newton_max_iter(),
            budget: default_budget(),
            seed_count: default_seed_count(),
            deflation_rounds: default_deflation_rounds(),
        }
    }
}

/// Nonlinearity block without the ambient dimension, which comes from the
/// mesh at build time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityBlock {
    #[serde(flatten)]
    pub kind: NonlinearityKind,
    #[serde(default = "default_r")]
    pub r: f64,
}

impl Default for NonlinearityBlock {
    fn default() -> Self {
        NonlinearityBlock {
            kind: NonlinearityKind::Power { p: 2.0 },
            r: default_r(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mesh: MeshConfig,
    pub potential: ScalarProfile,
    #[serde(default = "default_alpha")]
    pub alpha: ScalarProfile,
    #[serde(default)]
    pub nonlinearity: NonlinearityBlock,
    #[serde(default)]
    pub spectrum: SpectrumBlock,
    #[serde(default)]
    pub target: TargetGroup,
    #[serde(default)]
    pub window: WindowBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_m() -> usize {
    8
}
fn default_eigen_tol() -> f64 {
    1e-9
}
fn default_fraction() -> f64 {
    0.1
}
fn default_count() -> usize {
    5
}
fn default_cg_tol() -> f64 {
    1e-12
}
fn default_newton_tol() -> f64 {
    1e-9
}
fn default_newton_max_iter() -> usize {
    200
}
fn default_budget() -> usize {
    6
}
fn default_seed_count() -> usize {
    8
}
fn default_deflation_rounds() -> usize {
    3
}
fn default_r() -> f64 {
    3.0
}
fn default_seed() -> u64 {
    42
}
fn default_output_dir() -> String {
    "out".into()
}
fn default_alpha() -> ScalarProfile {
    ScalarProfile::InversePower {
        exponent: 2.0,
        scale: 1.0,
    }
}

impl ExperimentConfig {
    /// Parses and validates a JSON config file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            SmsError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| SmsError::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        if let TargetGroup::Named(name) = &self.target {
            if name != "auto" {
                return Err(SmsError::Config(format!(
                    "target must be \"auto\" or an explicit {{k, h}} group, got \"{name}\""
                )));
            }
        }
        if let TargetGroup::Group { k, .. } = &self.target {
            if *k == 0 {
                return Err(SmsError::Config("target.k is 1-based, got 0".into()));
            }
        }
        if self.spectrum.m == 0 {
            return Err(SmsError::Config("spectrum.m must be >= 1, got 0".into()));
        }
        if !(self.spectrum.tol > 0.0) {
            return Err(SmsError::Config(format!(
                "spectrum.tol must be > 0, got {}",
                self.spectrum.tol
            )));
        }
        if !(self.window.fraction > 0.0 && self.window.fraction <= 1.0) {
            return Err(SmsError::Config(format!(
                "window.fraction must lie in (0, 1], got {}",
                self.window.fraction
            )));
        }
        if self.window.count == 0 {
            return Err(SmsError::Config("window.count must be >= 1, got 0".into()));
        }
        if let Some(ls) = &self.window.lambdas {
            if ls.is_empty() || ls.iter().any(|l| !l.is_finite()) {
                return Err(SmsError::Config(
                    "window.lambdas must be a nonempty list of finite values".into(),
                ));
            }
        }
        let s = &self.solver;
        if !(s.cg_tol > 0.0) {
            return Err(SmsError::Config(format!(
                "solver.cg_tol must be > 0, got {}",
                s.cg_tol
            )));
        }
        if s.cg_max_iter == Some(0) {
            return Err(SmsError::Config(
                "solver.cg_max_iter must be >= 1 when given".into(),
            ));
        }
        if !(s.newton_tol > 0.0) {
            return Err(SmsError::Config(format!(
                "solver.newton_tol must be > 0, got {}",
                s.newton_tol
            )));
        }
        if s.newton_max_iter == 0 {
            return Err(SmsError::Config(
                "solver.newton_max_iter must be >= 1, got 0".into(),
            ));
        }
        if s.budget == 0 {
            return Err(SmsError::Config("solver.budget must be >= 1, got 0".into()));
        }
        if s.seed_count == 0 {
            return Err(SmsError::Config(
                "solver.seed_count must be >= 1, got 0".into(),
            ));
        }
        if s.deflation_rounds == 0 {
            return Err(SmsError::Config(
                "solver.deflation_rounds must be >= 1, got 0".into(),
            ));
        }
        self.to_nonlinearity()?;
        Ok(())
    }

    /// Builds the nonlinearity with the mesh's ambient dimension.
    pub fn to_nonlinearity(&self) -> Result<Nonlinearity> {
        let nl = Nonlinearity {
            kind: self.nonlinearity.kind.clone(),
            r: self.nonlinearity.r,
            dimension: self.mesh.dimension,
        };
        nl.validate()?;
        Ok(nl)
    }

    /// Builds the mesh and the assembled forms, with the solver block's CG
    /// controls applied.
    pub fn build_problem(&self) -> Result<(Mesh, FormPair)> {
        let mesh = build_mesh(&self.mesh)?;
        let v = mesh.sample_potential(&self.potential)?;
        let mut fp = assemble(&mesh, &v)?;
        fp.tol_cg = self.solver.cg_tol;
        if let Some(cap) = self.solver.cg_max_iter {
            fp.max_iter = cap;
        }
        Ok((mesh, fp))
    }
}
