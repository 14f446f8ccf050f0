//! Discrete truncated domain standing in for the (possibly curved) ambient
//! space: a tensor-product grid of interior nodes on the box [-L, L]^d with
//! homogeneous Dirichlet boundary, per-node quadrature weights, and sampled
//! scalar fields.
//!
//! The boundary is never stored: fields vanish outside the interior nodes by
//! convention, so truncation plays the role of the decay condition at
//! infinity. An optional radial metric weight mu(r) scales the volume element
//! (weights become h^d * mu) and enters the gradient term inverse-squared, so
//! the stiffness coefficient of the assembled form is 1/mu; mu = 1 recovers
//! the flat case.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SmsError};

/// One real value per interior node, lexicographic node order.
pub type Field = Vec<f64>;

/// Radial factor multiplying the volume element; strictly positive profiles only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricWeight {
    Constant,
    /// mu(r) = (1 + coeff * r^2)^exponent with coeff >= 0.
    RadialPower { coeff: f64, exponent: f64 },
}

impl Default for MetricWeight {
    fn default() -> Self {
        MetricWeight::Constant
    }
}

impl MetricWeight {
    pub fn value(&self, r: f64) -> f64 {
        match self {
            MetricWeight::Constant => 1.0,
            MetricWeight::RadialPower { coeff, exponent } => (1.0 + coeff * r * r).powf(*exponent),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            MetricWeight::Constant => Ok(()),
            MetricWeight::RadialPower { coeff, .. } => {
                if !coeff.is_finite() || *coeff < 0.0 {
                    Err(SmsError::Config(format!(
                        "metric_weight.coeff must be finite and >= 0, got {coeff}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Named scalar profiles used for potentials, weights, and test integrands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarProfile {
    /// Constant value.
    Constant { value: f64 },
    /// |x|^2 + offset; the confining benchmark potential.
    HarmonicOffset { offset: f64 },
    /// scale * (1 + |x|)^(-exponent); integrable positive weight.
    InversePower {
        exponent: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// cos(pi * x_1 / (2 L_ref)); boundary-compatible smooth test integrand.
    BoundaryCosine { half_width: f64 },
}

fn one() -> f64 {
    1.0
}

impl ScalarProfile {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        match self {
            ScalarProfile::Constant { value } => *value,
            ScalarProfile::HarmonicOffset { offset } => r * r + offset,
            ScalarProfile::InversePower { exponent, scale } => {
                scale * (1.0 + r).powf(-exponent)
            }
            ScalarProfile::BoundaryCosine { half_width } => {
                (std::f64::consts::FRAC_PI_2 * x[0] / half_width).cos()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub dimension: usize,
    pub half_width: f64,
    pub nodes_per_axis: usize,
    #[serde(default)]
    pub metric_weight: MetricWeight,
}

impl MeshConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dimension) {
            return Err(SmsError::Config(format!(
                "dimension must be 1, 2, or 3, got {}",
                self.dimension
            )));
        }
        if !self.half_width.is_finite() || self.half_width <= 0.0 {
            return Err(SmsError::Config(format!(
                "half_width must be > 0, got {}",
                self.half_width
            )));
        }
        if self.nodes_per_axis < 3 {
            return Err(SmsError::Config(format!(
                "nodes_per_axis must be >= 3, got {}",
                self.nodes_per_axis
            )));
        }
        self.metric_weight.validate()
    }
}

/// Interior nodes of the uniform grid, their quadrature weights, and the
/// metric profile they were built with.
#[derive(Debug, Clone)]
pub struct Mesh {
    dimension: usize,
    nodes_per_axis: usize,
    half_width: f64,
    spacing: f64,
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
    metric: MetricWeight,
}

pub fn build_mesh(cfg: &MeshConfig) -> Result<Mesh> {
    cfg.validate()?;
    let d = cfg.dimension;
    let n = cfg.nodes_per_axis;
    let h = 2.0 * cfg.half_width / (n as f64 + 1.0);
    let count = n.pow(d as u32);
    let mut nodes = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    let cell = h.powi(d as i32);
    for idx in 0..count {
        let mut x = [0.0_f64; 3];
        let mut rem = idx;
        for axis in 0..d {
            let i = rem % n;
            rem /= n;
            x[axis] = -cfg.half_width + (i as f64 + 1.0) * h;
        }
        let r = x[..d].iter().map(|c| c * c).sum::<f64>().sqrt();
        let mu = cfg.metric_weight.value(r);
        if !mu.is_finite() || mu <= 0.0 {
            return Err(SmsError::Config(format!(
                "metric weight must be finite and > 0 everywhere, got {mu} at r={r}"
            )));
        }
        nodes.push(x);
        weights.push(cell * mu);
    }
    Ok(Mesh {
        dimension: d,
        nodes_per_axis: n,
        half_width: cfg.half_width,
        spacing: h,
        nodes,
        weights,
        metric: cfg.metric_weight.clone(),
    })
}

impl Mesh {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Coordinates of an interior node (only the first `dimension` entries are meaningful).
    pub fn node(&self, idx: usize) -> [f64; 3] {
        self.nodes[idx]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn metric(&self) -> &MetricWeight {
        &self.metric
    }

    /// Metric weight at an arbitrary point of the box (used for edge
    /// coefficients, including edges touching the boundary).
    pub fn metric_at(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        self.metric.value(r)
    }

    /// Multi-index of a node in axis order.
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let n = self.nodes_per_axis;
        let mut out = [0usize; 3];
        let mut rem = idx;
        for axis in 0..self.dimension {
            out[axis] = rem % n;
            rem /= n;
        }
        out
    }

    /// Linear index from a multi-index.
    pub fn linear_index(&self, mi: &[usize; 3]) -> usize {
        let n = self.nodes_per_axis;
        let mut idx = 0usize;
        for axis in (0..self.dimension).rev() {
            idx = idx * n + mi[axis];
        }
        idx
    }

    /// Pointwise samples of a profile at the interior nodes.
    pub fn sample_field(&self, expr: &ScalarProfile) -> Result<Field> {
        let mut out = Vec::with_capacity(self.len());
        for idx in 0..self.len() {
            let x = self.node(idx);
            let v = expr.eval(&x[..self.dimension]);
            if !v.is_finite() {
                return Err(SmsError::Evaluation(format!(
                    "non-finite sample {v} at node {idx}"
                )));
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Samples a potential and enforces strict positivity of its minimum.
    pub fn sample_potential(&self, expr: &ScalarProfile) -> Result<Field> {
        let v = self.sample_field(expr)?;
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            return Err(SmsError::Hypothesis(format!(
                "potential must be strictly positive, min sample = {min}"
            )));
        }
        Ok(v)
    }

    /// Discrete integral: sum of f_i * weight_i.
    pub fn quadrature(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.len() {
            return Err(SmsError::Contract(format!(
                "field length {} does not match mesh size {}",
                f.len(),
                self.len()
            )));
        }
        Ok(f.iter().zip(&self.weights).map(|(a, w)| a * w).sum())
    }

    /// Nodes whose max-coordinate lies in the outermost `fraction` of the box.
    pub fn outer_shell(&self, fraction: f64) -> Vec<usize> {
        let cutoff = (1.0 - fraction) * self.half_width;
        (0..self.len())
            .filter(|&idx| {
                let x = self.node(idx);
                x[..self.dimension]
                    .iter()
                    .any(|c| c.abs() >= cutoff)
            })
            .collect()
    }
}
