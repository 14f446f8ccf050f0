//! The energy whose critical points are the solutions: half the squared
//! gradient-potential norm, minus the spectral-parameter mass term, minus the
//! weighted primitive of the nonlinearity,
//!
//!   J(w) = 1/2 <w,w> - lambda/2 <w,w>_L2 - sum_i m_i alpha_i F(w_i).
//!
//! Its Riesz gradient in the <.,.> inner product is w minus the resolvent of
//! lambda w + alpha f(w); a vanishing gradient is exactly the discrete
//! Euler-Lagrange system A w = M (lambda w + alpha f(w)). The directional
//! derivative is evaluated independently of the gradient so the duality
//! between the two is a checkable identity, not a definition.

use crate::error::{Result, SmsError};
use crate::grid::Field;
use crate::nonlinearity::Nonlinearity;
use crate::operators::FormPair;

#[derive(Debug, Clone)]
pub struct EnergyModel<'a> {
    pub forms: &'a FormPair,
    /// Nodal weight in front of the nonlinear term; nonnegative.
    pub alpha: Field,
    pub nonlinearity: Nonlinearity,
    /// Spectral parameter.
    pub lambda: f64,
}

impl<'a> EnergyModel<'a> {
    pub fn new(
        forms: &'a FormPair,
        alpha: Field,
        nonlinearity: Nonlinearity,
        lambda: f64,
    ) -> Result<Self> {
        if alpha.len() != forms.dim() {
            return Err(SmsError::Contract(format!(
                "alpha length {} does not match form dimension {}",
                alpha.len(),
                forms.dim()
            )));
        }
        if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(SmsError::Hypothesis(
                "alpha must be nonnegative and finite nodewise".into(),
            ));
        }
        if !lambda.is_finite() {
            return Err(SmsError::Contract(format!("lambda must be finite, got {lambda}")));
        }
        nonlinearity.validate()?;
        Ok(EnergyModel {
            forms,
            alpha,
            nonlinearity,
            lambda,
        })
    }

    /// True when the nonlinear term is absent and the model is the pure
    /// quadratic form, the regime with closed-form geometry.
    pub fn alpha_is_zero(&self) -> bool {
        self.alpha.iter().all(|a| *a == 0.0)
    }

    pub fn dim(&self) -> usize {
        self.forms.dim()
    }

    pub fn energy(&self, w: &[f64]) -> f64 {
        let quad = 0.5 * self.forms.h1v(w, w) - 0.5 * self.lambda * self.forms.l2(w, w);
        let nonlin: f64 = self
            .forms
            .mass()
            .iter()
            .zip(self.alpha.iter().zip(w))
            .map(|(m, (a, x))| m * a * self.nonlinearity.big_f(*x))
            .sum();
        quad - nonlin
    }

    pub fn directional_derivative(&self, w: &[f64], v: &[f64]) -> f64 {
        let quad = self.forms.h1v(w, v) - self.lambda * self.forms.l2(w, v);
        let nonlin: f64 = self
            .forms
            .mass()
            .iter()
            .zip(self.alpha.iter().zip(w.iter().zip(v)))
            .map(|(m, (a, (x, y)))| m * a * self.nonlinearity.f(*x) * y)
            .sum();
        quad - nonlin
    }

    /// Right-hand side of the resolvent solve: lambda w + alpha f(w) nodewise.
    pub(crate) fn load(&self, w: &[f64]) -> Field {
        self.alpha
            .iter()
            .zip(w)
            .map(|(a, x)| self.lambda * x + a * self.nonlinearity.f(*x))
            .collect()
    }

    /// Riesz gradient: w - resolvent(lambda w + alpha f(w)).
    pub fn gradient(&self, w: &[f64]) -> Result<Field> {
        let x = self.forms.apply_resolvent(&self.load(w))?;
        Ok(w.iter().zip(&x).map(|(a, b)| a - b).collect())
    }

    /// Norm of the gradient in the <.,.> inner product.
    pub fn residual(&self, w: &[f64]) -> Result<f64> {
        if w.iter().all(|x| *x == 0.0) {
            return Ok(0.0);
        }
        let g = self.gradient(w)?;
        Ok(self.forms.norm_h1v(&g))
    }

    /// Strong-form defect A w - M (lambda w + alpha f(w)); the gradient is its
    /// resolvent image, and Newton iterates on this map.
    pub fn euler_lagrange_residual(&self, w: &[f64]) -> Field {
        let mut out = self.forms.matrix().apply(w);
        let load = self.load(w);
        for ((o, m), l) in out.iter_mut().zip(self.forms.mass()).zip(&load) {
            *o -= m * l;
        }
        out
    }

    /// Nodal derivative weights alpha_i f'(w_i) for the Newton linearization.
    pub fn derivative_weights(&self, w: &[f64]) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(w)
            .map(|(a, x)| a * self.nonlinearity.f_prime(*x))
            .collect()
    }

    /// Action of the second derivative: v - resolvent(lambda v + alpha f'(w) v).
    pub fn hessian_action(&self, w: &[f64], v: &[f64]) -> Result<Field> {
        let q = self.derivative_weights(w);
        let rhs: Field = q
            .iter()
            .zip(v)
            .map(|(qi, vi)| self.lambda * vi + qi * vi)
            .collect();
        let x = self.forms.apply_resolvent(&rhs)?;
        Ok(v.iter().zip(&x).map(|(a, b)| a - b).collect())
    }
}

/// A located critical-point candidate with its certificates.
#[derive(Debug, Clone)]
pub struct CriticalPointRecord {
    pub w: Field,
    pub energy: f64,
    /// Gradient norm at w in the <.,.> inner product.
    pub residual: f64,
    /// Most negative nodal value (nonnegativity certificate input).
    pub min_value: f64,
    /// Max |w| on the outer shell (decay certificate input).
    pub shell_max: f64,
    /// Distinct-solution id assigned by classification; usize::MAX before.
    pub id: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Human-readable outcome for non-converged or deflected seeds.
    pub note: String,
}
