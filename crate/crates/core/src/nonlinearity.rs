//! The superlinear term and its primitive, truncated to the positive half
//! line: f(t) = 0 for t <= 0, so descent and Newton searches select
//! nonnegative branches on their own. The power kind t^p carries closed
//! forms for f, F = t^{p+1}/(p+1), and f'; the table kind interpolates a
//! user-supplied sample set linearly and integrates it by trapezoids.
//!
//! The structural hypotheses behind the existence machinery (vanishing slope
//! at zero, subcritical polynomial growth, monotone superquadratic excess,
//! and a superquadraticity inequality linking F to f) are not assumed: they
//! are measured on a logarithmic probe grid and reported with pass/fail
//! verdicts. The same grid drives the constructive growth constants used by
//! the geometry estimates.

use crate::error::{Result, SmsError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearityKind {
    /// f(t) = t^p on t > 0.
    Power { p: f64 },
    /// Piecewise-linear f through (t_i, f_i) samples on t > 0, zero outside
    /// the sampled range's left end and constant-slope extension on the right.
    Table { ts: Vec<f64>, fs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    #[serde(flatten)]
    pub kind: NonlinearityKind,
    /// Growth exponent used by the polynomial-growth and superquadraticity
    /// checks.
    pub r: f64,
    /// Ambient dimension, bounding the admissible growth.
    pub dimension: usize,
}

impl Nonlinearity {
    pub fn power(p: f64, r: f64, dimension: usize) -> Result<Self> {
        let nl = Nonlinearity {
            kind: NonlinearityKind::Power { p },
            r,
            dimension,
        };
        nl.validate()?;
        Ok(nl)
    }

    /// Checks the static admissibility of the parameters: r must exceed 2 and
    /// stay below the critical exponent 2d/(d-2) when d >= 3 (for d in {1,2}
    /// every finite r is admissible; the caller may log a caveat).
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 2.0) {
            return Err(SmsError::Hypothesis(format!(
                "growth exponent r must exceed 2, got {}",
                self.r
            )));
        }
        if self.dimension >= 3 {
            let critical = 2.0 * self.dimension as f64 / (self.dimension as f64 - 2.0);
            if self.r >= critical {
                return Err(SmsError::Hypothesis(format!(
                    "growth exponent r = {} reaches the critical exponent {critical} \
                     in dimension {}",
                    self.r, self.dimension
                )));
            }
        }
        match &self.kind {
            NonlinearityKind::Power { p } => {
                if !(*p > 1.0) || !p.is_finite() {
                    return Err(SmsError::Hypothesis(format!(
                        "power exponent p must be finite and exceed 1, got {p}"
                    )));
                }
            }
            NonlinearityKind::Table { ts, fs } => {
                if ts.len() != fs.len() || ts.len() < 2 {
                    return Err(SmsError::Config(
                        "table nonlinearity needs matching ts/fs with at least 2 samples".into(),
                    ));
                }
                if ts.windows(2).any(|w| w[1] <= w[0]) || ts[0] <= 0.0 {
                    return Err(SmsError::Config(
                        "table abscissae must be positive and strictly increasing".into(),
                    ));
                }
                if fs.iter().any(|f| !f.is_finite()) {
                    return Err(SmsError::Config("table values must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// f(t); identically zero for t <= 0.
    pub fn f(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            NonlinearityKind::Power { p } => t.powf(*p),
            NonlinearityKind::Table { ts, fs } => table_eval(ts, fs, t),
        }
    }

    /// Primitive F(t) = integral of f from 0 to t; zero for t <= 0.
    pub fn big_f(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            NonlinearityKind::Power { p } => t.powf(p + 1.0) / (p + 1.0),
            NonlinearityKind::Table { ts, fs } => table_primitive(ts, fs, t),
        }
    }

    /// Both values at once.
    pub fn evaluate(&self, t: f64) -> (f64, f64) {
        (self.f(t), self.big_f(t))
    }

    /// Slope of f where defined: exact p t^{p-1} for the power kind, the
    /// interpolation slope (a secant) for tables; zero on t <= 0.
    pub fn f_prime(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            NonlinearityKind::Power { p } => p * t.powf(p - 1.0),
            NonlinearityKind::Table { ts, fs } => table_slope(ts, fs, t),
        }
    }
}

fn table_eval(ts: &[f64], fs: &[f64], t: f64) -> f64 {
    // Below the first sample, interpolate linearly from (0, 0).
    if t <= ts[0] {
        return fs[0] * t / ts[0];
    }
    let last = ts.len() - 1;
    if t >= ts[last] {
        let slope = (fs[last] - fs[last - 1]) / (ts[last] - ts[last - 1]);
        return fs[last] + slope * (t - ts[last]);
    }
    let i = ts.partition_point(|x| *x <= t) - 1;
    let w = (t - ts[i]) / (ts[i + 1] - ts[i]);
    fs[i] + w * (fs[i + 1] - fs[i])
}

fn table_slope(ts: &[f64], fs: &[f64], t: f64) -> f64 {
    if t <= ts[0] {
        return fs[0] / ts[0];
    }
    let last = ts.len() - 1;
    if t >= ts[last] {
        return (fs[last] - fs[last - 1]) / (ts[last] - ts[last - 1]);
    }
    let i = ts.partition_point(|x| *x <= t) - 1;
    (fs[i + 1] - fs[i]) / (ts[i + 1] - ts[i])
}

fn table_primitive(ts: &[f64], fs: &[f64], t: f64) -> f64 {
    // Exact integral of the piecewise-linear interpolant.
    let mut acc = 0.0;
    let mut prev_t = 0.0;
    let mut prev_f = 0.0;
    for (ti, fi) in ts.iter().zip(fs) {
        if t <= *ti {
            let f_at = prev_f + (fi - prev_f) * (t - prev_t) / (ti - prev_t);
            return acc + 0.5 * (prev_f + f_at) * (t - prev_t);
        }
        acc += 0.5 * (prev_f + fi) * (ti - prev_t);
        prev_t = *ti;
        prev_f = *fi;
    }
    let last = ts.len() - 1;
    let slope = (fs[last] - fs[last - 1]) / (ts[last] - ts[last - 1]);
    let f_at = prev_f + slope * (t - prev_t);
    acc + 0.5 * (prev_f + f_at) * (t - prev_t)
}

/// Logarithmic probe grid spanning [lo, hi] with `per_decade` samples per
/// decade, endpoints included.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && per_decade > 0);
    let decades = (hi / lo).log10();
    let count = (decades * per_decade as f64).ceil() as usize + 1;
    let step = decades / (count - 1) as f64;
    (0..count)
        .map(|i| lo * 10f64.powf(step * i as f64))
        .collect()
}

/// Default probe grid: [1e-6, 1e6], 40 samples per decade.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-6, 1e6, 40)
}

#[derive(Debug, Clone)]
pub struct HypothesisCheck {
    pub name: String,
    pub value: f64,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
    pub all_pass: bool,
}

impl HypothesisReport {
    fn push(&mut self, name: &str, value: f64, pass: bool, detail: String) {
        self.checks.push(HypothesisCheck {
            name: name.into(),
            value,
            pass,
            detail,
        });
        self.all_pass &= pass;
    }
}

/// Samples the four structural hypotheses on a positive grid.
///
/// Finite sampling cannot take limits, so the two asymptotic conditions are
/// scored on the grid's extreme decades: the slope condition at zero requires
/// f(t)/t at the smallest abscissa to be below `tol`, and polynomial growth
/// requires the top decade's max of f(t)/t^{r-1} not to exceed the previous
/// decade's by more than a factor 1 + tol. Monotonicity of f(t)t - 2F(t) is
/// counted pairwise, and the superquadraticity condition is enforced in the
/// non-strict form 0 < rF(t) <= f(t)t + tol-scaled slack, which the natural
/// power instance meets with exact equality.
pub fn check_hypotheses(nl: &Nonlinearity, t_grid: &[f64], tol: f64) -> Result<HypothesisReport> {
    if t_grid.is_empty() {
        return Err(SmsError::Contract("hypothesis check needs a nonempty grid".into()));
    }
    if t_grid.iter().any(|t| *t <= 0.0) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SmsError::Contract(
            "hypothesis grid must be positive and strictly increasing".into(),
        ));
    }
    let mut report = HypothesisReport {
        checks: Vec::new(),
        all_pass: true,
    };

    // Slope at zero: f(t)/t must vanish as t -> 0.
    let t0 = t_grid[0];
    let slope0 = nl.f(t0) / t0;
    report.push(
        "zero_slope",
        slope0,
        slope0 <= tol,
        format!("f(t)/t = {slope0:.3e} at t = {t0:.3e}, needs <= {tol:.1e}"),
    );

    // Polynomial growth: f(t)/t^{r-1} must stop growing in the top decade.
    let hi = *t_grid.last().unwrap();
    let ratio = |t: f64| nl.f(t) / t.powf(nl.r - 1.0);
    let decade_max = |lo: f64, hi: f64| {
        t_grid
            .iter()
            .filter(|t| **t > lo && **t <= hi)
            .map(|t| ratio(*t))
            .fold(0.0f64, f64::max)
    };
    let top = decade_max(hi / 10.0, hi);
    let prev = decade_max(hi / 100.0, hi / 10.0);
    let growth_pass = prev > 0.0 && top <= (1.0 + tol) * prev;
    report.push(
        "polynomial_growth",
        top,
        growth_pass,
        format!(
            "top-decade max of f(t)/t^(r-1) = {top:.6e}, previous decade {prev:.6e}"
        ),
    );

    // Monotone excess: g(t) = f(t)t - 2F(t) must be nondecreasing.
    let g = |t: f64| nl.f(t) * t - 2.0 * nl.big_f(t);
    let mut violations = 0usize;
    let mut worst_drop = 0.0f64;
    for w in t_grid.windows(2) {
        let (g0, g1) = (g(w[0]), g(w[1]));
        let scale = g0.abs().max(g1.abs()).max(1.0);
        if g1 < g0 - tol * scale {
            violations += 1;
            worst_drop = worst_drop.max(g0 - g1);
        }
    }
    report.push(
        "monotone_excess",
        violations as f64,
        violations == 0,
        format!("{violations} decreases of f(t)t - 2F(t), worst drop {worst_drop:.3e}"),
    );

    // Superquadraticity, non-strict form: 0 < rF(t) <= f(t)t.
    let mut min_slack = f64::INFINITY;
    let mut min_rf = f64::INFINITY;
    for &t in t_grid {
        let ft = nl.f(t) * t;
        let rf = nl.r * nl.big_f(t);
        let scale = ft.abs().max(rf.abs()).max(f64::MIN_POSITIVE);
        min_slack = min_slack.min((ft - rf) / scale);
        min_rf = min_rf.min(rf);
    }
    let pass = min_slack >= -tol && min_rf > 0.0;
    report.push(
        "superquadratic",
        min_slack,
        pass,
        format!(
            "min relative slack of f(t)t - rF(t) = {min_slack:.3e}, min rF = {min_rf:.3e}"
        ),
    );
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct GrowthConstants {
    /// Smallest grid constant with f(t) <= 2 eps t + r a1 t^{r-1}.
    pub a1_eps: f64,
    /// Max of f on (0, 1].
    pub a2: f64,
    /// Max of f(t)/t^{r-1} on t >= 1.
    pub a2_eps: f64,
    /// Lower-bound pair: F(t) >= a3 t^r - a4 on the grid.
    pub a3: f64,
    pub a4: f64,
    /// Min slack of the integrated bound F(t) <= eps t^2 + a1 t^r.
    pub integrated_slack: f64,
    /// Min slack of F(t) - (a3 t^r - a4) over the grid.
    pub lower_bound_slack: f64,
    /// Whether the lower bound holds with a3 > 0.
    pub lower_bound_pass: bool,
}

/// Computes the constructive growth constants over the probe grid.
///
/// For the power kind the lower-bound pair is exact: F = t^{p+1}/(p+1), so
/// (a3, a4) = (1/(p+1), 0) with r = p + 1. For other kinds a3 is fitted as
/// the largest grid-safe coefficient at a4 = 0 and flagged when it
/// degenerates to zero.
pub fn growth_constants(nl: &Nonlinearity, eps: f64, t_grid: &[f64]) -> Result<GrowthConstants> {
    if !(eps > 0.0) {
        return Err(SmsError::Contract(format!("eps must be positive, got {eps}")));
    }
    if t_grid.is_empty() {
        return Err(SmsError::Contract("growth constants need a nonempty grid".into()));
    }
    let r = nl.r;
    let mut a1 = 0.0f64;
    for &t in t_grid {
        let need = (nl.f(t) - 2.0 * eps * t) / (r * t.powf(r - 1.0));
        a1 = a1.max(need);
    }
    let a2 = t_grid
        .iter()
        .filter(|t| **t <= 1.0)
        .map(|t| nl.f(*t))
        .fold(0.0f64, f64::max);
    let a2_eps = t_grid
        .iter()
        .filter(|t| **t >= 1.0)
        .map(|t| nl.f(*t) / t.powf(r - 1.0))
        .fold(0.0f64, f64::max);

    let (a3, a4) = match &nl.kind {
        NonlinearityKind::Power { p } if (p + 1.0 - r).abs() <= 1e-12 => (1.0 / (p + 1.0), 0.0),
        _ => {
            let fitted = t_grid
                .iter()
                .map(|t| nl.big_f(*t) / t.powf(r))
                .fold(f64::INFINITY, f64::min)
                .max(0.0);
            (fitted, 0.0)
        }
    };

    let mut integrated_slack = f64::INFINITY;
    let mut lower_bound_slack = f64::INFINITY;
    for &t in t_grid {
        let big = nl.big_f(t);
        let cap = eps * t * t + a1 * t.powf(r);
        let scale = cap.abs().max(big.abs()).max(1.0);
        integrated_slack = integrated_slack.min((cap - big) / scale);
        let floor = a3 * t.powf(r) - a4;
        let scale = floor.abs().max(big.abs()).max(1.0);
        lower_bound_slack = lower_bound_slack.min((big - floor) / scale);
    }
    Ok(GrowthConstants {
        a1_eps: a1,
        a2,
        a2_eps,
        a3,
        a4,
        integrated_slack,
        lower_bound_slack,
        lower_bound_pass: a3 > 0.0 && lower_bound_slack >= -1e-12,
    })
}
