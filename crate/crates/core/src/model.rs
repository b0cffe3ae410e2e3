//! Model instances of the density-dependent age-structured system and
//! sampled checks of the hypotheses they must satisfy.
//!
//! Vital rates are stored as shared closures so a [`ModelSpec`] can be
//! built either programmatically or from a model file (see [`crate::io`])
//! and shared read-only across threads.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

pub type Rule1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Rule2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Non-negative function of age with a declared support interval.
#[derive(Clone)]
pub struct AgeFunction {
    rule: Rule1,
    support: (f64, f64),
}

impl AgeFunction {
    pub fn new(support: (f64, f64), rule: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            rule: Arc::new(rule),
            support,
        }
    }

    pub fn constant(value: f64, support: (f64, f64)) -> Self {
        Self::new(support, move |_| value)
    }

    pub fn zero() -> Self {
        Self::new((0.0, 0.0), |_| 0.0)
    }

    /// Value at `a`; zero outside the declared support.
    pub fn eval(&self, a: f64) -> f64 {
        if a < self.support.0 || a > self.support.1 {
            0.0
        } else {
            (self.rule)(a)
        }
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }
}

impl fmt::Debug for AgeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AgeFunction").field("support", &self.support).finish()
    }
}

/// Baseline (density-independent) mortality, given through its cumulative
/// hazard `a ↦ ∫_0^a μ₀`. Survival is exactly zero at and beyond `a_dagger`.
#[derive(Clone)]
pub struct BaselineHazard {
    cumulative: Rule1,
    a_dagger: f64,
}

impl BaselineHazard {
    pub fn from_cumulative(a_dagger: f64, cumulative: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            cumulative: Arc::new(cumulative),
            a_dagger,
        }
    }

    /// Constant rate `m` on `[0, a_dagger)` with the blow-up confined to `a_dagger`.
    pub fn constant_rate(a_dagger: f64, rate: f64) -> Self {
        Self::from_cumulative(a_dagger, move |a| rate * a)
    }

    /// Cumulative hazard `rate·a + k·a/(a_dagger − a)`.
    pub fn rational_blowup(a_dagger: f64, k: f64, rate: f64) -> Self {
        Self::from_cumulative(a_dagger, move |a| rate * a + k * a / (a_dagger - a))
    }

    pub fn a_dagger(&self) -> f64 {
        self.a_dagger
    }

    /// `∫_0^a μ₀`; `+∞` at and beyond `a_dagger`.
    pub fn cumulative(&self, a: f64) -> f64 {
        if a >= self.a_dagger {
            f64::INFINITY
        } else {
            (self.cumulative)(a.max(0.0))
        }
    }

    pub fn survival(&self, a: f64) -> f64 {
        if a >= self.a_dagger {
            0.0
        } else {
            (-(self.cumulative)(a.max(0.0))).exp()
        }
    }

    /// Survival with the left limit taken at `a_dagger`; only the value at
    /// the single point `a_dagger` differs from [`Self::survival`]. Used as
    /// the endpoint sample in age quadrature.
    pub fn survival_left(&self, a: f64) -> f64 {
        if a > self.a_dagger {
            return 0.0;
        }
        let c = (self.cumulative)(a.max(0.0));
        if c.is_nan() {
            0.0
        } else {
            (-c).exp()
        }
    }

    /// Survival from age `a0` to age `a1 ≥ a0`, from the cumulative difference.
    pub fn transition(&self, a0: f64, a1: f64) -> f64 {
        if a1 >= self.a_dagger {
            return 0.0;
        }
        let d = self.cumulative(a1) - self.cumulative(a0);
        (-d).exp()
    }
}

impl fmt::Debug for BaselineHazard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BaselineHazard").field("a_dagger", &self.a_dagger).finish()
    }
}

fn central_difference(rule: &Rule2, a: f64, x: f64) -> f64 {
    let step = 1e-6 * x.abs().max(1.0);
    if x - step < 0.0 {
        (rule(a, x + step) - rule(a, x)) / step
    } else {
        (rule(a, x + step) - rule(a, x - step)) / (2.0 * step)
    }
}

/// Density-dependent mortality `𝓜(a, x)` with an optional monotone floor ψ.
#[derive(Clone)]
pub struct DensityMortality {
    rule: Rule2,
    derivative: Option<Rule2>,
    psi: Option<Rule1>,
}

impl DensityMortality {
    pub fn new(rule: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            rule: Arc::new(rule),
            derivative: None,
            psi: None,
        }
    }

    pub fn zero() -> Self {
        Self::new(|_, _| 0.0).with_derivative(|_, _| 0.0)
    }

    pub fn with_derivative(mut self, d: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(d));
        self
    }

    pub fn with_psi(mut self, psi: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.psi = Some(Arc::new(psi));
        self
    }

    pub(crate) fn from_parts(rule: Rule2, derivative: Option<Rule2>, psi: Option<Rule1>) -> Self {
        Self { rule, derivative, psi }
    }

    pub fn eval(&self, a: f64, x: f64) -> f64 {
        (self.rule)(a, x)
    }

    pub fn has_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    /// `∂𝓜/∂x`, closed form when supplied, else a central difference.
    pub fn dx(&self, a: f64, x: f64) -> f64 {
        match &self.derivative {
            Some(d) => d(a, x),
            None => central_difference(&self.rule, a, x),
        }
    }

    pub fn psi(&self) -> Option<&Rule1> {
        self.psi.as_ref()
    }
}

impl fmt::Debug for DensityMortality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityMortality")
            .field("derivative", &self.derivative.is_some())
            .field("psi", &self.psi.is_some())
            .finish()
    }
}

/// Fertility `β(a, x)` with its cap, support and positivity band.
#[derive(Clone)]
pub struct Fertility {
    rule: Rule2,
    derivative: Option<Rule2>,
    pub beta_plus: f64,
    /// `(a₁, a₂)`: β vanishes outside.
    pub support: (f64, f64),
    /// `(b₁, b₂)`: β exceeds `delta` inside.
    pub band: (f64, f64),
    pub delta: f64,
}

impl Fertility {
    pub fn new(
        beta_plus: f64,
        support: (f64, f64),
        band: (f64, f64),
        delta: f64,
        rule: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            rule: Arc::new(rule),
            derivative: None,
            beta_plus,
            support,
            band,
            delta,
        }
    }

    pub fn with_derivative(mut self, d: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(d));
        self
    }

    pub(crate) fn set_derivative(&mut self, d: Option<Rule2>) {
        self.derivative = d;
    }

    pub fn eval(&self, a: f64, x: f64) -> f64 {
        (self.rule)(a, x)
    }

    pub fn has_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    pub fn dx(&self, a: f64, x: f64) -> f64 {
        match &self.derivative {
            Some(d) => d(a, x),
            None => central_difference(&self.rule, a, x),
        }
    }

    /// Same fertility with the rule multiplied pointwise by `factor(a)`.
    pub fn scaled_by(&self, factor: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let factor = Arc::new(factor);
        let rule = self.rule.clone();
        let f2 = factor.clone();
        let mut out = self.clone();
        out.rule = Arc::new(move |a, x| factor(a) * rule(a, x));
        out.derivative = self.derivative.clone().map(|d| -> Rule2 { Arc::new(move |a, x| f2(a) * d(a, x)) });
        out
    }
}

impl fmt::Debug for Fertility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fertility")
            .field("beta_plus", &self.beta_plus)
            .field("support", &self.support)
            .field("band", &self.band)
            .field("delta", &self.delta)
            .finish()
    }
}

/// Complete parameterization of one model instance.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub label: String,
    pub a_dagger: f64,
    pub baseline: BaselineHazard,
    pub mortality: DensityMortality,
    pub fertility: Fertility,
    pub weight_p: AgeFunction,
    /// `[p₁, p₂]` on which `p > delta`.
    pub p_band: (f64, f64),
    pub weight_q: AgeFunction,
    pub initial: AgeFunction,
    /// Constant `c` with `β ≤ c·p`, when known in advance.
    pub a1_constant: Option<f64>,
}

impl ModelSpec {
    pub fn with_initial(&self, initial: AgeFunction) -> Self {
        Self {
            initial,
            ..self.clone()
        }
    }

    pub fn with_fertility(&self, fertility: Fertility) -> Self {
        Self {
            fertility,
            ..self.clone()
        }
    }

    /// Initial distribution scaled by `factor`.
    pub fn with_initial_scaled(&self, factor: f64) -> Self {
        let f = self.initial.clone();
        self.with_initial(AgeFunction::new(f.support(), move |a| factor * f.eval(a)))
    }

    /// Total mortality rate excluding the baseline: `𝓜(a, x)`.
    pub fn density_mortality(&self, a: f64, x: f64) -> f64 {
        self.mortality.eval(a, x)
    }
}

/// Sampling plan for hypothesis checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeGrid {
    pub ages: usize,
    pub densities: usize,
    pub x_max: f64,
    /// Level ψ must exceed at `x_max` to count as divergent.
    pub psi_divergence_threshold: f64,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self {
            ages: 512,
            densities: 16,
            x_max: 1e3,
            psi_divergence_threshold: 10.0,
        }
    }
}

impl ProbeGrid {
    /// Ages spread uniformly over `[0, a_dagger)`.
    pub fn age_points(&self, a_dagger: f64) -> Vec<f64> {
        let n = self.ages.max(2);
        (0..n).map(|i| a_dagger * i as f64 / n as f64).collect()
    }

    /// Zero followed by log-spaced values up to `x_max`.
    pub fn density_points(&self) -> Vec<f64> {
        let n = self.densities.max(2);
        let lo = self.x_max * 1e-3;
        let mut xs = vec![0.0];
        for j in 0..n - 1 {
            let t = if n == 2 { 1.0 } else { j as f64 / (n - 2) as f64 };
            xs.push(lo * (self.x_max / lo).powf(t));
        }
        xs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotChecked,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub status: CheckStatus,
    /// Offending `(a, x)` sample on failure.
    pub witness: Option<(f64, f64)>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<HypothesisCheck>,
    /// Sampled Lipschitz estimates of `𝓜` and `β` in `x` on `[0, x_max]`.
    pub lipschitz_mortality: f64,
    pub lipschitz_fertility: f64,
    pub a1_constant: Option<f64>,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// True when no check failed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> Vec<&HypothesisCheck> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail).collect()
    }
}

fn finite(field: &str, a: f64, x: f64, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Evaluation {
            field: field.to_string(),
            a,
            x,
            value,
        })
    }
}

/// Tracks the worst violation seen while sampling one condition.
struct Violation {
    worst: f64,
    at: Option<(f64, f64)>,
}

impl Violation {
    fn new() -> Self {
        Self { worst: 0.0, at: None }
    }

    fn record(&mut self, amount: f64, a: f64, x: f64) {
        if amount > 0.0 && amount >= self.worst {
            self.worst = amount;
            self.at = Some((a, x));
        }
    }

    fn into_check(self, name: &'static str, what: &str) -> HypothesisCheck {
        match self.at {
            None => HypothesisCheck {
                name,
                status: CheckStatus::Pass,
                witness: None,
                detail: String::new(),
            },
            Some(w) => HypothesisCheck {
                name,
                status: CheckStatus::Fail,
                witness: Some(w),
                detail: format!("{what} (violation {:.3e})", self.worst),
            },
        }
    }
}

/// Check the model hypotheses on a probe grid.
pub fn validate(spec: &ModelSpec, probe: &ProbeGrid) -> Result<ValidationReport> {
    if probe.ages < 2 || probe.densities < 2 {
        return Err(Error::Grid("probe grid needs at least 2 ages and 2 densities".into()));
    }
    let a_dag = spec.a_dagger;
    let ages = probe.age_points(a_dag);
    let xs = probe.density_points();
    let eps = 1e-12;
    let mut checks = Vec::new();

    // H1: baseline hazard.
    let mut baseline = Violation::new();
    let mut prev = 0.0;
    for &a in &ages {
        let c = spec.baseline.cumulative(a);
        if c.is_nan() {
            return Err(Error::Evaluation {
                field: "mu0".into(),
                a,
                x: 0.0,
                value: c,
            });
        }
        baseline.record(-c, a, 0.0);
        baseline.record(prev - c, a, 0.0);
        prev = c;
    }
    if spec.baseline.survival(a_dag) != 0.0 {
        baseline.record(1.0, a_dag, 0.0);
    }
    checks.push(baseline.into_check("H1.baseline", "cumulative hazard negative or decreasing"));

    // H1: density mortality.
    let psi = spec.mortality.psi().cloned();
    let mut zero_at_origin = Violation::new();
    let mut nonneg = Violation::new();
    let mut lip_m: f64 = 0.0;
    for &a in &ages {
        let m0 = finite("M", a, 0.0, spec.mortality.eval(a, 0.0))?;
        zero_at_origin.record(m0.abs() - eps, a, 0.0);
        let mut last: Option<(f64, f64)> = None;
        for &x in &xs {
            let m = finite("M", a, x, spec.mortality.eval(a, x))?;
            nonneg.record(-m - eps, a, x);
            if let Some((x0, m_prev)) = last {
                lip_m = lip_m.max((m - m_prev).abs() / (x - x0));
            }
            last = Some((x, m));
        }
    }
    checks.push(zero_at_origin.into_check("H1.M_zero_at_origin", "M(a, 0) != 0"));
    if psi.is_some() {
        // A2 replaces the sign condition.
        checks.push(HypothesisCheck {
            name: "H1.M_nonnegative",
            status: CheckStatus::NotChecked,
            witness: None,
            detail: "replaced by A2 (psi supplied)".into(),
        });
    } else {
        checks.push(nonneg.into_check("H1.M_nonnegative", "M(a, x) < 0"));
    }
    checks.push(lipschitz_check("H1.M_lipschitz", lip_m));

    // H2: fertility.
    let fert = &spec.fertility;
    let mut cap = Violation::new();
    let mut support = Violation::new();
    let mut floor = Violation::new();
    let mut lip_b: f64 = 0.0;
    for &a in &ages {
        let mut last: Option<(f64, f64)> = None;
        for &x in &xs {
            let b = finite("beta", a, x, fert.eval(a, x))?;
            cap.record(b - fert.beta_plus - eps, a, x);
            cap.record(-b - eps, a, x);
            if a <= fert.support.0 || a >= fert.support.1 {
                support.record(b.abs() - eps, a, x);
            }
            if a > fert.band.0 && a < fert.band.1 {
                floor.record(fert.delta - b, a, x);
            }
            if let Some((x0, b_prev)) = last {
                lip_b = lip_b.max((b - b_prev).abs() / (x - x0));
            }
            last = Some((x, b));
        }
    }
    let ordered = 0.0 < fert.support.0
        && fert.support.0 < fert.band.0
        && fert.band.0 < fert.band.1
        && fert.band.1 < fert.support.1
        && fert.delta > 0.0;
    checks.push(cap.into_check("H2.beta_bounds", "beta outside [0, beta_plus]"));
    checks.push(support.into_check("H2.beta_support", "beta nonzero outside (a1, a2)"));
    checks.push(floor.into_check("H2.beta_floor", "beta <= delta inside (b1, b2)"));
    checks.push(HypothesisCheck {
        name: "H2.intervals",
        status: if ordered { CheckStatus::Pass } else { CheckStatus::Fail },
        witness: None,
        detail: if ordered {
            String::new()
        } else {
            "need 0 < a1 < b1 < b2 < a2 and delta > 0".into()
        },
    });
    checks.push(lipschitz_check("H2.beta_lipschitz", lip_b));

    // H3: weights.
    let mut weights = Violation::new();
    let mut p_floor = Violation::new();
    for &a in &ages {
        let p = finite("p", a, 0.0, spec.weight_p.eval(a))?;
        let q = finite("q", a, 0.0, spec.weight_q.eval(a))?;
        weights.record(-p - eps, a, 0.0);
        weights.record(-q - eps, a, 0.0);
        if a >= spec.p_band.0 && a <= spec.p_band.1 {
            p_floor.record(fert.delta - p, a, 0.0);
        }
    }
    checks.push(weights.into_check("H3.weights_nonnegative", "negative weight"));
    if spec.p_band.1 > spec.p_band.0 && spec.p_band.0 > 0.0 {
        checks.push(p_floor.into_check("H3.p_floor", "p <= delta on [p1, p2]"));
    } else {
        checks.push(HypothesisCheck {
            name: "H3.p_floor",
            status: CheckStatus::Fail,
            witness: None,
            detail: "need 0 < p1 < p2".into(),
        });
    }

    // H4: initial distribution.
    let mut f_nonneg = Violation::new();
    let mut f_vals = Vec::with_capacity(ages.len() + 1);
    for &a in &ages {
        let f = finite("f", a, 0.0, spec.initial.eval(a))?;
        f_nonneg.record(-f - eps, a, 0.0);
        f_vals.push(f.abs());
    }
    f_vals.push(spec.initial.eval(a_dag).abs());
    let mass = crate::quadrature::trapezoid(&f_vals, a_dag / ages.len() as f64);
    checks.push(f_nonneg.into_check("H4.f_nonnegative", "f(a) < 0"));
    checks.push(HypothesisCheck {
        name: "H4.f_integrable",
        status: if mass.is_finite() { CheckStatus::Pass } else { CheckStatus::Fail },
        witness: None,
        detail: format!("integral of |f| = {mass:.6e}"),
    });

    // A1 / A2, only when derivable.
    let a1 = match spec.a1_constant {
        Some(c) => Some(c),
        None => estimate_a1_constant(spec, probe)?,
    };
    match a1 {
        Some(c) => {
            let mut dom = Violation::new();
            for &a in &ages {
                let p = spec.weight_p.eval(a);
                for &x in &xs {
                    let b = fert.eval(a, x);
                    dom.record(b - c * p - 1e-9 * c.max(1.0), a, x);
                }
            }
            let mut check = dom.into_check("A1", "beta > c p");
            check.detail = format!("c = {c}");
            checks.push(check);
        }
        None => checks.push(HypothesisCheck {
            name: "A1",
            status: if spec.a1_constant.is_none() && psi.is_none() {
                CheckStatus::NotChecked
            } else {
                CheckStatus::Fail
            },
            witness: None,
            detail: "beta positive where p vanishes".into(),
        }),
    }
    match &psi {
        Some(psi) => {
            let mut a2 = Violation::new();
            let mut last_psi = f64::NEG_INFINITY;
            for &x in &xs {
                let px = finite("psi", 0.0, x, psi(x))?;
                a2.record(last_psi - px, 0.0, x);
                last_psi = px;
                for &a in &ages {
                    a2.record(px - spec.mortality.eval(a, x) - eps, a, x);
                }
            }
            let top = psi(probe.x_max);
            if top <= probe.psi_divergence_threshold {
                a2.record(probe.psi_divergence_threshold - top, 0.0, probe.x_max);
            }
            checks.push(a2.into_check("A2", "psi not a non-decreasing divergent minorant of M"));
        }
        None => checks.push(HypothesisCheck {
            name: "A2",
            status: CheckStatus::NotChecked,
            witness: None,
            detail: "psi not supplied".into(),
        }),
    }

    Ok(ValidationReport {
        checks,
        lipschitz_mortality: lip_m,
        lipschitz_fertility: lip_b,
        a1_constant: a1,
    })
}

fn lipschitz_check(name: &'static str, estimate: f64) -> HypothesisCheck {
    HypothesisCheck {
        name,
        status: if estimate.is_finite() { CheckStatus::Pass } else { CheckStatus::Fail },
        witness: None,
        detail: format!("estimated constant {estimate:.6e}"),
    }
}

/// Smallest `c` with `sup_x β(a, x) ≤ c·p(a)` at every probe age where `p > 0`.
///
/// `None` when β is positive at an age where `p` vanishes.
pub fn estimate_a1_constant(spec: &ModelSpec, probe: &ProbeGrid) -> Result<Option<f64>> {
    let xs = probe.density_points();
    let (a1, a2) = spec.fertility.support;
    // Cover the full age range and, densely, the fertility support.
    let mut ages = probe.age_points(spec.a_dagger);
    let n = probe.ages.max(2);
    ages.extend((0..=n).map(|i| a1 + (a2 - a1) * i as f64 / n as f64));
    let mut c: f64 = 0.0;
    for &a in &ages {
        if a >= spec.a_dagger {
            continue;
        }
        let mut sup_b: f64 = 0.0;
        for &x in &xs {
            sup_b = sup_b.max(finite("beta", a, x, spec.fertility.eval(a, x))?);
        }
        if sup_b <= 0.0 {
            continue;
        }
        let p = finite("p", a, 0.0, spec.weight_p.eval(a))?;
        if p <= 0.0 {
            return Ok(None);
        }
        c = c.max(sup_b / p);
    }
    Ok(Some(c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> ModelSpec {
        let a_dag = 4.0;
        ModelSpec {
            label: "base".into(),
            a_dagger: a_dag,
            baseline: BaselineHazard::rational_blowup(a_dag, 0.5, 0.0),
            mortality: DensityMortality::new(|_, x| x),
            fertility: Fertility::new(1.0, (1.0, 2.0), (1.2, 1.8), 0.1, |a, _| {
                if a > 1.0 && a < 2.0 {
                    0.5
                } else {
                    0.0
                }
            }),
            weight_p: AgeFunction::constant(1.0, (0.0, a_dag)),
            p_band: (0.5, 3.5),
            weight_q: AgeFunction::constant(1.0, (0.0, a_dag)),
            initial: AgeFunction::constant(1.0, (0.0, a_dag)),
            a1_constant: None,
        }
    }

    #[test]
    fn constructed_spec_passes() {
        let report = validate(&base_spec(), &ProbeGrid::default()).unwrap();
        assert!(report.passed(), "{:?}", report.failures());
        assert_eq!(report.check("A2").unwrap().status, CheckStatus::NotChecked);
    }

    #[test]
    fn mortality_offset_at_origin_fails_h1() {
        let mut spec = base_spec();
        spec.mortality = DensityMortality::new(|_, x| 0.1 + x);
        let report = validate(&spec, &ProbeGrid::default()).unwrap();
        let c = report.check("H1.M_zero_at_origin").unwrap();
        assert_eq!(c.status, CheckStatus::Fail);
        assert_eq!(c.witness.unwrap().1, 0.0);
    }

    #[test]
    fn fertility_over_cap_fails_at_largest_probe() {
        let mut spec = base_spec();
        spec.fertility = Fertility::new(1.0, (1.0, 2.0), (1.2, 1.8), 0.1, |a, x| {
            if a > 1.0 && a < 2.0 {
                1.0 + x
            } else {
                0.0
            }
        });
        let probe = ProbeGrid::default();
        let report = validate(&spec, &probe).unwrap();
        let c = report.check("H2.beta_bounds").unwrap();
        assert_eq!(c.status, CheckStatus::Fail);
        assert_eq!(c.witness.unwrap().1, probe.x_max);
    }

    #[test]
    fn nan_rule_is_an_evaluation_error() {
        let mut spec = base_spec();
        spec.weight_q = AgeFunction::new((0.0, 4.0), |a| if a > 2.0 { f64::NAN } else { 1.0 });
        match validate(&spec, &ProbeGrid::default()) {
            Err(Error::Evaluation { field, a, .. }) => {
                assert_eq!(field, "q");
                assert!(a > 2.0);
            }
            other => panic!("expected evaluation error, got {other:?}"),
        }
    }

    #[test]
    fn validate_is_deterministic() {
        let spec = base_spec();
        let probe = ProbeGrid::default();
        assert_eq!(validate(&spec, &probe).unwrap(), validate(&spec, &probe).unwrap());
    }

    #[test]
    fn a1_constant_pointwise_ratio() {
        let mut spec = base_spec();
        spec.fertility = Fertility::new(1.0, (1.0, 2.0), (1.2, 1.8), 0.1, |a, _| {
            if a > 1.0 && a < 2.0 {
                1.0
            } else {
                0.0
            }
        });
        spec.weight_p = AgeFunction::constant(0.5, (0.0, 3.0));
        let c = estimate_a1_constant(&spec, &ProbeGrid::default()).unwrap().unwrap();
        assert!((c - 2.0).abs() < 1e-12);

        spec.weight_p = AgeFunction::new((0.0, 4.0), |a| if a > 1.0 && a < 2.0 { 0.0 } else { 1.0 });
        assert_eq!(estimate_a1_constant(&spec, &ProbeGrid::default()).unwrap(), None);
    }

    #[test]
    fn a1_constant_linear_fertility() {
        let mut spec = base_spec();
        spec.fertility = Fertility::new(2.0, (1.0, 2.0), (1.2, 1.8), 0.1, |a, _| {
            if a > 1.0 && a < 2.0 {
                a
            } else {
                0.0
            }
        });
        // Oracle: dense scan of beta/p on (1, 2).
        let oracle = (1..200_000)
            .map(|i| 1.0 + i as f64 / 200_000.0)
            .fold(0.0_f64, |m, a| m.max(a / 1.0));
        let c = estimate_a1_constant(&spec, &ProbeGrid::default()).unwrap().unwrap();
        assert!((c - oracle).abs() < 2e-3, "{c} vs {oracle}");
        assert!(c < 2.0);
    }

    #[test]
    fn survival_hits_zero_at_max_age_and_decreases() {
        let spec = base_spec();
        let ages = ProbeGrid::default().age_points(spec.a_dagger);
        let mut last = 1.0;
        for a in ages {
            let s = spec.baseline.survival(a);
            assert!(s <= last);
            last = s;
        }
        assert_eq!(spec.baseline.survival(spec.a_dagger), 0.0);
    }
}
