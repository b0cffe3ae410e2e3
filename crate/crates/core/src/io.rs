//! JSON model files.
//!
//! A model file lists each vital rate as `{"kind": ..., "params": {...}}`:
//!
//! ```json
//! {
//!   "a_dagger": 10.0,
//!   "mu0": {"kind": "rational-blowup", "params": {"k": 0.5, "rate": 0.1}},
//!   "M": {"kind": "separable-product", "params": {
//!          "g": {"kind": "constant", "params": {"value": 1.0}},
//!          "h": {"kind": "linear", "params": {"slope": 1.0}}},
//!         "psi": {"kind": "linear", "params": {"slope": 1.0}}},
//!   "beta": {"kind": "constant", "params": {"value": 0.5},
//!            "a1": 1.0, "a2": 6.0, "b1": 1.5, "b2": 5.5, "delta": 0.1, "beta_plus": 0.5},
//!   "p": {"kind": "constant", "params": {"value": 1.0}},
//!   "q": {"kind": "constant", "params": {"value": 1.0}},
//!   "f": {"kind": "constant", "params": {"value": 1.0}}
//! }
//! ```
//!
//! `mu0` kinds describe the cumulative hazard `∫_0^a μ₀`; `constant` takes a
//! rate. Density kinds (`h`, `psi`) are functions of the weighted size.

use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::model::{AgeFunction, BaselineHazard, DensityMortality, Fertility, ModelSpec, Rule1, Rule2};

/// Functions of age: weights, initial data and age factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum AgeKind {
    Constant {
        value: f64,
        /// Defaults to `[0, a_dagger]`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support: Option<[f64; 2]>,
    },
    /// Linear interpolation between `[age, value]` knots, zero outside.
    PiecewiseLinear { knots: Vec<[f64; 2]> },
    Table { ages: Vec<f64>, values: Vec<f64> },
}

/// Cumulative baseline hazard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum HazardKind {
    /// Constant rate; the blow-up is confined to `a_dagger`.
    Constant { rate: f64 },
    /// `rate·a + k·a/(a_dagger − a)`.
    RationalBlowup {
        k: f64,
        #[serde(default)]
        rate: f64,
    },
    /// Knots of the cumulative hazard.
    PiecewiseLinear { knots: Vec<[f64; 2]> },
    Table { ages: Vec<f64>, values: Vec<f64> },
}

/// Functions of a weighted size `x ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum DensityKind {
    Constant { value: f64 },
    Linear { slope: f64 },
    /// `coef·x^exponent`.
    Power { coef: f64, exponent: f64 },
    /// `Σ coeffs[i]·xⁱ`, optionally clamped from below.
    Polynomial {
        coeffs: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        floor: Option<f64>,
    },
    /// `coef / (1 + scale·x)`.
    Hyperbolic { coef: f64, scale: f64 },
    /// `coef·e^{rate·x}`.
    Exponential { coef: f64, rate: f64 },
    /// Knots in `x`; extrapolated linearly beyond the last knot.
    PiecewiseLinear { knots: Vec<[f64; 2]> },
    Table { xs: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum MortalityKind {
    Constant { value: f64 },
    PiecewiseLinear { knots: Vec<[f64; 2]> },
    Table { xs: Vec<f64>, values: Vec<f64> },
    /// `g(a)·h(x)`.
    SeparableProduct { g: AgeKind, h: DensityKind },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum FertilityKind {
    /// `value` on `[a1, a2]`.
    Constant { value: f64 },
    PiecewiseLinear { knots: Vec<[f64; 2]> },
    Table { ages: Vec<f64>, values: Vec<f64> },
    SeparableProduct { g: AgeKind, h: DensityKind },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MortalityEntry {
    #[serde(flatten)]
    pub rule: MortalityKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<DensityKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FertilityEntry {
    #[serde(flatten)]
    pub rule: FertilityKind,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub delta: f64,
    pub beta_plus: f64,
}

/// Parsed model file; [`ModelFile::to_spec`] builds the evaluable model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub a_dagger: f64,
    pub mu0: HazardKind,
    #[serde(rename = "M")]
    pub mortality: MortalityEntry,
    pub beta: FertilityEntry,
    pub p: AgeKind,
    /// Interval where `p` exceeds its floor; defaults to the part of the
    /// fertility band inside the support of `p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_band: Option<[f64; 2]>,
    pub q: AgeKind,
    pub f: AgeKind,
    /// Constant with `β ≤ c·p`; estimated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

const FIELDS: [&str; 10] = ["label", "a_dagger", "mu0", "M", "beta", "p", "p_band", "q", "f", "c"];

fn field<T: DeserializeOwned>(map: &Map<String, Value>, name: &str) -> Result<Option<T>> {
    match map.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone()).map(Some).map_err(|e| Error::ModelFile {
            field: name.to_string(),
            message: e.to_string(),
        }),
    }
}

fn required<T: DeserializeOwned>(map: &Map<String, Value>, name: &str) -> Result<T> {
    field(map, name)?.ok_or_else(|| Error::ModelFile {
        field: name.to_string(),
        message: "missing".into(),
    })
}

fn bad(field: &str, message: impl Into<String>) -> Error {
    Error::ModelFile {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let map = value.as_object().ok_or_else(|| bad("<root>", "expected a JSON object"))?;
        if let Some(k) = map.keys().find(|k| !FIELDS.contains(&k.as_str())) {
            return Err(bad(k, "unknown field"));
        }
        Ok(Self {
            label: field(map, "label")?,
            a_dagger: required(map, "a_dagger")?,
            mu0: required(map, "mu0")?,
            mortality: required(map, "M")?,
            beta: required(map, "beta")?,
            p: required(map, "p")?,
            p_band: field(map, "p_band")?,
            q: required(map, "q")?,
            f: required(map, "f")?,
            c: field(map, "c")?,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_spec(&self) -> Result<ModelSpec> {
        let a_dag = self.a_dagger;
        if !(a_dag > 0.0 && a_dag.is_finite()) {
            return Err(bad("a_dagger", format!("must be positive and finite, got {a_dag}")));
        }
        let baseline = hazard(&self.mu0, a_dag)?;
        let weight_p = age_function(&self.p, a_dag, "p")?;
        let weight_q = age_function(&self.q, a_dag, "q")?;
        let initial = age_function(&self.f, a_dag, "f")?;
        let mortality = mortality(&self.mortality, a_dag)?;
        let fertility = fertility(&self.beta, a_dag)?;
        let p_band = match self.p_band {
            Some([lo, hi]) if lo <= hi => (lo, hi),
            Some(_) => return Err(bad("p_band", "lower end exceeds upper end")),
            None => {
                let (lo, hi) = weight_p.support();
                let (b1, b2) = fertility.band;
                if lo.max(b1) < hi.min(b2) {
                    (lo.max(b1), hi.min(b2))
                } else {
                    (lo, hi)
                }
            }
        };
        Ok(ModelSpec {
            label: self.label.clone().unwrap_or_else(|| "model".into()),
            a_dagger: a_dag,
            baseline,
            mortality,
            fertility,
            weight_p,
            p_band,
            weight_q,
            initial,
            a1_constant: self.c,
        })
    }
}

pub fn parse_model(text: &str) -> Result<ModelSpec> {
    ModelFile::parse(text)?.to_spec()
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelSpec> {
    ModelFile::load(path)?.to_spec()
}

fn knots_from(field: &str, knots: &[[f64; 2]]) -> Result<Vec<(f64, f64)>> {
    let pts: Vec<(f64, f64)> = knots.iter().map(|k| (k[0], k[1])).collect();
    check_knots(field, &pts)?;
    Ok(pts)
}

fn table_from(field: &str, xs: &[f64], values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if xs.len() != values.len() {
        return Err(bad(field, format!("{} abscissae but {} values", xs.len(), values.len())));
    }
    let pts: Vec<(f64, f64)> = xs.iter().copied().zip(values.iter().copied()).collect();
    check_knots(field, &pts)?;
    Ok(pts)
}

fn check_knots(field: &str, pts: &[(f64, f64)]) -> Result<()> {
    if pts.len() < 2 {
        return Err(bad(field, "need at least two knots"));
    }
    if pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(bad(field, "knots must be finite"));
    }
    if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(bad(field, "knot abscissae must be strictly increasing"));
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum Outside {
    Zero,
    Extrapolate,
}

fn interpolate(pts: &[(f64, f64)], x: f64, outside: Outside) -> f64 {
    let (first, last) = (pts[0], pts[pts.len() - 1]);
    if x < first.0 || x > last.0 {
        return match outside {
            Outside::Zero => 0.0,
            Outside::Extrapolate if x < first.0 => first.1,
            Outside::Extrapolate => {
                let prev = pts[pts.len() - 2];
                last.1 + (x - last.0) * (last.1 - prev.1) / (last.0 - prev.0)
            }
        };
    }
    let i = pts.partition_point(|p| p.0 <= x).clamp(1, pts.len() - 1);
    let (x0, y0) = pts[i - 1];
    let (x1, y1) = pts[i];
    y0 + (x - x0) * (y1 - y0) / (x1 - x0)
}

fn age_function(kind: &AgeKind, a_dag: f64, field: &str) -> Result<AgeFunction> {
    Ok(match kind {
        AgeKind::Constant { value, support } => {
            let (lo, hi) = support.map(|s| (s[0], s[1])).unwrap_or((0.0, a_dag));
            if lo > hi {
                return Err(bad(field, "support lower end exceeds upper end"));
            }
            AgeFunction::constant(*value, (lo, hi))
        }
        AgeKind::PiecewiseLinear { knots } => {
            let pts = knots_from(field, knots)?;
            let support = (pts[0].0, pts[pts.len() - 1].0);
            AgeFunction::new(support, move |a| interpolate(&pts, a, Outside::Zero))
        }
        AgeKind::Table { ages, values } => {
            let pts = table_from(field, ages, values)?;
            let support = (pts[0].0, pts[pts.len() - 1].0);
            AgeFunction::new(support, move |a| interpolate(&pts, a, Outside::Zero))
        }
    })
}

fn hazard(kind: &HazardKind, a_dag: f64) -> Result<BaselineHazard> {
    Ok(match *kind {
        HazardKind::Constant { rate } => BaselineHazard::constant_rate(a_dag, rate),
        HazardKind::RationalBlowup { k, rate } => BaselineHazard::rational_blowup(a_dag, k, rate),
        HazardKind::PiecewiseLinear { ref knots } => cumulative_table(knots_from("mu0", knots)?, a_dag)?,
        HazardKind::Table { ref ages, ref values } => cumulative_table(table_from("mu0", ages, values)?, a_dag)?,
    })
}

fn cumulative_table(pts: Vec<(f64, f64)>, a_dag: f64) -> Result<BaselineHazard> {
    if pts.windows(2).any(|w| w[1].1 < w[0].1) || pts[0].1 < 0.0 {
        return Err(bad("mu0", "cumulative hazard must be non-negative and non-decreasing"));
    }
    Ok(BaselineHazard::from_cumulative(a_dag, move |a| interpolate(&pts, a, Outside::Extrapolate)))
}

type DensityRule = (Rule1, Option<Rule1>);

/// Rule and, when available in closed form, its derivative.
fn density(kind: &DensityKind, field: &str) -> Result<DensityRule> {
    fn arc(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Rule1 {
        Arc::new(f)
    }
    Ok(match kind.clone() {
        DensityKind::Constant { value } => (arc(move |_| value), Some(arc(|_| 0.0))),
        DensityKind::Linear { slope } => (arc(move |x| slope * x), Some(arc(move |_| slope))),
        DensityKind::Power { coef, exponent } => (
            arc(move |x| coef * x.max(0.0).powf(exponent)),
            Some(arc(move |x| {
                if x <= 0.0 && exponent < 1.0 {
                    f64::INFINITY
                } else {
                    coef * exponent * x.max(0.0).powf(exponent - 1.0)
                }
            })),
        ),
        DensityKind::Polynomial { coeffs, floor } => {
            if coeffs.is_empty() {
                return Err(bad(field, "empty coefficient list"));
            }
            let c2 = coeffs.clone();
            let poly = move |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
            let dpoly = move |x: f64| c2.iter().enumerate().skip(1).rev().fold(0.0, |acc, (i, c)| acc * x + i as f64 * c);
            let lo = floor.unwrap_or(f64::NEG_INFINITY);
            let p2 = poly.clone();
            (
                arc(move |x| poly(x).max(lo)),
                Some(arc(move |x| if p2(x) > lo { dpoly(x) } else { 0.0 })),
            )
        }
        DensityKind::Hyperbolic { coef, scale } => (
            arc(move |x| coef / (1.0 + scale * x)),
            Some(arc(move |x| -coef * scale / (1.0 + scale * x).powi(2))),
        ),
        DensityKind::Exponential { coef, rate } => (
            arc(move |x| coef * (rate * x).exp()),
            Some(arc(move |x| coef * rate * (rate * x).exp())),
        ),
        DensityKind::PiecewiseLinear { knots } => {
            let pts = knots_from(field, &knots)?;
            (arc(move |x| interpolate(&pts, x, Outside::Extrapolate)), None)
        }
        DensityKind::Table { xs, values } => {
            let pts = table_from(field, &xs, &values)?;
            (arc(move |x| interpolate(&pts, x, Outside::Extrapolate)), None)
        }
    })
}

fn mortality(entry: &MortalityEntry, a_dag: f64) -> Result<DensityMortality> {
    let (rule, derivative): (Rule2, Option<Rule2>) = match &entry.rule {
        MortalityKind::Constant { value } => {
            let v = *value;
            (Arc::new(move |_, _| v), Some(Arc::new(|_, _| 0.0)))
        }
        MortalityKind::PiecewiseLinear { knots } => {
            let pts = knots_from("M", knots)?;
            (Arc::new(move |_, x| interpolate(&pts, x, Outside::Extrapolate)), None)
        }
        MortalityKind::Table { xs, values } => {
            let pts = table_from("M", xs, values)?;
            (Arc::new(move |_, x| interpolate(&pts, x, Outside::Extrapolate)), None)
        }
        MortalityKind::SeparableProduct { g, h } => {
            let g = age_function(g, a_dag, "M.g")?;
            let (h, dh) = density(h, "M.h")?;
            let g2 = g.clone();
            (
                Arc::new(move |a, x| g.eval(a) * h(x)),
                dh.map(|dh| Arc::new(move |a, x| g2.eval(a) * dh(x)) as Rule2),
            )
        }
    };
    let psi = match &entry.psi {
        Some(kind) => Some(density(kind, "M.psi")?.0),
        None => None,
    };
    Ok(DensityMortality::from_parts(rule, derivative, psi))
}

fn fertility(entry: &FertilityEntry, a_dag: f64) -> Result<Fertility> {
    let (a1, a2) = (entry.a1, entry.a2);
    if !(a1 <= a2) || !(entry.b1 <= entry.b2) {
        return Err(bad("beta", "interval ends out of order"));
    }
    let (rule, derivative): (Rule2, Option<Rule2>) = match &entry.rule {
        FertilityKind::Constant { value } => {
            let v = *value;
            (
                Arc::new(move |a, _| if a >= a1 && a <= a2 { v } else { 0.0 }),
                Some(Arc::new(|_, _| 0.0)),
            )
        }
        FertilityKind::PiecewiseLinear { knots } => {
            let pts = knots_from("beta", knots)?;
            (Arc::new(move |a, _| interpolate(&pts, a, Outside::Zero)), Some(Arc::new(|_, _| 0.0)))
        }
        FertilityKind::Table { ages, values } => {
            let pts = table_from("beta", ages, values)?;
            (Arc::new(move |a, _| interpolate(&pts, a, Outside::Zero)), Some(Arc::new(|_, _| 0.0)))
        }
        FertilityKind::SeparableProduct { g, h } => {
            let g = age_function(g, a_dag, "beta.g")?;
            let (h, dh) = density(h, "beta.h")?;
            let g2 = g.clone();
            (
                Arc::new(move |a, x| g.eval(a) * h(x)),
                dh.map(|dh| Arc::new(move |a, x| g2.eval(a) * dh(x)) as Rule2),
            )
        }
    };
    let rule2 = rule.clone();
    let mut fert = Fertility::new(entry.beta_plus, (a1, a2), (entry.b1, entry.b2), entry.delta, move |a, x| rule2(a, x));
    fert.set_derivative(derivative);
    Ok(fert)
}
