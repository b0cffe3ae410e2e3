//! Scenario files, outcome classification and parameter sweeps.
//!
//! A scenario names a model file, a time grid and the analyses to run:
//!
//! ```json
//! {
//!   "id": "logistic",
//!   "model": "logistic.json",
//!   "grid": {"h": 0.01, "horizon": 200.0, "snapshot_stride": 0},
//!   "analyses": ["r0", "malthusian", "bound", "simulate"],
//!   "sweep": {"parameter": "beta.scale", "values": [0.5, 1.0, 2.0]}
//! }
//! ```
//!
//! Relative model paths resolve against the scenario file's directory.
//! Sweep parameters are dotted paths into the model file
//! (`mu0.params.rate`), or `beta.scale` / `f.scale` to multiply the
//! fertility or the initial data.

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{find_equilibria, is_monotone, net_reproduction_rate, solve_malthusian, EquilibriumPoint};
use crate::bounds::{allee_threshold, compute_bound, extinction_trigger_time, AlleeThreshold, BoundCertificate};
use crate::error::{Error, Result};
use crate::export;
use crate::io::ModelFile;
use crate::model::{validate, ModelSpec, ProbeGrid};
use crate::solver::{GridSpec, Simulator, SolverOptions, Trajectory};
use crate::stability::{analyze_stability, Classification};

pub const EXTINCTION_EPS: f64 = 1e-8;
pub const PERSISTENCE_EPS: f64 = 1e-6;
/// Classification window, in lifespans.
pub const WINDOW_LIFESPANS: f64 = 2.0;
const MIN_HORIZON_LIFESPANS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Simulate,
    R0,
    Malthusian,
    Equilibria,
    Stability,
    Bound,
    Allee,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub parameter: String,
    pub values: Vec<f64>,
}

fn default_tasks() -> Vec<Task> {
    vec![Task::Simulate]
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub model: PathBuf,
    pub grid: GridSpec,
    #[serde(default = "default_tasks")]
    pub analyses: Vec<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Upper end of the equilibrium scan and the Allee box search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut sc: Scenario = serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
        sc.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(sc)
    }

    pub fn model_path(&self) -> PathBuf {
        if self.model.is_absolute() {
            self.model.clone()
        } else {
            self.base_dir.join(&self.model)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&self.id))
    }

    pub fn wants(&self, task: Task) -> bool {
        self.analyses.contains(&task)
    }

    fn check(&self, spec: &ModelSpec) -> Result<()> {
        if self.wants(Task::Bound) && spec.mortality.psi().is_none() {
            return Err(Error::Scenario("bound requested but the model has no psi".into()));
        }
        if self.wants(Task::Simulate) && self.grid.horizon < MIN_HORIZON_LIFESPANS * spec.a_dagger {
            return Err(Error::Scenario(format!(
                "horizon {} is shorter than {MIN_HORIZON_LIFESPANS} lifespans",
                self.grid.horizon
            )));
        }
        if let Some(axis) = &self.sweep {
            if axis.values.is_empty() {
                return Err(Error::Scenario("sweep has no values".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Extinct,
    Persistent,
    Undecided,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Extinct => "extinct",
            Self::Persistent => "persistent",
            Self::Undecided => "undecided",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutcomeRecord {
    pub scenario: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_value: Option<f64>,
    pub r0: f64,
    pub lambda: Option<f64>,
    /// Dominant characteristic root at the trivial equilibrium, `(re, im)`.
    pub dominant_root: Option<(f64, f64)>,
    pub trivial_stability: Option<Classification>,
    pub classification: Outcome,
    pub rho_final: Option<f64>,
    pub window_min: Option<f64>,
    pub window_max: Option<f64>,
    /// Scale `B` for the extinction and persistence thresholds.
    pub scale: Option<f64>,
    pub bound: Option<BoundCertificate>,
    pub equilibria: Vec<EquilibriumPoint>,
    pub allee: Option<AlleeThreshold>,
    pub extinction_trigger: Option<f64>,
    pub diagnostics: Vec<String>,
    pub error: Option<String>,
}

impl OutcomeRecord {
    fn new(scenario: &str, sweep_value: Option<f64>) -> Self {
        Self {
            scenario: scenario.to_string(),
            sweep_value,
            r0: f64::NAN,
            lambda: None,
            dominant_root: None,
            trivial_stability: None,
            classification: Outcome::Undecided,
            rho_final: None,
            window_min: None,
            window_max: None,
            scale: None,
            bound: None,
            equilibria: Vec::new(),
            allee: None,
            extinction_trigger: None,
            diagnostics: Vec::new(),
            error: None,
        }
    }
}

/// Classify the final `2·a†` of a trajectory against thresholds scaled by `b`.
///
/// Returns the outcome and the window's min and max of `ρ`.
pub fn classify(traj: &Trajectory, b: f64) -> (Outcome, f64, f64) {
    let start = traj.index_at(traj.times.last().copied().unwrap_or(0.0) - WINDOW_LIFESPANS * traj.a_dagger);
    let window = &traj.rho[start..];
    let lo = window.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = window.iter().copied().fold(0.0, f64::max);
    let chunk = (window.len() / 4).max(1);
    let maxima: Vec<f64> = window.chunks(chunk).map(|c| c.iter().copied().fold(0.0, f64::max)).collect();
    let decreasing = maxima.windows(2).all(|w| w[1] <= w[0]);
    let outcome = if traj.rho_final() < EXTINCTION_EPS * b && decreasing {
        Outcome::Extinct
    } else if lo >= PERSISTENCE_EPS * b {
        Outcome::Persistent
    } else {
        Outcome::Undecided
    };
    (outcome, lo, hi)
}

/// Apply one sweep value to the raw model file.
pub fn apply_parameter(model: &Value, parameter: &str, value: f64) -> Result<ModelSpec> {
    match parameter {
        "beta.scale" => {
            let spec = model_from_value(model)?;
            let mut fert = spec.fertility.scaled_by(move |_| value);
            fert.beta_plus *= value;
            fert.delta *= value;
            Ok(spec.with_fertility(fert))
        }
        "f.scale" => Ok(model_from_value(model)?.with_initial_scaled(value)),
        path => {
            let mut v = model.clone();
            let mut slot = &mut v;
            for seg in path.split('.') {
                slot = match slot {
                    Value::Object(map) => map.get_mut(seg),
                    Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
                    _ => None,
                }
                .ok_or_else(|| Error::Scenario(format!("sweep parameter `{path}` not found at `{seg}`")))?;
            }
            if !slot.is_number() {
                return Err(Error::Scenario(format!("sweep parameter `{path}` is not a number")));
            }
            *slot = serde_json::json!(value);
            model_from_value(&v)
        }
    }
}

fn model_from_value(v: &Value) -> Result<ModelSpec> {
    ModelFile::parse(&v.to_string())?.to_spec()
}

fn read_model_value(sc: &Scenario) -> Result<Value> {
    Ok(serde_json::from_str(&std::fs::read_to_string(sc.model_path())?)?)
}

/// Run every requested analysis on the scenario's model and classify.
pub fn run_scenario(sc: &Scenario) -> Result<OutcomeRecord> {
    let spec = ModelFile::load(sc.model_path())?.to_spec()?;
    run_with_spec(sc, &spec, None, &sc.out_dir())
}

/// [`run_scenario`] on an already-built model, writing artifacts to `out`.
pub fn run_with_spec(sc: &Scenario, spec: &ModelSpec, sweep_value: Option<f64>, out: &Path) -> Result<OutcomeRecord> {
    sc.check(spec)?;
    let report = validate(spec, &ProbeGrid::default())?;
    export::write_json(&report, &out.join("validation.json"))?;
    if !report.passed() {
        let names: Vec<String> = report.failures().iter().map(|c| c.name.to_string()).collect();
        return Err(Error::Validation(format!("failed checks: {}", names.join(", "))));
    }

    let mut rec = OutcomeRecord::new(&sc.id, sweep_value);
    rec.r0 = net_reproduction_rate(spec);
    match solve_malthusian(spec, sc.tol) {
        Ok(l) => rec.lambda = Some(l),
        Err(e) if sc.wants(Task::Malthusian) => return Err(e),
        Err(e) => rec.diagnostics.push(format!("malthusian: {e}")),
    }

    let sim = Simulator::new(
        spec,
        sc.grid,
        SolverOptions {
            tol: sc.tol,
            max_iter: sc.max_iter,
        },
    )?;
    let rho0 = sim.initial_state().rho;
    if spec.mortality.psi().is_some() {
        match compute_bound(spec, rho0) {
            Ok(cert) => {
                export::write_json(&cert, &out.join("bound.json"))?;
                rec.bound = Some(cert);
            }
            Err(e) if sc.wants(Task::Bound) => return Err(e),
            Err(e) => rec.diagnostics.push(format!("bound: {e}")),
        }
    }
    let p_max = sc.p_max.or(rec.bound.as_ref().map(|b| 10.0 * b.bound));

    if sc.wants(Task::Equilibria) || sc.wants(Task::Stability) {
        let p_max = p_max.ok_or_else(|| Error::Scenario("equilibria need p_max or a bound certificate".into()))?;
        rec.equilibria = find_equilibria(spec, p_max, sc.tol)?;
        export::write_equilibria(&rec.equilibria, &out.join("equilibria.csv"))?;
    }
    if sc.wants(Task::Stability) {
        for (k, eq) in rec.equilibria.iter().enumerate() {
            match analyze_stability(spec, eq, sc.tol) {
                Ok(report) => {
                    export::write_stability(&report, &out.join(format!("stability_eq{k}.csv")))?;
                    if eq.is_trivial() {
                        rec.dominant_root = report.dominant.map(|d| (d.re, d.im));
                        rec.trivial_stability = Some(report.classification);
                    }
                }
                Err(e) => rec.diagnostics.push(format!("stability of equilibrium {k}: {e}")),
            }
        }
    }
    if sc.wants(Task::Allee) {
        let cap = p_max.unwrap_or(100.0);
        let thr = allee_threshold(spec, cap)?;
        export::write_json(&thr, &out.join("allee.json"))?;
        rec.allee = Some(thr);
    }

    if sc.wants(Task::Simulate) {
        let traj = sim.run()?;
        export::write_trajectory(&traj, &out.join("trajectory.csv"))?;
        if !traj.snapshots.is_empty() {
            export::write_snapshots(&traj, &out.join("snapshots"))?;
        }
        let scale = match &rec.bound {
            Some(cert) => cert.bound,
            None => {
                rec.diagnostics.push("no bound certificate: thresholds scaled by the trajectory maximum".into());
                traj.rho.iter().copied().fold(rho0, f64::max)
            }
        };
        let (outcome, lo, hi) = classify(&traj, scale);
        rec.scale = Some(scale);
        rec.rho_final = Some(traj.rho_final());
        rec.window_min = Some(lo);
        rec.window_max = Some(hi);
        rec.classification = outcome;
        if let Some(thr) = &rec.allee {
            rec.extinction_trigger = extinction_trigger_time(&traj, thr, spec.a_dagger);
            if let Some(t) = rec.extinction_trigger {
                let end = traj.rho[traj.index_at(t)];
                if traj.rho_final() >= end && end > 0.0 {
                    rec.diagnostics.push(format!("extinction predicted at t = {t} but ρ did not decrease"));
                }
            }
        }
        if is_monotone(spec, &ProbeGrid::default()) {
            let expected = if rec.r0 <= 1.0 { Outcome::Extinct } else { Outcome::Persistent };
            if outcome != expected {
                rec.diagnostics.push(format!(
                    "monotone model with R0 = {} classified {outcome}, expected {expected}",
                    rec.r0
                ));
                rec.classification = Outcome::Undecided;
            }
        }
    }
    export::write_json(&rec, &out.join("outcome.json"))?;
    Ok(rec)
}

/// Run the scenario once per sweep value, concurrently; failures are
/// recorded in their row. Writes `sweep_summary.csv`.
pub fn sweep(sc: &Scenario) -> Result<Vec<OutcomeRecord>> {
    let axis = sc.sweep.as_ref().ok_or_else(|| Error::Scenario("scenario has no sweep axis".into()))?;
    if axis.values.is_empty() {
        return Err(Error::Scenario("sweep has no values".into()));
    }
    let model = read_model_value(sc)?;
    let out = sc.out_dir();
    let mut records: Vec<(f64, OutcomeRecord)> = axis
        .values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let dir = out.join(format!("value_{i}"));
            let rec = apply_parameter(&model, &axis.parameter, v).and_then(|spec| run_with_spec(sc, &spec, Some(v), &dir));
            let rec = rec.unwrap_or_else(|e| {
                let mut r = OutcomeRecord::new(&sc.id, Some(v));
                r.error = Some(e.to_string());
                r
            });
            (v, rec)
        })
        .collect();
    records.sort_by(|a, b| a.0.total_cmp(&b.0));
    let records: Vec<OutcomeRecord> = records.into_iter().map(|(_, r)| r).collect();
    write_summary(&records, &out.join("sweep_summary.csv"))?;
    Ok(records)
}

fn write_summary(records: &[OutcomeRecord], path: &Path) -> Result<()> {
    std::fs::create_dir_all(path.parent().unwrap_or(Path::new(".")))?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["value", "R0", "lambda", "classification", "rho_final"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        let class = if r.error.is_some() { "error".to_string() } else { r.classification.to_string() };
        w.write_record([opt(r.sweep_value), r.r0.to_string(), opt(r.lambda), class, opt(r.rho_final)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(rho: Vec<f64>) -> Trajectory {
        let n = rho.len();
        Trajectory {
            h: 0.1,
            a_dagger: 1.0,
            times: (0..n).map(|k| k as f64 * 0.1).collect(),
            rho,
            p: vec![0.0; n],
            q: vec![0.0; n],
            iterations: vec![0; n],
            snapshots: Vec::new(),
        }
    }

    #[test]
    fn classification_thresholds() {
        let decaying = traj((0..100).map(|k| (-(k as f64)).exp()).collect());
        assert_eq!(classify(&decaying, 1.0).0, Outcome::Extinct);
        let flat = traj(vec![0.5; 100]);
        let (o, lo, hi) = classify(&flat, 1.0);
        assert_eq!((o, lo, hi), (Outcome::Persistent, 0.5, 0.5));
        let tiny_but_growing = traj((0..100).map(|k| 1e-12 * (1.0 + k as f64)).collect());
        assert_eq!(classify(&tiny_but_growing, 1.0).0, Outcome::Undecided);
    }

    #[test]
    fn dotted_parameter_paths() {
        let model: Value = serde_json::from_str(include_str!("../models/logistic.json")).unwrap();
        let spec = apply_parameter(&model, "mu0.params.rate", 0.7).unwrap();
        assert!((spec.baseline.survival(1.0) - (-0.7 - 0.5 / 9.0f64).exp()).abs() < 1e-12);
        assert!(matches!(apply_parameter(&model, "mu0.params.nope", 1.0), Err(Error::Scenario(_))));
        let base = model_from_value(&model).unwrap();
        let scaled = apply_parameter(&model, "beta.scale", 2.0).unwrap();
        assert_eq!(scaled.fertility.eval(3.0, 0.0), 2.0 * base.fertility.eval(3.0, 0.0));
        assert_eq!(scaled.fertility.beta_plus, 2.0 * base.fertility.beta_plus);
    }
}
