//! A-priori bound on the newborn function and extinction thresholds for
//! models with an Allee effect.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::Analysis;
use crate::error::{Error, Result};
use crate::model::{estimate_a1_constant, ModelSpec, ProbeGrid};
use crate::quadrature::AgeQuadrature;
use crate::solver::Trajectory;

const BOUND_SCAN_POINTS: usize = 4096;
const PSI_BRACKET_CAP: f64 = 1e15;
const BOX_GRID: usize = 64;
const BOX_STEP: f64 = 1.1;
const BOX_RESOLUTION: usize = 1 << 10;
pub const THRESHOLD_SAFETY: f64 = 0.9;

/// Largest `y ≥ 0` with `ψ(y) = x` for non-decreasing `ψ`.
///
/// On a flat stretch at level `x` the right end of the stretch is returned.
pub fn psi_inverse(psi: impl Fn(f64) -> f64, x: f64, tol: f64) -> Result<f64> {
    let psi0 = psi(0.0);
    if x < psi0 {
        return Err(Error::NoPreimage { x, psi0 });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while psi(hi) <= x {
        lo = hi;
        hi *= 2.0;
        if hi > PSI_BRACKET_CAP {
            return Err(Error::BracketExceeded { cap: PSI_BRACKET_CAP });
        }
    }
    while hi - lo > tol * lo.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if psi(mid) <= x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCertificate {
    /// Constant with `β(a, x) ≤ c·p(a)`.
    pub c: f64,
    pub gamma: f64,
    pub m: f64,
    pub rho0: f64,
    /// Upper end `c·ψ⁻¹(M − γ)` of the maximisation range.
    pub k_cap: f64,
    pub k_max: f64,
    pub bound: f64,
    /// `|ψ(ψ⁻¹(M − γ)) − (M − γ)|`.
    pub psi_inverse_residual: f64,
    pub warnings: Vec<String>,
}

impl BoundCertificate {
    /// Bound on a weighted size `∫w n` implied by `ρ ≤ B`.
    pub fn weighted_bound(&self, w_sup: f64, a_dagger: f64) -> f64 {
        w_sup * self.bound * a_dagger
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..100 {
        if hi - lo <= 1e-12 * hi.abs().max(1.0) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Bound on `sup_t ρ(t)` from the divergent mortality floor ψ and the
/// fertility-to-weight constant `c`.
pub fn compute_bound(spec: &ModelSpec, rho0: f64) -> Result<BoundCertificate> {
    let psi = spec.mortality.psi().ok_or(Error::Missing("psi"))?.clone();
    let c = match spec.a1_constant {
        Some(c) => c,
        None => estimate_a1_constant(spec, &ProbeGrid::default())?.ok_or(Error::Missing("A1 constant"))?,
    };
    if !(c > 0.0) {
        return Err(Error::Validation(format!("A1 constant must be positive, got {c}")));
    }
    let beta_plus = spec.fertility.beta_plus;
    let gamma = 1.0 - psi(0.0);
    let psi_rho0 = psi(rho0 / c);
    let m = (beta_plus * (gamma + spec.a_dagger)).max(gamma + psi_rho0);
    let mut warnings = Vec::new();
    if !(m > 1.0 + psi_rho0) {
        warnings.push(format!("M = {m} does not exceed 1 + ψ(ρ(0)/c) = {}", 1.0 + psi_rho0));
    }
    let y = psi_inverse(|x| psi(x), m - gamma, 1e-13)?;
    let psi_inverse_residual = (psi(y) - (m - gamma)).abs();
    let k_cap = c * y;
    let g = |k: f64| k / (psi(k / c) + gamma);

    let (mut k_max, mut best) = (0.0, 0.0);
    let mut j_best = 0;
    for j in 1..=BOUND_SCAN_POINTS {
        let k = k_cap * j as f64 / BOUND_SCAN_POINTS as f64;
        let v = g(k);
        if v > best {
            best = v;
            k_max = k;
            j_best = j;
        }
    }
    if j_best > 0 {
        let step = k_cap / BOUND_SCAN_POINTS as f64;
        let lo = step * (j_best as f64 - 1.0);
        let hi = (step * (j_best as f64 + 1.0)).min(k_cap);
        let (k, v) = golden_max(g, lo, hi);
        if v > best {
            best = v;
            k_max = k;
        }
    }
    let bound = m * best;
    if !bound.is_finite() || !m.is_finite() {
        return Err(Error::Validation(format!("non-finite bound (M = {m}, B = {bound})")));
    }
    Ok(BoundCertificate {
        c,
        gamma,
        m,
        rho0,
        k_cap,
        k_max,
        bound,
        psi_inverse_residual,
        warnings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AlleeThreshold {
    pub p_star: f64,
    pub q_star: f64,
    /// Newborn level below which a lifespan-long window forces extinction.
    pub rho_star: f64,
    /// Largest weighted reproduction rate on `[0, ρ*∫p] × [0, ρ*∫q]`.
    pub r1: f64,
    pub int_p: f64,
    pub int_q: f64,
    /// Box reached the search cap along P / Q without meeting `R ≥ 1`.
    pub capped: (bool, bool),
}

impl AlleeThreshold {
    /// Per-lifespan decay ratio the windowed maxima must respect.
    pub fn decay_ratio(&self, margin: f64) -> f64 {
        (1.0 + self.r1) / 2.0 + margin
    }
}

struct BoxSearch<'a> {
    analysis: Analysis<'a>,
}

impl BoxSearch<'_> {
    /// Largest `R` over a `BOX_GRID²` grid on `[0,p] × [0,q]`.
    fn box_max(&self, p: f64, q: f64) -> f64 {
        let n = BOX_GRID;
        let survivals: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| self.analysis.survival(p * i as f64 / (n - 1) as f64))
            .collect();
        let quad = self.analysis.quadrature();
        let spec = self.analysis.spec();
        (0..n)
            .into_par_iter()
            .map(|j| {
                let qj = q * j as f64 / (n - 1) as f64;
                let wb: Vec<f64> = quad
                    .ages
                    .iter()
                    .zip(&quad.weights)
                    .map(|(&a, w)| w * spec.fertility.eval(a, qj))
                    .collect();
                survivals
                    .iter()
                    .map(|s| wb.iter().zip(s).map(|(b, s)| if *s == 0.0 { 0.0 } else { b * s }).sum::<f64>())
                    .fold(f64::MIN, f64::max)
            })
            .reduce(|| f64::MIN, f64::max)
    }

    fn ok(&self, p: f64, q: f64) -> bool {
        self.box_max(p, q) < 1.0
    }

    /// Grow one side of the box; returns the new side and whether the cap was reached.
    fn grow(&self, side: f64, cap: f64, other: f64, along_p: bool) -> (f64, bool, bool) {
        let try_box = |s: f64| if along_p { self.ok(s, other) } else { self.ok(other, s) };
        let next = (side * BOX_STEP).min(cap);
        if try_box(next) {
            return (next, next >= cap, true);
        }
        let (mut lo, mut hi) = (side, next);
        for _ in 0..30 {
            let mid = 0.5 * (lo + hi);
            if try_box(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, false, false)
    }
}

/// Sub-reproduction box `[0,P*) × [0,Q*)` around the origin and the derived
/// newborn threshold.
pub fn allee_threshold(spec: &ModelSpec, search_cap: f64) -> Result<AlleeThreshold> {
    let search = BoxSearch {
        analysis: Analysis::with_resolution(spec, BOX_RESOLUTION),
    };
    let eps = search_cap * 1e-3;
    let r_eps = search.box_max(eps, eps);
    if r_eps >= 1.0 {
        return Err(Error::NoSubReproductionRegion { eps, r: r_eps });
    }
    let (mut p, mut q) = (eps, eps);
    let (mut grow_p, mut grow_q) = (true, true);
    let (mut cap_p, mut cap_q) = (false, false);
    while grow_p || grow_q {
        if grow_p {
            let (s, capped, more) = search.grow(p, search_cap, q, true);
            p = s;
            cap_p = capped;
            grow_p = more && !capped;
        }
        if grow_q {
            let (s, capped, more) = search.grow(q, search_cap, p, false);
            q = s;
            cap_q = capped;
            grow_q = more && !capped;
        }
    }

    let quad = AgeQuadrature::new(spec.a_dagger, 1 << 14);
    let int_p = quad.integrate_fn(|a| spec.weight_p.eval(a));
    let int_q = quad.integrate_fn(|a| spec.weight_q.eval(a));
    let ratio = |x: f64, w: f64| if w > 0.0 { x / w } else { f64::INFINITY };
    let rho_star = THRESHOLD_SAFETY * ratio(p, int_p).min(ratio(q, int_q));
    if !rho_star.is_finite() {
        return Err(Error::DegenerateWeight { name: "p and q" });
    }
    let fine = BoxSearch {
        analysis: Analysis::new(spec),
    };
    let r1 = fine.box_max(rho_star * int_p, rho_star * int_q);
    Ok(AlleeThreshold {
        p_star: p,
        q_star: q,
        rho_star,
        r1,
        int_p,
        int_q,
        capped: (cap_p, cap_q),
    })
}

/// End time of the first lifespan-long window on which `ρ < ρ*` throughout.
pub fn extinction_trigger_time(traj: &Trajectory, thr: &AlleeThreshold, a_dagger: f64) -> Option<f64> {
    let len = (a_dagger / traj.h).round() as usize;
    if len == 0 || traj.rho.len() <= len {
        return None;
    }
    // sliding-window maximum over indices [k-len, k]
    let mut window: VecDeque<usize> = VecDeque::new();
    for k in 0..traj.rho.len() {
        while window.back().is_some_and(|&i| traj.rho[i] <= traj.rho[k]) {
            window.pop_back();
        }
        window.push_back(k);
        if window.front().is_some_and(|&i| i + len < k) {
            window.pop_front();
        }
        if k >= len && traj.rho[window[0]] < thr.rho_star {
            return Some(traj.times[k]);
        }
    }
    None
}

pub fn check_extinction_trigger(traj: &Trajectory, thr: &AlleeThreshold, a_dagger: f64) -> bool {
    extinction_trigger_time(traj, thr, a_dagger).is_some()
}

/// Ratios `sup_{W_{j+1}} ρ / sup_{W_j} ρ` over consecutive lifespan windows
/// starting at `t_star`; windows that reach zero end the sequence.
pub fn window_decay_ratios(traj: &Trajectory, t_star: f64, a_dagger: f64) -> Vec<f64> {
    let len = (a_dagger / traj.h).round() as usize;
    let start = traj.index_at(t_star);
    let sups: Vec<f64> = (0..)
        .map(|j| start + j * len)
        .take_while(|&i| i + len < traj.rho.len())
        .map(|i| traj.rho[i + 1..=i + len].iter().copied().fold(0.0, f64::max))
        .collect();
    sups.windows(2).take_while(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AgeFunction, BaselineHazard, DensityMortality, Fertility};

    #[test]
    fn psi_inverse_examples() {
        assert!((psi_inverse(|x| x, 3.5, 1e-14).unwrap() - 3.5).abs() < 1e-12);
        assert!((psi_inverse(|x: f64| (x - 1.0).max(0.0), 0.0, 1e-14).unwrap() - 1.0).abs() < 1e-12);
        assert!((psi_inverse(|x| x * x, 4.0, 1e-14).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(psi_inverse(|x| x + 1.0, 0.5, 1e-12), Err(Error::NoPreimage { .. })));
        assert!(matches!(psi_inverse(|x: f64| x.min(2.0), 2.0, 1e-12), Err(Error::BracketExceeded { .. })));
    }

    fn linear_floor(beta: f64) -> ModelSpec {
        let a_dag = 5.0;
        ModelSpec {
            label: "linear".into(),
            a_dagger: a_dag,
            baseline: BaselineHazard::constant_rate(a_dag, 0.2),
            mortality: DensityMortality::new(|_, x| x).with_psi(|x| x),
            fertility: Fertility::new(beta, (1.0, 4.0), (1.5, 3.5), 0.0, move |a, _| if (1.0..=4.0).contains(&a) { beta } else { 0.0 }),
            weight_p: AgeFunction::constant(1.0, (0.0, a_dag)),
            p_band: (0.0, a_dag),
            weight_q: AgeFunction::constant(1.0, (0.0, a_dag)),
            initial: AgeFunction::constant(1.0, (0.0, a_dag)),
            a1_constant: Some(1.0),
        }
    }

    #[test]
    fn linear_psi_bound_is_m_minus_one() {
        let spec = linear_floor(2.0);
        let cert = compute_bound(&spec, 0.5).unwrap();
        assert_eq!(cert.gamma, 1.0);
        assert!((cert.m - 2.0 * 6.0).abs() < 1e-12);
        assert!((cert.bound - (cert.m - 1.0)).abs() < 1e-9, "{cert:?}");
        assert!((cert.k_max - (cert.m - 1.0)).abs() < 1e-9);
        assert!(cert.warnings.is_empty());
    }

    #[test]
    fn initial_branch_of_m() {
        let spec = linear_floor(0.1);
        let cert = compute_bound(&spec, 10.0).unwrap();
        assert!((cert.m - 11.0).abs() < 1e-12);
        assert!(!cert.warnings.is_empty());
    }

    #[test]
    fn bound_requires_psi() {
        let spec = ModelSpec {
            mortality: DensityMortality::new(|_, x| x),
            ..linear_floor(1.0)
        };
        assert!(matches!(compute_bound(&spec, 1.0), Err(Error::Missing("psi"))));
    }

    #[test]
    fn monotone_subcritical_box_reaches_cap() {
        let spec = linear_floor(0.1);
        let thr = allee_threshold(&spec, 50.0).unwrap();
        assert_eq!(thr.p_star, 50.0);
        assert_eq!(thr.q_star, 50.0);
        assert_eq!(thr.capped, (true, true));
        assert!(thr.rho_star < thr.p_star / thr.int_p);
        assert!(thr.r1 < 1.0);
    }

    #[test]
    fn allee_box_stops_at_crossing() {
        // R(P) = b(1 − e^{−(m(P))·a†})/m(P) with m(P) = 0.3 + (P − 1)² − 0.25 ≥ 0.05
        let a_dag = 10.0;
        let mu = |x: f64| (0.3 + (x - 1.0).powi(2) - 0.25).max(0.05);
        let b = 0.3;
        let r = move |x: f64| b * (1.0 - (-mu(x) * a_dag).exp()) / mu(x);
        let spec = ModelSpec {
            label: "allee".into(),
            a_dagger: a_dag,
            baseline: BaselineHazard::constant_rate(a_dag, 0.0),
            mortality: DensityMortality::new(move |_, x| mu(x)),
            fertility: Fertility::new(b, (0.0, a_dag), (0.0, a_dag), 0.0, move |_, _| b),
            weight_p: AgeFunction::constant(1.0, (0.0, a_dag)),
            p_band: (0.0, a_dag),
            weight_q: AgeFunction::constant(1.0, (0.0, a_dag)),
            initial: AgeFunction::constant(1.0, (0.0, a_dag)),
            a1_constant: None,
        };
        assert!(r(0.0) < 1.0 && r(1.0) > 1.0);
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if r(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let thr = allee_threshold(&spec, 100.0).unwrap();
        assert!((thr.p_star - lo).abs() < 2e-3 * lo, "{} vs {lo}", thr.p_star);
        assert_eq!(thr.capped.0, false);
        assert!(thr.r1 < 1.0);
        assert!((thr.rho_star - 0.9 * thr.p_star / a_dag).abs() < 1e-12);
    }

    #[test]
    fn trigger_on_constant_paths() {
        let thr = AlleeThreshold {
            p_star: 1.0,
            q_star: 1.0,
            rho_star: 0.5,
            r1: 0.5,
            int_p: 1.0,
            int_q: 1.0,
            capped: (false, false),
        };
        let traj = |v: f64| Trajectory {
            h: 0.1,
            a_dagger: 1.0,
            times: (0..50).map(|k| k as f64 * 0.1).collect(),
            rho: vec![v; 50],
            p: vec![v; 50],
            q: vec![v; 50],
            iterations: vec![0; 50],
            snapshots: Vec::new(),
        };
        assert!(check_extinction_trigger(&traj(0.0), &thr, 1.0));
        assert!(!check_extinction_trigger(&traj(1.0), &thr, 1.0));
        let mut dip = traj(1.0);
        for k in 20..31 {
            dip.rho[k] = 0.1;
        }
        assert_eq!(extinction_trigger_time(&dip, &thr, 1.0), Some(dip.times[30]));
    }
}
