//! Reproduction numbers, the Malthusian parameter and equilibria.
//!
//! All age integrals run over `[0, a_dagger]` with composite Simpson weights
//! on a uniform grid (default `2^14` intervals). The baseline survival is
//! cached once per [`Analysis`]; the density-dependent part of the survival
//! is re-integrated for every weighted size `P`. The endpoint node uses the
//! left limit of the survival, so a hazard whose blow-up is confined to
//! `a_dagger` integrates like its finite-rate part.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AgeFunction, ModelSpec, ProbeGrid};
use crate::quadrature::AgeQuadrature;

pub const DEFAULT_RESOLUTION: usize = 1 << 14;
pub const EQUILIBRIUM_SCAN_POINTS: usize = 1024;
const LAMBDA_CAP: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumPoint {
    pub p_star: f64,
    pub q_star: f64,
    pub rho_star: f64,
    /// `|R(P*, P*Γ(P*)) − 1|`; zero for the trivial equilibrium.
    pub residual: f64,
    pub gamma: f64,
}

impl EquilibriumPoint {
    /// The zero state; `gamma` is left at zero.
    pub fn trivial() -> Self {
        Self {
            p_star: 0.0,
            q_star: 0.0,
            rho_star: 0.0,
            residual: 0.0,
            gamma: 0.0,
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.rho_star == 0.0 && self.p_star == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperReproduction {
    pub value: f64,
    /// `R₀⁺ < 1`: extinction follows without further conditions.
    pub extinction_guaranteed: bool,
}

/// Cached quadrature context for one model.
pub struct Analysis<'a> {
    spec: &'a ModelSpec,
    quad: AgeQuadrature,
    baseline: Vec<f64>,
}

impl<'a> Analysis<'a> {
    pub fn new(spec: &'a ModelSpec) -> Self {
        Self::with_resolution(spec, DEFAULT_RESOLUTION)
    }

    pub fn with_resolution(spec: &'a ModelSpec, intervals: usize) -> Self {
        let quad = AgeQuadrature::new(spec.a_dagger, intervals);
        let baseline = quad.ages.iter().map(|&a| spec.baseline.survival_left(a)).collect();
        Self { spec, quad, baseline }
    }

    pub fn spec(&self) -> &ModelSpec {
        self.spec
    }

    pub fn quadrature(&self) -> &AgeQuadrature {
        &self.quad
    }

    /// Survival `exp(−∫_0^a μ(v, P) dv)` at the quadrature nodes.
    pub fn survival(&self, p: f64) -> Vec<f64> {
        let m: Vec<f64> = self.quad.ages.iter().map(|&a| self.spec.mortality.eval(a, p)).collect();
        if m.iter().all(|&v| v == 0.0) {
            return self.baseline.clone();
        }
        let cum = self.quad.cumulative(&m);
        self.baseline.iter().zip(cum).map(|(s, c)| if *s == 0.0 { 0.0 } else { s * (-c).exp() }).collect()
    }

    fn fertility_integral(&self, q: f64, survival: &[f64]) -> f64 {
        self.quad
            .weights
            .iter()
            .zip(&self.quad.ages)
            .zip(survival)
            .map(|((w, &a), s)| if *s == 0.0 { 0.0 } else { w * self.spec.fertility.eval(a, q) * s })
            .sum()
    }

    fn weight_integral(&self, weight: &AgeFunction, survival: &[f64]) -> f64 {
        self.quad
            .weights
            .iter()
            .zip(&self.quad.ages)
            .zip(survival)
            .map(|((w, &a), s)| w * weight.eval(a) * s)
            .sum()
    }

    /// Lifetime offspring with weighted sizes frozen at `(p, q)`.
    pub fn weighted_reproduction_rate(&self, p: f64, q: f64) -> f64 {
        self.fertility_integral(q, &self.survival(p))
    }

    pub fn net_reproduction_rate(&self) -> f64 {
        self.weighted_reproduction_rate(0.0, 0.0)
    }

    /// Zero-density Lotka functional `∫ β(a,0) e^{−∫μ(·,0) − λa} da`.
    pub fn lotka(&self, lambda: f64) -> f64 {
        let s = self.survival(0.0);
        self.lotka_kernel(&s, lambda)
    }

    fn lotka_kernel(&self, survival: &[f64], lambda: f64) -> f64 {
        self.quad
            .weights
            .iter()
            .zip(&self.quad.ages)
            .zip(survival)
            .map(|((w, &a), s)| {
                if *s == 0.0 {
                    0.0
                } else {
                    w * self.spec.fertility.eval(a, 0.0) * s * (-lambda * a).exp()
                }
            })
            .sum()
    }

    /// Real root of the Lotka equation, by bracketing bisection.
    pub fn solve_malthusian(&self, tol: f64) -> Result<f64> {
        let survival = self.survival(0.0);
        let kernel: Vec<(f64, f64)> = self
            .quad
            .weights
            .iter()
            .zip(&self.quad.ages)
            .zip(&survival)
            .filter(|(_, s)| **s != 0.0)
            .map(|((w, &a), s)| (w * self.spec.fertility.eval(a, 0.0) * s, a))
            .filter(|(k, _)| *k != 0.0)
            .collect();
        let lotka = |lam: f64| -> f64 { kernel.iter().map(|(k, a)| k * (-lam * a).exp()).sum() };
        let r0 = lotka(0.0);
        if !(r0 > 0.0) {
            return Err(Error::NoRoot(format!("R0 = {r0}, the Lotka functional has no unit crossing")));
        }
        let (mut lo, mut hi) = (-1.0, 1.0);
        while lotka(hi) > 1.0 {
            lo = hi;
            hi *= 2.0;
            if hi > LAMBDA_CAP {
                return Err(Error::BracketExceeded { cap: LAMBDA_CAP });
            }
        }
        while lotka(lo) < 1.0 {
            hi = lo;
            lo *= 2.0;
            if lo < -LAMBDA_CAP {
                return Err(Error::BracketExceeded { cap: LAMBDA_CAP });
            }
        }
        let width_tol = (1e-3 * tol).max(1e-16);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            let v = lotka(mid);
            if v == 1.0 {
                return Ok(mid);
            }
            if v > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= width_tol * mid.abs().max(1.0) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `Γ(P) = ∫q S(·;P) / ∫p S(·;P)`.
    pub fn gamma(&self, p: f64) -> Result<f64> {
        let s = self.survival(p);
        self.gamma_from(&s)
    }

    fn gamma_from(&self, s: &[f64]) -> Result<f64> {
        let den = self.weight_integral(&self.spec.weight_p, s);
        if !(den > 0.0) {
            return Err(Error::DegenerateWeight { name: "p" });
        }
        Ok(self.weight_integral(&self.spec.weight_q, s) / den)
    }

    /// `g(P) = R(P, P·Γ(P)) − 1`.
    pub fn equilibrium_gap(&self, p: f64) -> Result<f64> {
        let s = self.survival(p);
        let gamma = self.gamma_from(&s)?;
        Ok(self.fertility_integral(p * gamma, &s) - 1.0)
    }

    fn equilibrium_at(&self, p: f64) -> Result<EquilibriumPoint> {
        let s = self.survival(p);
        let den = self.weight_integral(&self.spec.weight_p, &s);
        if !(den > 0.0) {
            return Err(Error::DegenerateWeight { name: "p" });
        }
        let gamma = self.weight_integral(&self.spec.weight_q, &s) / den;
        let residual = (self.fertility_integral(p * gamma, &s) - 1.0).abs();
        Ok(EquilibriumPoint {
            p_star: p,
            q_star: p * gamma,
            rho_star: p / den,
            residual,
            gamma,
        })
    }

    /// Trivial equilibrium plus every sign change of `g` on `[0, p_max]`.
    pub fn find_equilibria(&self, p_max: f64, tol: f64) -> Result<Vec<EquilibriumPoint>> {
        if !(p_max > 0.0) {
            return Err(Error::Scenario(format!("P_max must be positive, got {p_max}")));
        }
        let n = EQUILIBRIUM_SCAN_POINTS;
        let ps: Vec<f64> = (0..n).map(|j| p_max * j as f64 / (n - 1) as f64).collect();
        let gs: Vec<f64> = ps.par_iter().map(|&p| self.equilibrium_gap(p)).collect::<Result<_>>()?;

        let trivial_gamma = self.gamma(0.0)?;
        let mut out = vec![EquilibriumPoint {
            gamma: trivial_gamma,
            ..EquilibriumPoint::trivial()
        }];
        let mut brackets = Vec::new();
        for j in 1..n {
            if gs[j] == 0.0 {
                brackets.push((ps[j], ps[j]));
            } else if gs[j - 1] != 0.0 && (gs[j - 1] < 0.0) != (gs[j] < 0.0) {
                brackets.push((ps[j - 1], ps[j]));
            }
        }
        let roots: Vec<f64> = brackets
            .par_iter()
            .map(|&(lo, hi)| self.bisect_gap(lo, hi, tol))
            .collect::<Result<_>>()?;
        for p in roots {
            out.push(self.equilibrium_at(p)?);
        }
        Ok(out)
    }

    fn bisect_gap(&self, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
        if lo == hi {
            return Ok(lo);
        }
        let mut g_lo = self.equilibrium_gap(lo)?;
        let mut best = (f64::INFINITY, lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let g = self.equilibrium_gap(mid)?;
            if g.abs() < best.0 {
                best = (g.abs(), mid);
            }
            if g.abs() <= 1e-6 * tol || (hi - lo) <= 4.0 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE) {
                break;
            }
            if (g < 0.0) == (g_lo < 0.0) {
                lo = mid;
                g_lo = g;
            } else {
                hi = mid;
            }
        }
        Ok(best.1)
    }

    /// Equilibrium age profile `ρ*·S(a; P*)` as a tabulated age function.
    pub fn equilibrium_profile(&self, eq: &EquilibriumPoint) -> AgeFunction {
        let s = self.survival(eq.p_star);
        let values: Vec<f64> = s.iter().map(|v| eq.rho_star * v).collect();
        let h = self.quad.h;
        let last = values.len() - 1;
        AgeFunction::new((0.0, self.spec.a_dagger), move |a| {
            let x = (a / h).max(0.0);
            let i = (x.floor() as usize).min(last);
            if i == last {
                return values[last];
            }
            let t = x - i as f64;
            values[i] * (1.0 - t) + values[i + 1] * t
        })
    }

    /// `R₀⁺ = ∫β₊(a) e^{−∫μ₋}` for caller-supplied envelopes, after checking
    /// them on `probe`.
    pub fn upper_reproduction_rate(
        &self,
        mu_minus: &AgeFunction,
        beta_plus: &AgeFunction,
        probe: &ProbeGrid,
    ) -> Result<UpperReproduction> {
        let mm: Vec<f64> = self.quad.ages.iter().map(|&a| mu_minus.eval(a)).collect();
        let cum_minus = self.quad.cumulative(&mm);
        let xs = probe.density_points();
        let stride = (self.quad.len() / probe.ages.max(2)).max(1);
        for &x in &xs {
            let s = self.survival(x);
            for i in (0..self.quad.len()).step_by(stride) {
                let a = self.quad.ages[i];
                let b = self.spec.fertility.eval(a, x);
                if b > beta_plus.eval(a) + 1e-9 {
                    return Err(Error::EnvelopeViolated { name: "beta_plus", a, x });
                }
                // μ ≥ μ₋ in integrated form: S(a; x) ≤ exp(−∫μ₋).
                let bound = (-cum_minus[i]).exp();
                if s[i] > bound * (1.0 + 1e-9) + 1e-12 {
                    return Err(Error::EnvelopeViolated { name: "mu_minus", a, x });
                }
            }
        }
        let value = self
            .quad
            .weights
            .iter()
            .zip(&self.quad.ages)
            .zip(&cum_minus)
            .map(|((w, &a), c)| w * beta_plus.eval(a) * (-c).exp())
            .sum::<f64>();
        Ok(UpperReproduction {
            value,
            extinction_guaranteed: value < 1.0,
        })
    }
}

pub fn net_reproduction_rate(spec: &ModelSpec) -> f64 {
    Analysis::new(spec).net_reproduction_rate()
}

pub fn weighted_reproduction_rate(spec: &ModelSpec, p: f64, q: f64) -> f64 {
    Analysis::new(spec).weighted_reproduction_rate(p, q)
}

pub fn solve_malthusian(spec: &ModelSpec, tol: f64) -> Result<f64> {
    Analysis::new(spec).solve_malthusian(tol)
}

pub fn find_equilibria(spec: &ModelSpec, p_max: f64, tol: f64) -> Result<Vec<EquilibriumPoint>> {
    Analysis::new(spec).find_equilibria(p_max, tol)
}

pub fn upper_reproduction_rate(
    spec: &ModelSpec,
    mu_minus: &AgeFunction,
    beta_plus: &AgeFunction,
) -> Result<UpperReproduction> {
    Analysis::new(spec).upper_reproduction_rate(mu_minus, beta_plus, &ProbeGrid::default())
}

/// Whether `𝓜` is non-decreasing and `β` non-increasing in the density
/// argument on the probe grid.
pub fn is_monotone(spec: &ModelSpec, probe: &ProbeGrid) -> bool {
    let xs = probe.density_points();
    probe.age_points(spec.a_dagger).iter().all(|&a| {
        xs.windows(2).all(|w| {
            spec.mortality.eval(a, w[1]) >= spec.mortality.eval(a, w[0]) - 1e-12
                && spec.fertility.eval(a, w[1]) <= spec.fertility.eval(a, w[0]) + 1e-12
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BaselineHazard, DensityMortality, Fertility};

    /// Constant rates: β ≡ b on [0, a†), μ₀ ≡ m, 𝓜(a, x) = x.
    fn constant_rate(b: f64, m: f64, a_dag: f64) -> ModelSpec {
        ModelSpec {
            label: "constant".into(),
            a_dagger: a_dag,
            baseline: BaselineHazard::constant_rate(a_dag, m),
            mortality: DensityMortality::new(|_, x| x).with_derivative(|_, _| 1.0),
            fertility: Fertility::new(b, (0.0, a_dag), (0.0, a_dag), 0.0, move |_, _| b),
            weight_p: AgeFunction::constant(1.0, (0.0, a_dag)),
            p_band: (0.0, a_dag),
            weight_q: AgeFunction::constant(1.0, (0.0, a_dag)),
            initial: AgeFunction::constant(1.0, (0.0, a_dag)),
            a1_constant: None,
        }
    }

    fn closed_form(b: f64, rate: f64, a_dag: f64) -> f64 {
        b * (1.0 - (-rate * a_dag).exp()) / rate
    }

    #[test]
    fn r0_closed_form() {
        let spec = constant_rate(1.0, 1.0, 50.0);
        let r0 = net_reproduction_rate(&spec);
        assert!((r0 - (1.0 - (-50.0f64).exp())).abs() < 1e-6, "{r0}");
    }

    #[test]
    fn r0_zero_fertility_and_linearity() {
        let spec = constant_rate(0.0, 1.0, 10.0);
        assert_eq!(net_reproduction_rate(&spec), 0.0);
        let spec = constant_rate(0.7, 0.5, 10.0);
        let doubled = spec.with_fertility(spec.fertility.scaled_by(|_| 2.0));
        let (r, r2) = (net_reproduction_rate(&spec), net_reproduction_rate(&doubled));
        assert!((r2 - 2.0 * r).abs() < 1e-12);
    }

    #[test]
    fn weighted_rate_closed_form_and_monotone() {
        let (b, m, a_dag) = (0.8, 0.3, 20.0);
        let spec = constant_rate(b, m, a_dag);
        let an = Analysis::new(&spec);
        assert_eq!(an.weighted_reproduction_rate(0.0, 0.0), an.net_reproduction_rate());
        let mut last = f64::INFINITY;
        for j in 0..20 {
            let p = 0.1 * j as f64;
            let r = an.weighted_reproduction_rate(p, 0.0);
            let exact = closed_form(b, m + p, a_dag);
            assert!((r - exact).abs() < 1e-9, "P={p}: {r} vs {exact}");
            assert!(r <= last);
            last = r;
        }
    }

    #[test]
    fn malthusian_is_zero_at_unit_r0() {
        let (m, a_dag): (f64, f64) = (0.5, 20.0);
        let b = m / (1.0 - (-m * a_dag as f64).exp());
        let spec = constant_rate(b, m, a_dag);
        let lam = solve_malthusian(&spec, 1e-12).unwrap();
        assert!(lam.abs() < 1e-8, "{lam}");
    }

    #[test]
    fn malthusian_for_narrow_band_near_age_one() {
        // β = b·(1 − ((a−1)/ε)²)₊, μ₀ ≡ m; b tuned so R₀ = 2.
        let (eps, m, a_dag) = (0.02, 0.1, 4.0);
        let shape = move |a: f64| (1.0 - ((a - 1.0) / eps).powi(2)).max(0.0);
        // oracle: dense midpoint rule on the band, bisection in λ
        let band = |lam: f64| {
            let n = 200_000;
            let w = 2.0 * eps / n as f64;
            (0..n)
                .map(|i| {
                    let a = 1.0 - eps + (i as f64 + 0.5) * w;
                    w * shape(a) * (-(m + lam) * a).exp()
                })
                .sum::<f64>()
        };
        let b = 2.0 / band(0.0);
        let spec = ModelSpec {
            fertility: Fertility::new(b, (1.0 - eps, 1.0 + eps), (1.0 - eps / 2.0, 1.0 + eps / 2.0), 0.0, move |a, _| {
                b * shape(a)
            }),
            ..constant_rate(1.0, m, a_dag)
        };
        let (mut lo, mut hi) = (0.0, 2.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if b * band(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lam = solve_malthusian(&spec, 1e-12).unwrap();
        assert!((lam - lo).abs() < 5e-5, "{lam} vs {lo}");
        assert!((lam - std::f64::consts::LN_2).abs() < 2e-3);
    }

    #[test]
    fn malthusian_shifts_under_exponential_tilt() {
        let spec = constant_rate(0.9, 0.2, 15.0);
        let lam = solve_malthusian(&spec, 1e-12).unwrap();
        let c = 0.05;
        let tilted = spec.with_fertility(spec.fertility.scaled_by(move |a| (c * a).exp()));
        let lam_t = solve_malthusian(&tilted, 1e-12).unwrap();
        assert!((lam_t - lam - c).abs() < 1e-9, "{lam_t} - {lam}");
        let halved = spec.with_fertility(spec.fertility.scaled_by(|_| 0.5));
        assert!(solve_malthusian(&halved, 1e-12).unwrap() < lam);
        let dead = constant_rate(0.0, 0.2, 15.0);
        assert!(matches!(solve_malthusian(&dead, 1e-12), Err(Error::NoRoot(_))));
    }

    #[test]
    fn equilibria_of_constant_rate_model() {
        let (b, m, a_dag) = (1.5, 0.5, 10.0);
        let spec = constant_rate(b, m, a_dag);
        let eqs = find_equilibria(&spec, 5.0, 1e-12).unwrap();
        assert_eq!(eqs.len(), 2);
        assert!(eqs[0].is_trivial());
        // oracle: bisection on the closed form
        let (mut lo, mut hi) = (0.0, 5.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if closed_form(b, m + mid, a_dag) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let e = eqs[1];
        assert!((e.p_star - lo).abs() < 1e-9, "{} vs {lo}", e.p_star);
        assert!(e.residual <= 1e-12);
        // p = q ⇒ Γ ≡ 1
        assert_eq!(e.q_star, e.p_star);
        assert_eq!(e.gamma, 1.0);
    }

    #[test]
    fn subcritical_monotone_model_has_only_trivial_equilibrium() {
        let spec = constant_rate(0.3, 0.5, 10.0);
        let eqs = find_equilibria(&spec, 10.0, 1e-12).unwrap();
        assert_eq!(eqs.len(), 1);
    }

    #[test]
    fn degenerate_weight_is_an_error() {
        let mut spec = constant_rate(1.5, 0.5, 10.0);
        spec.weight_p = AgeFunction::zero();
        assert!(matches!(find_equilibria(&spec, 1.0, 1e-10), Err(Error::DegenerateWeight { name: "p" })));
    }

    #[test]
    fn upper_rate_with_slice_envelopes() {
        let (b, m, a_dag) = (0.9, 0.4, 10.0);
        let spec = constant_rate(b, m, a_dag);
        let r0 = net_reproduction_rate(&spec);
        let mu = AgeFunction::constant(m, (0.0, a_dag));
        let beta = AgeFunction::constant(b, (0.0, a_dag));
        let up = upper_reproduction_rate(&spec, &mu, &beta).unwrap();
        assert!((up.value - r0).abs() < 1e-9);
        assert!(up.extinction_guaranteed == (r0 < 1.0));
        let beta2 = AgeFunction::constant(2.0 * b, (0.0, a_dag));
        let up2 = upper_reproduction_rate(&spec, &mu, &beta2).unwrap();
        assert!((up2.value - 2.0 * up.value).abs() < 1e-9);
        assert!((up.value - closed_form(b, m, a_dag)).abs() < 1e-9);
        let too_small = AgeFunction::constant(0.5 * b, (0.0, a_dag));
        assert!(matches!(
            upper_reproduction_rate(&spec, &mu, &too_small),
            Err(Error::EnvelopeViolated { name: "beta_plus", .. })
        ));
    }
}
