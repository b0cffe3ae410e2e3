//! Linear stability of equilibria through the characteristic determinant.
//!
//! The linearisation around an equilibrium profile `ρ*(a) = ρ*·S(a; P*)`
//! reduces to a 3×3 system in `(C₁, C₂, C₃)` whose coefficients `A₁ … A₇`
//! are age integrals depending analytically on the growth rate `λ`. Roots of
//! the determinant are counted with the argument principle on the boundary
//! of a rectangle and refined by Newton's method.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{Analysis, EquilibriumPoint, DEFAULT_RESOLUTION};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::quadrature::AgeQuadrature;

/// Largest quadrature size used for the printed kernel, whose evaluation is
/// quadratic in the number of nodes.
const PRINTED_RESOLUTION: usize = 1 << 10;
/// Nodes between exact re-evaluations of `e^{−λa}` in the power recurrence.
const EXP_RESYNC: usize = 512;
const GENERATION_MULTIPLE: f64 = 8.0;

/// Inner kernel used for `A₂`, `A₄`, `A₆`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelForm {
    /// `∫_0^a μ_P(σ) ρ*(a) e^{−λ(a−σ)} dσ`, from the integrating-factor solution.
    Derived,
    /// `∫_0^a μ_P(σ) ρ*(σ) e^{−σλ − ∫_{a−σ}^a μ} dσ`.
    Printed,
}

#[derive(Debug, Clone, Copy)]
pub struct CharacteristicOptions {
    pub form: KernelForm,
    pub resolution: usize,
    /// Form missing `∂/∂x` rules by central differences.
    pub finite_differences: bool,
    /// Largest accepted equilibrium residual.
    pub residual_tol: f64,
}

impl Default for CharacteristicOptions {
    fn default() -> Self {
        Self {
            form: KernelForm::Derived,
            resolution: DEFAULT_RESOLUTION,
            finite_differences: true,
            residual_tol: 1e-6,
        }
    }
}

/// Tabulated kernels of the characteristic determinant at one equilibrium.
#[derive(Debug, Clone)]
pub struct CharacteristicSystem {
    pub equilibrium: EquilibriumPoint,
    pub form: KernelForm,
    a_dagger: f64,
    quad: AgeQuadrature,
    /// `ρ*(a_i)`.
    profile: Vec<f64>,
    a1: f64,
    /// Quadrature weight × β(a, Q*) × S(a; P*); same pattern for `p`, `q`.
    beta_s: Vec<f64>,
    p_s: Vec<f64>,
    q_s: Vec<f64>,
    mu_p: Vec<f64>,
    /// Printed kernel rows `K[i][j]`, `j ≤ i`, times `e^{−λ a_j}` gives the inner integral.
    printed: Vec<Vec<f64>>,
    /// First age with positive fertility, used to scale the search window.
    first_birth_age: f64,
}

/// The seven coefficients at one `λ`; `a[0]` is `A₁`.
#[derive(Debug, Clone, Copy)]
pub struct Coefficients(pub [Complex64; 7]);

impl Coefficients {
    pub fn det(&self) -> Complex64 {
        let [a1, a2, a3, a4, a5, a6, a7] = self.0;
        let one = Complex64::new(1.0, 0.0);
        -(a3 - one) * (a4 - one) + a2 * a5 + a1 * (a5 * a6 - (a4 - one) * a7)
    }
}

pub fn build_characteristic(spec: &ModelSpec, eq: &EquilibriumPoint) -> Result<CharacteristicSystem> {
    build_characteristic_with(spec, eq, CharacteristicOptions::default())
}

pub fn build_characteristic_with(
    spec: &ModelSpec,
    eq: &EquilibriumPoint,
    opts: CharacteristicOptions,
) -> Result<CharacteristicSystem> {
    if !(eq.residual <= opts.residual_tol) {
        return Err(Error::Validation(format!(
            "equilibrium residual {:.3e} exceeds {:.3e}",
            eq.residual, opts.residual_tol
        )));
    }
    let trivial = eq.rho_star == 0.0;
    if !trivial && !opts.finite_differences {
        if !spec.mortality.has_derivative() {
            return Err(Error::MissingDerivative("mortality"));
        }
        if !spec.fertility.has_derivative() {
            return Err(Error::MissingDerivative("fertility"));
        }
    }
    let resolution = match opts.form {
        KernelForm::Derived => opts.resolution,
        KernelForm::Printed => opts.resolution.min(PRINTED_RESOLUTION),
    };
    let analysis = Analysis::with_resolution(spec, resolution);
    let quad = analysis.quadrature().clone();
    let survival = analysis.survival(eq.p_star);
    let n = quad.len();

    let profile: Vec<f64> = survival.iter().map(|s| eq.rho_star * s).collect();
    let mut beta_s = vec![0.0; n];
    let mut p_s = vec![0.0; n];
    let mut q_s = vec![0.0; n];
    let mut mu_p = vec![0.0; n];
    let mut a1 = 0.0;
    for i in 0..n {
        let (a, w, s) = (quad.ages[i], quad.weights[i], survival[i]);
        if s > 0.0 {
            beta_s[i] = w * spec.fertility.eval(a, eq.q_star) * s;
        }
        p_s[i] = w * spec.weight_p.eval(a) * s;
        q_s[i] = w * spec.weight_q.eval(a) * s;
        if !trivial {
            mu_p[i] = spec.mortality.dx(a, eq.p_star);
            if profile[i] > 0.0 {
                a1 += w * spec.fertility.dx(a, eq.q_star) * profile[i];
            }
        }
    }
    if let Some(i) = beta_s.iter().chain(&p_s).chain(&q_s).chain(&mu_p).position(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            field: "characteristic kernel".into(),
            a: quad.ages[i % n],
            x: eq.p_star,
            value: f64::NAN,
        });
    }

    let printed = if opts.form == KernelForm::Printed && !trivial {
        printed_kernel(spec, &quad, eq.p_star, &profile, &mu_p)
    } else {
        Vec::new()
    };

    let first_birth_age = quad
        .ages
        .iter()
        .zip(&beta_s)
        .find(|(_, b)| **b > 0.0)
        .map(|(a, _)| *a)
        .filter(|a| *a > 0.0)
        .unwrap_or(spec.a_dagger);

    Ok(CharacteristicSystem {
        equilibrium: *eq,
        form: opts.form,
        a_dagger: spec.a_dagger,
        quad,
        profile,
        a1,
        beta_s,
        p_s,
        q_s,
        mu_p,
        printed,
        first_birth_age,
    })
}

fn printed_kernel(spec: &ModelSpec, quad: &AgeQuadrature, p_star: f64, profile: &[f64], mu_p: &[f64]) -> Vec<Vec<f64>> {
    let m: Vec<f64> = quad.ages.iter().map(|&a| spec.mortality.eval(a, p_star)).collect();
    let cm = quad.cumulative(&m);
    let cum: Vec<f64> = quad
        .ages
        .iter()
        .zip(&cm)
        .map(|(&a, c)| spec.baseline.cumulative(a) + c)
        .collect();
    let h = quad.h;
    (0..quad.len())
        .map(|i| {
            (0..=i)
                .map(|j| {
                    if i == 0 {
                        return 0.0;
                    }
                    let w = if j == 0 || j == i { 0.5 * h } else { h };
                    let decay = if j == 0 { 1.0 } else { (-(cum[i] - cum[i - j])).exp() };
                    let v = w * mu_p[j] * profile[j] * decay;
                    if v.is_finite() {
                        v
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

impl CharacteristicSystem {
    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a_dagger(&self) -> f64 {
        self.a_dagger
    }

    pub fn is_trivial(&self) -> bool {
        self.equilibrium.rho_star == 0.0
    }

    pub fn profile(&self) -> &[f64] {
        &self.profile
    }

    pub fn first_birth_age(&self) -> f64 {
        self.first_birth_age
    }

    fn powers(&self, lambda: Complex64) -> Vec<Complex64> {
        let ages = &self.quad.ages;
        let z = (-lambda * self.quad.h).exp();
        let mut out = Vec::with_capacity(ages.len());
        let mut e = Complex64::new(1.0, 0.0);
        for (i, &a) in ages.iter().enumerate() {
            if i % EXP_RESYNC == 0 || i + 1 == ages.len() {
                e = (-lambda * a).exp();
            }
            out.push(e);
            e *= z;
        }
        out
    }

    /// `A₁ … A₇` at `λ`. With `bound` set, every kernel is replaced by its
    /// absolute value, which for real `λ` majorises the moduli on the
    /// vertical line `Re = λ`.
    fn evaluate(&self, lambda: Complex64, bound: bool) -> Coefficients {
        let abs = |v: f64| if bound { v.abs() } else { v };
        let e = self.powers(lambda);
        let mut a3 = Complex64::default();
        let mut a5 = Complex64::default();
        let mut a7 = Complex64::default();
        for i in 0..e.len() {
            a3 += e[i] * abs(self.beta_s[i]);
            a5 += e[i] * abs(self.p_s[i]);
            a7 += e[i] * abs(self.q_s[i]);
        }
        let (mut a2, mut a4, mut a6) = Default::default();
        if !self.is_trivial() {
            let inner = match self.form {
                KernelForm::Derived => {
                    let z = (-lambda * self.quad.h).exp();
                    let half = 0.5 * self.quad.h;
                    let mut inner = vec![Complex64::default(); e.len()];
                    for k in 1..e.len() {
                        inner[k] = z * inner[k - 1] + (z * abs(self.mu_p[k - 1]) + abs(self.mu_p[k])) * half;
                    }
                    let rho = self.equilibrium.rho_star;
                    inner.iter_mut().for_each(|v| *v *= rho);
                    inner
                }
                KernelForm::Printed => self
                    .printed
                    .iter()
                    .map(|row| row.iter().zip(&e).map(|(k, ej)| ej * abs(*k)).sum())
                    .collect(),
            };
            for i in 0..e.len() {
                a2 -= inner[i] * abs(self.beta_s[i]);
                a4 -= inner[i] * abs(self.p_s[i]);
                a6 -= inner[i] * abs(self.q_s[i]);
            }
        }
        let a1 = Complex64::new(abs(self.a1), 0.0);
        Coefficients([a1, a2, a3, a4, a5, a6, a7])
    }

    pub fn coefficients(&self, lambda: Complex64) -> Coefficients {
        self.evaluate(lambda, false)
    }

    pub fn det(&self, lambda: Complex64) -> Complex64 {
        self.coefficients(lambda).det()
    }

    /// Upper bound of `|det(λ) + 1|` over `Re λ ≥ x`. Below one, the
    /// determinant has no zeros in that half plane.
    pub fn right_limit_bound(&self, x: f64) -> f64 {
        let [a1, a2, a3, a4, a5, a6, a7] = self.evaluate(Complex64::new(x, 0.0), true).0.map(|c| c.norm());
        a3 * a4 + a3 + a4 + a2 * a5 + a1 * (a5 * a6 + a4 * a7 + a7)
    }

    /// Real solution of `Re A₃(γ) = 1` by bisection; `None` without fertility.
    pub fn real_reference_root(&self, tol: f64) -> Option<f64> {
        let f = |g: f64| self.a3_real(g) - 1.0;
        if self.beta_s.iter().all(|b| *b == 0.0) {
            return None;
        }
        let (mut lo, mut hi) = (-1.0, 1.0);
        let mut k = 0;
        while f(lo) < 0.0 && k < 200 {
            hi = lo;
            lo *= 2.0;
            k += 1;
        }
        while f(hi) > 0.0 && k < 200 {
            lo = hi;
            hi *= 2.0;
            k += 1;
        }
        if !(f(lo) >= 0.0 && f(hi) <= 0.0) {
            return None;
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    fn a3_real(&self, gamma: f64) -> f64 {
        self.quad
            .ages
            .iter()
            .zip(&self.beta_s)
            .map(|(a, b)| if *b == 0.0 { 0.0 } else { b * (-gamma * a).exp() })
            .sum()
    }
}

pub fn char_det(sys: &CharacteristicSystem, lambda: Complex64) -> Complex64 {
    sys.det(lambda)
}

/// Dominant real root of `A₃(γ) = 1` at the trivial equilibrium.
pub fn trivial_dominant_root(spec: &ModelSpec, tol: f64) -> Result<f64> {
    let sys = build_characteristic(spec, &EquilibriumPoint::trivial())?;
    if sys.beta_s.iter().all(|b| *b == 0.0) {
        return Err(Error::NoRoot("zero fertility: the Lotka functional vanishes".into()));
    }
    sys.real_reference_root(tol).ok_or(Error::BracketExceeded { cap: f64::MAX })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re: (f64, f64), im: (f64, f64)) -> Self {
        Self {
            re_min: re.0,
            re_max: re.1,
            im_min: im.0,
            im_max: im.1,
        }
    }

    fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re_min - slack && z.re <= self.re_max + slack && z.im >= self.im_min - slack && z.im <= self.im_max + slack
    }

    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    fn diameter(&self) -> f64 {
        (self.re_max - self.re_min).hypot(self.im_max - self.im_min)
    }

    fn grow(&self, d: f64) -> Self {
        Self::new((self.re_min - d, self.re_max + d), (self.im_min - d, self.im_max + d))
    }

    fn split(&self, frac: f64) -> (Self, Self) {
        if self.re_max - self.re_min >= self.im_max - self.im_min {
            let m = self.re_min + frac * (self.re_max - self.re_min);
            (Self::new((self.re_min, m), (self.im_min, self.im_max)), Self::new((m, self.re_max), (self.im_min, self.im_max)))
        } else {
            let m = self.im_min + frac * (self.im_max - self.im_min);
            (Self::new((self.re_min, self.re_max), (self.im_min, m)), Self::new((self.re_min, self.re_max), (m, self.im_max)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub re: f64,
    pub im: f64,
    /// `|det|` at the refined root.
    pub residual: f64,
    pub multiplicity: usize,
    /// Conjugate of a root found in the searched rectangle.
    pub mirrored: bool,
}

impl Root {
    pub fn lambda(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Stable,
    Unstable,
    Inconclusive,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Stable => "stable",
            Self::Unstable => "unstable",
            Self::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub rect: Rect,
    /// Roots in `rect` followed by mirrored conjugates, sorted by `(re, im)`.
    pub roots: Vec<Root>,
    /// Argument-principle count over `rect`.
    pub winding_count: usize,
    /// Count over the part of `rect` with `Re λ ≥ 0`.
    pub right_half_count: usize,
    /// No zeros with `Re λ ≥ rect.re_max` (from the kernel majorant).
    pub right_limit_certified: bool,
    pub classification: Classification,
    pub dominant: Option<Root>,
}

impl StabilityReport {
    /// Roots located inside the searched rectangle, counted with multiplicity.
    pub fn located_count(&self) -> usize {
        self.roots.iter().filter(|r| !r.mirrored).map(|r| r.multiplicity).sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LocateOptions {
    /// Largest phase increment accepted between boundary samples.
    pub phase_step: f64,
    pub max_bisections: usize,
    pub max_depth: usize,
    pub newton_iter: usize,
}

impl Default for LocateOptions {
    fn default() -> Self {
        Self {
            phase_step: PI / 2.0,
            max_bisections: 40,
            max_depth: 80,
            newton_iter: 60,
        }
    }
}

/// Default search window: real parts from well below the slowest decay to a
/// cap beyond which the determinant provably stays near −1; imaginary parts
/// up to several multiples of `π / first birth age`, with a thin strip below
/// the real axis so real roots lie inside.
pub fn default_rectangle(sys: &CharacteristicSystem) -> Rect {
    let gamma = sys.real_reference_root(1e-12).unwrap_or(0.0);
    let a_dag = sys.a_dagger;
    let re_min = (-5.0 * std::f64::consts::LN_10 / a_dag).min(gamma - 1.0);
    let mut re_max = (2.0 * gamma.abs()).max(1.0);
    for _ in 0..30 {
        if sys.right_limit_bound(re_max) < 1.0 {
            break;
        }
        re_max *= 2.0;
    }
    let im_max = GENERATION_MULTIPLE * PI / sys.first_birth_age;
    Rect::new((re_min, re_max), (-1e-3 * PI / a_dag, im_max))
}

struct Locator<'s> {
    sys: &'s CharacteristicSystem,
    opts: LocateOptions,
    tol: f64,
}

impl Locator<'_> {
    fn f(&self, z: Complex64) -> Complex64 {
        self.sys.det(z)
    }

    fn samples_per_unit(&self) -> f64 {
        (2.0 * self.sys.a_dagger / PI).max(1.0)
    }

    /// Net phase change along `a → b`, bisecting until each increment is
    /// below the configured step.
    fn edge_phase(&self, a: Complex64, b: Complex64) -> Result<f64> {
        let n = ((b - a).norm() * self.samples_per_unit()).ceil().max(16.0) as usize;
        let pts: Vec<Complex64> = (0..=n).map(|k| a + (b - a) * (k as f64 / n as f64)).collect();
        let vals: Vec<Complex64> = pts.par_iter().map(|&z| self.f(z)).collect();
        (0..n)
            .into_par_iter()
            .map(|k| self.segment_phase(pts[k], vals[k], pts[k + 1], vals[k + 1], 0))
            .sum()
    }

    fn segment_phase(&self, za: Complex64, fa: Complex64, zb: Complex64, fb: Complex64, depth: usize) -> Result<f64> {
        if fa.norm() == 0.0 || fb.norm() == 0.0 || !fa.is_finite() || !fb.is_finite() {
            return Err(Error::Inconclusive("determinant vanishes on the contour".into()));
        }
        let d = (fb / fa).arg();
        if d.abs() < self.opts.phase_step {
            return Ok(d);
        }
        if depth >= self.opts.max_bisections {
            return Err(Error::Inconclusive("boundary phase did not stabilise".into()));
        }
        let zm = 0.5 * (za + zb);
        let fm = self.f(zm);
        Ok(self.segment_phase(za, fa, zm, fm, depth + 1)? + self.segment_phase(zm, fm, zb, fb, depth + 1)?)
    }

    fn winding(&self, r: &Rect) -> Result<usize> {
        let c = [
            Complex64::new(r.re_min, r.im_min),
            Complex64::new(r.re_max, r.im_min),
            Complex64::new(r.re_max, r.im_max),
            Complex64::new(r.re_min, r.im_max),
        ];
        let mut total = 0.0;
        for k in 0..4 {
            total += self.edge_phase(c[k], c[(k + 1) % 4])?;
        }
        let w = total / (2.0 * PI);
        let n = w.round();
        if (w - n).abs() > 0.1 || n < 0.0 {
            return Err(Error::Inconclusive(format!("non-integral winding {w:.3}")));
        }
        Ok(n as usize)
    }

    fn newton(&self, z0: Complex64, multiplicity: usize) -> Option<Complex64> {
        let mut z = z0;
        let mut fz = self.f(z);
        let m = multiplicity as f64;
        for _ in 0..self.opts.newton_iter {
            if fz.norm() <= self.tol * 1e-3 {
                return Some(z);
            }
            let d = 1e-7 * z.norm().max(1.0);
            let dz = Complex64::new(d, 0.0);
            let df = (self.f(z + dz) - self.f(z - dz)) / (2.0 * d);
            if df.norm() == 0.0 || !df.is_finite() {
                return None;
            }
            let mut step = fz / df * m;
            let mut accepted = false;
            for _ in 0..30 {
                let zn = z - step;
                let fnew = self.f(zn);
                if fnew.is_finite() && fnew.norm() < fz.norm() {
                    z = zn;
                    fz = fnew;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted || step.norm() <= 1e-15 * z.norm().max(1.0) {
                break;
            }
        }
        (fz.norm() <= self.tol).then_some(z)
    }

    /// Winding count with the boundary nudged outward when it passes
    /// through a zero.
    fn robust_winding(&self, r: &Rect) -> Result<(Rect, usize)> {
        let mut rect = *r;
        let mut last = None;
        for k in 0..4 {
            match self.winding(&rect) {
                Ok(n) => return Ok((rect, n)),
                Err(e) => last = Some(e),
            }
            rect = r.grow(self.tol * 10f64.powi(k));
        }
        Err(last.unwrap_or_else(|| Error::Inconclusive("winding".into())))
    }

    fn search(&self, r: Rect, count: usize, depth: usize) -> Result<Vec<Root>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let scale = r.center().norm().max(1.0);
        let slack = 1e-9 * scale;
        if count == 1 {
            if let Some(z) = self.newton(r.center(), 1) {
                if r.contains(z, slack) {
                    return Ok(vec![self.root(z, 1)]);
                }
            }
        }
        if r.diameter() <= 1e-6 * scale || depth >= self.opts.max_depth {
            let z = self.newton(r.center(), count).unwrap_or_else(|| r.center());
            return Ok(vec![self.root(z, count)]);
        }
        let mut last = None;
        for frac in [0.5 + 1.37e-3, 0.5 - 2.91e-3, 0.5 + 7.3e-3] {
            let (left, right) = r.split(frac);
            let counts = rayon::join(|| self.winding(&left), || self.winding(&right));
            match counts {
                (Ok(a), Ok(b)) if a + b == count => {
                    let (ra, rb) = rayon::join(|| self.search(left, a, depth + 1), || self.search(right, b, depth + 1));
                    let mut out = ra?;
                    out.extend(rb?);
                    return Ok(out);
                }
                (Ok(a), Ok(b)) => {
                    last = Some(Error::Inconclusive(format!("subdivision counts {a}+{b} ≠ {count}")));
                }
                (Err(e), _) | (_, Err(e)) => last = Some(e),
            }
        }
        Err(last.unwrap_or_else(|| Error::Inconclusive("subdivision".into())))
    }

    fn root(&self, z: Complex64, multiplicity: usize) -> Root {
        let im = if z.im.abs() <= 1e-10 * z.norm().max(1.0) { 0.0 } else { z.im };
        let z = Complex64::new(z.re, im);
        Root {
            re: z.re,
            im: z.im,
            residual: self.f(z).norm(),
            multiplicity,
            mirrored: false,
        }
    }
}

/// Count and refine the zeros of the determinant inside `rect`.
pub fn locate_roots(sys: &CharacteristicSystem, rect: Rect, tol: f64) -> Result<StabilityReport> {
    locate_roots_with(sys, rect, tol, LocateOptions::default())
}

pub fn locate_roots_with(sys: &CharacteristicSystem, rect: Rect, tol: f64, opts: LocateOptions) -> Result<StabilityReport> {
    if !(rect.re_max > rect.re_min && rect.im_max > rect.im_min) {
        return Err(Error::Validation("search rectangle has no area".into()));
    }
    let loc = Locator { sys, opts, tol };
    let (rect, count) = loc.robust_winding(&rect)?;
    let mut roots = loc.search(rect, count, 0)?;

    let mirrored: Vec<Root> = roots
        .iter()
        .filter(|r| -r.im < rect.im_min)
        .map(|r| Root {
            im: -r.im,
            mirrored: true,
            ..*r
        })
        .collect();
    roots.extend(mirrored);
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    let right_half_count = if rect.re_max <= 0.0 {
        0
    } else {
        let right = Rect::new((rect.re_min.max(0.0), rect.re_max), (rect.im_min, rect.im_max));
        match loc.winding(&right) {
            Ok(n) => n,
            Err(_) => roots.iter().filter(|r| !r.mirrored && r.re >= -tol).map(|r| r.multiplicity).sum::<usize>().max(1),
        }
    };
    let right_limit_certified = rect.re_max > 0.0 && sys.right_limit_bound(rect.re_max) < 1.0;
    let classification = if roots.iter().any(|r| r.re > 0.0) {
        Classification::Unstable
    } else if right_half_count == 0 && right_limit_certified {
        Classification::Stable
    } else {
        Classification::Inconclusive
    };
    let dominant = roots.iter().copied().max_by(|a, b| a.re.total_cmp(&b.re).then(b.im.abs().total_cmp(&a.im.abs())));
    Ok(StabilityReport {
        rect,
        roots,
        winding_count: count,
        right_half_count,
        right_limit_certified,
        classification,
        dominant,
    })
}

/// Build the characteristic system, search the default rectangle and classify.
pub fn analyze_stability(spec: &ModelSpec, eq: &EquilibriumPoint, tol: f64) -> Result<StabilityReport> {
    let sys = build_characteristic(spec, eq)?;
    let rect = default_rectangle(&sys);
    locate_roots(&sys, rect, tol)
}
