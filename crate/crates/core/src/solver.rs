//! Forward integration of the coupled renewal / weighted-size system on an
//! aligned age-time grid.
//!
//! Ages and times share the step `h`, so every characteristic passes through
//! grid nodes. Along a characteristic the density is carried as
//!
//! ```text
//! n(a+h, t+h) = n(a, t) · exp(−[C₀(a+h) − C₀(a)]) · exp(−h·𝓜(a+h/2, (P(t)+P(t+h))/2))
//! ```
//!
//! where `C₀` is the baseline cumulative hazard. The newest slice couples
//! `ρ`, `P` and `Q` to themselves; that closure is solved by damped
//! fixed-point iteration.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::quadrature::trapezoid;

/// Discretization of the time axis; ages use the same step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub h: f64,
    pub horizon: f64,
    /// Store a density snapshot every `snapshot_stride` steps (0 = never).
    #[serde(default)]
    pub snapshot_stride: usize,
}

impl GridSpec {
    pub fn new(h: f64, horizon: f64) -> Self {
        Self {
            h,
            horizon,
            snapshot_stride: 0,
        }
    }

    pub fn with_snapshots(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    /// Number of age cells covering `[0, a_dagger]`.
    pub fn age_cells(&self, a_dagger: f64) -> Result<usize> {
        if !(self.h > 0.0) || !(self.horizon >= self.h) {
            return Err(Error::Grid(format!("need h > 0 and T >= h (h = {}, T = {})", self.h, self.horizon)));
        }
        let ratio = a_dagger / self.h;
        let cells = ratio.round();
        if (ratio - cells).abs() > 1e-9 * ratio.max(1.0) || cells < 1.0 {
            return Err(Error::Grid(format!("a_dagger / h = {ratio} is not an integer")));
        }
        Ok(cells as usize)
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.h + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    /// Density at ages `0, h, …, a_dagger`.
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub h: f64,
    pub a_dagger: f64,
    pub times: Vec<f64>,
    pub rho: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Closure-map evaluations used at each step (0 for the initial slice).
    pub iterations: Vec<usize>,
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Steps per lifespan.
    pub fn lifespan_steps(&self) -> usize {
        (self.a_dagger / self.h).round() as usize
    }

    /// Index of the first stored time `≥ t`.
    pub fn index_at(&self, t: f64) -> usize {
        let k = ((t / self.h) - 1e-9).ceil().max(0.0) as usize;
        k.min(self.len().saturating_sub(1))
    }

    pub fn rho_final(&self) -> f64 {
        self.rho.last().copied().unwrap_or(0.0)
    }

    /// Least-squares slope of `ln ρ` over `[t0, t1]`.
    pub fn log_slope(&self, t0: f64, t1: f64) -> f64 {
        let (i0, i1) = (self.index_at(t0), self.index_at(t1));
        let (mut st, mut sy, mut stt, mut sty, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in i0..=i1 {
            let t = self.times[k] - self.times[i0];
            let y = self.rho[k].ln();
            st += t;
            sy += y;
            stt += t * t;
            sty += t * y;
            n += 1.0;
        }
        (n * sty - st * sy) / (n * stt - st * st)
    }
}

/// State of the discretization at one time node.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub step: usize,
    /// Density at ages `0, h, …, a_dagger`; the last entry is always zero.
    pub density: Vec<f64>,
    pub rho: f64,
    pub p: f64,
    pub q: f64,
}

/// Candidate values for `(ρ, P, Q)` at the newest time slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slice {
    pub rho: f64,
    pub p: f64,
    pub q: f64,
}

impl Slice {
    pub fn new(rho: f64, p: f64, q: f64) -> Self {
        Self { rho, p, q }
    }
}

/// Time stepper for one model on one grid.
pub struct Simulator<'a> {
    spec: &'a ModelSpec,
    grid: GridSpec,
    opts: SolverOptions,
    cells: usize,
    ages: Vec<f64>,
    /// Baseline survival across each age cell `[a_i, a_{i+1}]`.
    baseline_step: Vec<f64>,
    weight_p: Vec<f64>,
    weight_q: Vec<f64>,
}

impl<'a> Simulator<'a> {
    pub fn new(spec: &'a ModelSpec, grid: GridSpec, opts: SolverOptions) -> Result<Self> {
        let cells = grid.age_cells(spec.a_dagger)?;
        if !(opts.tol > 0.0) || opts.max_iter == 0 {
            return Err(Error::Grid("need tol > 0 and max_iter >= 1".into()));
        }
        let h = spec.a_dagger / cells as f64;
        let ages: Vec<f64> = (0..=cells).map(|i| i as f64 * h).collect();
        let baseline_step = (0..cells)
            .map(|i| {
                if i + 1 == cells {
                    0.0
                } else {
                    spec.baseline.transition(ages[i], ages[i + 1])
                }
            })
            .collect();
        let weight_p = ages.iter().map(|&a| spec.weight_p.eval(a)).collect();
        let weight_q = ages.iter().map(|&a| spec.weight_q.eval(a)).collect();
        Ok(Self {
            spec,
            grid: GridSpec { h, ..grid },
            opts,
            cells,
            ages,
            baseline_step,
            weight_p,
            weight_q,
        })
    }

    pub fn ages(&self) -> &[f64] {
        &self.ages
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    fn weighted(&self, weights: &[f64], density: &[f64], buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        buf.extend(weights.iter().zip(density).map(|(w, n)| w * n));
        trapezoid(buf, self.grid.h)
    }

    fn births(&self, q: f64, density: &[f64], buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        buf.extend(
            self.ages
                .iter()
                .zip(density)
                .map(|(&a, n)| if *n == 0.0 { 0.0 } else { self.spec.fertility.eval(a, q) * n }),
        );
        trapezoid(buf, self.grid.h)
    }

    /// Slice at `t = 0` from the initial distribution.
    pub fn initial_state(&self) -> SolverState {
        let mut density: Vec<f64> = self.ages.iter().map(|&a| self.spec.initial.eval(a)).collect();
        density[self.cells] = 0.0;
        let mut buf = Vec::with_capacity(density.len());
        // The age-0 node carries ρ(0), which is itself defined through the slice.
        let mut rho = density[0];
        for _ in 0..self.opts.max_iter.max(50) {
            density[0] = rho;
            let q = self.weighted(&self.weight_q, &density, &mut buf);
            let next = self.births(q, &density, &mut buf);
            let done = (next - rho).abs() <= self.opts.tol * next.abs().max(1.0);
            rho = next;
            if done {
                break;
            }
        }
        density[0] = rho;
        let p = self.weighted(&self.weight_p, &density, &mut buf);
        let q = self.weighted(&self.weight_q, &density, &mut buf);
        SolverState {
            step: 0,
            density,
            rho,
            p,
            q,
        }
    }

    /// Density at the next node given the candidate newest-slice values.
    fn transport(&self, state: &SolverState, cand: Slice, out: &mut Vec<f64>) {
        let h = self.grid.h;
        let p_mid = 0.5 * (state.p + cand.p);
        out.clear();
        out.resize(self.cells + 1, 0.0);
        out[0] = cand.rho;
        for i in 0..self.cells {
            let n = state.density[i];
            if n == 0.0 || self.baseline_step[i] == 0.0 {
                continue;
            }
            let m = self.spec.mortality.eval(self.ages[i] + 0.5 * h, p_mid);
            out[i + 1] = n * self.baseline_step[i] * (-h * m).exp();
        }
    }

    /// One application of the closure map: candidate in, recomputed slice out.
    fn closure_map(&self, state: &SolverState, cand: Slice, density: &mut Vec<f64>, buf: &mut Vec<f64>) -> Slice {
        self.transport(state, cand, density);
        let p = self.weighted(&self.weight_p, density, buf);
        let q = self.weighted(&self.weight_q, density, buf);
        let rho = self.births(cand.q, density, buf);
        Slice { rho, p, q }
    }

    /// Largest absolute residual of the discretized `(ρ, P, Q)` equations at
    /// the next node for `candidate`.
    pub fn step_residual(&self, state: &SolverState, candidate: Slice) -> f64 {
        let mut density = Vec::new();
        let mut buf = Vec::new();
        let f = self.closure_map(state, candidate, &mut density, &mut buf);
        (f.rho - candidate.rho)
            .abs()
            .max((f.p - candidate.p).abs())
            .max((f.q - candidate.q).abs())
    }

    /// Advance `state` by one step; returns the number of closure evaluations.
    pub fn advance(&self, state: &mut SolverState, guess: Slice) -> Result<usize> {
        let tol = self.opts.tol;
        let step = state.step + 1;
        let mut density = Vec::with_capacity(self.cells + 1);
        let mut buf = Vec::with_capacity(self.cells + 1);
        let mut x = guess;
        let mut damping = 1.0;
        let mut last_res = f64::INFINITY;
        for iter in 1..=self.opts.max_iter {
            let f = self.closure_map(state, x, &mut density, &mut buf);
            let scaled = |fv: f64, xv: f64| (fv - xv).abs() / fv.abs().max(1.0);
            let res = scaled(f.rho, x.rho).max(scaled(f.p, x.p)).max(scaled(f.q, x.q));
            if !res.is_finite() {
                return Err(Error::NonConvergence { step, residual: res });
            }
            if res <= tol {
                for (name, v) in [("rho", f.rho), ("P", f.p), ("Q", f.q)] {
                    if v < -tol {
                        return Err(Error::Negative {
                            quantity: name,
                            value: v,
                            step,
                        });
                    }
                }
                // recompute once more so the stored density matches the stored slice exactly
                let fin = Slice::new(f.rho.max(0.0), f.p.max(0.0), f.q.max(0.0));
                self.transport(state, fin, &mut density);
                state.density.copy_from_slice(&density);
                state.rho = fin.rho;
                state.p = fin.p;
                state.q = fin.q;
                state.step = step;
                return Ok(iter);
            }
            if res > last_res {
                damping = 0.5;
            }
            last_res = res;
            x = Slice {
                rho: x.rho + damping * (f.rho - x.rho),
                p: x.p + damping * (f.p - x.p),
                q: x.q + damping * (f.q - x.q),
            };
        }
        Err(Error::NonConvergence {
            step,
            residual: last_res,
        })
    }

    pub fn run(&self) -> Result<Trajectory> {
        let steps = self.grid.steps();
        let h = self.grid.h;
        let mut state = self.initial_state();
        let mut traj = Trajectory {
            h,
            a_dagger: self.spec.a_dagger,
            times: Vec::with_capacity(steps + 1),
            rho: Vec::with_capacity(steps + 1),
            p: Vec::with_capacity(steps + 1),
            q: Vec::with_capacity(steps + 1),
            iterations: Vec::with_capacity(steps + 1),
            snapshots: Vec::new(),
        };
        let stride = self.grid.snapshot_stride;
        let record = |traj: &mut Trajectory, state: &SolverState, iters: usize| {
            traj.times.push(state.step as f64 * h);
            traj.rho.push(state.rho);
            traj.p.push(state.p);
            traj.q.push(state.q);
            traj.iterations.push(iters);
            if stride > 0 && state.step % stride == 0 {
                traj.snapshots.push(Snapshot {
                    step: state.step,
                    time: state.step as f64 * h,
                    density: state.density.clone(),
                });
            }
        };
        record(&mut traj, &state, 0);
        let mut prev = Slice::new(state.rho, state.p, state.q);
        for _ in 0..steps {
            let cur = Slice::new(state.rho, state.p, state.q);
            let guess = Slice::new(
                (2.0 * cur.rho - prev.rho).max(0.0),
                (2.0 * cur.p - prev.p).max(0.0),
                (2.0 * cur.q - prev.q).max(0.0),
            );
            let iters = self.advance(&mut state, guess)?;
            prev = cur;
            record(&mut traj, &state, iters);
        }
        Ok(traj)
    }

    /// `ρ(t_k)` recomputed from the stored history through the pure renewal
    /// form (valid once `t_k ≥ a_dagger`, when the initial cohort has exited).
    pub fn renewal_rho(&self, traj: &Trajectory, k: usize) -> f64 {
        let h = self.grid.h;
        let q_now = traj.q[k];
        let mut terms = vec![0.0; self.cells + 1];
        for (j, term) in terms.iter_mut().enumerate().take(k.min(self.cells) + 1) {
            let birth = k - j;
            let mut surv = 1.0;
            for m in 0..j {
                let base = self.baseline_step[m];
                if base == 0.0 {
                    surv = 0.0;
                    break;
                }
                let p_mid = 0.5 * (traj.p[birth + m] + traj.p[birth + m + 1]);
                surv *= base * (-h * self.spec.mortality.eval(self.ages[m] + 0.5 * h, p_mid)).exp();
            }
            *term = self.spec.fertility.eval(self.ages[j], q_now) * traj.rho[birth] * surv;
        }
        trapezoid(&terms, h)
    }
}

/// Integrate `spec` over `grid` with the given closure tolerance.
pub fn simulate(spec: &ModelSpec, grid: GridSpec, tol: f64, max_iter: usize) -> Result<Trajectory> {
    Simulator::new(spec, grid, SolverOptions { tol, max_iter })?.run()
}
