//! Uniform-grid quadrature: composite trapezoid and Simpson rules, plus
//! their cumulative variants.

use std::ops::{Add, Mul};

/// Composite trapezoid rule over equally spaced samples.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            h * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Trapezoid weights for `n_intervals` cells of width `h`.
pub fn trapezoid_weights(n_intervals: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n_intervals + 1];
    w[0] = 0.5 * h;
    w[n_intervals] = 0.5 * h;
    w
}

/// Composite Simpson weights; `n_intervals` must be even.
///
/// Equivalent to one Richardson extrapolation step applied to the
/// trapezoid rule on the same nodes.
pub fn simpson_weights(n_intervals: usize, h: f64) -> Vec<f64> {
    assert!(n_intervals >= 2 && n_intervals % 2 == 0, "Simpson needs an even, positive interval count");
    let mut w = vec![0.0; n_intervals + 1];
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = if i == 0 || i == n_intervals {
            h / 3.0
        } else if i % 2 == 1 {
            4.0 * h / 3.0
        } else {
            2.0 * h / 3.0
        };
    }
    w
}

/// Running trapezoid integral `F[i] = ∫_0^{a_i} f`.
pub fn cumulative_trapezoid<T>(values: &[T], h: f64) -> Vec<T>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    let mut out = Vec::with_capacity(values.len());
    let mut acc = T::default();
    out.push(acc);
    for pair in values.windows(2) {
        acc = acc + (pair[0] + pair[1]) * (0.5 * h);
        out.push(acc);
    }
    out.truncate(values.len());
    out
}

/// Running integral with fourth-order accuracy at even nodes and
/// third-order local accuracy at odd nodes.
pub fn cumulative_simpson<T>(values: &[T], h: f64) -> Vec<T>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    let n = values.len();
    if n < 3 {
        return cumulative_trapezoid(values, h);
    }
    let mut out = vec![T::default(); n];
    let mut i = 1;
    while i < n {
        // half-cell from the previous even node
        let base = out[i - 1];
        out[i] = if i + 1 < n {
            base + (values[i - 1] * 5.0 + values[i] * 8.0 + values[i + 1] * -1.0) * (h / 12.0)
        } else {
            base + (values[i - 2] * -1.0 + values[i - 1] * 8.0 + values[i] * 5.0) * (h / 12.0)
        };
        if i + 1 < n {
            out[i + 1] = base + (values[i - 1] + values[i] * 4.0 + values[i + 1]) * (h / 3.0);
        }
        i += 2;
    }
    out
}

/// Uniform age grid on `[0, a_dagger]` with Simpson weights.
#[derive(Debug, Clone)]
pub struct AgeQuadrature {
    pub h: f64,
    pub ages: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AgeQuadrature {
    pub fn new(a_dagger: f64, n_intervals: usize) -> Self {
        let n = if n_intervals % 2 == 1 { n_intervals + 1 } else { n_intervals.max(2) };
        let h = a_dagger / n as f64;
        let ages = (0..=n).map(|i| if i == n { a_dagger } else { i as f64 * h }).collect();
        Self {
            h,
            ages,
            weights: simpson_weights(n, h),
        }
    }

    pub fn len(&self) -> usize {
        self.ages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ages.is_empty()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn integrate_fn(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.weights.iter().zip(&self.ages).map(|(w, &a)| w * f(a)).sum()
    }

    pub fn cumulative(&self, values: &[f64]) -> Vec<f64> {
        cumulative_simpson(values, self.h)
    }
}
