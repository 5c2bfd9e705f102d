use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{DataError, Dataset, Result};

/// Integration step used for the Mackey–Glass equation.
pub const MG_STEP: f64 = 0.1;

/// Input lags of the Mackey–Glass patterns, oldest first.
pub const MACKEY_GLASS_LAGS: [usize; 4] = [24, 18, 12, 6];

/// Returns `(u, y)` for `k = 1..=n`, where
/// `y(k+1) = y(k) / (1 + y(k)^2) + u(k)^3`, `u(k) = sin(2πk/100)` and `y(1) = 0`.
/// Element `i` holds the value at `k = i + 1`.
pub fn plant_series(n: usize) -> (Vec<f64>, Vec<f64>) {
    let u: Vec<f64> = (1..=n).map(|k| (2.0 * PI * k as f64 / 100.0).sin()).collect();
    let mut y = Vec::with_capacity(n);
    if n > 0 {
        y.push(0.0);
    }
    for i in 1..n {
        let p = y[i - 1];
        y.push(p / (1.0 + p * p) + u[i - 1].powi(3));
    }
    (u, y)
}

/// Plant identification patterns: inputs `(u(k), y(k))`, target `y(k+1)`.
/// Training uses `k = 1..=n_train`, testing the following `n_test` steps.
pub fn plant_dataset(n_train: usize, n_test: usize) -> Result<(Dataset, Dataset)> {
    if n_train == 0 || n_test == 0 {
        return Err(DataError::InvalidArgument("n_train and n_test must be at least 1".into()));
    }
    let n = n_train + n_test;
    let (u, y) = plant_series(n + 1);
    let rows = |ks: std::ops::Range<usize>| {
        let inputs = ks.clone().map(|i| vec![u[i], y[i]]).collect();
        let targets = ks.map(|i| y[i + 1]).collect();
        Dataset::new(inputs, targets, vec!["u".into(), "y".into()])
    };
    Ok((rows(0..n_train)?, rows(n_train..n)?))
}

fn mg_rhs(x: f64, delayed: f64) -> f64 {
    0.2 * delayed / (1.0 + delayed.powi(10)) - 0.1 * x
}

/// Dense solution on a uniform grid with cubic Hermite interpolation between
/// nodes and constant history before `t = 0`.
struct MgTrajectory {
    h: f64,
    x0: f64,
    x: Vec<f64>,
    dx: Vec<f64>,
}

impl MgTrajectory {
    fn at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.x0;
        }
        let s = t / self.h;
        let i = s.floor() as usize;
        let theta = s - i as f64;
        if theta == 0.0 {
            return self.x[i];
        }
        let (p0, p1) = (self.x[i], self.x[i + 1]);
        let (m0, m1) = (self.dx[i] * self.h, self.dx[i + 1] * self.h);
        let t2 = theta * theta;
        let t3 = t2 * theta;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + theta) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1
    }
}

/// Samples the Mackey–Glass series `x(k)` at integers `k = k_start..=k_end`
/// using a fourth-order Runge–Kutta scheme with `steps_per_unit` steps per
/// unit time.
pub fn mackey_glass_series_with_steps(
    tau: f64,
    x0: f64,
    k_start: usize,
    k_end: usize,
    steps_per_unit: usize,
) -> Result<Vec<f64>> {
    if !(tau > 17.0) || !tau.is_finite() {
        return Err(DataError::InvalidArgument(format!("tau must exceed 17, got {tau}")));
    }
    if k_end <= k_start {
        return Err(DataError::InvalidArgument(format!(
            "k_end ({k_end}) must exceed k_start ({k_start})"
        )));
    }
    if steps_per_unit == 0 || !x0.is_finite() {
        return Err(DataError::InvalidArgument("invalid step count or initial value".into()));
    }
    let h = 1.0 / steps_per_unit as f64;
    let n_steps = k_end * steps_per_unit;
    let mut traj = MgTrajectory {
        h,
        x0,
        x: Vec::with_capacity(n_steps + 1),
        dx: Vec::with_capacity(n_steps + 1),
    };
    traj.x.push(x0);
    traj.dx.push(mg_rhs(x0, x0));
    for n in 0..n_steps {
        let t = n as f64 * h;
        let x = traj.x[n];
        let d_mid = traj.at(t + 0.5 * h - tau);
        let d_hi = traj.at(t + h - tau);
        let k1 = traj.dx[n];
        let k2 = mg_rhs(x + 0.5 * h * k1, d_mid);
        let k3 = mg_rhs(x + 0.5 * h * k2, d_mid);
        let k4 = mg_rhs(x + h * k3, d_hi);
        let next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        traj.x.push(next);
        traj.dx.push(mg_rhs(next, traj.at(t + h - tau)));
    }
    Ok((k_start..=k_end).map(|k| traj.x[k * steps_per_unit]).collect())
}

/// [`mackey_glass_series_with_steps`] at the default step [`MG_STEP`].
pub fn mackey_glass_series(tau: f64, x0: f64, k_start: usize, k_end: usize) -> Result<Vec<f64>> {
    mackey_glass_series_with_steps(tau, x0, k_start, k_end, (1.0 / MG_STEP).round() as usize)
}

/// Forms `[x(k-24), x(k-18), x(k-12), x(k-6); x(k)]` for every position of a
/// contiguous series with at least 24 earlier samples.
pub fn mackey_glass_patterns(series: &[f64]) -> Result<Dataset> {
    let lag = MACKEY_GLASS_LAGS[0];
    if series.len() <= lag {
        return Err(DataError::InvalidArgument(format!(
            "series needs more than {lag} samples, got {}",
            series.len()
        )));
    }
    let rows = (lag..series.len())
        .map(|k| MACKEY_GLASS_LAGS.iter().map(|&l| series[k - l]).collect())
        .collect();
    let targets = series[lag..].to_vec();
    let names = MACKEY_GLASS_LAGS.iter().map(|l| format!("x(k-{l})")).collect();
    Dataset::new(rows, targets, names)
}

/// Mackey–Glass patterns for targets `k = k_start..=k_end`, optionally with
/// Gaussian noise added to the series before the patterns are formed.
pub fn mackey_glass_dataset(
    tau: f64,
    x0: f64,
    k_start: usize,
    k_end: usize,
    noise: Option<(f64, &mut dyn rand::RngCore)>,
) -> Result<Dataset> {
    let lag = MACKEY_GLASS_LAGS[0];
    if k_start < lag {
        return Err(DataError::InvalidArgument(format!("k_start must be at least {lag}")));
    }
    let mut series = mackey_glass_series(tau, x0, k_start - lag, k_end)?;
    if let Some((std, rng)) = noise {
        series = add_gaussian_noise(&series, std, rng)?;
    }
    mackey_glass_patterns(&series)
}

/// Elementwise `x + N(0, std^2)`. A zero deviation returns the input unchanged
/// without consuming randomness.
pub fn add_gaussian_noise<R: Rng + ?Sized>(series: &[f64], std: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(DataError::InvalidArgument(format!("noise std must be finite and >= 0, got {std}")));
    }
    if std == 0.0 {
        return Ok(series.to_vec());
    }
    let normal = Normal::new(0.0, std).expect("validated std");
    Ok(series.iter().map(|&x| x + normal.sample(rng)).collect())
}

/// Box–Jenkins gas furnace regression `y(k) = f(y(k-1), u(k-4))`.
pub fn box_jenkins_patterns(u: &[f64], y: &[f64]) -> Result<Dataset> {
    if u.len() != y.len() {
        return Err(DataError::LengthMismatch(u.len(), y.len()));
    }
    if y.len() <= 4 {
        return Err(DataError::InvalidArgument("series needs more than 4 samples".into()));
    }
    let rows = (4..y.len()).map(|k| vec![y[k - 1], u[k - 4]]).collect();
    let targets = y[4..].to_vec();
    Dataset::new(rows, targets, vec!["y(k-1)".into(), "u(k-4)".into()])
}
