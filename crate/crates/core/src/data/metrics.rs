use serde::{Deserialize, Serialize};

use super::{DataError, Result};

/// Error and correlation of predictions against targets. `correlation` is
/// NaN when either vector is constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub correlation: f64,
}

impl Metrics {
    pub fn compute(desired: &[f64], predicted: &[f64]) -> Result<Self> {
        let rmse = rmse(desired, predicted)?;
        let correlation = match correlation(desired, predicted) {
            Ok(r) => r,
            Err(DataError::ConstantVector) => f64::NAN,
            Err(e) => return Err(e),
        };
        Ok(Self { rmse, correlation })
    }
}

fn check_lengths(d: &[f64], y: &[f64], min: usize) -> Result<()> {
    if d.len() != y.len() {
        return Err(DataError::LengthMismatch(d.len(), y.len()));
    }
    if d.len() < min {
        return Err(DataError::InvalidArgument(format!("need at least {min} values, got {}", d.len())));
    }
    Ok(())
}

pub fn rmse(d: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(d, y, 1)?;
    let sse: f64 = d.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / d.len() as f64).sqrt())
}

/// Pearson correlation coefficient.
pub fn correlation(d: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(d, y, 2)?;
    let n = d.len() as f64;
    let (sd, sy) = (d.iter().sum::<f64>(), y.iter().sum::<f64>());
    let (md, my) = (sd / n, sy / n);
    let mut sdy = 0.0;
    let mut sdd = 0.0;
    let mut syy = 0.0;
    for (a, b) in d.iter().zip(y) {
        let (u, v) = (a - md, b - my);
        sdy += u * v;
        sdd += u * u;
        syy += v * v;
    }
    if sdd == 0.0 || syy == 0.0 {
        return Err(DataError::ConstantVector);
    }
    Ok((sdy / (sdd.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
