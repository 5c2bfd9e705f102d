//! Type-1 and interval type-2 TSK inference primitives.
//!
//! Everything here is a pure function of its arguments. The public functions
//! validate their inputs and return [`FuzzyError`] on contract breaches; the
//! `pub(crate)` kernels underneath skip validation and are what the tree
//! evaluator calls in its inner loop.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

/// Total firing below this is treated as "no rule fired"; the output is 0.
pub const EPS_FIRE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FuzzyError {
    #[error("non-finite input value {0}")]
    NonFiniteInput(f64),
    #[error("membership width must be positive, got {0}")]
    NonPositiveWidth(f64),
    #[error("interval type-2 means out of order: m1 = {m1} > m2 = {m2}")]
    UnorderedMeans { m1: f64, m2: f64 },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("rule set is empty")]
    EmptyRuleSet,
}

pub type Result<T> = std::result::Result<T, FuzzyError>;

/// Type-1 membership function `1 / (1 + ((x - m) / sigma)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T1Mf {
    pub center: f64,
    pub width: f64,
}

/// Gaussian interval type-2 set with uncertain mean in `[m1, m2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct It2Mf {
    pub m1: f64,
    pub m2: f64,
    pub width: f64,
}

/// Affine TSK consequent `c0 + c1 x1 + ... + cd xd`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T1Consequent {
    pub coeffs: Vec<f64>,
}

/// Interval TSK consequent; coefficient `j` ranges over `[c_j - s_j, c_j + s_j]`.
///
/// Spreads are stored as given and read through `abs()`, so a parameter
/// optimizer can move them freely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct It2Consequent {
    pub coeffs: Vec<f64>,
    pub spreads: Vec<f64>,
}

/// A closed interval `[lower, upper]`. Used for firing strengths, membership
/// bounds and consequent weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn point(x: f64) -> Self {
        Self { lower: x, upper: x }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Result of center-of-sets type reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypeReduced {
    pub left: f64,
    pub right: f64,
    /// Set when no rule fired; `left` and `right` are then both 0.
    pub degenerate: bool,
}

impl T1Mf {
    pub fn new(center: f64, width: f64) -> Self {
        Self { center, width }
    }

    #[inline]
    pub(crate) fn grade_unchecked(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.width;
        1.0 / (1.0 + z * z)
    }
}

impl It2Mf {
    pub fn new(m1: f64, m2: f64, width: f64) -> Self {
        Self { m1, m2, width }
    }

    /// Lower and upper membership grades, in that order.
    #[inline]
    pub(crate) fn bounds_unchecked(&self, x: f64) -> Interval {
        let mid = 0.5 * (self.m1 + self.m2);
        let lower = if x <= mid {
            gaussian(x, self.m2, self.width)
        } else {
            gaussian(x, self.m1, self.width)
        };
        let upper = if x < self.m1 {
            gaussian(x, self.m1, self.width)
        } else if x <= self.m2 {
            1.0
        } else {
            gaussian(x, self.m2, self.width)
        };
        Interval { lower, upper }
    }
}

/// `exp(-((x - m) / sigma)^2 / 2)`.
#[inline]
pub fn gaussian(x: f64, mean: f64, width: f64) -> f64 {
    let z = (x - mean) / width;
    (-0.5 * z * z).exp()
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(FuzzyError::NonFiniteInput(x))
    }
}

fn check_width(width: f64) -> Result<()> {
    if width > 0.0 {
        Ok(())
    } else {
        Err(FuzzyError::NonPositiveWidth(width))
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(FuzzyError::LengthMismatch { expected, found })
    }
}

pub fn t1_grade(x: f64, mf: &T1Mf) -> Result<f64> {
    check_finite(x)?;
    check_width(mf.width)?;
    Ok(mf.grade_unchecked(x))
}

pub fn it2_grade_bounds(x: f64, mf: &It2Mf) -> Result<Interval> {
    check_finite(x)?;
    check_width(mf.width)?;
    if mf.m1 > mf.m2 {
        return Err(FuzzyError::UnorderedMeans { m1: mf.m1, m2: mf.m2 });
    }
    Ok(mf.bounds_unchecked(x))
}

/// Product t-norm over per-input grades.
pub fn t1_rule_firing(inputs: &[f64], mfs: &[T1Mf]) -> Result<f64> {
    check_len(mfs.len(), inputs.len())?;
    if inputs.is_empty() {
        return Err(FuzzyError::EmptyRuleSet);
    }
    inputs
        .iter()
        .zip(mfs)
        .try_fold(1.0, |acc, (&x, mf)| Ok(acc * t1_grade(x, mf)?))
}

pub fn it2_rule_firing(inputs: &[f64], mfs: &[It2Mf]) -> Result<Interval> {
    check_len(mfs.len(), inputs.len())?;
    if inputs.is_empty() {
        return Err(FuzzyError::EmptyRuleSet);
    }
    let mut firing = Interval::point(1.0);
    for (&x, mf) in inputs.iter().zip(mfs) {
        let g = it2_grade_bounds(x, mf)?;
        firing.lower *= g.lower;
        firing.upper *= g.upper;
    }
    Ok(firing)
}

#[inline]
pub(crate) fn affine_unchecked(inputs: &[f64], coeffs: &[f64]) -> f64 {
    let mut acc = coeffs[0];
    for (c, x) in coeffs[1..].iter().zip(inputs) {
        acc += c * x;
    }
    acc
}

#[inline]
pub(crate) fn interval_affine_unchecked(inputs: &[f64], coeffs: &[f64], spreads: &[f64]) -> Interval {
    let mut center = coeffs[0];
    let mut radius = spreads[0].abs();
    for ((c, s), x) in coeffs[1..].iter().zip(&spreads[1..]).zip(inputs) {
        center += c * x;
        radius += s.abs() * x.abs();
    }
    Interval { lower: center - radius, upper: center + radius }
}

pub fn t1_consequent(inputs: &[f64], c: &T1Consequent) -> Result<f64> {
    check_len(inputs.len() + 1, c.coeffs.len())?;
    Ok(affine_unchecked(inputs, &c.coeffs))
}

/// Interval consequent weights `[b_lower, b_upper]`, evaluated with interval
/// arithmetic: `[c_j - s_j, c_j + s_j] * x_j` spans `c_j x_j +- s_j |x_j|`, so
/// negative inputs never produce an inverted interval.
pub fn it2_consequent(inputs: &[f64], c: &It2Consequent) -> Result<Interval> {
    check_len(inputs.len() + 1, c.coeffs.len())?;
    check_len(c.coeffs.len(), c.spreads.len())?;
    Ok(interval_affine_unchecked(inputs, &c.coeffs, &c.spreads))
}

#[inline]
pub(crate) fn weighted_mean_unchecked(firings: &[f64], consequents: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (f, b) in firings.iter().zip(consequents) {
        num += f * b;
        den += f;
    }
    if den < EPS_FIRE {
        0.0
    } else {
        num / den
    }
}

/// Firing-weighted mean of rule consequents.
pub fn t1_defuzzify(firings: &[f64], consequents: &[f64]) -> Result<f64> {
    if firings.is_empty() {
        return Err(FuzzyError::EmptyRuleSet);
    }
    check_len(firings.len(), consequents.len())?;
    Ok(weighted_mean_unchecked(firings, consequents))
}

/// One rule as seen by the type reducer: its firing interval and the
/// consequent endpoint relevant to the side being reduced.
#[derive(Debug, Clone, Copy)]
pub(crate) struct KmRule {
    pub weight: f64,
    pub lower: f64,
    pub upper: f64,
}

pub(crate) type KmBuffer = SmallVec<[KmRule; 16]>;

/// Weighted mean with rules `[0, switch)` taking `head` firing and the rest
/// taking the other bound. Returns `None` when the denominator vanishes.
#[inline]
fn km_mean(rules: &[KmRule], switch: usize, head_upper: bool) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, r) in rules.iter().enumerate() {
        let use_upper = (i < switch) == head_upper;
        let f = if use_upper { r.upper } else { r.lower };
        num += f * r.weight;
        den += f;
    }
    if den < EPS_FIRE {
        None
    } else {
        Some(num / den)
    }
}

/// Exhaustive search over switch points, used when the iteration lands on a
/// switch point with zero total firing.
fn km_exhaustive(rules: &[KmRule], head_upper: bool, minimize: bool) -> f64 {
    let mut best: Option<f64> = None;
    for switch in 0..=rules.len() {
        if let Some(y) = km_mean(rules, switch, head_upper) {
            best = Some(match best {
                None => y,
                Some(b) if minimize => b.min(y),
                Some(b) => b.max(y),
            });
        }
    }
    best.unwrap_or(0.0)
}

/// Iterative Karnik–Mendel for one endpoint.
///
/// `rules` must already be sorted ascending by `weight`. For the left end the
/// first `L` rules take their upper firing; for the right end the first `R`
/// rules take their lower firing. The iteration starts from the mean with
/// midpoint firings and stops once the switch point repeats.
fn km_endpoint(rules: &[KmRule], left: bool) -> f64 {
    let m = rules.len();
    let switch_of = |y: f64| rules.iter().take_while(|r| r.weight <= y).count();

    let mut num = 0.0;
    let mut den = 0.0;
    for r in rules {
        let f = 0.5 * (r.lower + r.upper);
        num += f * r.weight;
        den += f;
    }
    let mut y = num / den;
    let mut switch = switch_of(y);
    for _ in 0..m {
        y = match km_mean(rules, switch, left) {
            Some(y) => y,
            None => return km_exhaustive(rules, left, left),
        };
        let next = switch_of(y);
        if next == switch {
            break;
        }
        switch = next;
    }
    y
}

/// Center-of-sets type reduction over prepared rule data.
///
/// `lower_side` and `upper_side` hold the same rules keyed by the consequent's
/// lower and upper endpoint respectively; both are sorted in place.
pub(crate) fn km_reduce_unchecked(lower_side: &mut [KmRule], upper_side: &mut [KmRule]) -> TypeReduced {
    let total_upper: f64 = lower_side.iter().map(|r| r.upper).sum();
    if total_upper < EPS_FIRE {
        return TypeReduced { left: 0.0, right: 0.0, degenerate: true };
    }
    lower_side.sort_unstable_by(|a, b| a.weight.total_cmp(&b.weight));
    upper_side.sort_unstable_by(|a, b| a.weight.total_cmp(&b.weight));
    let left = km_endpoint(lower_side, true);
    let right = km_endpoint(upper_side, false);
    TypeReduced { left, right, degenerate: false }
}

/// Karnik–Mendel center-of-sets type reduction.
///
/// Returns the interval `[y_l, y_r]`. If every upper firing is (numerically)
/// zero the result is `(0, 0)` with `degenerate` set.
pub fn km_type_reduce(firings: &[Interval], consequents: &[Interval]) -> Result<TypeReduced> {
    if firings.is_empty() {
        return Err(FuzzyError::EmptyRuleSet);
    }
    check_len(firings.len(), consequents.len())?;
    let mut lower_side: KmBuffer = firings
        .iter()
        .zip(consequents)
        .map(|(f, b)| KmRule { weight: b.lower, lower: f.lower, upper: f.upper })
        .collect();
    let mut upper_side: KmBuffer = firings
        .iter()
        .zip(consequents)
        .map(|(f, b)| KmRule { weight: b.upper, lower: f.lower, upper: f.upper })
        .collect();
    Ok(km_reduce_unchecked(&mut lower_side, &mut upper_side))
}

pub fn it2_defuzzify(left: f64, right: f64) -> f64 {
    0.5 * (left + right)
}
