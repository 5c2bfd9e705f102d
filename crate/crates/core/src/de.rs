//! DE/rand-to-best/1/bin parameter tuning.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset};
use crate::tree::FuzzyTree;

#[derive(Debug, Error)]
pub enum DeError {
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("cannot optimize an empty vector")]
    EmptyVector,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("objective is not finite for initial member {member}")]
    NonFiniteInitial { member: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T> = std::result::Result<T, DeError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeConfig {
    pub pop_size: usize,
    /// Mutation factor.
    pub f: f64,
    /// Crossover rate.
    pub cr: f64,
    pub max_iters: usize,
    /// Stop after this many iterations without improvement (0 disables).
    pub stall_window: usize,
    /// Half-width of the uniform noise added to the seed vector for the
    /// initial population.
    pub init_spread: f64,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self { pop_size: 50, f: 0.7, cr: 0.9, max_iters: 5000, stall_window: 100, init_spread: 0.1 }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 4 {
            return Err(DeError::Config("pop_size must be at least 4".into()));
        }
        if !(0.0..=2.0).contains(&self.f) {
            return Err(DeError::Config(format!("F = {} outside [0, 2]", self.f)));
        }
        if !(0.0..=1.0).contains(&self.cr) {
            return Err(DeError::Config(format!("cr = {} outside [0, 1]", self.cr)));
        }
        if !(self.init_spread >= 0.0) || !self.init_spread.is_finite() {
            return Err(DeError::Config("init_spread must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// `w_a + F(w_g - w_a) + F(w_b - w_c)` on the slots picked by binomial
/// crossover (`r_j < cr` or the forced slot), `w_a` elsewhere.
pub fn de_trial<R: Rng + ?Sized>(
    w_a: &[f64],
    w_b: &[f64],
    w_c: &[f64],
    w_g: &[f64],
    f: f64,
    cr: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = w_a.len();
    for v in [w_b, w_c, w_g] {
        if v.len() != n {
            return Err(DeError::LengthMismatch(n, v.len()));
        }
    }
    if n == 0 {
        return Err(DeError::EmptyVector);
    }
    let forced = rng.random_range(0..n);
    Ok((0..n)
        .map(|j| {
            let r: f64 = rng.random();
            if r < cr || j == forced {
                w_a[j] + f * (w_g[j] - w_a[j]) + f * (w_b[j] - w_c[j])
            } else {
                w_a[j]
            }
        })
        .collect())
}

/// One line of the parameter-phase log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeRecord {
    pub iteration: usize,
    pub best_fitness: f64,
    pub stall: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeState {
    pub population: Vec<Vec<f64>>,
    pub fitness: Vec<f64>,
    pub best: usize,
}

impl DeState {
    pub fn best_vector(&self) -> &[f64] {
        &self.population[self.best]
    }

    pub fn best_fitness(&self) -> f64 {
        self.fitness[self.best]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeOutcome {
    pub state: DeState,
    /// Iteration 0 is the initial population.
    pub history: Vec<DeRecord>,
}

impl DeOutcome {
    pub fn best_vector(&self) -> &[f64] {
        self.state.best_vector()
    }

    pub fn best_fitness(&self) -> f64 {
        self.state.best_fitness()
    }

    pub fn iterations(&self) -> usize {
        self.history.last().map_or(0, |r| r.iteration)
    }
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// Three distinct indices different from `target`.
fn pick_three<R: Rng + ?Sized>(n: usize, target: usize, rng: &mut R) -> [usize; 3] {
    let mut out = [usize::MAX; 3];
    let mut k = 0;
    while k < 3 {
        let c = rng.random_range(0..n);
        if c != target && !out[..k].contains(&c) {
            out[k] = c;
            k += 1;
        }
    }
    out
}

/// Minimizes `objective` starting around `seed`.
///
/// Member 0 is `seed` itself; the others add uniform noise of half-width
/// `init_spread` per slot. Slots flagged in `unit_box` (if non-empty) are
/// clamped to `[0, 1]` at initialization. Each iteration builds one trial
/// per member, evaluates the trials, then replaces every member whose trial
/// is strictly better.
pub fn de_optimize<F, R>(objective: F, seed: &[f64], unit_box: &[bool], cfg: &DeConfig, rng: &mut R) -> Result<DeOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let n = seed.len();
    if n == 0 {
        return Err(DeError::EmptyVector);
    }
    if !unit_box.is_empty() && unit_box.len() != n {
        return Err(DeError::LengthMismatch(n, unit_box.len()));
    }
    let mut population = Vec::with_capacity(cfg.pop_size);
    population.push(seed.to_vec());
    for _ in 1..cfg.pop_size {
        let member = seed
            .iter()
            .enumerate()
            .map(|(j, &s)| {
                let v = if cfg.init_spread > 0.0 {
                    s + rng.random_range(-cfg.init_spread..=cfg.init_spread)
                } else {
                    s
                };
                if unit_box.get(j).copied().unwrap_or(false) {
                    v.clamp(0.0, 1.0)
                } else {
                    v
                }
            })
            .collect();
        population.push(member);
    }
    let fitness: Vec<f64> = population.par_iter().map(|w| objective(w)).collect();
    if let Some(member) = fitness.iter().position(|f| !f.is_finite()) {
        return Err(DeError::NonFiniteInitial { member });
    }
    let mut state = DeState { best: argmin(&fitness), population, fitness };
    let mut stall = 0;
    let mut history = vec![DeRecord { iteration: 0, best_fitness: state.best_fitness(), stall }];

    for iteration in 1..=cfg.max_iters {
        let g = state.best;
        let trials: Vec<Vec<f64>> = (0..cfg.pop_size)
            .map(|i| {
                let [a, b, c] = pick_three(cfg.pop_size, i, rng);
                let p = &state.population;
                de_trial(&p[a], &p[b], &p[c], &p[g], cfg.f, cfg.cr, rng).expect("equal lengths")
            })
            .collect();
        let scores: Vec<f64> = trials
            .par_iter()
            .map(|w| {
                let s = objective(w);
                if s.is_finite() { s } else { f64::INFINITY }
            })
            .collect();
        let previous = state.best_fitness();
        for (i, (trial, score)) in trials.into_iter().zip(scores).enumerate() {
            if score < state.fitness[i] {
                state.population[i] = trial;
                state.fitness[i] = score;
            }
        }
        state.best = argmin(&state.fitness);
        if state.best_fitness() < previous {
            stall = 0;
        } else {
            stall += 1;
        }
        history.push(DeRecord { iteration, best_fitness: state.best_fitness(), stall });
        if cfg.stall_window > 0 && stall >= cfg.stall_window {
            break;
        }
    }
    Ok(DeOutcome { state, history })
}

/// Tunes the parameters of `tree` for minimum RMSE on `data`. The topology
/// is left untouched.
pub fn tune_tree<R: Rng + ?Sized>(
    tree: &FuzzyTree,
    data: &Dataset,
    cfg: &DeConfig,
    rng: &mut R,
) -> Result<(FuzzyTree, DeOutcome)> {
    let params = tree.flatten_parameters();
    let unit_box: Vec<bool> = params.layout.iter().map(|s| s.field.is_membership()).collect();
    // surface shape errors before the search starts
    data.tree_rmse(tree)?;
    let objective = |w: &[f64]| {
        let mut t = tree.clone();
        match t.load_parameters_in_place(w) {
            Ok(()) => data.tree_rmse(&t).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    };
    let outcome = de_optimize(objective, &params.values, &unit_box, cfg, rng)?;
    let tuned = tree.load_parameters(outcome.best_vector()).expect("vector length matches the tree");
    Ok((tuned, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vectors() -> [Vec<f64>; 4] {
        [
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
            vec![0.5, -1.0, 2.0, 0.0, 1.0],
            vec![-1.5, 1.0, 0.5, 2.0, -1.0],
            vec![0.0, 0.0, 1.0, 1.0, 1.0],
        ]
    }

    #[test]
    fn trial_with_full_crossover_mutates_every_slot() {
        let [a, b, c, g] = vectors();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = de_trial(&a, &b, &c, &g, 0.7, 1.0, &mut rng).unwrap();
        for j in 0..5 {
            let expected = a[j] + 0.7 * (g[j] - a[j]) + 0.7 * (b[j] - c[j]);
            assert_eq!(t[j], expected);
        }
    }

    #[test]
    fn trial_without_crossover_changes_one_slot() {
        let [a, b, c, g] = vectors();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let t = de_trial(&a, &b, &c, &g, 0.7, 0.0, &mut rng).unwrap();
            let diff = t.iter().zip(&a).filter(|(x, y)| x != y).count();
            assert_eq!(diff, 1);
        }
    }

    #[test]
    fn trial_with_zero_factor_is_base_vector() {
        let [a, b, c, g] = vectors();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(de_trial(&a, &b, &c, &g, 0.0, 0.9, &mut rng).unwrap(), a);
        assert!(de_trial(&a, &b[..4], &c, &g, 0.5, 0.5, &mut rng).is_err());
    }

    #[test]
    fn constant_objective_stalls_after_one_iteration() {
        let cfg = DeConfig { stall_window: 1, ..DeConfig::default() };
        let out = de_optimize(|_| 3.0, &[0.0; 4], &[], &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(out.iterations(), 1);
        assert_eq!(out.history.len(), 2);
    }

    #[test]
    fn non_finite_initial_objective_is_an_error() {
        let cfg = DeConfig::default();
        let r = de_optimize(|w| if w[0] > 0.05 { f64::NAN } else { 0.0 }, &[0.0; 2], &[], &cfg, &mut ChaCha8Rng::seed_from_u64(5));
        assert!(matches!(r, Err(DeError::NonFiniteInitial { .. })));
    }

    #[test]
    fn config_checks() {
        assert!(DeConfig { pop_size: 3, ..DeConfig::default() }.validate().is_err());
        assert!(DeConfig { f: 2.5, ..DeConfig::default() }.validate().is_err());
        assert!(DeConfig { cr: -0.1, ..DeConfig::default() }.validate().is_err());
    }

    #[test]
    fn initial_population_is_seeded_and_clamped() {
        let cfg = DeConfig { max_iters: 0, ..DeConfig::default() };
        let seed = [0.95, 0.02, 5.0];
        let out = de_optimize(|w| w.iter().sum(), &seed, &[true, true, false], &cfg, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        assert_eq!(out.state.population[0], seed.to_vec());
        for m in &out.state.population[1..] {
            assert!((0.0..=1.0).contains(&m[0]) && (0.0..=1.0).contains(&m[1]));
            assert!((m[2] - 5.0).abs() <= 0.1);
        }
    }
}
